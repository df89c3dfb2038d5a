use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mtfr::certify::{
    block_diagonal_instance, certify, classify, pair_to_partial, sample_points, verify_identity,
    verify_pair_identity, uniform_ball, Alternative, IdentitySides,
};
use mtfr::gaussian::{apply_word, GeneralizedGaussian};
use mtfr::io;
use mtfr::linalg::{cblock_diag, cfrob, random_spd, random_symmetric, random_unitary, RMat};
use mtfr::symplectic::{
    factor_to_word, make_chirp, make_dilation, make_rotation, pre_iwasawa, random_symplectic,
    random_word, symplectic_residual,
};
use mtfr::unitary::odo_svd;
use mtfr::Tolerances;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn rel(a: &RMat, b: &RMat) -> f64 {
    (a - b).norm() / b.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn word_products_are_symplectic(seed in any::<u64>(), n in 1usize..=4, len in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_word(&mut rng, n, len);
        let m = w.matrix();
        prop_assert!(symplectic_residual(&m) <= 1e-9 * m.norm().powi(2).max(1.0));
        let id = w.concat(&w.inverse()).matrix();
        prop_assert!((id - RMat::identity(2 * n, 2 * n)).norm() <= 1e-8 * m.norm().powi(2).max(1.0));
    }

    #[test]
    fn pre_iwasawa_and_word_reconstruct(seed in any::<u64>(), n in 1usize..=4) {
        let m = random_symplectic(n, 6, seed);
        let p = pre_iwasawa(&m).unwrap();
        prop_assert!(rel(&p.reconstruct(), m.matrix()) <= 1e-10);
        let w = factor_to_word(&m, &tol()).unwrap();
        prop_assert!(rel(&w.matrix(), m.matrix()) <= 1e-9);
    }

    #[test]
    fn metaplectic_action_preserves_gaussian_norms(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GeneralizedGaussian::random(&mut rng, n);
        let w = random_word(&mut rng, n, 5);
        let h = apply_word(&g, &w, &tol()).unwrap();
        prop_assert!((h.ln_l2_norm() - g.ln_l2_norm()).abs() <= 1e-9);
    }

    #[test]
    fn odo_svd_reconstructs(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(&mut rng, n);
        let f = odo_svd(&u, &tol()).unwrap();
        prop_assert!(cfrob(&(f.reconstruct() - &u)) <= 1e-9);
    }

    #[test]
    fn classification_is_invariant_under_left_chirps_dilations_and_right_block_rotations(
        seed in any::<u64>(),
        d in 1usize..=2,
        block in any::<bool>(),
    ) {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = if block {
            block_diagonal_instance(&mut rng, d).0
        } else {
            make_rotation(&random_unitary(&mut rng, 2 * d), &t).unwrap()
        };
        let before = classify(&base, &t).unwrap();
        prop_assume!(!before.borderline);
        let left = make_chirp(&random_symmetric(&mut rng, 2 * d, 1.0), &t)
            .unwrap()
            .mul(&make_dilation(&random_spd(&mut rng, 2 * d, 0.5, 2.0), &t).unwrap());
        let right = make_rotation(
            &cblock_diag(&random_unitary(&mut rng, d), &random_unitary(&mut rng, d)),
            &t,
        )
        .unwrap();
        let moved = left.mul(&base).mul(&right);
        prop_assert_eq!(classify(&moved, &t).unwrap().alternative, before.alternative);
    }

    #[test]
    fn reduction_identity_holds_for_random_rotations(seed in any::<u64>(), d in 1usize..=2) {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = make_rotation(&random_unitary(&mut rng, 2 * d), &t).unwrap();
        let cert = certify(&m, &t).unwrap();
        prop_assume!(cert.alternative() == Alternative::II);
        let f = GeneralizedGaussian::random(&mut rng, d);
        let g = GeneralizedGaussian::random(&mut rng, d);
        let sides = IdentitySides::new(&cert, &f, &g, &t).unwrap();
        let pts = sample_points(&mut rng, &sides.tfr, 20, 3.0);
        prop_assert!(verify_identity(&cert, &f, &g, &pts, &t).unwrap().max_rel_error <= 1e-8);
    }

    #[test]
    fn pair_identity_holds(seed in any::<u64>(), d in 1usize..=3) {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_unitary(&mut rng, d);
        let cert = pair_to_partial(&v, &t).unwrap();
        let f = GeneralizedGaussian::random(&mut rng, d);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| uniform_ball(&mut rng, 2 * d, 3.0)).collect();
        prop_assert!(verify_pair_identity(&cert, &f, &pts, &t).unwrap().max_rel_error <= 1e-8);
    }

    #[test]
    fn matrices_round_trip_through_json(seed in any::<u64>(), n in 1usize..=6) {
        let m = random_symplectic(n, 4, seed).into_matrix();
        let text = io::to_json_string(&io::matrix_value(&m)).unwrap();
        let back = io::matrix_from_value(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn certificates_round_trip_through_json(seed in any::<u64>()) {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = make_rotation(&random_unitary(&mut rng, 2), &t).unwrap();
        let cert = certify(&m, &t).unwrap();
        let v = io::certificate_value(&cert);
        let text = io::to_json_string(&v).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &v);
        let summary = io::certificate_summary(&back).unwrap();
        prop_assert_eq!(summary.alternative.as_str(), cert.alternative().as_str());
    }
}
