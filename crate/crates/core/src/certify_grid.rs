//! Grid-side use of certificates: compactly supported representations for
//! Alternative I and a sampled-field check of the reduction identity.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::certify::{compare_points, Certificate, IdentityReport, ReductionParts};
use crate::error::{MtfrError, Result};
use crate::grid::{
    apply_word_grid, bump, grid_scalar_rotation_word, lift_word, partial_stft_at, tfr_grid, Axis,
    GridConfig, SampledField,
};
use crate::linalg::{inverse, ln_abs_det, RMat, RVec};
use crate::symplectic::{factor_to_word, GeneratorWord, Letter};
use crate::tolerance::Tolerances;

/// Below this many points per axis the counterexample is flagged as coarse.
pub const COARSE_GRID: usize = 64;

/// Image `map(box)` of the support box of `f0 tensor conj g0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedRegion {
    pub map: RMat,
    pub bounds: Vec<(f64, f64)>,
}

impl PredictedRegion {
    pub fn contains(&self, x: &[f64], map_inv: &RMat) -> bool {
        let y = map_inv * RVec::from_column_slice(x);
        y.iter().zip(&self.bounds).all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }

    /// Coordinate-wise bounding box of the image.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let n = self.bounds.len();
        (0..n)
            .map(|i| {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for j in 0..n {
                    let (a, b) = (self.map[(i, j)] * self.bounds[j].0, self.map[(i, j)] * self.bounds[j].1);
                    lo += a.min(b);
                    hi += a.max(b);
                }
                (lo, hi)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub f0: SampledField,
    pub g0: SampledField,
    pub f: SampledField,
    pub g: SampledField,
    /// Word of the bold matrix used on the grid.
    pub word: GeneratorWord,
    pub tfr: SampledField,
    pub region: PredictedRegion,
    /// Fraction of `sum |W|^2` outside the predicted region.
    pub mass_outside: f64,
    pub norm_ratio_f: f64,
    pub norm_ratio_g: f64,
    pub warnings: Vec<String>,
}

/// Fraction of `sum |v|^2` at points outside `region`.
pub fn mass_outside_region(field: &SampledField, region: &PredictedRegion) -> Result<f64> {
    let map_inv = inverse(&region.map, 1e-14)?;
    let (total, outside) = (0..field.len())
        .into_par_iter()
        .map(|i| {
            let m = field.values[i].norm_sqr();
            let out = if region.contains(&field.coords(i), &map_inv) { 0.0 } else { m };
            (m, out)
        })
        .collect::<Vec<_>>()
        .iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(if total == 0.0 { 0.0 } else { outside / total })
}

fn scalar_angle(v: &crate::linalg::CMat) -> f64 {
    v[(0, 0)].arg()
}

/// Builds `f = R_{V1}^{-1} f0` and `g = R_{conj V2}^{-1} g0` for bumps `f0`,
/// `g0` supported in `[-h, h]`, and `W_A(f, g)` on a grid with `points`
/// samples of extent `extent` per axis.
///
/// Only `d = 1`; the dilation by `L W` uses shears when it is not a signed
/// permutation times a diagonal.
pub fn counterexample_alt1(
    cert: &Certificate,
    points: usize,
    extent: f64,
    half_width: f64,
    cfg: &GridConfig,
) -> Result<Counterexample> {
    let a1 = cert.alt1().ok_or_else(|| {
        MtfrError::InvalidInput("counterexample requires an Alternative I certificate".into())
    })?;
    if cert.d != 1 {
        return Err(MtfrError::InvalidInput(format!(
            "grid counterexample supports d = 1, certificate has d = {}",
            cert.d
        )));
    }
    if !(half_width > 0.0 && half_width < 0.5 * extent) {
        return Err(MtfrError::InvalidInput("bump half-width must lie in (0, extent / 2)".into()));
    }
    let axis = Axis::new(points, extent)?;
    let mut warnings = Vec::new();
    if points < COARSE_GRID {
        warnings.push(format!(
            "coarse grid: {points} points per axis; resampling errors may dominate the mass outside"
        ));
    }
    let cfg = GridConfig { allow_shear_dilation: true, ..*cfg };
    let theta1 = scalar_angle(&a1.v1);
    let theta2 = scalar_angle(&a1.v2);
    let f0 = SampledField::from_fn(vec![axis], |x| Complex64::new(bump(x[0], 0.0, half_width), 0.0));
    let g0 = f0.clone();
    let fo = apply_word_grid(&f0, &grid_scalar_rotation_word(theta1).inverse(), &cfg)?;
    let go = apply_word_grid(&g0, &grid_scalar_rotation_word(-theta2).inverse(), &cfg)?;
    warnings.extend(fo.warnings);
    warnings.extend(go.warnings);

    let lw = &cert.pre.l * &a1.w;
    let mut letters = vec![Letter::Chirp(cert.pre.q.clone()), Letter::Dilation(lw.clone())];
    letters.extend(lift_word(&grid_scalar_rotation_word(theta1), 0, 2).letters);
    letters.extend(lift_word(&grid_scalar_rotation_word(theta2), 1, 2).letters);
    let word = GeneratorWord::new(2, letters)?;
    let tfr = tfr_grid(&word, &fo.field, &go.field, &cfg)?;
    warnings.extend(tfr.warnings);

    let region = PredictedRegion { map: lw, bounds: vec![(-half_width, half_width); 2] };
    let half = 0.5 * extent;
    if region.bounding_box().iter().any(|(lo, hi)| *lo < -half || *hi > half) {
        warnings.push("predicted region extends beyond the grid; increase the extent".into());
    }
    let mass_outside = mass_outside_region(&tfr.field, &region)?;
    Ok(Counterexample {
        norm_ratio_f: fo.field.l2_norm() / f0.l2_norm(),
        norm_ratio_g: go.field.l2_norm() / g0.l2_norm(),
        f0,
        g0,
        f: fo.field,
        g: go.field,
        word,
        tfr: tfr.field,
        region,
        mass_outside,
        warnings,
    })
}

/// Compares `|W_A(f, g)|` on the grid with
/// `|det Omega|^{-1/2} |V^k_{Bg} Af|(Omega^{-1} lambda)` computed by quadrature
/// on the grid, at grid points `points` of the representation (`d = 1`).
pub fn verify_identity_grid(
    cert: &Certificate,
    f: &SampledField,
    g: &SampledField,
    points: &[Vec<f64>],
    cfg: &GridConfig,
    tol: &Tolerances,
) -> Result<IdentityReport> {
    verify_identity_grid_parts(&ReductionParts::from_certificate(cert)?, f, g, points, cfg, tol)
}

pub fn verify_identity_grid_parts(
    parts: &ReductionParts,
    f: &SampledField,
    g: &SampledField,
    points: &[Vec<f64>],
    cfg: &GridConfig,
    tol: &Tolerances,
) -> Result<IdentityReport> {
    if parts.d != 1 || f.n() != 1 || g.n() != 1 || parts.omega.nrows() != 2 {
        return Err(MtfrError::InvalidInput("grid identity check supports d = 1".into()));
    }
    let word = factor_to_word(&parts.bold, tol)?;
    let tfr = tfr_grid(&word, f, g, cfg)?.field;
    let af = apply_word_grid(f, &parts.word_a, cfg)?.field;
    let bg = apply_word_grid(g, &parts.word_b, cfg)?.field;
    let omega_inv = inverse(&parts.omega, 1e-14)?;
    let ln_det = ln_abs_det(&parts.omega);
    let ln = |z: Complex64| if z.norm() > 0.0 { z.norm().ln() } else { f64::NEG_INFINITY };
    compare_points(
        points,
        |p| Ok(ln(tfr.at(p)?)),
        |p| {
            let mu = &omega_inv * RVec::from_column_slice(p);
            let v = partial_stft_at(&af, &bg, 1, &[mu[0]], &[], &[mu[1]], &[])?;
            Ok(-0.5 * ln_det + ln(v))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{block_diagonal_instance, certify, coupling_unitary, verify_identity};
    use crate::gaussian::GeneralizedGaussian;
    use crate::grid::{sample, uniform_axes};
    use crate::symplectic::make_rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fourier_pair_counterexample() {
        let t = Tolerances::default();
        let m = make_rotation(&(crate::linalg::CMat::identity(2, 2) * crate::linalg::c(0.0, 1.0)), &t).unwrap();
        let cert = certify(&m, &t).unwrap();
        let ce = counterexample_alt1(&cert, 256, 16.0, 2.0, &GridConfig::default()).unwrap();
        assert!(ce.mass_outside <= 1e-6, "{}", ce.mass_outside);
        assert!(ce.norm_ratio_f >= 0.9 && ce.norm_ratio_g >= 0.9);
        assert!(ce.warnings.is_empty(), "{:?}", ce.warnings);
    }

    #[test]
    fn random_block_diagonal_counterexamples() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let (m, _) = block_diagonal_instance(&mut rng, 1);
            let cert = certify(&m, &t).unwrap();
            let ce = counterexample_alt1(&cert, 256, 16.0, 2.0, &GridConfig::default()).unwrap();
            assert!(ce.mass_outside <= 1e-6, "{}", ce.mass_outside);
        }
    }

    #[test]
    fn coarse_grid_warns_and_alt2_is_rejected() {
        let t = Tolerances::default();
        let m = make_rotation(&crate::linalg::CMat::identity(2, 2), &t).unwrap();
        let cert = certify(&m, &t).unwrap();
        let ce = counterexample_alt1(&cert, 32, 16.0, 2.0, &GridConfig::default()).unwrap();
        assert!(ce.warnings.iter().any(|w| w.contains("coarse")));
        let alt2 = certify(&make_rotation(&coupling_unitary(), &t).unwrap(), &t).unwrap();
        assert!(counterexample_alt1(&alt2, 256, 16.0, 2.0, &GridConfig::default()).is_err());
    }

    #[test]
    fn grid_identity_matches_oracle() {
        let t = Tolerances::default();
        let cert = certify(&make_rotation(&coupling_unitary(), &t).unwrap(), &t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = GeneralizedGaussian::normalized_standard(1);
        let g = GeneralizedGaussian::standard(1).scaled(0.7);
        let axes = uniform_axes(1, 256, 16.0).unwrap();
        let (fs, gs) = (sample(&f, &axes).unwrap(), sample(&g, &axes).unwrap());
        let ax = axes[0];
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![ax.coord(rng.gen_range(112..144)), ax.coord(rng.gen_range(112..144))])
            .collect();
        let rep = verify_identity_grid(&cert, &fs, &gs, &pts, &GridConfig::default(), &t).unwrap();
        assert!(rep.max_rel_error <= 1e-5, "{rep:?}");
        let oracle = verify_identity(&cert, &f, &g, &pts, &t).unwrap();
        assert!(oracle.max_rel_error <= 1e-8);
    }
}
