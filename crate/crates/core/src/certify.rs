//! Alternative I/II classification of metaplectic time-frequency
//! representations and the explicit certificates for each case.
//!
//! For `A` in `Sp(4d)` with pre-Iwasawa factor `R_U`, the representation
//! `W_A(f, g) = A (f tensor conj g)` is classified by whether `U^t U` is
//! `d x d` block-diagonal. In the block-diagonal case `U = W diag(V1, V2)` and
//! compactly supported representations exist; otherwise
//! `|W_A(f, g)| = |D_Omega V^k_{Bg} Af|` for explicit `k`, `Omega`, `A`, `B`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{MtfrError, Result};
use crate::gaussian::{
    apply_word, conjugate, partial_stft_ln, tensor, GeneralizedGaussian, PhasePoint,
};
use crate::linalg::{
    block, block_diag, c, cblock, cblock_diag, cfrob, cond2, im, inverse, ln_abs_det,
    nearest_orthogonal, orthogonality_residual, re, symmetrize, to_complex, CMat, RMat, RVec,
};
use crate::symplectic::{
    factor_to_word, make_rotation, pre_iwasawa, scalar_rotation_word, select_tau, GeneratorWord,
    Letter, PreIwasawa, SymplecticMatrix, DEFAULT_TAU_SCAN,
};
use crate::tolerance::Tolerances;
use crate::unitary::{block_diag_test, odo_svd, sort_by_imag, takagi_symmetric_unitary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    I,
    II,
}

impl Alternative {
    pub fn as_str(&self) -> &'static str {
        match self {
            Alternative::I => "I",
            Alternative::II => "II",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub alternative: Alternative,
    pub d: usize,
    pub offdiag_norm: f64,
    pub offdiag_relative: f64,
    pub borderline: bool,
    pub pre: PreIwasawa,
}

/// Classifies `bold_a` in `Sp(4d)` through the block structure of `U^t U`.
pub fn classify(bold_a: &SymplecticMatrix, tol: &Tolerances) -> Result<Classification> {
    let n = bold_a.n();
    if !n.is_multiple_of(2) {
        return Err(MtfrError::DimensionMismatch(format!(
            "half-dimension {n} is odd; expected a matrix in Sp(4d)"
        )));
    }
    let d = n / 2;
    let pre = pre_iwasawa(bold_a)?;
    let t = block_diag_test(&pre.u, d, tol)?;
    Ok(Classification {
        alternative: if t.block_diagonal { Alternative::I } else { Alternative::II },
        d,
        offdiag_norm: t.offdiag_norm,
        offdiag_relative: t.relative,
        borderline: t.borderline,
        pre,
    })
}

/// `U = W diag(V1, V2)` with `W` real orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Alt1Data {
    pub w: RMat,
    pub v1: CMat,
    pub v2: CMat,
    pub reconstruction_error: f64,
}

pub fn alt1_decompose(u: &CMat, d: usize, tol: &Tolerances) -> Result<Alt1Data> {
    let t = block_diag_test(u, d, tol)?;
    if !t.block_diagonal {
        return Err(MtfrError::NotBlockDiagonal(t.offdiag_norm));
    }
    let s = u.transpose() * u;
    // The diagonal blocks are unitary only up to the block tolerance.
    let relaxed = Tolerances { unit: tol.unit.max(10.0 * tol.blk_warn), ..*tol };
    let s1 = cblock(&s, 0, 0, d, d);
    let s2 = cblock(&s, d, d, d, d);
    let v1 = takagi_symmetric_unitary(&crate::linalg::csymmetrize(&s1), &relaxed)?;
    let v2 = takagi_symmetric_unitary(&crate::linalg::csymmetrize(&s2), &relaxed)?;
    let dinv = cblock_diag(&v1.adjoint(), &v2.adjoint());
    let wc = u * dinv;
    let imag = im(&wc).norm();
    if imag > 1e-6 {
        return Err(MtfrError::RealnessFailure(imag));
    }
    let w = nearest_orthogonal(&re(&wc));
    let err = cfrob(&(to_complex(&w) * cblock_diag(&v1, &v2) - u));
    Ok(Alt1Data { w, v1, v2, reconstruction_error: err })
}

/// Data of the reduction to a partial short-time Fourier transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Alt2Data {
    pub k: usize,
    pub tau: Complex64,
    pub tau_sigma_min: f64,
    /// `P = B_tau^{-1} A_tau`, symmetrized.
    pub p: RMat,
    /// Relative asymmetry of `P` before symmetrization.
    pub p_asymmetry: f64,
    pub p11: RMat,
    pub p12: RMat,
    pub p22: RMat,
    pub w1: RMat,
    pub gamma: RVec,
    pub gamma1: RVec,
    pub w2: RMat,
    pub pi: RMat,
    pub b_tau: RMat,
    pub omega: RMat,
    pub omega_cond: f64,
    pub word_a: GeneratorWord,
    pub word_b: GeneratorWord,
    /// Sign of `P22` in the chirp letter of `word_b`.
    pub p22_sign: f64,
}

// one certificate per classification; boxing buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum CertificateData {
    I(Alt1Data),
    II(Alt2Data),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub d: usize,
    pub input: RMat,
    pub offdiag_norm: f64,
    pub offdiag_relative: f64,
    pub pre: PreIwasawa,
    pub data: CertificateData,
    pub warnings: Vec<String>,
}

impl Certificate {
    pub fn alternative(&self) -> Alternative {
        match self.data {
            CertificateData::I(_) => Alternative::I,
            CertificateData::II(_) => Alternative::II,
        }
    }

    pub fn alt2(&self) -> Option<&Alt2Data> {
        match &self.data {
            CertificateData::II(a) => Some(a),
            _ => None,
        }
    }

    pub fn alt1(&self) -> Option<&Alt1Data> {
        match &self.data {
            CertificateData::I(a) => Some(a),
            _ => None,
        }
    }

    pub fn symplectic(&self) -> SymplecticMatrix {
        SymplecticMatrix::new_unchecked(self.input.clone())
    }
}

/// Classifies and builds the certificate of the detected alternative.
pub fn certify(bold_a: &SymplecticMatrix, tol: &Tolerances) -> Result<Certificate> {
    let cls = classify(bold_a, tol)?;
    let mut warnings = Vec::new();
    if cls.borderline {
        warnings.push(format!(
            "borderline block-diagonality: relative off-diagonal norm {:.3e} within [{:.1e}, {:.1e}]",
            cls.offdiag_relative, tol.blk, tol.blk_warn
        ));
    }
    let data = match cls.alternative {
        Alternative::I => CertificateData::I(alt1_decompose(&cls.pre.u, cls.d, tol)?),
        Alternative::II => {
            let a2 = alt2_from_pre(&cls.pre, cls.d, tol)?;
            if a2.omega_cond > 1e8 {
                warnings.push(format!("Omega is ill-conditioned (cond {:.3e})", a2.omega_cond));
            }
            CertificateData::II(a2)
        }
    };
    Ok(Certificate {
        d: cls.d,
        input: bold_a.matrix().clone(),
        offdiag_norm: cls.offdiag_norm,
        offdiag_relative: cls.offdiag_relative,
        pre: cls.pre,
        data,
        warnings,
    })
}

/// Alternative II certificate; fails with `RankZero` on block-diagonal input.
pub fn alt2_certificate(bold_a: &SymplecticMatrix, tol: &Tolerances) -> Result<Certificate> {
    let cert = certify(bold_a, tol)?;
    match cert.data {
        CertificateData::II(_) => Ok(cert),
        CertificateData::I(_) => Err(MtfrError::RankZero),
    }
}

fn alt2_from_pre(pre: &PreIwasawa, d: usize, tol: &Tolerances) -> Result<Alt2Data> {
    alt2_with_p22_sign(pre, d, -1.0, tol)
}

pub(crate) fn alt2_with_p22_sign(
    pre: &PreIwasawa,
    d: usize,
    p22_sign: f64,
    tol: &Tolerances,
) -> Result<Alt2Data> {
    let choice = select_tau(&pre.u, DEFAULT_TAU_SCAN, tol)?;
    let tau = choice.tau;
    let ut = &pre.u * tau;
    let (a_tau, b_tau) = (re(&ut), im(&ut));
    let b_inv = inverse(&b_tau, tol.inv)?;
    let p_raw = &b_inv * &a_tau;
    let p_asymmetry = crate::linalg::asymmetry(&p_raw) / p_raw.norm().max(1.0);
    let p = symmetrize(&p_raw);
    let p11 = block(&p, 0, 0, d, d);
    let p12 = block(&p, 0, d, d, d);
    let p22 = block(&p, d, d, d, d);

    let (w1, gamma, w2) = sorted_svd(&p12);
    let smax = gamma.iter().cloned().fold(0.0, f64::max);
    if !(smax > 1e-14 * p.norm().max(1.0)) {
        return Err(MtfrError::RankZero);
    }
    let k = gamma.iter().filter(|&&s| s > tol.rank * smax).count();
    if k == 0 {
        return Err(MtfrError::RankZero);
    }
    let gamma1 = RVec::from_fn(k, |i, _| gamma[i]);

    let mut scale = RMat::identity(2 * d, 2 * d);
    for i in 0..k {
        scale[(i, i)] = gamma1[i];
    }
    let pi = swap_permutation(d, k);
    let omega = &pre.l * &b_tau * block_diag(&w1, &w2) * &scale * &pi;
    let omega_cond = cond2(&omega);

    let mut dil = RMat::identity(d, d);
    for i in 0..k {
        dil[(i, i)] = gamma1[i];
    }
    let mut a_letters = vec![Letter::Dilation(dil)];
    if k < d {
        a_letters.push(Letter::PartialFourier((k..d).collect()));
    }
    a_letters.push(Letter::Dilation(w1.transpose()));
    a_letters.push(Letter::Chirp(p11.clone()));
    let word_a = GeneratorWord { n: d, letters: a_letters }
        .concat(&scalar_rotation_word(tau.conj(), d, tol)?)
        .simplified();

    let word_b = GeneratorWord {
        n: d,
        letters: vec![
            Letter::PartialFourier((0..d).collect()),
            Letter::Dilation(w2.transpose()),
            Letter::Chirp(&p22 * p22_sign),
        ],
    }
    .concat(&scalar_rotation_word(tau, d, tol)?)
    .simplified();

    Ok(Alt2Data {
        k,
        tau,
        tau_sigma_min: choice.sigma_min,
        p,
        p_asymmetry,
        p11,
        p12,
        p22,
        w1,
        gamma,
        gamma1,
        w2,
        pi,
        b_tau,
        omega,
        omega_cond,
        word_a,
        word_b,
        p22_sign,
    })
}

/// Real SVD `m = W1 diag(s) W2^t` with singular values in decreasing order.
fn sorted_svd(m: &RMat) -> (RMat, RVec, RMat) {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^t");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut w1 = RMat::zeros(n, n);
    let mut w2 = RMat::zeros(n, n);
    let s = RVec::from_fn(n, |i, _| svd.singular_values[idx[i]]);
    for (col, &i) in idx.iter().enumerate() {
        w1.set_column(col, &u.column(i));
        w2.set_column(col, &vt.row(i).transpose());
    }
    (w1, s, w2)
}

/// Permutation of `R^{2d}` exchanging coordinates `i` and `d + i` for `i < k`,
/// so that `(w1, x2, x1, w2)` maps to `(x1, x2, w1, w2)`.
pub fn swap_permutation(d: usize, k: usize) -> RMat {
    let mut perm: Vec<usize> = (0..2 * d).collect();
    for i in 0..k {
        perm.swap(i, d + i);
    }
    crate::linalg::permutation_matrix(&perm)
}

/// Worst-case comparison of two log-moduli evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub max_rel_error: f64,
    pub worst_point: Vec<f64>,
    pub worst_lhs: f64,
    pub worst_rhs: f64,
    pub points: usize,
}

pub const MODULUS_FLOOR: f64 = 1e-300;

/// `|L - R| / max(L, floor)` from `ln L` and `ln R`.
pub fn log_relative_error(ln_l: f64, ln_r: f64, floor: f64) -> f64 {
    let ln_floor = floor.ln();
    if ln_l >= ln_floor {
        (1.0 - (ln_r - ln_l).exp()).abs()
    } else if ln_r < ln_floor {
        ((ln_l - ln_floor).exp() - (ln_r - ln_floor).exp()).abs()
    } else {
        ((ln_r - ln_floor).exp() - (ln_l - ln_floor).exp()).abs()
    }
}

pub(crate) fn compare_points<F, G>(points: &[Vec<f64>], lhs: F, rhs: G) -> Result<IdentityReport>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<f64>,
{
    if points.is_empty() {
        return Err(MtfrError::InvalidInput("no evaluation points".into()));
    }
    let mut rep = IdentityReport {
        max_rel_error: 0.0,
        worst_point: points[0].clone(),
        worst_lhs: f64::NAN,
        worst_rhs: f64::NAN,
        points: points.len(),
    };
    for p in points {
        let (l, r) = (lhs(p)?, rhs(p)?);
        let e = log_relative_error(l, r, MODULUS_FLOOR);
        if !(e <= rep.max_rel_error) {
            rep.max_rel_error = if e.is_nan() { f64::INFINITY } else { e };
            rep.worst_point = p.clone();
            rep.worst_lhs = l.exp();
            rep.worst_rhs = r.exp();
        }
    }
    Ok(rep)
}

/// The data entering the reduction identity: the bold matrix, `k`, `Omega`
/// and the words of `A` and `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionParts {
    pub bold: SymplecticMatrix,
    pub d: usize,
    pub k: usize,
    pub omega: RMat,
    pub word_a: GeneratorWord,
    pub word_b: GeneratorWord,
}

impl ReductionParts {
    pub fn from_certificate(cert: &Certificate) -> Result<Self> {
        let a2 = cert.alt2().ok_or_else(|| {
            MtfrError::InvalidInput("identity check requires an Alternative II certificate".into())
        })?;
        Ok(Self {
            bold: cert.symplectic(),
            d: cert.d,
            k: a2.k,
            omega: a2.omega.clone(),
            word_a: a2.word_a.clone(),
            word_b: a2.word_b.clone(),
        })
    }

    fn validate(&self) -> Result<()> {
        let d = self.d;
        if self.bold.n() != 2 * d || self.omega.nrows() != 2 * d || self.omega.ncols() != 2 * d {
            return Err(MtfrError::DimensionMismatch("certificate parts disagree on d".into()));
        }
        if self.word_a.n != d || self.word_b.n != d {
            return Err(MtfrError::DimensionMismatch("certificate words must act in dimension d".into()));
        }
        if self.k == 0 || self.k > d {
            return Err(MtfrError::InvalidInput(format!("k = {} outside 1..={d}", self.k)));
        }
        Ok(())
    }
}

/// Precomputed sides of the reduction identity for a fixed pair `(f, g)`.
pub struct IdentitySides {
    pub tfr: GeneralizedGaussian,
    pub af: GeneralizedGaussian,
    pub bg: GeneralizedGaussian,
    omega_inv: RMat,
    ln_det_omega: f64,
    d: usize,
    k: usize,
}

impl IdentitySides {
    pub fn new(
        cert: &Certificate,
        f: &GeneralizedGaussian,
        g: &GeneralizedGaussian,
        tol: &Tolerances,
    ) -> Result<Self> {
        Self::from_parts(&ReductionParts::from_certificate(cert)?, f, g, tol)
    }

    pub fn from_parts(
        parts: &ReductionParts,
        f: &GeneralizedGaussian,
        g: &GeneralizedGaussian,
        tol: &Tolerances,
    ) -> Result<Self> {
        parts.validate()?;
        let d = parts.d;
        if f.n() != d || g.n() != d {
            return Err(MtfrError::DimensionMismatch(format!(
                "certificate has d = {d}, Gaussians have dimensions {} and {}",
                f.n(),
                g.n()
            )));
        }
        let word = factor_to_word(&parts.bold, tol)?;
        let tfr = apply_word(&tensor(f, &conjugate(g)), &word, tol)?;
        Ok(Self {
            tfr,
            af: apply_word(f, &parts.word_a, tol)?,
            bg: apply_word(g, &parts.word_b, tol)?,
            omega_inv: inverse(&parts.omega, 1e-14)?,
            ln_det_omega: ln_abs_det(&parts.omega),
            d,
            k: parts.k,
        })
    }

    pub fn lhs_ln(&self, lambda: &[f64]) -> f64 {
        self.tfr.ln_abs(lambda)
    }

    pub fn rhs_ln(&self, lambda: &[f64], tol: &Tolerances) -> Result<f64> {
        let mu = &self.omega_inv * RVec::from_column_slice(lambda);
        let p = PhasePoint::split(mu.as_slice(), self.d, self.k);
        Ok(-0.5 * self.ln_det_omega + partial_stft_ln(&self.af, &self.bg, self.k, &p, tol)?)
    }
}

/// Maximal relative deviation between `|W_A(f, g)|` and
/// `|det Omega|^{-1/2} |V^k_{Bg} Af|(Omega^{-1} lambda)` over `points`.
pub fn verify_identity(
    cert: &Certificate,
    f: &GeneralizedGaussian,
    g: &GeneralizedGaussian,
    points: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<IdentityReport> {
    verify_identity_parts(&ReductionParts::from_certificate(cert)?, f, g, points, tol)
}

pub fn verify_identity_parts(
    parts: &ReductionParts,
    f: &GeneralizedGaussian,
    g: &GeneralizedGaussian,
    points: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<IdentityReport> {
    let sides = IdentitySides::from_parts(parts, f, g, tol)?;
    compare_points(points, |p| Ok(sides.lhs_ln(p)), |p| sides.rhs_ln(p, tol))
}

/// Half of the points uniform in the ball of radius `radius`, half Gaussian
/// around the peak of `|h|` at the scale of its decay.
pub fn sample_points<R: Rng>(
    rng: &mut R,
    h: &GeneralizedGaussian,
    count: usize,
    radius: f64,
) -> Vec<Vec<f64>> {
    let n = h.n();
    let mr = re(&h.m);
    let br = h.b.map(|z| z.re);
    let peak = mr.clone().cholesky().map(|ch| ch.solve(&br)).unwrap_or_else(|| RVec::zeros(n));
    let (vals, vecs) = crate::linalg::sym_eigen_sorted(&mr);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i % 2 == 0 {
            out.push(uniform_ball(rng, n, radius));
        } else {
            let z = RVec::from_fn(n, |j, _| {
                rng.sample::<f64, _>(StandardNormal) / (2.0 * std::f64::consts::PI * vals[j]).sqrt()
            });
            out.push((&peak + &vecs * z).as_slice().to_vec());
        }
    }
    out
}

pub fn uniform_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-300);
    let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    v.iter().map(|t| t * r / norm).collect()
}

/// `V = conj(V2) V1^*`, with a flag when `V` is real.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticReduction {
    pub v: CMat,
    pub imag_norm: f64,
    pub real: bool,
}

pub fn quadratic_reduce(v1: &CMat, v2: &CMat, tol: &Tolerances) -> Result<QuadraticReduction> {
    crate::unitary::check_unitary(v1, tol)?;
    crate::unitary::check_unitary(v2, tol)?;
    if v1.nrows() != v2.nrows() {
        return Err(MtfrError::DimensionMismatch("V1 and V2 sizes differ".into()));
    }
    let v = v2.map(|z| z.conj()) * v1.adjoint();
    let imag_norm = im(&v).norm();
    Ok(QuadraticReduction { real: imag_norm <= tol.rank, imag_norm, v })
}

/// Reduction of the pair `(f, R_V f)` to a partial Fourier transform:
/// `|f|(x) |R_V f|(w) = |det Omega|^{-1/2} |u|(W2 x) |F_k u|(B^{-1} W1^t w)` with
/// `u = V_C D_{W2} f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCertificate {
    pub v: CMat,
    pub w1: RMat,
    pub sigma: Vec<Complex64>,
    pub w2: RMat,
    pub k: usize,
    pub b: RVec,
    pub c: RVec,
    pub omega: RMat,
    pub word_b: GeneratorWord,
}

pub fn pair_to_partial(v: &CMat, tol: &Tolerances) -> Result<PairCertificate> {
    crate::unitary::check_unitary(v, tol)?;
    let d = v.nrows();
    if im(v).norm() <= tol.rank {
        return Err(MtfrError::RealMatrix);
    }
    let f = odo_svd(v, tol)?;
    let sorted = sort_by_imag(&f.sigma, tol.rank)?;
    let w1 = &f.w1 * sorted.left.transpose();
    let w2 = sorted.right.transpose() * &f.w2;
    let k = sorted.k;
    if k == 0 {
        return Err(MtfrError::RealMatrix);
    }
    let b = RVec::from_fn(d, |i, _| if i < k { sorted.sigma[i].im } else { 1.0 });
    let cv = RVec::from_fn(d, |i, _| if i < k { sorted.sigma[i].re / sorted.sigma[i].im } else { 0.0 });
    let omega = block_diag(&w2.transpose(), &(&w1 * RMat::from_diagonal(&b)));
    let word_b = GeneratorWord {
        n: d,
        letters: vec![Letter::Chirp(RMat::from_diagonal(&cv)), Letter::Dilation(w2.clone())],
    };
    Ok(PairCertificate {
        v: v.clone(),
        w1,
        sigma: sorted.sigma.iter().cloned().collect(),
        w2,
        k,
        b,
        c: cv,
        omega,
        word_b,
    })
}

/// Maximal relative deviation of the pair identity at points `(x, w)` in `R^{2d}`.
pub fn verify_pair_identity(
    cert: &PairCertificate,
    f: &GeneralizedGaussian,
    points: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<IdentityReport> {
    let d = cert.v.nrows();
    if f.n() != d {
        return Err(MtfrError::DimensionMismatch("pair certificate and Gaussian differ".into()));
    }
    let rv = factor_to_word(&make_rotation(&cert.v, tol)?, tol)?;
    let rvf = apply_word(f, &rv, tol)?;
    let u = apply_word(f, &cert.word_b, tol)?;
    let fku = apply_word(
        &u,
        &GeneratorWord { n: d, letters: vec![Letter::PartialFourier((0..cert.k).collect())] },
        tol,
    )?;
    let omega_inv = inverse(&cert.omega, 1e-14)?;
    let ln_det = ln_abs_det(&cert.omega);
    compare_points(
        points,
        |p| Ok(f.ln_abs(&p[..d]) + rvf.ln_abs(&p[d..])),
        |p| {
            let mu = &omega_inv * RVec::from_column_slice(p);
            Ok(-0.5 * ln_det + u.ln_abs(&mu.as_slice()[..d]) + fku.ln_abs(&mu.as_slice()[d..]))
        },
    )
}

/// `bold R_U` for `U = W0 diag(V1, V2)`, a block-diagonal test instance.
pub fn block_diagonal_instance<R: Rng>(rng: &mut R, d: usize) -> (SymplecticMatrix, CMat) {
    let w = crate::linalg::random_orthogonal(rng, 2 * d);
    let v1 = crate::linalg::random_unitary(rng, d);
    let v2 = crate::linalg::random_unitary(rng, d);
    let u = to_complex(&w) * cblock_diag(&v1, &v2);
    let m = make_rotation(&u, &Tolerances::default()).expect("unitary by construction");
    (m, u)
}

/// The unitary `(1/sqrt 2) ((1, i), (i, 1))`, a coupling rotation in `d = 1`.
pub fn coupling_unitary() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)])
}

pub fn orthogonality_of(w: &RMat) -> f64 {
    orthogonality_residual(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_symmetric, random_unitary};
    use crate::symplectic::{make_chirp, make_dilation, matrix_exp, random_symplectic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn rotation(u: &CMat) -> SymplecticMatrix {
        make_rotation(u, &tol()).unwrap()
    }

    #[test]
    fn classify_examples() {
        let ji = rotation(&(CMat::identity(2, 2) * c(0.0, 1.0)));
        assert_eq!(classify(&ji, &tol()).unwrap().alternative, Alternative::I);
        let ru = rotation(&coupling_unitary());
        let cls = classify(&ru, &tol()).unwrap();
        assert_eq!(cls.alternative, Alternative::II);
        assert!((cls.offdiag_norm - 2f64.sqrt()).abs() < 1e-14);
        assert!(matches!(
            classify(&SymplecticMatrix::identity(3), &tol()),
            Err(MtfrError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn classify_is_left_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..30 {
            let base = random_symplectic(4, 6, seed);
            let verdict = classify(&base, &tol()).unwrap().alternative;
            let q = random_symmetric(&mut rng, 4, 1.0);
            let l = matrix_exp(&(crate::linalg::random_gaussian_matrix(&mut rng, 4, 4) * 0.5));
            let moved = make_chirp(&q, &tol())
                .unwrap()
                .mul(&make_dilation(&l, &tol()).unwrap())
                .mul(&base);
            assert_eq!(classify(&moved, &tol()).unwrap().alternative, verdict);
        }
    }

    #[test]
    fn alt1_examples() {
        let u = CMat::from_diagonal(&crate::linalg::CVec::from_column_slice(&[c(0.0, 1.0), c(1.0, 0.0)]));
        let a = alt1_decompose(&u, 1, &tol()).unwrap();
        assert!(a.reconstruction_error < 1e-14);
        assert!((a.v1[(0, 0)] * a.v1[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 1..=3 {
            for _ in 0..10 {
                let (_, u) = block_diagonal_instance(&mut rng, d);
                let a = alt1_decompose(&u, d, &tol()).unwrap();
                assert!(a.reconstruction_error < 1e-9);
                assert!(orthogonality_residual(&a.w) < 1e-10);
            }
        }
    }

    #[test]
    fn alt2_coupling_example() {
        let cert = certify(&rotation(&coupling_unitary()), &tol()).unwrap();
        let a2 = cert.alt2().unwrap();
        assert_eq!(a2.k, 1);
        let f = GeneralizedGaussian::standard(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..100).map(|_| uniform_ball(&mut rng, 2, 4.0)).collect();
        let rep = verify_identity(&cert, &f, &f, &pts, &tol()).unwrap();
        assert!(rep.max_rel_error < 1e-8, "{rep:?}");
    }

    #[test]
    fn alt2_random_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for seed in 0..40 {
            let d = 1 + (seed as usize % 2);
            let m = random_symplectic(2 * d, 8, 1000 + seed);
            let cert = certify(&m, &tol()).unwrap();
            let Some(a2) = cert.alt2() else { continue };
            assert!(a2.p_asymmetry < 1e-10);
            let f = GeneralizedGaussian::random(&mut rng, d);
            let g = GeneralizedGaussian::random(&mut rng, d);
            let sides = IdentitySides::new(&cert, &f, &g, &tol()).unwrap();
            let pts = sample_points(&mut rng, &sides.tfr, 100, 4.0);
            let rep = verify_identity(&cert, &f, &g, &pts, &tol()).unwrap();
            assert!(rep.max_rel_error < 1e-8, "seed {seed}: {rep:?}");
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn identity_detects_corruption_and_wrong_chirp_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = (0..).map(|s| random_symplectic(2, 8, 500 + s)).find(|m| {
            classify(m, &tol()).unwrap().alternative == Alternative::II
        });
        let cert = certify(&m.unwrap(), &tol()).unwrap();
        let f = GeneralizedGaussian::random(&mut rng, 1);
        let g = GeneralizedGaussian::random(&mut rng, 1);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| uniform_ball(&mut rng, 2, 2.0)).collect();
        assert!(verify_identity(&cert, &f, &g, &pts, &tol()).unwrap().max_rel_error < 1e-8);

        let mut bad = cert.clone();
        if let CertificateData::II(a2) = &mut bad.data {
            a2.omega[(0, 1)] += 1e-2;
        }
        assert!(verify_identity(&bad, &f, &g, &pts, &tol()).unwrap().max_rel_error > 1e-4);

        let mut flipped = cert.clone();
        flipped.data = CertificateData::II(alt2_with_p22_sign(&cert.pre, 1, 1.0, &tol()).unwrap());
        assert!(verify_identity(&flipped, &f, &g, &pts, &tol()).unwrap().max_rel_error > 1e-4);
    }

    #[test]
    fn quadratic_reduce_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v1 = random_unitary(&mut rng, 2);
        let r = quadratic_reduce(&v1, &v1.map(|z| z.conj()), &tol()).unwrap();
        assert!(r.real);
        let r = quadratic_reduce(&CMat::identity(1, 1), &CMat::from_element(1, 1, c(0.0, -1.0)), &tol())
            .unwrap();
        assert!(!r.real);
        assert!((r.v[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn pair_examples() {
        let p = pair_to_partial(&CMat::from_element(1, 1, c(0.0, 1.0)), &tol()).unwrap();
        assert_eq!(p.k, 1);
        assert!((p.b[0] - 1.0).abs() < 1e-15 && p.c[0].abs() < 1e-15);
        let e = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let p = pair_to_partial(&CMat::from_element(1, 1, e), &tol()).unwrap();
        assert!((p.c[0] - 1.0).abs() < 1e-14);
        assert!((p.b[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!(matches!(
            pair_to_partial(&CMat::identity(2, 2), &tol()),
            Err(MtfrError::RealMatrix)
        ));
    }

    #[test]
    fn pair_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for d in 1..=3 {
            for _ in 0..10 {
                let v = random_unitary(&mut rng, d);
                let cert = pair_to_partial(&v, &tol()).unwrap();
                let f = GeneralizedGaussian::random(&mut rng, d);
                let pts: Vec<Vec<f64>> = (0..50).map(|_| uniform_ball(&mut rng, 2 * d, 3.0)).collect();
                let rep = verify_pair_identity(&cert, &f, &pts, &tol()).unwrap();
                assert!(rep.max_rel_error < 1e-8, "{rep:?}");
            }
        }
    }
}
