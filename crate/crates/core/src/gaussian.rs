//! Generalized Gaussians `exp(-pi x.Mx + 2 pi b.x + logamp)` and the exact
//! action of metaplectic generators on them.
//!
//! The global phase is not tracked: `logamp` is the log of the modulus of the
//! leading constant, so every quantity derived here is meaningful in modulus.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

use crate::error::{MtfrError, Result};
use crate::linalg::{
    c, cblock, cinverse, cln_abs_det, csymmetrize, im, random_spd, random_symmetric, re,
    to_complex, CMat, CVec, RMat, RVec,
};
use crate::symplectic::{GeneratorWord, Letter};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedGaussian {
    pub m: CMat,
    pub b: CVec,
    pub logamp: f64,
}

impl GeneralizedGaussian {
    /// Validates symmetry of `M` and positive definiteness of `Re M`.
    pub fn new(m: CMat, b: CVec, logamp: f64) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || b.len() != n || n == 0 {
            return Err(MtfrError::DimensionMismatch(format!(
                "Gaussian with M {}x{} and b of length {}",
                m.nrows(),
                m.ncols(),
                b.len()
            )));
        }
        let asym = crate::linalg::cfrob(&(&m - m.transpose()));
        if asym > 1e-10 * crate::linalg::cfrob(&m).max(1.0) {
            return Err(MtfrError::NonSymmetric(asym));
        }
        if !logamp.is_finite() {
            return Err(MtfrError::InvalidInput("logamp must be finite".into()));
        }
        let m = csymmetrize(&m);
        if re(&m).cholesky().is_none() {
            return Err(MtfrError::InvalidInput(
                "real part of M is not positive definite".into(),
            ));
        }
        Ok(Self { m, b, logamp })
    }

    /// `exp(-pi |x|^2)`.
    pub fn standard(n: usize) -> Self {
        Self { m: CMat::identity(n, n), b: CVec::zeros(n), logamp: 0.0 }
    }

    /// `2^{n/4} exp(-pi |x|^2)`, of unit L2 norm.
    pub fn normalized_standard(n: usize) -> Self {
        Self { logamp: 0.25 * n as f64 * 2f64.ln(), ..Self::standard(n) }
    }

    /// A random Gaussian with `Re M` eigenvalues in `[0.5, 2]`, `Im M` entries
    /// in `[-1, 1]`, `b` entries in `[-0.5, 0.5]^2` and unit L2 norm.
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        let mr = random_spd(rng, n, 0.5, 2.0);
        let mi = random_symmetric(rng, n, 1.0);
        let b = CVec::from_fn(n, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        let g = Self { m: crate::linalg::from_parts(&mr, &mi), b, logamp: 0.0 };
        let ln = g.ln_l2_norm();
        Self { logamp: -ln, ..g }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// Complex exponent `-pi x.Mx + 2 pi b.x + logamp` at a real point.
    pub fn exponent(&self, x: &[f64]) -> Complex64 {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        let mut q = c(0.0, 0.0);
        let mut lin = c(0.0, 0.0);
        for i in 0..n {
            let mut row = c(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                row += self.m[(i, j)] * xj;
            }
            q += row * x[i];
            lin += self.b[i] * x[i];
        }
        -PI * q + 2.0 * PI * lin + self.logamp
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.exponent(x).exp()
    }

    pub fn ln_abs(&self, x: &[f64]) -> f64 {
        self.exponent(x).re
    }

    pub fn abs(&self, x: &[f64]) -> f64 {
        self.ln_abs(x).exp()
    }

    /// Log of the L2 norm, in closed form.
    pub fn ln_l2_norm(&self) -> f64 {
        let mr = re(&self.m);
        let br = self.b.map(|z| z.re);
        let n = self.n() as f64;
        let chol = mr.clone().cholesky().expect("Re M positive definite");
        let ln_det_mr: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let quad = br.dot(&chol.solve(&br));
        // ||G||^2 = det(2 Re M)^{-1/2} exp(2 pi Re b.(Re M)^{-1} Re b + 2 logamp)
        let ln_sq = -0.5 * (n * 2f64.ln() + ln_det_mr) + 2.0 * PI * quad + 2.0 * self.logamp;
        0.5 * ln_sq
    }

    pub fn l2_norm(&self) -> f64 {
        self.ln_l2_norm().exp()
    }

    /// Log of the L1 norm of the modulus, in closed form.
    pub fn ln_l1_norm(&self) -> f64 {
        let mr = re(&self.m);
        let br = self.b.map(|z| z.re);
        let chol = mr.clone().cholesky().expect("Re M positive definite");
        let ln_det_mr: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        -0.5 * ln_det_mr + PI * br.dot(&chol.solve(&br)) + self.logamp
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { logamp: self.logamp + factor.ln(), ..self.clone() }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.n() {
            return Err(MtfrError::DimensionMismatch(format!(
                "letter of size {n} applied to a Gaussian in dimension {}",
                self.n()
            )));
        }
        Ok(())
    }
}

/// Multiplication by `exp(pi i x.Qx)`.
pub fn apply_chirp(g: &GeneralizedGaussian, q: &RMat) -> Result<GeneralizedGaussian> {
    g.check_dim(q.nrows())?;
    let m = &g.m - to_complex(q) * c(0.0, 1.0);
    Ok(GeneralizedGaussian { m: csymmetrize(&m), ..g.clone() })
}

/// `|det L|^{-1/2} g(L^{-1} x)`.
pub fn apply_dilation(g: &GeneralizedGaussian, l: &RMat) -> Result<GeneralizedGaussian> {
    g.check_dim(l.nrows())?;
    let l_inv = crate::linalg::inverse(l, 1e-14)?;
    let lit = to_complex(&l_inv.transpose());
    let li = to_complex(&l_inv);
    let m = &lit * &g.m * &li;
    let b = &lit * &g.b;
    let logamp = g.logamp - 0.5 * crate::linalg::ln_abs_det(l);
    Ok(GeneralizedGaussian { m: csymmetrize(&m), b, logamp })
}

/// Fourier transform (kernel `exp(-2 pi i x.w)`) in the listed axes; output
/// frequency variables stay in the positions of the transformed axes.
pub fn apply_partial_fourier(
    g: &GeneralizedGaussian,
    axes: &[usize],
    tol: &Tolerances,
) -> Result<GeneralizedGaussian> {
    let n = g.n();
    if axes.is_empty() || axes.iter().any(|&a| a >= n) {
        return Err(MtfrError::InvalidInput(format!("invalid Fourier axes {axes:?}")));
    }
    let rest: Vec<usize> = (0..n).filter(|i| !axes.contains(i)).collect();
    let (s, r) = (axes.len(), rest.len());
    let pick = |rows: &[usize], cols: &[usize]| {
        CMat::from_fn(rows.len(), cols.len(), |i, j| g.m[(rows[i], cols[j])])
    };
    let m_ss = pick(axes, axes);
    let m_sr = pick(axes, &rest);
    let m_rr = pick(&rest, &rest);
    let b_s = CVec::from_fn(s, |i, _| g.b[axes[i]]);
    let b_r = CVec::from_fn(r, |i, _| g.b[rest[i]]);

    let k = csymmetrize(&cinverse(&m_ss, tol.cond_max)?);
    let mi = c(0.0, 1.0);
    let m_ww = k.clone();
    let m_wr = (&k * &m_sr) * (-mi);
    let m_rr2 = &m_rr - m_sr.transpose() * &k * &m_sr;
    let kb = &k * &b_s;
    let b_w = &kb * (-mi);
    let b_r2 = &b_r - m_sr.transpose() * &kb;
    let logamp = g.logamp + PI * b_s.dot(&kb).re - 0.5 * cln_abs_det(&m_ss);

    let mut m = CMat::zeros(n, n);
    let mut b = CVec::zeros(n);
    for (i, &ai) in axes.iter().enumerate() {
        b[ai] = b_w[i];
        for (j, &aj) in axes.iter().enumerate() {
            m[(ai, aj)] = m_ww[(i, j)];
        }
        for (j, &rj) in rest.iter().enumerate() {
            m[(ai, rj)] = m_wr[(i, j)];
            m[(rj, ai)] = m_wr[(i, j)];
        }
    }
    for (i, &ri) in rest.iter().enumerate() {
        b[ri] = b_r2[i];
        for (j, &rj) in rest.iter().enumerate() {
            m[(ri, rj)] = m_rr2[(i, j)];
        }
    }
    Ok(GeneralizedGaussian { m: csymmetrize(&m), b, logamp })
}

pub fn apply_letter(
    g: &GeneralizedGaussian,
    letter: &Letter,
    tol: &Tolerances,
) -> Result<GeneralizedGaussian> {
    match letter {
        Letter::Chirp(q) => apply_chirp(g, q),
        Letter::Dilation(l) => apply_dilation(g, l),
        Letter::PartialFourier(axes) => apply_partial_fourier(g, axes, tol),
    }
}

/// Applies the metaplectic operator of `word`: the last letter acts first.
pub fn apply_word(
    g: &GeneralizedGaussian,
    word: &GeneratorWord,
    tol: &Tolerances,
) -> Result<GeneralizedGaussian> {
    g.check_dim(word.n)?;
    let mut out = g.clone();
    for letter in word.letters.iter().rev() {
        out = apply_letter(&out, letter, tol)?;
    }
    Ok(out)
}

/// `(f tensor g)(x, y) = f(x) g(y)`.
pub fn tensor(f: &GeneralizedGaussian, g: &GeneralizedGaussian) -> GeneralizedGaussian {
    let (nf, ng) = (f.n(), g.n());
    let m = crate::linalg::cblock_diag(&f.m, &g.m);
    let b = CVec::from_fn(nf + ng, |i, _| if i < nf { f.b[i] } else { g.b[i - nf] });
    GeneralizedGaussian { m, b, logamp: f.logamp + g.logamp }
}

pub fn conjugate(g: &GeneralizedGaussian) -> GeneralizedGaussian {
    GeneralizedGaussian { m: g.m.map(|z| z.conj()), b: g.b.map(|z| z.conj()), logamp: g.logamp }
}

/// A point `(x1, x2, w1, w2)` of the partial time-frequency plane, with
/// `x1, w1` of length `k` and `x2, w2` of length `d - k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl PhasePoint {
    /// Splits `lambda = (x, w)` in `R^{2d}` at `k`.
    pub fn split(lambda: &[f64], d: usize, k: usize) -> Self {
        assert_eq!(lambda.len(), 2 * d);
        Self {
            x1: lambda[..k].to_vec(),
            x2: lambda[k..d].to_vec(),
            w1: lambda[d..d + k].to_vec(),
            w2: lambda[d + k..].to_vec(),
        }
    }
}

/// `ln |V^k_g f(x1, x2, w1, w2)|` where
/// `V^k_g f = int f(t, x2) conj(g(t - x1, -w2)) exp(-2 pi i t.w1) dt` over `R^k`.
pub fn partial_stft_ln(
    f: &GeneralizedGaussian,
    g: &GeneralizedGaussian,
    k: usize,
    p: &PhasePoint,
    tol: &Tolerances,
) -> Result<f64> {
    let d = f.n();
    if g.n() != d {
        return Err(MtfrError::DimensionMismatch("window and signal dimensions differ".into()));
    }
    if k == 0 || k > d {
        return Err(MtfrError::InvalidInput(format!("k = {k} outside 1..={d}")));
    }
    let r = d - k;
    let rv = |v: &[f64]| CVec::from_iterator(v.len(), v.iter().map(|&t| c(t, 0.0)));
    let (x1, x2, w1) = (rv(&p.x1), rv(&p.x2), rv(&p.w1));
    let w = rv(&p.w2.iter().map(|t| -t).collect::<Vec<_>>());

    let mf11 = cblock(&f.m, 0, 0, k, k);
    let mf12 = cblock(&f.m, 0, k, k, r);
    let mf22 = cblock(&f.m, k, k, r, r);
    let gc = conjugate(g);
    let g11 = cblock(&gc.m, 0, 0, k, k);
    let g12 = cblock(&gc.m, 0, k, k, r);
    let g22 = cblock(&gc.m, k, k, r, r);
    let bf1 = f.b.rows(0, k).into_owned();
    let bf2 = f.b.rows(k, r).into_owned();
    let bg1 = gc.b.rows(0, k).into_owned();
    let bg2 = gc.b.rows(k, r).into_owned();

    let a = &mf11 + &g11;
    let v = &bf1 - &mf12 * &x2 + &g11 * &x1 - &g12 * &w + &bg1 - &w1 * c(0.0, 1.0);
    let dotu = |a: &CVec, b: &CVec| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<Complex64>();
    let cst = -PI * dotu(&x2, &(&mf22 * &x2)) + 2.0 * PI * dotu(&bf2, &x2) + f.logamp
        - PI * dotu(&x1, &(&g11 * &x1))
        + 2.0 * PI * dotu(&x1, &(&g12 * &w))
        - PI * dotu(&w, &(&g22 * &w))
        - 2.0 * PI * dotu(&bg1, &x1)
        + 2.0 * PI * dotu(&bg2, &w)
        + g.logamp;
    let a_inv = cinverse(&a, tol.cond_max)?;
    let quad = PI * dotu(&v, &(&a_inv * &v));
    Ok(-0.5 * cln_abs_det(&a) + (quad + cst).re)
}

pub fn partial_stft_point(
    f: &GeneralizedGaussian,
    g: &GeneralizedGaussian,
    k: usize,
    p: &PhasePoint,
    tol: &Tolerances,
) -> Result<f64> {
    partial_stft_ln(f, g, k, p, tol).map(f64::exp)
}

/// Real and imaginary parts of `M` and `b`, for serialization.
pub fn parts(g: &GeneralizedGaussian) -> (RMat, RMat, RVec, RVec) {
    (re(&g.m), im(&g.m), g.b.map(|z| z.re), g.b.map(|z| z.im))
}
