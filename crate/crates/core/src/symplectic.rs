//! Real symplectic matrices, elementary generators and their factorizations.
//!
//! Block convention is `((A, B), (C, D))` with the position variables ordered
//! before the frequency variables. The elementary generators are
//!
//! * chirps `V_Q = ((I, 0), (Q, I))` with `Q` symmetric,
//! * dilations `D_L = ((L, 0), (0, L^{-t}))` with `L` invertible,
//! * rotations `R_U = ((Re U, Im U), (-Im U, Re U))` with `U` unitary,
//!
//! and a [`GeneratorWord`] is an ordered product of chirps, dilations and
//! partial Fourier transforms. The word `[a, b, c]` denotes the product
//! `a * b * c`, so its metaplectic operator applies `c` first.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MtfrError, Result};
use crate::linalg::{
    self, asymmetry, block, c, from_blocks, from_parts, im, inverse, re, spd_sqrt, standard_j,
    symmetrize, unitarity_residual, CMat, RMat,
};
use crate::tolerance::Tolerances;

/// A real `2n x 2n` matrix certified to satisfy `M^t J M = J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    n: usize,
    m: RMat,
}

impl SymplecticMatrix {
    /// Validates `m` against the relative symplectic residual.
    pub fn new(m: RMat, tol: &Tolerances) -> Result<Self> {
        if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return Err(MtfrError::DimensionMismatch(format!(
                "symplectic matrix must be 2n x 2n, got {} x {}",
                m.nrows(),
                m.ncols()
            )));
        }
        let res = symplectic_residual(&m);
        if !(res <= tol.sympl) {
            return Err(MtfrError::NotSymplectic(res));
        }
        Ok(Self { n: m.nrows() / 2, m })
    }

    pub(crate) fn new_unchecked(m: RMat) -> Self {
        Self { n: m.nrows() / 2, m }
    }

    pub fn identity(n: usize) -> Self {
        Self::new_unchecked(RMat::identity(2 * n, 2 * n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &RMat {
        &self.m
    }

    pub fn into_matrix(self) -> RMat {
        self.m
    }

    pub fn a(&self) -> RMat {
        block(&self.m, 0, 0, self.n, self.n)
    }

    pub fn b(&self) -> RMat {
        block(&self.m, 0, self.n, self.n, self.n)
    }

    pub fn c(&self) -> RMat {
        block(&self.m, self.n, 0, self.n, self.n)
    }

    pub fn d(&self) -> RMat {
        block(&self.m, self.n, self.n, self.n, self.n)
    }

    pub fn mul(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        Self::new_unchecked(&self.m * &other.m)
    }

    /// Inverse via `M^{-1} = -J M^t J`.
    pub fn inverse(&self) -> SymplecticMatrix {
        let j = standard_j(self.n);
        Self::new_unchecked(-(&j * self.m.transpose() * &j))
    }

    pub fn residual(&self) -> f64 {
        symplectic_residual(&self.m)
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }
}

/// `||M^t J M - J||_F / max(1, ||M||_F^2)`.
pub fn symplectic_residual(m: &RMat) -> f64 {
    let n = m.nrows() / 2;
    let j = standard_j(n);
    let r = (m.transpose() * &j * m - &j).norm();
    r / m.norm_squared().max(1.0)
}

/// One elementary factor of a generator word.
#[derive(Debug, Clone, PartialEq)]
pub enum Letter {
    /// Multiplication by `exp(pi i x.Qx)`; `Q` symmetric.
    Chirp(RMat),
    /// `f -> |det L|^{-1/2} f(L^{-1} x)`.
    Dilation(RMat),
    /// Fourier transform in the listed (0-based, sorted, distinct) axes.
    PartialFourier(Vec<usize>),
}

impl Letter {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Letter::Chirp(q) => Some(q.nrows()),
            Letter::Dilation(l) => Some(l.nrows()),
            Letter::PartialFourier(_) => None,
        }
    }

    /// The symplectic matrix of this letter in half-dimension `n`.
    pub fn matrix(&self, n: usize) -> RMat {
        match self {
            Letter::Chirp(q) => chirp_matrix(q),
            Letter::Dilation(l) => dilation_matrix(l).expect("letter holds invertible L"),
            Letter::PartialFourier(axes) => partial_fourier_matrix(n, axes),
        }
    }

    /// Inverse letters, as a short word (the inverse of a partial Fourier
    /// transform is the transform followed by the parity on its axes).
    pub fn inverse(&self, n: usize) -> Vec<Letter> {
        match self {
            Letter::Chirp(q) => vec![Letter::Chirp(-q)],
            Letter::Dilation(l) => vec![Letter::Dilation(
                l.clone().try_inverse().expect("letter holds invertible L"),
            )],
            Letter::PartialFourier(axes) => {
                let mut p = RMat::identity(n, n);
                for &a in axes {
                    p[(a, a)] = -1.0;
                }
                vec![Letter::Dilation(p), Letter::PartialFourier(axes.clone())]
            }
        }
    }

    fn is_identity(&self, eps: f64) -> bool {
        match self {
            Letter::Chirp(q) => q.amax() <= eps,
            Letter::Dilation(l) => (l - RMat::identity(l.nrows(), l.ncols())).amax() <= eps,
            Letter::PartialFourier(axes) => axes.is_empty(),
        }
    }
}

/// Ordered product of elementary letters acting on `L^2(R^n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorWord {
    pub n: usize,
    pub letters: Vec<Letter>,
}

impl GeneratorWord {
    pub fn new(n: usize, letters: Vec<Letter>) -> Result<Self> {
        for l in &letters {
            match l {
                Letter::PartialFourier(axes) => {
                    if axes.is_empty() || axes.iter().any(|&a| a >= n) {
                        return Err(MtfrError::InvalidInput(format!(
                            "partial Fourier axes {axes:?} invalid for n = {n}"
                        )));
                    }
                    let mut s = axes.clone();
                    s.sort_unstable();
                    s.dedup();
                    if s != *axes {
                        return Err(MtfrError::InvalidInput(
                            "partial Fourier axes must be sorted and distinct".into(),
                        ));
                    }
                }
                other => {
                    let k = other.dim().unwrap();
                    if k != n {
                        return Err(MtfrError::DimensionMismatch(format!(
                            "letter of size {k} in word of dimension {n}"
                        )));
                    }
                }
            }
        }
        Ok(Self { n, letters })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, letters: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Product of the letter matrices, left to right.
    pub fn matrix(&self) -> RMat {
        let mut m = RMat::identity(2 * self.n, 2 * self.n);
        for l in &self.letters {
            m *= l.matrix(self.n);
        }
        m
    }

    pub fn symplectic(&self) -> SymplecticMatrix {
        SymplecticMatrix::new_unchecked(self.matrix())
    }

    pub fn concat(&self, other: &GeneratorWord) -> GeneratorWord {
        let mut letters = self.letters.clone();
        letters.extend(other.letters.iter().cloned());
        GeneratorWord { n: self.n, letters }
    }

    pub fn inverse(&self) -> GeneratorWord {
        let letters = self
            .letters
            .iter()
            .rev()
            .flat_map(|l| l.inverse(self.n))
            .collect();
        GeneratorWord { n: self.n, letters }
    }

    /// Drops identity letters and merges adjacent chirps and dilations.
    pub fn simplified(&self) -> GeneratorWord {
        const EPS: f64 = 1e-14;
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for l in &self.letters {
            if l.is_identity(EPS) {
                continue;
            }
            let merged = match (out.last(), l) {
                (Some(Letter::Chirp(a)), Letter::Chirp(b)) => Some(Letter::Chirp(a + b)),
                (Some(Letter::Dilation(a)), Letter::Dilation(b)) => Some(Letter::Dilation(a * b)),
                _ => None,
            };
            match merged {
                Some(m) => {
                    out.pop();
                    if !m.is_identity(EPS) {
                        out.push(m);
                    }
                }
                None => out.push(l.clone()),
            }
        }
        GeneratorWord { n: self.n, letters: out }
    }
}

pub fn chirp_matrix(q: &RMat) -> RMat {
    let n = q.nrows();
    from_blocks(&RMat::identity(n, n), &RMat::zeros(n, n), q, &RMat::identity(n, n))
}

fn dilation_matrix(l: &RMat) -> Option<RMat> {
    let n = l.nrows();
    let lit = l.clone().try_inverse()?.transpose();
    Some(from_blocks(l, &RMat::zeros(n, n), &RMat::zeros(n, n), &lit))
}

fn partial_fourier_matrix(n: usize, axes: &[usize]) -> RMat {
    let mut u = CMat::identity(n, n);
    for &a in axes {
        u[(a, a)] = c(0.0, 1.0);
    }
    rotation_matrix(&u)
}

fn rotation_matrix(u: &CMat) -> RMat {
    let (a, b) = (re(u), im(u));
    from_blocks(&a, &b, &(-&b), &a)
}

/// `V_Q`; `Q` is symmetrized when its relative asymmetry is below `tol.sym`.
pub fn make_chirp(q: &RMat, tol: &Tolerances) -> Result<SymplecticMatrix> {
    Ok(SymplecticMatrix::new_unchecked(chirp_matrix(&checked_symmetric(
        q, tol,
    )?)))
}

pub(crate) fn checked_symmetric(q: &RMat, tol: &Tolerances) -> Result<RMat> {
    if q.nrows() != q.ncols() {
        return Err(MtfrError::DimensionMismatch("chirp matrix must be square".into()));
    }
    let asym = asymmetry(q);
    if asym > tol.sym * q.norm().max(1.0) {
        return Err(MtfrError::NonSymmetric(asym));
    }
    Ok(symmetrize(q))
}

pub fn make_dilation(l: &RMat, tol: &Tolerances) -> Result<SymplecticMatrix> {
    if l.nrows() != l.ncols() || l.is_empty() {
        return Err(MtfrError::DimensionMismatch("dilation matrix must be square".into()));
    }
    inverse(l, tol.inv)?;
    Ok(SymplecticMatrix::new_unchecked(
        dilation_matrix(l).expect("checked invertible"),
    ))
}

pub fn make_rotation(u: &CMat, tol: &Tolerances) -> Result<SymplecticMatrix> {
    if u.nrows() != u.ncols() || u.is_empty() {
        return Err(MtfrError::DimensionMismatch("rotation matrix must be square".into()));
    }
    let res = unitarity_residual(u);
    if res > tol.unit {
        return Err(MtfrError::NonUnitary(res));
    }
    Ok(SymplecticMatrix::new_unchecked(rotation_matrix(u)))
}

/// Canonical pre-Iwasawa factors `M = V_Q D_L R_U` with `L = L^t > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreIwasawa {
    pub q: RMat,
    pub l: RMat,
    pub u: CMat,
}

impl PreIwasawa {
    pub fn reconstruct(&self) -> RMat {
        chirp_matrix(&self.q) * dilation_matrix(&self.l).expect("L is PD") * rotation_matrix(&self.u)
    }
}

/// Closed formulas: `L = (AA^t + BB^t)^{1/2}`, `Q = (CA^t + DB^t)(AA^t + BB^t)^{-1}`,
/// `U = L^{-1}(A + iB)`.
pub fn pre_iwasawa(m: &SymplecticMatrix) -> Result<PreIwasawa> {
    let (a, b, cm, d) = (m.a(), m.b(), m.c(), m.d());
    let gram = symmetrize(&(&a * a.transpose() + &b * b.transpose()));
    let l = spd_sqrt(&gram)?;
    let gram_inv = gram
        .clone()
        .cholesky()
        .ok_or_else(|| MtfrError::NumericalFailure("AA^t + BB^t not positive definite".into()))?
        .inverse();
    let q = symmetrize(&((&cm * a.transpose() + &d * b.transpose()) * gram_inv));
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| MtfrError::NumericalFailure("L not invertible".into()))?;
    let u = from_parts(&(&l_inv * &a), &(&l_inv * &b));
    Ok(PreIwasawa { q, l, u })
}

/// Four-letter factorization of a free rotation `R_U`, `Im U` invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeFactorization {
    pub word: GeneratorWord,
    /// Relative asymmetry of `A B^{-1}` and `B^{-1} A` before symmetrization.
    pub asymmetry: f64,
}

/// `R_U = V_{AB^{-1}} D_B J V_{B^{-1}A}` with `A = Re U`, `B = Im U`.
pub fn free_factorize(u: &CMat, tol: &Tolerances) -> Result<FreeFactorization> {
    let n = u.nrows();
    let res = unitarity_residual(u);
    if res > tol.unit {
        return Err(MtfrError::NonUnitary(res));
    }
    let (a, b) = (re(u), im(u));
    let b_inv = match inverse(&b, tol.inv) {
        Ok(x) => x,
        Err(_) => return Err(MtfrError::NotFree(linalg::sigma_min(&b))),
    };
    let left = &a * &b_inv;
    let right = &b_inv * &a;
    let asym = (asymmetry(&left) / left.norm().max(1.0)).max(asymmetry(&right) / right.norm().max(1.0));
    let word = GeneratorWord {
        n,
        letters: vec![
            Letter::Chirp(symmetrize(&left)),
            Letter::Dilation(b),
            Letter::PartialFourier((0..n).collect()),
            Letter::Chirp(symmetrize(&right)),
        ],
    };
    Ok(FreeFactorization { word, asymmetry: asym })
}

/// Phase `tau` on the unit circle maximizing `sigma_min(Im(tau U))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauChoice {
    pub tau: Complex64,
    pub sigma_min: f64,
    pub candidates: usize,
}

pub const DEFAULT_TAU_SCAN: usize = 64;

/// Scans `tau = exp(i pi j / m)`, `j = 0..m-1`, doubling `m` once on failure.
pub fn select_tau(u: &CMat, scan: usize, tol: &Tolerances) -> Result<TauChoice> {
    let res = unitarity_residual(u);
    if res > tol.unit {
        return Err(MtfrError::NonUnitary(res));
    }
    let mut m = scan.max(1);
    for _ in 0..2 {
        let best = scan_tau(u, m);
        if best.sigma_min > tol.inv {
            return Ok(best);
        }
        m *= 2;
    }
    Err(MtfrError::NoTauFound(m))
}

/// All scanned candidates with their smallest singular value.
pub fn tau_scan_values(u: &CMat, m: usize) -> Vec<(Complex64, f64)> {
    (0..m)
        .map(|j| {
            let theta = std::f64::consts::PI * j as f64 / m as f64;
            let tau = Complex64::from_polar(1.0, theta);
            let s = linalg::sigma_min(&im(&(u * tau)));
            (tau, s)
        })
        .collect()
}

fn scan_tau(u: &CMat, m: usize) -> TauChoice {
    let mut best = TauChoice { tau: c(1.0, 0.0), sigma_min: -1.0, candidates: m };
    for (tau, s) in tau_scan_values(u, m) {
        if s > best.sigma_min {
            best = TauChoice { tau, sigma_min: s, candidates: m };
        }
    }
    best
}

/// Word for the scalar rotation `R_{sigma I}` in dimension `n`.
pub fn scalar_rotation_word(sigma: Complex64, n: usize, tol: &Tolerances) -> Result<GeneratorWord> {
    let eye = RMat::identity(n, n);
    if sigma.im.abs() <= tol.inv {
        let s = if sigma.re >= 0.0 { 1.0 } else { -1.0 };
        return Ok(GeneratorWord { n, letters: vec![Letter::Dilation(eye * s)] }.simplified());
    }
    let u = CMat::identity(n, n) * sigma;
    Ok(free_factorize(&u, tol)?.word)
}

/// Word for `R_U`: empty for `U = I`, a dilation for real orthogonal `U`,
/// otherwise `R_{tau U} R_{conj(tau) I}` with both factors free-factorized.
pub fn rotation_word(u: &CMat, tau: Option<Complex64>, tol: &Tolerances) -> Result<GeneratorWord> {
    let n = u.nrows();
    if tau.is_none() {
        if linalg::cfrob(&(u - CMat::identity(n, n))) <= tol.unit {
            return Ok(GeneratorWord::empty(n));
        }
        if im(u).norm() <= tol.unit {
            return Ok(GeneratorWord { n, letters: vec![Letter::Dilation(re(u))] });
        }
    }
    let tau = match tau {
        Some(t) => t,
        None => select_tau(u, DEFAULT_TAU_SCAN, tol)?.tau,
    };
    let first = free_factorize(&(u * tau), tol)?.word;
    let second = scalar_rotation_word(tau.conj(), n, tol)?;
    Ok(first.concat(&second))
}

/// Factor `M` into a generator word through its pre-Iwasawa decomposition.
pub fn factor_to_word(m: &SymplecticMatrix, tol: &Tolerances) -> Result<GeneratorWord> {
    factor_to_word_with_tau(m, None, tol)
}

/// As [`factor_to_word`] with an explicit rotation phase `tau`.
pub fn factor_to_word_with_tau(
    m: &SymplecticMatrix,
    tau: Option<Complex64>,
    tol: &Tolerances,
) -> Result<GeneratorWord> {
    let p = pre_iwasawa(m)?;
    let n = m.n();
    let head = GeneratorWord {
        n,
        letters: vec![Letter::Chirp(p.q.clone()), Letter::Dilation(p.l.clone())],
    };
    Ok(head.concat(&rotation_word(&p.u, tau, tol)?).simplified())
}

/// A random word: chirps with entries uniform in [-1, 1] (symmetrized),
/// dilations `exp(G / 2)` for a standard Gaussian `G`, and partial Fourier
/// letters on a random nonempty axis set with probability 1/3.
pub fn random_word<R: Rng>(rng: &mut R, n: usize, word_length: usize) -> GeneratorWord {
    let mut letters = Vec::with_capacity(word_length);
    for _ in 0..word_length {
        let r: f64 = rng.gen();
        if r < 1.0 / 3.0 {
            let mut axes: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if axes.is_empty() {
                axes.push(rng.gen_range(0..n));
            }
            letters.push(Letter::PartialFourier(axes));
        } else if r < 2.0 / 3.0 {
            letters.push(Letter::Chirp(linalg::random_symmetric(rng, n, 1.0)));
        } else {
            let g = linalg::random_gaussian_matrix(rng, n, n) * 0.5;
            letters.push(Letter::Dilation(matrix_exp(&g)));
        }
    }
    GeneratorWord { n, letters }
}

/// Deterministic random element of `Sp(2n, R)` built from `word_length` letters.
pub fn random_symplectic(n: usize, word_length: usize, seed: u64) -> SymplecticMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_word(&mut rng, n, word_length).symplectic()
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn matrix_exp(a: &RMat) -> RMat {
    let n = a.nrows();
    let norm = a.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(s);
    let mut term = RMat::identity(n, n);
    let mut sum = RMat::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}
