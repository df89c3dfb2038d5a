//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{MtfrError, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RVec = DVector<f64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn frob(m: &RMat) -> f64 {
    m.norm()
}

pub fn cfrob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn asymmetry(m: &RMat) -> f64 {
    (m - m.transpose()).norm()
}

pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

pub fn csymmetrize(m: &CMat) -> CMat {
    (m + m.transpose()) * c(0.5, 0.0)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn re(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn im(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

pub fn from_parts(re: &RMat, im: &RMat) -> CMat {
    RMat::zip_map(re, im, c)
}

pub fn cvec_re(v: &CVec) -> RVec {
    v.map(|z| z.re)
}

/// Smallest singular value (0 for empty matrices).
pub fn sigma_min(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn sigma_max(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn cond2(m: &RMat) -> f64 {
    let smin = sigma_min(m);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sigma_max(m) / smin
    }
}

/// Inverse of a real square matrix, rejecting it when the smallest singular
/// value is below `rel_tol * ||m||_2`.
pub fn inverse(m: &RMat, rel_tol: f64) -> Result<RMat> {
    let smin = sigma_min(m);
    let smax = sigma_max(m);
    if !(smin > rel_tol * smax.max(f64::MIN_POSITIVE)) {
        return Err(MtfrError::Singular(smin));
    }
    m.clone()
        .try_inverse()
        .ok_or(MtfrError::Singular(smin))
}

/// Inverse of a complex symmetric (or general) matrix with a condition cap.
pub fn cinverse(m: &CMat, max_cond: f64) -> Result<CMat> {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if m.is_empty() {
        return Ok(m.clone());
    }
    if !(smin > 0.0) || smax / smin > max_cond {
        return Err(MtfrError::NumericalFailure(format!(
            "complex block ill-conditioned (cond {:.3e})",
            smax / smin
        )));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| MtfrError::NumericalFailure("complex inversion failed".into()))
}

/// Natural log of |det m| for a complex square matrix.
pub fn cln_abs_det(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].norm().ln()).sum()
}

pub fn ln_abs_det(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen_sorted(m: &RMat) -> (RVec, RMat) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = RVec::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = RMat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Unique symmetric positive-definite square root of a symmetric PD matrix.
pub fn spd_sqrt(m: &RMat) -> Result<RMat> {
    let (vals, vecs) = sym_eigen_sorted(m);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(MtfrError::NumericalFailure(
            "symmetric eigendecomposition did not converge".into(),
        ));
    }
    let scale = vals.iter().cloned().fold(0.0, f64::max).max(1.0);
    if vals.iter().any(|&v| v <= 1e-14 * scale) {
        return Err(MtfrError::NumericalFailure(
            "matrix is not positive definite".into(),
        ));
    }
    let d = RMat::from_diagonal(&vals.map(f64::sqrt));
    Ok(symmetrize(&(&vecs * d * vecs.transpose())))
}

pub fn block(m: &RMat, r0: usize, c0: usize, nr: usize, nc: usize) -> RMat {
    m.view((r0, c0), (nr, nc)).into_owned()
}

pub fn cblock(m: &CMat, r0: usize, c0: usize, nr: usize, nc: usize) -> CMat {
    m.view((r0, c0), (nr, nc)).into_owned()
}

pub fn from_blocks(a: &RMat, b: &RMat, cm: &RMat, d: &RMat) -> RMat {
    let (p, q) = (a.nrows(), a.ncols());
    let mut out = RMat::zeros(p + cm.nrows(), q + b.ncols());
    out.view_mut((0, 0), (p, q)).copy_from(a);
    out.view_mut((0, q), (b.nrows(), b.ncols())).copy_from(b);
    out.view_mut((p, 0), (cm.nrows(), cm.ncols())).copy_from(cm);
    out.view_mut((p, q), (d.nrows(), d.ncols())).copy_from(d);
    out
}

pub fn block_diag(a: &RMat, b: &RMat) -> RMat {
    from_blocks(
        a,
        &RMat::zeros(a.nrows(), b.ncols()),
        &RMat::zeros(b.nrows(), a.ncols()),
        b,
    )
}

pub fn cblock_diag(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// The standard skew form J = ((0, I), (-I, 0)) of size 2n.
pub fn standard_j(n: usize) -> RMat {
    from_blocks(
        &RMat::zeros(n, n),
        &RMat::identity(n, n),
        &(-RMat::identity(n, n)),
        &RMat::zeros(n, n),
    )
}

/// Residual ||U* U - I||_F.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    cfrob(&(u.adjoint() * u - CMat::identity(n, n)))
}

pub fn orthogonality_residual(w: &RMat) -> f64 {
    let n = w.ncols();
    (w.transpose() * w - RMat::identity(n, n)).norm()
}

pub fn random_gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> RMat {
    RMat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> RMat {
    let g = random_gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// Haar-distributed unitary matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let g = from_parts(
        &random_gaussian_matrix(rng, n, n),
        &random_gaussian_matrix(rng, n, n),
    );
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            let col = q.column(j) * ph;
            q.set_column(j, &col);
        }
    }
    q
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, scale: f64) -> RMat {
    let m = RMat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0) * scale);
    symmetrize(&m)
}

/// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> RMat {
    let o = random_orthogonal(rng, n);
    let d = RMat::from_diagonal(&RVec::from_fn(n, |_, _| rng.gen_range(lo..hi)));
    symmetrize(&(&o * d * o.transpose()))
}

/// Polar projection onto the nearest orthogonal matrix.
pub fn nearest_orthogonal(m: &RMat) -> RMat {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

pub fn permutation_matrix(perm: &[usize]) -> RMat {
    // column j maps e_j to e_{perm[j]}
    let n = perm.len();
    let mut p = RMat::zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        p[(i, j)] = 1.0;
    }
    p
}
