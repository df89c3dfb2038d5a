//! C ABI for the mtfr library.
//!
//! Objects are opaque handles created by `*_new`/`*_classify` and released by
//! the matching `*_free`. Every fallible call returns an [`MtfrStatus`]; on
//! failure [`mtfr_last_error_message`] describes the error for the calling
//! thread. Matrices cross the boundary as row-major `double` arrays.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mtfr::certify::{certify, sample_points, verify_identity, Certificate, IdentitySides};
use mtfr::gaussian::GeneralizedGaussian;
use mtfr::linalg::RMat;
use mtfr::symplectic::{pre_iwasawa, symplectic_residual, SymplecticMatrix};
use mtfr::{io, MtfrError, Tolerances};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtfrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Internal = 3,
    VerificationFailed = 4,
}

/// A validated element of `Sp(2n, R)`.
pub struct MtfrSymplectic {
    inner: SymplecticMatrix,
}

/// An Alternative I/II certificate.
pub struct MtfrCertificate {
    inner: Certificate,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn fail(status: MtfrStatus, msg: impl Into<String>) -> MtfrStatus {
    set_error(msg);
    status
}

fn from_error(e: MtfrError) -> MtfrStatus {
    let status = if e.is_internal() { MtfrStatus::Internal } else { MtfrStatus::InvalidInput };
    fail(status, e.to_string())
}

/// Runs `body`, turning panics into `Internal`.
fn guard(body: impl FnOnce() -> MtfrStatus) -> MtfrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => {
            if s == MtfrStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(MtfrStatus::Internal, "internal panic"),
    }
}

macro_rules! nonnull {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(MtfrStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        })+
    };
}

unsafe fn write_matrix(m: &RMat, out: *mut f64) {
    let n = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..n {
            *out.add(i * n + j) = m[(i, j)];
        }
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mtfr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Validates the row-major `2n x 2n` matrix `data` as symplectic.
///
/// # Safety
/// `data` must point to `4 n^2` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mtfr_symplectic_new(
    data: *const f64,
    n: usize,
    out: *mut *mut MtfrSymplectic,
) -> MtfrStatus {
    guard(|| {
        nonnull!(data, out);
        *out = ptr::null_mut();
        if n == 0 {
            return fail(MtfrStatus::InvalidInput, "n must be positive");
        }
        let size = 2 * n;
        let m = RMat::from_row_slice(size, size, std::slice::from_raw_parts(data, size * size));
        match SymplecticMatrix::new(m.clone(), &Tolerances::default()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MtfrSymplectic { inner }));
                MtfrStatus::Ok
            }
            Err(e) => fail(
                MtfrStatus::InvalidInput,
                format!("{e}; symplectic residual {:.3e}", symplectic_residual(&m)),
            ),
        }
    })
}

/// # Safety
/// `handle` must come from [`mtfr_symplectic_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mtfr_symplectic_free(handle: *mut MtfrSymplectic) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Half-dimension `n` of the matrix.
///
/// # Safety
/// `handle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mtfr_symplectic_dim(handle: *const MtfrSymplectic, out: *mut usize) -> MtfrStatus {
    guard(|| {
        nonnull!(handle, out);
        *out = (*handle).inner.n();
        MtfrStatus::Ok
    })
}

/// Writes `Q`, `L` (`n x n`, real) and `Re U`, `Im U` (`n x n`) of `M = V_Q D_L R_U`.
///
/// # Safety
/// `handle` must be live; each output must hold `n^2` doubles.
#[no_mangle]
pub unsafe extern "C" fn mtfr_pre_iwasawa(
    handle: *const MtfrSymplectic,
    q: *mut f64,
    l: *mut f64,
    u_re: *mut f64,
    u_im: *mut f64,
) -> MtfrStatus {
    guard(|| {
        nonnull!(handle, q, l, u_re, u_im);
        match pre_iwasawa(&(*handle).inner) {
            Ok(p) => {
                write_matrix(&p.q, q);
                write_matrix(&p.l, l);
                write_matrix(&p.u.map(|z| z.re), u_re);
                write_matrix(&p.u.map(|z| z.im), u_im);
                MtfrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Classifies a matrix in `Sp(4d)` and builds its certificate.
///
/// # Safety
/// `handle` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mtfr_certificate_classify(
    handle: *const MtfrSymplectic,
    out: *mut *mut MtfrCertificate,
) -> MtfrStatus {
    guard(|| {
        nonnull!(handle, out);
        *out = ptr::null_mut();
        match certify(&(*handle).inner, &Tolerances::default()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MtfrCertificate { inner }));
                MtfrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `cert` must come from [`mtfr_certificate_classify`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mtfr_certificate_free(cert: *mut MtfrCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Writes 1 or 2 for Alternative I or II, and `d`.
///
/// # Safety
/// `cert` must be live and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn mtfr_certificate_alternative(
    cert: *const MtfrCertificate,
    alternative: *mut u32,
    d: *mut usize,
) -> MtfrStatus {
    guard(|| {
        nonnull!(cert, alternative, d);
        let c = &(*cert).inner;
        *alternative = if c.alt2().is_some() { 2 } else { 1 };
        *d = c.d;
        MtfrStatus::Ok
    })
}

/// Number `k` of transformed variables of an Alternative II certificate.
///
/// # Safety
/// `cert` must be live and `k` writable.
#[no_mangle]
pub unsafe extern "C" fn mtfr_certificate_k(cert: *const MtfrCertificate, k: *mut usize) -> MtfrStatus {
    guard(|| {
        nonnull!(cert, k);
        match (*cert).inner.alt2() {
            Some(a2) => {
                *k = a2.k;
                MtfrStatus::Ok
            }
            None => fail(MtfrStatus::InvalidInput, "Alternative I certificates carry no k"),
        }
    })
}

/// The `2d x 2d` matrix `Omega` of an Alternative II certificate.
///
/// # Safety
/// `cert` must be live and `omega` must hold `4 d^2` doubles.
#[no_mangle]
pub unsafe extern "C" fn mtfr_certificate_omega(cert: *const MtfrCertificate, omega: *mut f64) -> MtfrStatus {
    guard(|| {
        nonnull!(cert, omega);
        match (*cert).inner.alt2() {
            Some(a2) => {
                write_matrix(&a2.omega, omega);
                MtfrStatus::Ok
            }
            None => fail(MtfrStatus::InvalidInput, "Alternative I certificates carry no Omega"),
        }
    })
}

/// The certificate as JSON; release with [`mtfr_string_free`].
///
/// # Safety
/// `cert` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mtfr_certificate_to_json(cert: *const MtfrCertificate, out: *mut *mut c_char) -> MtfrStatus {
    guard(|| {
        nonnull!(cert, out);
        *out = ptr::null_mut();
        match io::to_json_string(&io::certificate_value(&(*cert).inner)) {
            Ok(s) => match CString::new(s) {
                Ok(cs) => {
                    *out = cs.into_raw();
                    MtfrStatus::Ok
                }
                Err(_) => fail(MtfrStatus::Internal, "JSON contains a NUL byte"),
            },
            Err(e) => from_error(e),
        }
    })
}

/// Re-verifies an Alternative II certificate on two random generalized
/// Gaussians drawn from `seed`, at `points` evaluation points. Writes the
/// maximal relative error and returns `VerificationFailed` above `threshold`.
///
/// # Safety
/// `cert` must be live and `max_rel_error` writable.
#[no_mangle]
pub unsafe extern "C" fn mtfr_certificate_verify_gaussians(
    cert: *const MtfrCertificate,
    seed: u64,
    points: usize,
    threshold: f64,
    max_rel_error: *mut f64,
) -> MtfrStatus {
    guard(|| {
        nonnull!(cert, max_rel_error);
        if points == 0 || !(threshold > 0.0) {
            return fail(MtfrStatus::InvalidInput, "points must be positive and threshold > 0");
        }
        let c = &(*cert).inner;
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = GeneralizedGaussian::random(&mut rng, c.d);
        let g = GeneralizedGaussian::random(&mut rng, c.d);
        let mut run = || -> mtfr::Result<f64> {
            let sides = IdentitySides::new(c, &f, &g, &t)?;
            let pts = sample_points(&mut rng, &sides.tfr, points, 4.0);
            Ok(verify_identity(c, &f, &g, &pts, &t)?.max_rel_error)
        };
        match run() {
            Ok(err) => {
                *max_rel_error = err;
                if err <= threshold {
                    MtfrStatus::Ok
                } else {
                    fail(MtfrStatus::VerificationFailed, format!("identity error {err:.3e} exceeds {threshold:.1e}"))
                }
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mtfr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
