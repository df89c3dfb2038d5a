//! Metaplectic time-frequency representations: symplectic factorizations,
//! an exact Gaussian oracle, an FFT grid engine, the Alternative I/II
//! classifier with explicit certificates, and uncertainty-principle checkers.

// `!(x > 0.0)` style guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod certify_grid;
pub mod check;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod symplectic;
pub mod tolerance;
pub mod unitary;

pub use error::{MtfrError, Result};
pub use tolerance::Tolerances;
