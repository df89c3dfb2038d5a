use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by all modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative symplectic residual: ||M^t J M - J||_F <= sympl * max(1, ||M||_F^2).
    pub sympl: f64,
    /// Unitarity residual ||U* U - I||_F.
    pub unit: f64,
    /// Relative invertibility threshold on the smallest singular value.
    pub inv: f64,
    /// Reconstruction tolerance for factorizations.
    pub recon: f64,
    /// Relative asymmetry accepted (and removed) for chirp matrices.
    pub sym: f64,
    /// Relative block-diagonality threshold for U^t U.
    pub blk: f64,
    /// Upper edge of the borderline band for block-diagonality.
    pub blk_warn: f64,
    /// Relative singular-value threshold for numerical rank.
    pub rank: f64,
    /// Eigenvalue clustering threshold for joint diagonalization.
    pub cluster: f64,
    /// Maximal condition number for Schur-complement blocks.
    pub cond_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sympl: 1e-10,
            unit: 1e-10,
            inv: 1e-8,
            recon: 1e-9,
            sym: 1e-12,
            blk: 1e-8,
            blk_warn: 1e-6,
            rank: 1e-8,
            cluster: 1e-8,
            cond_max: 1e12,
        }
    }
}
