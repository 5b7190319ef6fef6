//! Default tolerances shared across the solver modules.
//!
//! All values are relative to a problem scale unless stated otherwise.
//! Rank decisions use [`RANK`], structural symmetry/semidefiniteness checks
//! use [`STRUCTURE`]; solver residual certificates use [`RESIDUAL`].

/// Relative rank tolerance for SVD-based rank decisions.
pub const RANK: f64 = 1e-10;

/// Relative tolerance for symmetry and positive-semidefiniteness checks of
/// structural invariants (J skew, R PSD, E^T Q PSD).
pub const STRUCTURE: f64 = 1e-8;

/// Relative tolerance for certified Riccati/Lyapunov residuals.
pub const RESIDUAL: f64 = 1e-8;

/// Absolute margin band around the imaginary axis; eigenvalues inside the
/// band are treated as neither stable nor anti-stable.
pub const IMAG_AXIS_MARGIN: f64 = 1e-9;

/// Condition-number budget for double-precision inversions.
pub const COND_LIMIT: f64 = 1e12;

/// Default artificial feedthrough regularization for KYP LMIs.
pub const KYP_EPS: f64 = 1e-12;

/// Relative gap required between sigma_ell and sigma_{ell+1} at truncation.
pub const SIGMA_GAP: f64 = 1e-8;

/// Default relative accuracy of the H-infinity bisection.
pub const HINF: f64 = 1e-6;

/// Schur sweep cap per matrix dimension: the iteration may use at most
/// `SCHUR_SWEEPS_PER_DIM * n` sweeps before failing deterministically.
pub const SCHUR_SWEEPS_PER_DIM: usize = 100;

/// Scale of a matrix for relative comparisons: `max(1, ||M||_F)`.
pub fn scale(norm: f64) -> f64 {
    norm.max(1.0)
}
