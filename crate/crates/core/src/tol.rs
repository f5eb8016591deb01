//! Pinned numeric tolerances.
//!
//! Every identity and bound check in the crate uses one of these named
//! constants; none of them is tuned per call site.

/// Probability vectors must sum to one within this slack.
pub const PMF_SUM: f64 = 1e-12;

/// Exact algebraic identities evaluated in f64 (pathwise identities,
/// recorded propensity replay, mean-of-scores bookkeeping).
pub const EXACT_IDENTITY: f64 = 1e-12;

/// Identities verified through exact enumeration of the trajectory law
/// (unbiasedness, conditional means, covariances, MSE identities).
pub const ENUMERATED_IDENTITY: f64 = 1e-10;

/// Enumerated identities with longer accumulation chains
/// (three-term variance decompositions, per-round variance formulas).
pub const ENUMERATED_SUM: f64 = 1e-9;

/// Orthogonality of auxiliary functions against policy densities.
pub const ORTHOGONALITY: f64 = 1e-10;

/// First-order stopping tolerance of the projected-gradient hindsight solver.
pub const HINDSIGHT_GAP: f64 = 1e-10;

/// Relative error allowed between analytic gradients and central finite
/// differences at step `GRADIENT_FD_STEP`.
pub const GRADIENT_REL: f64 = 1e-6;

/// Central finite-difference step for gradient audits.
pub const GRADIENT_FD_STEP: f64 = 1e-6;

/// Width multiplier for Monte Carlo consistency checks: an MC mean must
/// fall within `MC_SIGMAS` standard errors of the exact value.
pub const MC_SIGMAS: f64 = 3.0;
