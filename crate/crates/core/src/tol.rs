//! Numerical tolerances shared across the crate.

/// Rank cutoff multiplier for QR / SVD based solves (times machine epsilon and the largest scale).
pub const RANK_RELATIVE: f64 = 1e-12;
/// Largest asymmetry accepted before a matrix is symmetrized.
pub const SYMMETRY: f64 = 1e-12;

/// Primal feasibility of simplex iterates and the Phase-1 infeasibility threshold.
pub const LP_FEASIBILITY: f64 = 1e-8;
/// Reduced-cost optimality threshold.
pub const LP_OPTIMALITY: f64 = 1e-9;
/// Smallest pivot element accepted by the ratio test.
pub const LP_PIVOT: f64 = 1e-9;

/// Residual allowed when validating an observed decision against its constraints.
pub const DECISION_FEASIBILITY: f64 = 1e-7;
/// Coordinates of a decision above this value are treated as strictly positive.
pub const SUPPORT: f64 = 1e-9;
/// Lower-bound slack allowed on an observed decision.
pub const NONNEGATIVITY: f64 = 1e-9;

/// Absolute KKT residual target for the QP solver.
pub const QP_EPS_ABS: f64 = 1e-8;
/// Slack below which a QP constraint counts as active during polishing.
pub const QP_ACTIVE: f64 = 1e-7;

/// Relative mismatch at which cached projections are considered stale.
pub const STALE_PROJECTION: f64 = 1e-6;
