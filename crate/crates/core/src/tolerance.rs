//! Numerical tolerances used across the crate.
//!
//! The inequalities checked here are exact in real arithmetic; every constant
//! below exists only to absorb floating-point rounding. Keep them in one place.

/// Positive-definiteness cutoff, relative to the largest eigenvalue.
pub const PD_RELATIVE: f64 = 1e-12;

/// Curvature guard: `sᵀy` must exceed this times `‖s‖‖y‖`.
pub const CURVATURE: f64 = 1e-14;

/// Guard on `yᵀHy` in the inverse DFP update, relative to `‖y‖²‖H‖`.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

/// Default step-size termination: `‖s‖ ≤ STEP_ZERO · (1 + ‖x‖)`.
pub const STEP_ZERO: f64 = 1e-14;

/// Budget for the symmetric eigensolver, in sweeps per dimension.
pub const EIGEN_SWEEPS_PER_DIM: usize = 60;

/// Tolerance on `‖u‖ = 1` for unit-vector inputs.
pub const UNIT_NORM: f64 = 1e-12;

/// Relative slack on the matrix inequalities (projection, product and
/// perturbation bounds).
pub const MATRIX_INEQUALITY: f64 = 1e-10;

/// Relative slack on the weighted step/gradient inequalities of a frame.
pub const FRAME_INEQUALITY: f64 = 1e-10;

/// Absolute slack on the Hessian-at-optimum gradient bound.
pub const COROLLARY_ABSOLUTE: f64 = 1e-12;

/// Slack on the per-step potential audits.
pub const POTENTIAL_AUDIT: f64 = 1e-9;

/// Relative slack on trajectory-monitor conclusions.
pub const MONITOR: f64 = 1e-9;

/// Relative slack when comparing a measured ratio against a rate envelope.
pub const ENVELOPE: f64 = 1e-12;

/// Below this value of `‖r_k‖` float noise dominates and ratio/monitor checks
/// are suspended.
pub const RESIDUAL_FLOOR: f64 = 1e-13;

/// Default cap on the dimension for which dense weighted matrices are
/// materialized during instrumentation.
pub const DEFAULT_AUDIT_CAP: usize = 200;
