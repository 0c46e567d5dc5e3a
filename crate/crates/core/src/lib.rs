//! A laboratory for local convergence of the DFP and BFGS quasi-Newton
//! methods with unit steps.
//!
//! Runs are recorded as [`optimizer::Trace`]s, replayed in the frame
//! weighted by `∇²f(x*)^{±1/2}` ([`metrics`]), and checked against the
//! local theory: matrix inequalities, potential decrease, `(r, ε, δ)`
//! condition systems and superlinear rate envelopes ([`theory`]).
//! [`experiment`] drives comparisons and writes CSV traces.

// `!(a < b)` is used on purpose so that NaN fails a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod objectives;
pub mod optimizer;
pub mod report;
pub mod suites;
pub mod theory;
pub mod tolerance;
