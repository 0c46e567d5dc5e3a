//! Shared verdict types for inequality checks.

use serde::Serialize;

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; negative when the raw inequality fails.
    pub slack: f64,
    pub pass: bool,
}

impl InequalityCheck {
    /// Exact comparison, no floating-point allowance.
    pub fn exact(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, slack: rhs - lhs, pass: lhs <= rhs }
    }

    /// Passes when `lhs ≤ rhs + tol · max(|rhs|, scale)`.
    ///
    /// `scale` is the natural magnitude of the two sides; it keeps
    /// inequalities with a zero right-hand side from failing on rounding.
    pub fn relative(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64, scale: f64) -> Self {
        let allowance = tol * rhs.abs().max(scale.abs());
        Self { name: name.into(), lhs, rhs, slack: rhs - lhs, pass: lhs <= rhs + allowance }
    }
}

/// Outcome of a check whose hypotheses may not hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Applicability<T> {
    Checked(T),
    /// The statement's own precondition fails; this is not a violation.
    HypothesisViolated(String),
    /// Nothing to check, e.g. the run terminated at this iterate.
    NotApplicable(String),
}

impl<T> Applicability<T> {
    pub fn checked(&self) -> Option<&T> {
        match self {
            Self::Checked(v) => Some(v),
            _ => None,
        }
    }
}

pub fn all_pass<'a>(checks: impl IntoIterator<Item = &'a InequalityCheck>) -> bool {
    checks.into_iter().all(|c| c.pass)
}
