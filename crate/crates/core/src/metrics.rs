//! Replay of a trace in the frame weighted by `∇²f(x*)^{±1/2}`.
//!
//! With `Q⁺ = ∇²f(x*)^{1/2}` and `Q⁻ = ∇²f(x*)^{-1/2}`:
//! `B̂ = Q⁻BQ⁻`, `Ĥ = Q⁺HQ⁺`, `ŝ = Q⁺s`, `ŷ = Q⁻y`, `∇f̂ = Q⁻∇f`,
//! `r = Q⁺(x − x*)` and `σ = (M/μ^{3/2})‖r‖`.

use thiserror::Error;

use crate::linalg::{self, LinalgError, RootSign, SymMatrix, SymOperator, Vector};
use crate::objectives::ObjectiveModel;
use crate::optimizer::{IterateRecord, Trace};
use crate::report::{Applicability, InequalityCheck};
use crate::tolerance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("Hessian at the optimum is not positive definite: {0}")]
    NotPositiveDefinite(LinalgError),
    #[error("record has dimension {found}, context has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone)]
pub struct MetricContext {
    pub hstar: SymOperator,
    pub hstar_half: SymOperator,
    pub hstar_neg_half: SymOperator,
    pub hstar_inv: SymOperator,
    pub optimum: Vector,
    pub mu: f64,
    pub lip_hess: f64,
    /// Hatted matrices are materialized only up to this dimension.
    pub audit_cap: usize,
}

pub fn build_context(model: &ObjectiveModel) -> Result<MetricContext, MetricError> {
    let hstar = model.hessian_at_optimum();
    let pd = MetricError::NotPositiveDefinite;
    Ok(MetricContext {
        hstar_half: hstar.power_half(RootSign::Positive).map_err(pd)?,
        hstar_neg_half: hstar.power_half(RootSign::Negative).map_err(pd)?,
        hstar_inv: hstar.inverse().map_err(pd)?,
        hstar,
        optimum: model.optimum().clone(),
        mu: model.constants.mu,
        lip_hess: model.constants.lip_hess_at_opt,
        audit_cap: tolerance::DEFAULT_AUDIT_CAP,
    })
}

impl MetricContext {
    pub fn dim(&self) -> usize {
        self.optimum.len()
    }

    pub fn with_audit_cap(mut self, cap: usize) -> Self {
        self.audit_cap = cap;
        self
    }

    /// `M / μ^{3/2}`.
    pub fn sigma_scale(&self) -> f64 {
        self.lip_hess / self.mu.powf(1.5)
    }

    pub fn weighted_residual(&self, x: &Vector) -> Result<Vector, MetricError> {
        self.check(x.len())?;
        Ok(self.hstar_half.apply(&(x - &self.optimum))?)
    }

    pub fn sigma(&self, x: &Vector) -> Result<f64, MetricError> {
        Ok(self.sigma_scale() * self.weighted_residual(x)?.norm())
    }

    /// `‖B̂ − I‖_F` computed as `‖Q⁻(B − ∇²f(x*))Q⁻‖_F`.
    pub fn potential_b(&self, b: &SymMatrix) -> Result<f64, MetricError> {
        let diff = b.sub(&self.hstar.to_dense());
        Ok(linalg::frobenius_norm(self.hstar_neg_half.congruence(&diff)?.as_matrix())?)
    }

    /// `‖Ĥ − I‖_F` computed as `‖Q⁺(H − ∇²f(x*)⁻¹)Q⁺‖_F`.
    pub fn potential_h(&self, h: &SymMatrix) -> Result<f64, MetricError> {
        let diff = h.sub(&self.hstar_inv.to_dense());
        Ok(linalg::frobenius_norm(self.hstar_half.congruence(&diff)?.as_matrix())?)
    }

    fn check(&self, found: usize) -> Result<(), MetricError> {
        if found == self.dim() {
            Ok(())
        } else {
            Err(MetricError::DimensionMismatch { expected: self.dim(), found })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFrame {
    pub k: usize,
    pub b_hat: Option<SymMatrix>,
    pub h_hat: Option<SymMatrix>,
    /// Absent when the run stopped at this iterate.
    pub s_hat: Option<Vector>,
    pub y_hat: Option<Vector>,
    pub grad_hat: Vector,
    pub r: Vector,
    pub sigma: f64,
    /// `max(σ_k, σ_{k+1})`; undefined on the final frame.
    pub tau: Option<f64>,
    pub potential_b: Option<f64>,
    pub potential_h: Option<f64>,
    /// `sᵀy` in the original coordinates.
    pub sy: Option<f64>,
}

impl WeightedFrame {
    pub fn r_norm(&self) -> f64 {
        self.r.norm()
    }
}

/// Frame of `record`; `next` supplies `σ_{k+1}` for `τ_k`.
pub fn frame(
    ctx: &MetricContext,
    record: &IterateRecord,
    next: Option<&IterateRecord>,
) -> Result<WeightedFrame, MetricError> {
    ctx.check(record.x.len())?;
    let r = ctx.weighted_residual(&record.x)?;
    let sigma = ctx.sigma_scale() * r.norm();
    let tau = match next {
        Some(n) => Some(sigma.max(ctx.sigma(&n.x)?)),
        None => None,
    };
    let dense = ctx.dim() <= ctx.audit_cap;
    let b_hat = match (&record.b, dense) {
        (Some(b), true) => Some(ctx.hstar_neg_half.congruence(b)?),
        _ => None,
    };
    let h_hat = match (&record.h, dense) {
        (Some(h), true) => Some(ctx.hstar_half.congruence(h)?),
        _ => None,
    };
    let potential_b = match (&b_hat, &record.b) {
        (Some(bh), _) => Some(linalg::frobenius_norm(bh.minus_identity().as_matrix())?),
        (None, Some(b)) => Some(ctx.potential_b(b)?),
        (None, None) => None,
    };
    let potential_h = match (&h_hat, &record.h) {
        (Some(hh), _) => Some(linalg::frobenius_norm(hh.minus_identity().as_matrix())?),
        (None, Some(h)) => Some(ctx.potential_h(h)?),
        (None, None) => None,
    };
    let s_hat = record.s.as_ref().map(|s| ctx.hstar_half.apply(s)).transpose()?;
    let y_hat = record.y.as_ref().map(|y| ctx.hstar_neg_half.apply(y)).transpose()?;
    let sy = match (&record.s, &record.y) {
        (Some(s), Some(y)) => Some(s.dot(y)),
        _ => None,
    };
    Ok(WeightedFrame {
        k: record.k,
        b_hat,
        h_hat,
        s_hat,
        y_hat,
        grad_hat: ctx.hstar_neg_half.apply(&record.grad)?,
        r,
        sigma,
        tau,
        potential_b,
        potential_h,
        sy,
    })
}

/// Frames for every record of `trace`.
pub fn frames(ctx: &MetricContext, trace: &Trace) -> Result<Vec<WeightedFrame>, MetricError> {
    let recs = &trace.records;
    (0..recs.len())
        .map(|i| frame(ctx, &recs[i], recs.get(i + 1)))
        .collect()
}

/// The four hat-frame inequalities for a single step.
pub fn lemma4_report(f: &WeightedFrame) -> Applicability<Vec<InequalityCheck>> {
    let (Some(s), Some(y)) = (&f.s_hat, &f.y_hat) else {
        return Applicability::NotApplicable("no step from this iterate".into());
    };
    if s.norm() == 0.0 {
        return Applicability::NotApplicable("zero step".into());
    }
    let Some(tau) = f.tau else {
        return Applicability::NotApplicable("tau undefined on the final frame".into());
    };
    if !(tau < 1.0) {
        return Applicability::HypothesisViolated(format!("tau = {tau} >= 1"));
    }
    let tol = tolerance::FRAME_INEQUALITY;
    let (sn, yn) = (s.norm(), y.norm());
    let sn2 = sn * sn;
    let sy = s.dot(y);
    let rn = f.r.norm();
    let check = |name: &str, lhs: f64, rhs: f64, scale: f64| {
        InequalityCheck::relative(name, lhs, rhs, tol, scale)
    };
    Applicability::Checked(vec![
        check("|y-s| <= tau|s|", (y - s).norm(), tau * sn, sn),
        check("(1-tau)|s|^2 <= s.y", (1.0 - tau) * sn2, sy, sn2),
        check("s.y <= (1+tau)|s|^2", sy, (1.0 + tau) * sn2, sn2),
        check("(1-tau)|s| <= |y|", (1.0 - tau) * sn, yn, sn),
        check("|y| <= (1+tau)|s|", yn, (1.0 + tau) * sn, sn),
        check("|grad-r| <= sigma|r|", (&f.grad_hat - &f.r).norm(), f.sigma * rn, rn),
    ])
}
