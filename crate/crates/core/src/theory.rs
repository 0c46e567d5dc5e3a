//! Executable checks for the local theory: matrix inequalities, potential
//! decrease, the `(r, ε, δ)` condition systems, rate envelopes and a
//! trajectory monitor.
//!
//! Nothing here aborts a run. Violations are returned as data.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, SymMatrix, Vector};
use crate::metrics::WeightedFrame;
use crate::objectives::LocalConstants;
use crate::report::{all_pass, Applicability, InequalityCheck};
use crate::tolerance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("vector is not unit length (norm {0})")]
    NotUnit(f64),
    #[error("matrix A is singular")]
    SingularA,
    #[error("matrix A must be symmetric positive definite")]
    NotSpd,
    #[error("envelope index must be at least 1")]
    InvalidIndex,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionTriple {
    pub r: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl ConditionTriple {
    pub fn new(r: f64, epsilon: f64, delta: f64) -> Result<Self, TheoryError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(TheoryError::InvalidTriple(format!("r = {r} not in (0, 1)")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite() && delta > 0.0 && delta.is_finite()) {
            return Err(TheoryError::InvalidTriple(format!(
                "epsilon = {epsilon} and delta = {delta} must be positive"
            )));
        }
        Ok(Self { r, epsilon, delta })
    }

    /// Parses `r,epsilon,delta`; each entry may be a fraction such as `1/200`.
    pub fn parse(text: &str) -> Result<Self, TheoryError> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let bad = || TheoryError::InvalidTriple(format!("cannot parse '{text}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let value = |s: &str| -> Option<f64> {
            match s.split_once('/') {
                Some((n, d)) => Some(n.trim().parse::<f64>().ok()? / d.trim().parse::<f64>().ok()?),
                None => s.parse().ok(),
            }
        };
        let v: Option<Vec<f64>> = parts.iter().map(|p| value(p)).collect();
        let v = v.ok_or_else(bad)?;
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum System {
    Dfp,
    Bfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCertificate {
    pub system: System,
    pub triple: ConditionTriple,
    pub inequalities: Vec<InequalityCheck>,
    pub overall_pass: bool,
    /// Coefficient `c` of the iterate radius `c · μ^{3/2}/(M√L)`; equals ε.
    pub radius_coefficient: f64,
    /// Bound on the initial potential; equals δ.
    pub neighborhood_radius_matrix: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborhoodRadii {
    /// `μ^{3/2} ε / (M√L)`.
    pub iterate: f64,
    /// Radius for starting with the exact Hessian (or its inverse) at `x₀`.
    pub exact_hessian_start: f64,
}

impl ConditionCertificate {
    pub fn radii(&self, c: &LocalConstants, dim: usize) -> NeighborhoodRadii {
        let (mu, l, m) = (c.mu, c.lip_grad, c.lip_hess_at_opt);
        let (eps, delta) = (self.triple.epsilon, self.triple.delta);
        if m == 0.0 {
            return NeighborhoodRadii { iterate: f64::INFINITY, exact_hessian_start: f64::INFINITY };
        }
        let sqrt_d = (dim as f64).sqrt();
        let iterate = mu.powf(1.5) * eps / (m * l.sqrt());
        let exact_hessian_start = match self.system {
            System::Dfp => iterate.min(mu * delta / (m * sqrt_d)),
            System::Bfgs => mu.powf(1.5) * eps.min(delta / sqrt_d) / (m * l.sqrt()),
        };
        NeighborhoodRadii { iterate, exact_hessian_start }
    }
}

fn certificate(system: System, triple: &ConditionTriple, inequalities: Vec<InequalityCheck>) -> ConditionCertificate {
    ConditionCertificate {
        system,
        triple: *triple,
        overall_pass: all_pass(&inequalities),
        inequalities,
        radius_coefficient: triple.epsilon,
        neighborhood_radius_matrix: triple.delta,
    }
}

/// `[(2δ+1)·4/(1−ε)² + (3+ε)/(1−ε)]·ε/(1−r) ≤ δ` and `ε + 2δ ≤ r/(1+r)`.
pub fn dfp_conditions(t: &ConditionTriple) -> ConditionCertificate {
    let ConditionTriple { r, epsilon: e, delta: d } = *t;
    let bracket = (2.0 * d + 1.0) * 4.0 / ((1.0 - e) * (1.0 - e)) + (3.0 + e) / (1.0 - e);
    certificate(
        System::Dfp,
        t,
        vec![
            InequalityCheck::exact("potential budget", bracket * e / (1.0 - r), d),
            InequalityCheck::exact("contraction budget", e + 2.0 * d, r / (1.0 + r)),
        ],
    )
}

/// `[(2δ+1)·4(1+2ε²+ε³)/(1−ε)² + (3+2ε)/(1−ε)]·ε/(1−r) ≤ δ` and
/// `(2δ+1)ε + 2δ ≤ r`.
pub fn bfgs_conditions(t: &ConditionTriple) -> ConditionCertificate {
    let ConditionTriple { r, epsilon: e, delta: d } = *t;
    let growth = 1.0 + 2.0 * e * e + e * e * e;
    let bracket = (2.0 * d + 1.0) * 4.0 * growth / ((1.0 - e) * (1.0 - e)) + (3.0 + 2.0 * e) / (1.0 - e);
    certificate(
        System::Bfgs,
        t,
        vec![
            InequalityCheck::exact("potential budget", bracket * e / (1.0 - r), d),
            InequalityCheck::exact("contraction budget", (2.0 * d + 1.0) * e + 2.0 * d, r),
        ],
    )
}

pub fn conditions(system: System, t: &ConditionTriple) -> ConditionCertificate {
    match system {
        System::Dfp => dfp_conditions(t),
        System::Bfgs => bfgs_conditions(t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeForm {
    /// `(1/k)^{k/2}`.
    CorollaryForm,
    TheoremFormDfp,
    TheoremFormBfgs,
}

impl EnvelopeForm {
    pub fn for_system(system: System) -> Self {
        match system {
            System::Dfp => Self::TheoremFormDfp,
            System::Bfgs => Self::TheoremFormBfgs,
        }
    }
}

/// The per-step base `b(k)`; the envelope is `b(k)^k`.
pub fn envelope_base(form: EnvelopeForm, triple: Option<&ConditionTriple>, k: usize) -> Result<f64, TheoryError> {
    if k == 0 {
        return Err(TheoryError::InvalidIndex);
    }
    let kf = k as f64;
    if form == EnvelopeForm::CorollaryForm {
        return Ok(1.0 / kf.sqrt());
    }
    let t = triple.ok_or_else(|| TheoryError::InvalidTriple("theorem forms need a triple".into()))?;
    let (r, e, d) = (t.r, t.epsilon, t.delta);
    if (1.0 - e) == 0.0 || (1.0 - r) == 0.0 {
        return Err(TheoryError::InvalidTriple("a denominator vanishes".into()));
    }
    let root2 = 2f64.sqrt();
    let (slope, offset) = match form {
        EnvelopeForm::TheoremFormDfp => (
            2.0 * root2 * d * (1.0 + r) / (1.0 - e),
            (1.0 + r) * e / ((1.0 - r) * (1.0 - e)),
        ),
        EnvelopeForm::TheoremFormBfgs => (
            2.0 * root2 * d * (1.0 + e) * (1.0 + r) / ((1.0 - e) * (1.0 - r)),
            (1.0 + e) * e * (1.0 + r) / ((1.0 - e).powi(2) * (1.0 - r).powi(2)),
        ),
        EnvelopeForm::CorollaryForm => unreachable!(),
    };
    Ok((slope * kf.sqrt() + offset) / kf)
}

/// Envelope value at `k ≥ 1`, without the `√(L/μ)` prefactor.
pub fn rate_envelope(form: EnvelopeForm, triple: Option<&ConditionTriple>, k: usize) -> Result<f64, TheoryError> {
    let base = envelope_base(form, triple, k)?;
    Ok(base.powf(k as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEnvelope {
    pub form: EnvelopeForm,
    pub triple: Option<ConditionTriple>,
    /// `√(L/μ)`, relating the envelope in `r` to one in `x`.
    pub kappa_prefactor: f64,
}

impl RateEnvelope {
    pub fn new(form: EnvelopeForm, triple: Option<ConditionTriple>, c: &LocalConstants) -> Self {
        Self { form, triple, kappa_prefactor: (c.lip_grad / c.mu).sqrt() }
    }

    pub fn value(&self, k: usize) -> Result<f64, TheoryError> {
        rate_envelope(self.form, self.triple.as_ref(), k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub lhs_gap: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `‖A‖²_F − ‖(I−uuᵀ)A(I−uuᵀ)‖²_F ≥ ‖Au‖²` for symmetric `A` and unit `u`.
pub fn check_lemma1(a: &SymMatrix, u: &Vector) -> Result<Lemma1Report, TheoryError> {
    if a.dim() != u.len() {
        return Err(LinalgError::DimensionMismatch { expected: a.dim(), found: u.len() }.into());
    }
    let norm = u.norm();
    if (norm - 1.0).abs() > tolerance::UNIT_NORM {
        return Err(TheoryError::NotUnit(norm));
    }
    let d = a.dim();
    let p = Matrix::identity(d, d) - u * u.transpose();
    let full = a.as_matrix().norm_squared();
    let lhs_gap = full - (&p * a.as_matrix() * &p).norm_squared();
    let rhs = (a.as_matrix() * u).norm_squared();
    let pass = lhs_gap >= rhs - tolerance::MATRIX_INEQUALITY * full.max(1.0);
    Ok(Lemma1Report { lhs_gap, rhs, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Report {
    /// `‖AB‖_F ≤ ‖A‖‖B‖_F`.
    pub product: InequalityCheck,
    /// `‖BᵀAB‖_F ≤ ‖A‖‖B‖²_F`.
    pub congruence: InequalityCheck,
}

impl Lemma2Report {
    pub fn pass(&self) -> bool {
        self.product.pass && self.congruence.pass
    }
}

pub fn check_lemma2(a: &SymMatrix, b: &Matrix) -> Result<Lemma2Report, TheoryError> {
    if b.nrows() != a.dim() {
        return Err(LinalgError::DimensionMismatch { expected: a.dim(), found: b.nrows() }.into());
    }
    let f = linalg::spectral_factor(a)?;
    if !(f.min() > 0.0) {
        return Err(TheoryError::NotSpd);
    }
    let an = f.max();
    let bf = b.norm();
    let tol = tolerance::MATRIX_INEQUALITY;
    let prod = (a.as_matrix() * b).norm();
    let cong = (b.transpose() * a.as_matrix() * b).norm();
    let product = InequalityCheck::relative("|AB|_F <= |A||B|_F", prod, an * bf, tol, 0.0);
    let congruence = InequalityCheck::relative("|B'AB|_F <= |A||B|_F^2", cong, an * bf * bf, tol, 0.0);
    Ok(Lemma2Report { product, congruence })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BanachReport {
    pub actual: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `‖(A+E)⁻¹‖ ≤ ‖A⁻¹‖/(1 − ‖A⁻¹‖‖E‖)` when `‖A⁻¹‖‖E‖ < 1`.
pub fn check_banach(a: &Matrix, e: &Matrix) -> Result<Applicability<BanachReport>, TheoryError> {
    let a_inv = a.clone().try_inverse().ok_or(TheoryError::SingularA)?;
    let ai = linalg::operator_norm(&a_inv)?;
    let product = ai * linalg::operator_norm(e)?;
    if !(product < 1.0) {
        return Ok(Applicability::HypothesisViolated(format!("|A^-1||E| = {product} >= 1")));
    }
    let bound = ai / (1.0 - product);
    let actual = match (a + e).try_inverse() {
        Some(inv) => linalg::operator_norm(&inv)?,
        None => f64::INFINITY,
    };
    let pass = actual <= bound * (1.0 + tolerance::MATRIX_INEQUALITY);
    Ok(Applicability::Checked(BanachReport { actual, bound, pass }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialAudit {
    /// Potential after the update.
    pub lhs: f64,
    pub rhs: f64,
    pub previous: f64,
    /// `‖(X̂−I)v‖²/(2δ‖v‖²)`.
    pub decrease: f64,
    /// `W_k` or `V_k`.
    pub weight: f64,
    pub tau: f64,
    pub pass: bool,
    /// Fails with `2δ` but holds with the weaker `4δ` decrease term.
    pub only_weaker_form_holds: bool,
}

fn audit(
    prev: &SymMatrix,
    prev_potential: f64,
    next_potential: f64,
    direction: &Vector,
    tau: f64,
    delta: f64,
    weight: f64,
) -> PotentialAudit {
    let dev = prev.minus_identity();
    let num = (dev.as_matrix() * direction).norm_squared();
    let decrease = if delta == 0.0 || num == 0.0 { 0.0 } else { num / (2.0 * delta * direction.norm_squared()) };
    let rhs = prev_potential - decrease + weight * tau;
    let allowance = tolerance::POTENTIAL_AUDIT * rhs.abs().max(1.0);
    let pass = next_potential <= rhs + allowance;
    let weaker = prev_potential - decrease / 2.0 + weight * tau;
    PotentialAudit {
        lhs: next_potential,
        rhs,
        previous: prev_potential,
        decrease,
        weight,
        tau,
        pass,
        only_weaker_form_holds: !pass && next_potential <= weaker + allowance,
    }
}

struct AuditInputs<'a> {
    prev: &'a SymMatrix,
    prev_potential: f64,
    next_potential: f64,
    tau: f64,
}

fn audit_inputs<'a>(
    prev: Option<&'a SymMatrix>,
    prev_potential: Option<f64>,
    next_potential: Option<f64>,
    tau: Option<f64>,
    delta: f64,
) -> Result<AuditInputs<'a>, Applicability<PotentialAudit>> {
    let (Some(prev), Some(pp), Some(np)) = (prev, prev_potential, next_potential) else {
        return Err(Applicability::NotApplicable("hatted matrices not materialized".into()));
    };
    let Some(tau) = tau else {
        return Err(Applicability::NotApplicable("tau undefined".into()));
    };
    if !(tau < 1.0) {
        return Err(Applicability::HypothesisViolated(format!("tau = {tau} >= 1")));
    }
    if pp > delta {
        return Err(Applicability::HypothesisViolated(format!("potential {pp} exceeds delta {delta}")));
    }
    Ok(AuditInputs { prev, prev_potential: pp, next_potential: np, tau })
}

/// Potential decrease of `‖B̂ − I‖_F` across one DFP step.
pub fn dfp_potential_audit(fk: &WeightedFrame, fk1: &WeightedFrame, delta: f64) -> Applicability<PotentialAudit> {
    let inputs = match audit_inputs(fk.b_hat.as_ref(), fk.potential_b, fk1.potential_b, fk.tau, delta) {
        Ok(i) => i,
        Err(a) => return a,
    };
    let Some(s) = fk.s_hat.as_ref().filter(|s| s.norm() > 0.0) else {
        return Applicability::NotApplicable("no step".into());
    };
    let norm = match linalg::spectral_norm(inputs.prev) {
        Ok(n) => n,
        Err(e) => return Applicability::NotApplicable(e.to_string()),
    };
    let t = inputs.tau;
    let w = norm * 4.0 / (1.0 - t) + norm * 4.0 * t / ((1.0 - t) * (1.0 - t)) + (3.0 + t) / (1.0 - t);
    Applicability::Checked(audit(inputs.prev, inputs.prev_potential, inputs.next_potential, s, t, delta, w))
}

/// Potential decrease of `‖Ĥ − I‖_F` across one BFGS step.
pub fn bfgs_potential_audit(fk: &WeightedFrame, fk1: &WeightedFrame, delta: f64) -> Applicability<PotentialAudit> {
    let inputs = match audit_inputs(fk.h_hat.as_ref(), fk.potential_h, fk1.potential_h, fk.tau, delta) {
        Ok(i) => i,
        Err(a) => return a,
    };
    let Some(y) = fk.y_hat.as_ref().filter(|y| y.norm() > 0.0) else {
        return Applicability::NotApplicable("no step".into());
    };
    let norm = match linalg::spectral_norm(inputs.prev) {
        Ok(n) => n,
        Err(e) => return Applicability::NotApplicable(e.to_string()),
    };
    let t = inputs.tau;
    let v = norm * 4.0 / (1.0 - t)
        + norm * 4.0 * (1.0 + t) * (1.0 + t) * t / ((1.0 - t) * (1.0 - t))
        + (3.0 + 2.0 * t) / (1.0 - t);
    Applicability::Checked(audit(inputs.prev, inputs.prev_potential, inputs.next_potential, y, t, delta, v))
}

/// Verdicts for one iterate. `None` means the check does not apply here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorStep {
    pub k: usize,
    /// Below the residual floor: float noise dominates and nothing is checked.
    pub suspended: bool,
    pub contraction: Option<InequalityCheck>,
    pub potential: Option<InequalityCheck>,
    pub norm: Option<InequalityCheck>,
    pub inverse_norm: Option<InequalityCheck>,
    pub envelope: Option<InequalityCheck>,
}

impl MonitorStep {
    pub fn checks(&self) -> impl Iterator<Item = &InequalityCheck> {
        [&self.contraction, &self.potential, &self.norm, &self.inverse_norm, &self.envelope]
            .into_iter()
            .flatten()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerdictCounts {
    pub passed: usize,
    pub failed: usize,
    pub suspended: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub system: System,
    pub triple: ConditionTriple,
    /// `σ₀ ≤ ε` and initial potential `≤ δ`.
    pub initial: Vec<InequalityCheck>,
    pub steps: Vec<MonitorStep>,
    /// `Σ σ_k ≤ ε/(1−r)`.
    pub cumulative_sigma: InequalityCheck,
}

impl MonitorReport {
    pub fn hypotheses_hold(&self) -> bool {
        all_pass(&self.initial)
    }

    pub fn conclusions_pass(&self) -> bool {
        self.cumulative_sigma.pass && self.steps.iter().all(|s| s.checks().all(|c| c.pass))
    }

    pub fn counts(&self) -> VerdictCounts {
        let mut c = VerdictCounts::default();
        for step in &self.steps {
            if step.suspended {
                c.suspended += 1;
            }
            for check in step.checks() {
                if check.pass {
                    c.passed += 1;
                } else {
                    c.failed += 1;
                }
            }
        }
        if self.cumulative_sigma.pass {
            c.passed += 1;
        } else {
            c.failed += 1;
        }
        c
    }

    pub fn failures(&self) -> Vec<(usize, &InequalityCheck)> {
        self.steps
            .iter()
            .flat_map(|s| s.checks().filter(|c| !c.pass).map(move |c| (s.k, c)))
            .collect()
    }
}

/// Replays the conclusions of the local-convergence lemmas along `frames`.
pub fn trajectory_monitor(frames: &[WeightedFrame], system: System, triple: &ConditionTriple) -> MonitorReport {
    let tol = tolerance::MONITOR;
    let ConditionTriple { r, epsilon, delta } = *triple;
    let potential_of = |f: &WeightedFrame| match system {
        System::Dfp => f.potential_b,
        System::Bfgs => f.potential_h,
    };
    let matrix_of = |f: &WeightedFrame| match system {
        System::Dfp => f.b_hat.clone(),
        System::Bfgs => f.h_hat.clone(),
    };

    let mut initial = Vec::new();
    if let Some(f0) = frames.first() {
        initial.push(InequalityCheck::exact("sigma_0 <= epsilon", f0.sigma, epsilon));
        if let Some(p0) = potential_of(f0) {
            initial.push(InequalityCheck::exact("initial potential <= delta", p0, delta));
        }
    }

    let r0 = frames.first().map_or(0.0, |f| f.r_norm());
    let floor = tolerance::RESIDUAL_FLOOR * r0;
    let inverse_bound = match system {
        System::Dfp => 1.0 + r,
        System::Bfgs => 1.0 / (1.0 - r),
    };
    let form = EnvelopeForm::for_system(system);

    let steps = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let suspended = f.r_norm() <= floor;
            let mut step = MonitorStep {
                k: f.k,
                suspended,
                contraction: None,
                potential: None,
                norm: None,
                inverse_norm: None,
                envelope: None,
            };
            if suspended {
                return step;
            }
            if let Some(next) = frames.get(i + 1) {
                step.contraction = Some(InequalityCheck::relative(
                    "sigma_{k+1} <= r sigma_k",
                    next.sigma,
                    r * f.sigma,
                    tol,
                    f.sigma,
                ));
            }
            if let Some(p) = potential_of(f) {
                step.potential = Some(InequalityCheck::relative("potential <= 2 delta", p, 2.0 * delta, tol, 1.0));
            }
            if let Some(m) = matrix_of(f) {
                if let Ok(fac) = linalg::spectral_factor(&m) {
                    let (lo, hi) = (fac.min(), fac.max());
                    step.norm = Some(InequalityCheck::relative("|X| <= 2 delta + 1", hi, 2.0 * delta + 1.0, tol, 1.0));
                    let inv = if lo > 0.0 { 1.0 / lo } else { f64::INFINITY };
                    step.inverse_norm = Some(InequalityCheck::relative("|X^-1| bound", inv, inverse_bound, tol, 1.0));
                }
            }
            if f.k >= 1 && r0 > 0.0 {
                if let Ok(env) = rate_envelope(form, Some(triple), f.k) {
                    step.envelope = Some(InequalityCheck::relative(
                        "ratio <= envelope",
                        f.r_norm() / r0,
                        env,
                        tolerance::ENVELOPE,
                        0.0,
                    ));
                }
            }
            step
        })
        .collect();

    let total: f64 = frames.iter().map(|f| f.sigma).sum();
    let cumulative_sigma =
        InequalityCheck::relative("sum sigma <= epsilon/(1-r)", total, epsilon / (1.0 - r), tol, 0.0);
    MonitorReport { system, triple: *triple, initial, steps, cumulative_sigma }
}
