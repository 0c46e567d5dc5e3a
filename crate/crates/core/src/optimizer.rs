//! Unit-step DFP, BFGS, Newton and gradient descent with full trace
//! recording.
//!
//! The quasi-Newton methods step with the inverse approximation `H_k`
//! (`x_{k+1} = x_k − H_k ∇f(x_k)`). DFP keeps `H_k` through the
//! Sherman–Morrison–Woodbury form of its update and can additionally carry
//! the Hessian approximation `B_k` for auditing.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError, SymMatrix, Vector};
use crate::objectives::{LocalConstants, Objective, ObjectiveModel};
use crate::tolerance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UpdateError {
    #[error("curvature condition violated: sᵀy = {sy:e} <= {bound:e}")]
    CurvatureViolation { sy: f64, bound: f64 },
    #[error("degenerate denominator yᵀHy = {value:e} <= {bound:e}")]
    DegenerateDenominator { value: f64, bound: f64 },
    #[error("dimension mismatch in update: matrix {matrix}, vectors {s} and {y}")]
    DimensionMismatch { matrix: usize, s: usize, y: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("x0 has length {found}, objective has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("gradient descent needs a positive step size")]
    MissingStep,
    #[error("step size is only meaningful for gradient descent")]
    UnexpectedStep,
    #[error("initial matrix must be symmetric positive definite: {0}")]
    InitNotSpd(LinalgError),
    #[error("scaled identity needs a positive finite scale, got {0}")]
    BadScale(f64),
    #[error("x0 contains non-finite entries")]
    NonFiniteStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Dfp,
    Bfgs,
    Newton,
    GradientDescent,
}

impl Method {
    pub fn is_quasi_newton(self) -> bool {
        matches!(self, Self::Dfp | Self::Bfgs)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Dfp => "dfp",
            Self::Bfgs => "bfgs",
            Self::Newton => "newton",
            Self::GradientDescent => "gd",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dfp" => Some(Self::Dfp),
            "bfgs" => Some(Self::Bfgs),
            "newton" => Some(Self::Newton),
            "gd" | "gradient-descent" => Some(Self::GradientDescent),
            _ => None,
        }
    }
}

/// How the initial Hessian approximation `B_0` is chosen; `H_0 = B_0⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    ExactHessianAtX0,
    Identity,
    /// `B_0 = c·I`.
    ScaledIdentity(f64),
    Explicit(SymMatrix),
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_iters: usize,
    pub x0: Vector,
    pub init_policy: InitPolicy,
    pub gd_step: Option<f64>,
    pub stop_grad_tol: f64,
    /// `None` selects the scale-aware default `STEP_ZERO · (1 + ‖x_k‖)`.
    pub stop_step_tol: Option<f64>,
    /// DFP only: also carry `B_k` via the direct update.
    pub track_hessian_approx: bool,
    /// Matrices are stored in the trace only up to this dimension.
    pub record_matrices_up_to: usize,
}

impl OptimizerConfig {
    pub fn new(method: Method, x0: Vector) -> Self {
        Self {
            method,
            max_iters: 60,
            x0,
            init_policy: InitPolicy::ExactHessianAtX0,
            gd_step: None,
            stop_grad_tol: 0.0,
            stop_step_tol: None,
            track_hessian_approx: method == Method::Dfp,
            record_matrices_up_to: tolerance::DEFAULT_AUDIT_CAP,
        }
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_init(mut self, policy: InitPolicy) -> Self {
        self.init_policy = policy;
        self
    }

    pub fn with_gd_step(mut self, eta: f64) -> Self {
        self.gd_step = Some(eta);
        self
    }

    fn step_tol(&self, x: &Vector) -> f64 {
        self.stop_step_tol
            .unwrap_or_else(|| tolerance::STEP_ZERO * (1.0 + x.norm()))
    }

    fn validate(&self, dim: usize) -> Result<(), ConfigError> {
        if self.x0.len() != dim {
            return Err(ConfigError::DimensionMismatch { expected: dim, found: self.x0.len() });
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(ConfigError::NonFiniteStart);
        }
        match (self.method, self.gd_step) {
            (Method::GradientDescent, Some(eta)) if eta > 0.0 && eta.is_finite() => {}
            (Method::GradientDescent, _) => return Err(ConfigError::MissingStep),
            (_, Some(_)) => return Err(ConfigError::UnexpectedStep),
            _ => {}
        }
        match &self.init_policy {
            InitPolicy::ScaledIdentity(c) if !(*c > 0.0 && c.is_finite()) => {
                Err(ConfigError::BadScale(*c))
            }
            InitPolicy::Explicit(m) if m.dim() != dim => {
                Err(ConfigError::DimensionMismatch { expected: dim, found: m.dim() })
            }
            InitPolicy::Explicit(m) => linalg::inverse_spd(m).map(|_| ()).map_err(ConfigError::InitNotSpd),
            _ => Ok(()),
        }
    }
}

/// One iterate of a run.
///
/// `s` and `y` describe the step taken from this iterate; they are absent on
/// the final record. `h`/`b` are the approximations used at this iterate
/// and are only stored up to [`OptimizerConfig::record_matrices_up_to`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vector,
    pub grad: Vector,
    pub s: Option<Vector>,
    pub y: Option<Vector>,
    pub h: Option<SymMatrix>,
    pub b: Option<SymMatrix>,
    pub step_accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    MaxIters,
    StepZero,
    GradTol,
    NumericalBreakdown(String),
}

impl Termination {
    pub fn label(&self) -> String {
        match self {
            Self::MaxIters => "max_iters".into(),
            Self::StepZero => "step_zero".into(),
            Self::GradTol => "grad_tol".into(),
            Self::NumericalBreakdown(why) => format!("numerical_breakdown: {why}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub config: OptimizerConfig,
    pub objective: String,
    pub constants: LocalConstants,
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    /// `x0` lies outside the ball on which the constants were certified.
    pub started_outside_ball: bool,
}

impl Trace {
    pub fn last(&self) -> &IterateRecord {
        self.records.last().expect("a trace holds at least the k = 0 record")
    }
}

fn check_update_dims(m: &SymMatrix, s: &Vector, y: &Vector) -> Result<(), UpdateError> {
    if m.dim() == s.len() && s.len() == y.len() {
        Ok(())
    } else {
        Err(UpdateError::DimensionMismatch { matrix: m.dim(), s: s.len(), y: y.len() })
    }
}

fn curvature(s: &Vector, y: &Vector) -> Result<f64, UpdateError> {
    let sy = s.dot(y);
    let bound = tolerance::CURVATURE * s.norm() * y.norm();
    if sy > bound {
        Ok(sy)
    } else {
        Err(UpdateError::CurvatureViolation { sy, bound })
    }
}

/// `(I − a bᵀ/aᵀb) M (I − b aᵀ/aᵀb) + a aᵀ/aᵀb`, expanded into rank-one
/// terms so it costs O(d²).
///
/// With `(a, b) = (y, s)` this is the DFP Hessian update; with
/// `(a, b) = (s, y)` it is the BFGS inverse update.
fn projected_rank_two(m: &SymMatrix, a: &Vector, b: &Vector, ab: f64) -> SymMatrix {
    let rho = 1.0 / ab;
    let u = m.as_matrix() * b;
    let c = rho * rho * b.dot(&u) + rho;
    let mut out = m.as_matrix().clone();
    out.ger(-rho, a, &u, 1.0);
    out.ger(-rho, &u, a, 1.0);
    out.ger(c, a, a, 1.0);
    SymMatrix::from_upper(out).expect("square input")
}

/// DFP update of the Hessian approximation `B`.
pub fn dfp_update_b(b: &SymMatrix, s: &Vector, y: &Vector) -> Result<SymMatrix, UpdateError> {
    check_update_dims(b, s, y)?;
    let sy = curvature(s, y)?;
    Ok(projected_rank_two(b, y, s, sy))
}

/// DFP update of the inverse approximation `H`:
/// `H − H y yᵀ H / (yᵀ H y) + s sᵀ / (sᵀ y)`.
pub fn dfp_update_h(h: &SymMatrix, s: &Vector, y: &Vector) -> Result<SymMatrix, UpdateError> {
    check_update_dims(h, s, y)?;
    let sy = curvature(s, y)?;
    let hy = h.as_matrix() * y;
    let yhy = y.dot(&hy);
    // ‖H‖_F bounds the spectral norm from above and avoids an eigensolve.
    let bound = tolerance::DEGENERATE_DENOMINATOR * y.norm_squared() * h.as_matrix().norm();
    if !(yhy > bound) {
        return Err(UpdateError::DegenerateDenominator { value: yhy, bound });
    }
    let mut out = h.as_matrix().clone();
    out.ger(-1.0 / yhy, &hy, &hy, 1.0);
    out.ger(1.0 / sy, s, s, 1.0);
    Ok(SymMatrix::from_upper(out).expect("square input"))
}

/// BFGS update of the inverse approximation `H`.
pub fn bfgs_update_h(h: &SymMatrix, s: &Vector, y: &Vector) -> Result<SymMatrix, UpdateError> {
    check_update_dims(h, s, y)?;
    let sy = curvature(s, y)?;
    Ok(projected_rank_two(h, s, y, sy))
}

/// Solver state at iterate `k`.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub k: usize,
    pub x: Vector,
    pub grad: Vector,
    pub h: Option<SymMatrix>,
    pub b: Option<SymMatrix>,
}

impl SolverState {
    /// State at `x0` with the initial approximations of `config`.
    pub fn initial(obj: &dyn Objective, config: &OptimizerConfig) -> Result<Self, ConfigError> {
        config.validate(obj.dim())?;
        let x = config.x0.clone();
        let grad = obj.gradient(&x);
        let (h, b) = if config.method.is_quasi_newton() {
            let (h0, b0) = match &config.init_policy {
                InitPolicy::ExactHessianAtX0 => {
                    let hess = obj.hessian(&x);
                    let inv = hess.inverse().map_err(ConfigError::InitNotSpd)?;
                    (inv.to_dense(), hess.to_dense())
                }
                InitPolicy::Identity => (SymMatrix::identity(x.len()), SymMatrix::identity(x.len())),
                InitPolicy::ScaledIdentity(c) => (
                    SymMatrix::identity(x.len()).scaled(1.0 / c),
                    SymMatrix::identity(x.len()).scaled(*c),
                ),
                InitPolicy::Explicit(m) => {
                    (linalg::inverse_spd(m).map_err(ConfigError::InitNotSpd)?, m.clone())
                }
            };
            let keep_b = config.method == Method::Dfp && config.track_hessian_approx;
            (Some(h0), keep_b.then_some(b0))
        } else {
            (None, None)
        };
        Ok(Self { k: 0, x, grad, h, b })
    }

    fn record(&self, store_matrices: bool) -> IterateRecord {
        IterateRecord {
            k: self.k,
            x: self.x.clone(),
            grad: self.grad.clone(),
            s: None,
            y: None,
            h: if store_matrices { self.h.clone() } else { None },
            b: if store_matrices { self.b.clone() } else { None },
            step_accepted: false,
        }
    }
}

/// Result of one iteration.
///
/// `record` describes iterate `k`. `next` is the successor when it was
/// computed; `stop` is set when the run must end.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub record: IterateRecord,
    pub next: Option<SolverState>,
    pub stop: Option<Termination>,
}

fn breakdown(record: IterateRecord, next: Option<SolverState>, why: impl ToString) -> StepResult {
    StepResult { record, next, stop: Some(Termination::NumericalBreakdown(why.to_string())) }
}

/// Advances `state` by one unit step of `config.method`.
pub fn step(obj: &dyn Objective, state: &SolverState, config: &OptimizerConfig) -> StepResult {
    let store = obj.dim() <= config.record_matrices_up_to;
    let mut record = state.record(store);

    let direction = match config.method {
        Method::Dfp | Method::Bfgs => {
            let h = state.h.as_ref().expect("quasi-Newton state carries H");
            -(h.as_matrix() * &state.grad)
        }
        Method::Newton => match obj.hessian(&state.x).solve(&state.grad) {
            Ok(d) => -d,
            Err(e) => return breakdown(record, None, format!("newton solve: {e}")),
        },
        Method::GradientDescent => &state.grad * -config.gd_step.expect("validated"),
    };

    let x_next = &state.x + &direction;
    let s = &x_next - &state.x;
    if !s.iter().all(|v| v.is_finite()) {
        return breakdown(record, None, "non-finite step");
    }
    record.s = Some(s.clone());
    if s.norm() <= config.step_tol(&state.x) {
        return StepResult { record, next: None, stop: Some(Termination::StepZero) };
    }

    let grad_next = obj.gradient(&x_next);
    let y = &grad_next - &state.grad;
    record.y = Some(y.clone());
    record.step_accepted = true;
    let mut next = SolverState { k: state.k + 1, x: x_next, grad: grad_next, h: None, b: None };
    if !next.grad.iter().all(|v| v.is_finite()) {
        return breakdown(record, Some(next), "non-finite gradient");
    }

    let updated = match config.method {
        Method::Bfgs => bfgs_update_h(state.h.as_ref().expect("H"), &s, &y).map(|h| (Some(h), None)),
        Method::Dfp => dfp_update_h(state.h.as_ref().expect("H"), &s, &y).and_then(|h| {
            let b = state.b.as_ref().map(|b| dfp_update_b(b, &s, &y)).transpose()?;
            Ok((Some(h), b))
        }),
        Method::Newton | Method::GradientDescent => Ok((None, None)),
    };
    match updated {
        Ok((h, b)) => {
            next.h = h;
            next.b = b;
            StepResult { record, next: Some(next), stop: None }
        }
        Err(e) => breakdown(record, Some(next), e),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Runs `config` on `model` until termination. Deterministic in its inputs.
pub fn run(model: &ObjectiveModel, config: &OptimizerConfig) -> Result<Trace, RunError> {
    let obj = model.oracle.as_ref();
    let mut state = SolverState::initial(obj, config)?;
    let store = obj.dim() <= config.record_matrices_up_to;
    let started_outside_ball = (&config.x0 - model.optimum()).norm() > model.constants.radius;

    let mut records = Vec::new();
    let termination = loop {
        if state.grad.norm() <= config.stop_grad_tol {
            records.push(state.record(store));
            break Termination::GradTol;
        }
        if state.k >= config.max_iters {
            records.push(state.record(store));
            break Termination::MaxIters;
        }
        let StepResult { record, next, stop } = step(obj, &state, config);
        records.push(record);
        match (next, stop) {
            (Some(next), None) => state = next,
            (next, Some(reason)) => {
                if let Some(last) = next {
                    records.push(last.record(store));
                }
                break reason;
            }
            (None, None) => unreachable!("a step either advances or stops"),
        }
    };

    Ok(Trace {
        config: config.clone(),
        objective: obj.name(),
        constants: model.constants,
        records,
        termination,
        started_outside_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::objectives::BuiltinKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
        let r = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::from_upper(r.transpose() * &r + Matrix::identity(d, d) * 0.5).unwrap()
    }

    fn admissible_pair(rng: &mut ChaCha8Rng, d: usize) -> (Vector, Vector) {
        loop {
            let s = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let y = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            if s.dot(&y) > 0.1 * s.norm() * y.norm() {
                return (s, y);
            }
        }
    }

    /// Direct evaluation of the projected form with dense products.
    fn naive_projected(m: &SymMatrix, a: &Vector, b: &Vector) -> Matrix {
        let d = m.dim();
        let ab = a.dot(b);
        let left = Matrix::identity(d, d) - a * b.transpose() / ab;
        let right = Matrix::identity(d, d) - b * a.transpose() / ab;
        left * m.as_matrix() * right + a * a.transpose() / ab
    }

    #[test]
    fn dfp_b_fixed_point_and_secant() {
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let b = dfp_update_b(&SymMatrix::identity(2), &e1, &e1).unwrap();
        assert!((b.as_matrix() - Matrix::identity(2, 2)).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let b = random_spd(&mut rng, 4);
            let (s, y) = admissible_pair(&mut rng, 4);
            let bp = dfp_update_b(&b, &s, &y).unwrap();
            assert!((bp.as_matrix() * &s - &y).norm() <= 1e-10 * y.norm());
            let naive = naive_projected(&b, &y, &s);
            assert!((bp.as_matrix() - &naive).amax() <= 1e-12 * naive.amax().max(1.0));
        }
    }

    #[test]
    fn dfp_h_secant_and_inverse_consistency() {
        let e1 = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let h = dfp_update_h(&SymMatrix::identity(3), &e1, &e1).unwrap();
        assert!((h.as_matrix() - Matrix::identity(3, 3)).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let b = random_spd(&mut rng, 5);
            let (s, y) = admissible_pair(&mut rng, 5);
            let h = linalg::inverse_spd(&b).unwrap();
            let hp = dfp_update_h(&h, &s, &y).unwrap();
            assert!((hp.as_matrix() * &y - &s).norm() <= 1e-10 * s.norm());
            let bp = dfp_update_b(&b, &s, &y).unwrap();
            let oracle = Matrix::from_columns(
                &(0..5)
                    .map(|j| linalg::solve_spd(&bp, &Vector::from_fn(5, |i, _| if i == j { 1.0 } else { 0.0 })).unwrap())
                    .collect::<Vec<_>>(),
            );
            assert!((hp.as_matrix() - &oracle).norm() <= 1e-8 * oracle.norm());
        }
    }

    #[test]
    fn bfgs_h_matches_naive_formula_and_dual() {
        let e = Vector::from_vec(vec![0.6, 0.8]);
        let h = bfgs_update_h(&SymMatrix::identity(2), &e, &e).unwrap();
        assert!((h.as_matrix() - Matrix::identity(2, 2)).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let h = random_spd(&mut rng, 4);
            let (s, y) = admissible_pair(&mut rng, 4);
            let hp = bfgs_update_h(&h, &s, &y).unwrap();
            assert!((hp.as_matrix() * &y - &s).norm() <= 1e-10 * s.norm());
            let naive = naive_projected(&h, &s, &y);
            assert!((hp.as_matrix() - &naive).amax() <= 1e-12 * naive.amax().max(1.0));
            assert_eq!(hp, dfp_update_b(&h, &y, &s).unwrap());
        }
    }

    #[test]
    fn updates_reject_bad_curvature() {
        let h = SymMatrix::identity(2);
        let s = Vector::from_vec(vec![1.0, 0.0]);
        let y = Vector::from_vec(vec![-1.0, 0.0]);
        for result in [bfgs_update_h(&h, &s, &y), dfp_update_h(&h, &s, &y), dfp_update_b(&h, &s, &y)] {
            assert!(matches!(result, Err(UpdateError::CurvatureViolation { .. })));
        }
        let y = Vector::from_vec(vec![0.0, 1.0]);
        assert!(matches!(bfgs_update_h(&h, &s, &y), Err(UpdateError::CurvatureViolation { .. })));
    }

    fn quadratic(rng: &mut ChaCha8Rng, d: usize) -> ObjectiveModel {
        let a = random_spd(rng, d);
        let b = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        ObjectiveModel::builtin(BuiltinKind::Quadratic { a, b }, d, 10.0).unwrap()
    }

    #[test]
    fn quasi_newton_with_exact_inverse_solves_quadratic_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = quadratic(&mut rng, 6);
        let x0 = Vector::from_element(6, 1.5);
        for method in [Method::Bfgs, Method::Dfp, Method::Newton] {
            let trace = run(&model, &OptimizerConfig::new(method, x0.clone()).with_max_iters(1)).unwrap();
            let err = (&trace.records[1].x - model.optimum()).norm();
            assert!(err <= 1e-10 * (&x0 - model.optimum()).norm(), "{method:?}: {err:e}");
        }
    }

    #[test]
    fn gradient_descent_contracts_on_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = quadratic(&mut rng, 4);
        let (mu, l) = (model.constants.mu, model.constants.lip_grad);
        let x0 = Vector::from_element(4, -2.0);
        let config = OptimizerConfig::new(Method::GradientDescent, x0.clone())
            .with_gd_step(1.0 / l)
            .with_max_iters(1);
        let trace = run(&model, &config).unwrap();
        let before = (&x0 - model.optimum()).norm();
        let after = (&trace.records[1].x - model.optimum()).norm();
        assert!(after <= (1.0 - mu / l) * before * (1.0 + 1e-12));
    }

    /// Independent loop: H₀ = ∇²f(x₀)⁻¹ and the naive BFGS formula.
    fn reference_bfgs(model: &ObjectiveModel, x0: &Vector, iters: usize) -> Vec<Vector> {
        let obj = model.oracle.as_ref();
        let mut x = x0.clone();
        let mut h = SymMatrix::from_upper(linalg::inverse_spd(&obj.hessian(&x).to_dense()).unwrap().into_inner()).unwrap();
        let mut out = vec![x.clone()];
        for _ in 0..iters {
            let g = obj.gradient(&x);
            let xn = &x - h.as_matrix() * &g;
            let s = &xn - &x;
            let y = obj.gradient(&xn) - &g;
            if s.norm() < 1e-14 || s.dot(&y) <= 0.0 {
                break;
            }
            h = SymMatrix::from_upper(naive_projected(&h, &s, &y)).unwrap();
            x = xn;
            out.push(x.clone());
        }
        out
    }

    #[test]
    fn bfgs_on_f1_is_monotone_and_matches_reference() {
        let model = ObjectiveModel::builtin(BuiltinKind::F1, 2, 1.0).unwrap();
        let x0 = Vector::from_element(2, 0.45);
        let trace = run(&model, &OptimizerConfig::new(Method::Bfgs, x0.clone()).with_max_iters(10)).unwrap();
        let reference = reference_bfgs(&model, &x0, 10);
        let n = trace.records.len().min(reference.len());
        assert!(n >= 5);
        let dists: Vec<f64> = trace.records.iter().take(n).map(|r| r.x.norm()).collect();
        for (k, w) in dists.windows(2).enumerate() {
            assert!(w[1] <= w[0] || w[0] < 1e-15, "k={k}: {} -> {}", w[0], w[1]);
        }
        for k in 0..n {
            let gap = (&trace.records[k].x - &reference[k]).norm();
            assert!(gap <= 1e-12 * reference[0].norm().max(1.0), "k={k} gap={gap:e}");
        }
    }

    #[test]
    fn zero_iterations_records_start_only() {
        let model = ObjectiveModel::builtin(BuiltinKind::F1, 3, 1.0).unwrap();
        let trace = run(&model, &OptimizerConfig::new(Method::Bfgs, Vector::from_element(3, 0.2)).with_max_iters(0)).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].k, 0);
        assert_eq!(trace.termination, Termination::MaxIters);
    }

    #[test]
    fn newton_terminates_after_one_step_on_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = quadratic(&mut rng, 3);
        let trace = run(&model, &OptimizerConfig::new(Method::Newton, Vector::from_element(3, 1.0))).unwrap();
        assert!(matches!(trace.termination, Termination::StepZero | Termination::GradTol));
        assert!(trace.records.len() <= 3);
        assert!((&trace.records[1].x - model.optimum()).norm() < 1e-12);
    }

    #[test]
    fn runs_are_deterministic_and_use_unit_steps() {
        let model = ObjectiveModel::builtin(BuiltinKind::F2, 5, 1.0).unwrap();
        let config = OptimizerConfig::new(Method::Dfp, Vector::from_element(5, 0.6));
        let a = run(&model, &config).unwrap();
        let b = run(&model, &config).unwrap();
        assert_eq!(a.records, b.records);
        for pair in a.records.windows(2) {
            let h = pair[0].h.as_ref().unwrap();
            let direction = -(h.as_matrix() * &pair[0].grad);
            let s = &pair[1].x - &pair[0].x;
            assert!((&s - &direction).norm() <= 1e-15 * (1.0 + pair[0].x.norm()));
        }
    }

    #[test]
    fn dfp_keeps_b_and_h_consistent() {
        let model = ObjectiveModel::builtin(BuiltinKind::F1, 8, 1.0).unwrap();
        let trace = run(&model, &OptimizerConfig::new(Method::Dfp, Vector::from_element(8, 0.3)).with_max_iters(50)).unwrap();
        for r in &trace.records {
            if let (Some(h), Some(b)) = (&r.h, &r.b) {
                let gap = (b.as_matrix() * h.as_matrix() - Matrix::identity(8, 8)).norm();
                assert!(gap <= 1e-6, "k={} gap={gap:e}", r.k);
                assert_eq!(h.as_matrix(), &h.as_matrix().transpose());
                let min = linalg::spectral_factor(h).unwrap().min();
                assert!(min > 0.0);
            }
        }
    }

    #[test]
    fn config_validation() {
        let model = ObjectiveModel::builtin(BuiltinKind::F1, 2, 1.0).unwrap();
        let x0 = Vector::from_element(2, 0.1);
        let gd = OptimizerConfig::new(Method::GradientDescent, x0.clone());
        assert_eq!(run(&model, &gd).unwrap_err(), RunError::Config(ConfigError::MissingStep));
        let bfgs = OptimizerConfig::new(Method::Bfgs, x0.clone()).with_gd_step(0.1);
        assert_eq!(run(&model, &bfgs).unwrap_err(), RunError::Config(ConfigError::UnexpectedStep));
        let bad = SymMatrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let explicit = OptimizerConfig::new(Method::Bfgs, x0.clone()).with_init(InitPolicy::Explicit(bad));
        assert!(matches!(run(&model, &explicit), Err(RunError::Config(ConfigError::InitNotSpd(_)))));
        let short = OptimizerConfig::new(Method::Bfgs, Vector::from_element(3, 0.1));
        assert!(matches!(run(&model, &short), Err(RunError::Config(ConfigError::DimensionMismatch { .. }))));
    }

    #[test]
    fn start_outside_ball_is_flagged_not_rejected() {
        let model = ObjectiveModel::builtin(BuiltinKind::F1, 2, 0.1).unwrap();
        let trace = run(&model, &OptimizerConfig::new(Method::Bfgs, Vector::from_element(2, 0.45))).unwrap();
        assert!(trace.started_outside_ball);
        assert!(trace.records.len() > 2);
    }
}
