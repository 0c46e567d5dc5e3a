//! Method comparisons on one objective, with CSV traces and a JSON summary.
//!
//! Each method writes `<output_dir>/<method>.csv`: comment lines starting
//! with `#` echo the configuration and constants, then the columns
//! `k, ratio, ratio_kth_root, sigma, tau, potential, env, env_root`.
//! Empty fields mean "not applicable"; `nan` marks a computation that
//! produced NaN and flags the run incomplete.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, SymMatrix, Vector};
use crate::metrics::{self, MetricContext, MetricError, WeightedFrame};
use crate::objectives::{
    certify_constants, load_quadratic_csv, BuiltinKind, ConstantsCertificate, LocalConstants, ObjectiveError,
    ObjectiveModel,
};
use crate::optimizer::{self, InitPolicy, Method, OptimizerConfig, RunError, Termination, Trace};
use crate::report::Applicability;
use crate::theory::{
    self, conditions, ConditionCertificate, ConditionTriple, MonitorReport, NeighborhoodRadii, System, TheoryError,
    VerdictCounts,
};
use crate::tolerance;

/// Ratio threshold used for iteration counts in method comparisons.
pub const COMPARISON_THRESHOLD: f64 = 1e-10;

/// Above this dimension Newton on a dense Hessian needs `allow_dense_newton`.
pub const DENSE_NEWTON_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Builtin(BuiltinKind),
    QuadraticFile(PathBuf),
}

impl ObjectiveSpec {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        match text.split_once(':') {
            Some(("quadratic", path)) => Ok(Self::QuadraticFile(PathBuf::from(path))),
            _ => Ok(Self::Builtin(BuiltinKind::from_name(text)?)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Builtin(k) => k.label().to_string(),
            Self::QuadraticFile(p) => format!("quadratic:{}", p.display()),
        }
    }

    fn kind(&self) -> Result<BuiltinKind, ExperimentError> {
        match self {
            Self::Builtin(k) => Ok(k.clone()),
            Self::QuadraticFile(p) => Ok(load_quadratic_csv(p)?),
        }
    }
}

/// How `x₀ = c·1` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartScale {
    Fixed(f64),
    /// The largest scale (with a safety margin) satisfying the initial
    /// conditions of the configured triple; see [`regime_scale`].
    Regime,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub dim: usize,
    pub x0_scale: StartScale,
    pub methods: Vec<Method>,
    pub init: InitPolicy,
    pub init_overrides: BTreeMap<&'static str, InitPolicy>,
    pub gd_step: Option<f64>,
    pub max_iters: usize,
    pub audit: bool,
    pub triple: Option<ConditionTriple>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Ball radius for the constants; default `1.1·‖x₀ − x*‖`.
    pub radius: Option<f64>,
    pub parallel: bool,
    pub allow_dense_newton: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveSpec::Builtin(BuiltinKind::F1),
            dim: 30,
            x0_scale: StartScale::Fixed(0.45),
            methods: vec![Method::Bfgs, Method::Newton, Method::GradientDescent],
            init: InitPolicy::ExactHessianAtX0,
            init_overrides: BTreeMap::new(),
            gd_step: None,
            max_iters: 60,
            audit: false,
            triple: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            radius: None,
            parallel: false,
            allow_dense_newton: false,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ExperimentError> {
    value.parse().map_err(|_| config_err(format!("{key}: not a number: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ExperimentError> {
    match value {
        "true" | "yes" | "1" | "" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(format!("{key}: not a boolean: {value:?}"))),
    }
}

/// Parses `exact-hessian`, `identity`, `scaled:<c>` or `explicit:<csv>`.
pub fn parse_init(value: &str) -> Result<InitPolicy, ExperimentError> {
    match value.split_once(':') {
        None if value == "exact-hessian" => Ok(InitPolicy::ExactHessianAtX0),
        None if value == "identity" => Ok(InitPolicy::Identity),
        Some(("scaled", c)) => Ok(InitPolicy::ScaledIdentity(parse_f64("init", c)?)),
        Some(("explicit", path)) => Ok(InitPolicy::Explicit(load_matrix_csv(Path::new(path))?)),
        _ => Err(config_err(format!("init: unknown policy {value:?}"))),
    }
}

fn init_label(p: &InitPolicy) -> String {
    match p {
        InitPolicy::ExactHessianAtX0 => "exact-hessian".into(),
        InitPolicy::Identity => "identity".into(),
        InitPolicy::ScaledIdentity(c) => format!("scaled:{c}"),
        InitPolicy::Explicit(m) => format!("explicit({0}x{0})", m.dim()),
    }
}

/// Square symmetric matrix, one row per line, `#` comments allowed.
pub fn load_matrix_csv(path: &Path) -> Result<SymMatrix, ExperimentError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut flat = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        for v in record?.iter() {
            flat.push(parse_f64("explicit", v)?);
        }
        rows += 1;
    }
    if flat.len() != rows * rows {
        return Err(config_err(format!("{}: expected a square matrix", path.display())));
    }
    SymMatrix::from_row_slice(rows, &flat).map_err(|e| config_err(e.to_string()))
}

impl ExperimentConfig {
    /// Applies one `key = value` setting. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "objective" => self.objective = ObjectiveSpec::parse(value)?,
            "dim" => {
                self.dim = value.parse().map_err(|_| config_err(format!("dim: {value:?}")))?;
            }
            "x0_scale" => {
                self.x0_scale = if value == "regime" {
                    StartScale::Regime
                } else {
                    StartScale::Fixed(parse_f64("x0_scale", value)?)
                };
            }
            "method" | "methods" => {
                self.methods = value
                    .split(',')
                    .map(|m| Method::from_label(m.trim()).ok_or_else(|| config_err(format!("unknown method {m:?}"))))
                    .collect::<Result<_, _>>()?;
            }
            "init" => self.init = parse_init(value)?,
            k if k.starts_with("init.") => {
                let method = Method::from_label(&k[5..]).ok_or_else(|| config_err(format!("unknown key {k:?}")))?;
                self.init_overrides.insert(method.label(), parse_init(value)?);
            }
            "gd_step" => self.gd_step = Some(parse_f64("gd_step", value)?),
            "max_iters" => {
                self.max_iters = value.parse().map_err(|_| config_err(format!("max_iters: {value:?}")))?;
            }
            "audit" => self.audit = parse_bool("audit", value)?,
            "triple" => self.triple = Some(ConditionTriple::parse(value)?),
            "out" | "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| config_err(format!("seed: {value:?}")))?,
            "radius" => self.radius = Some(parse_f64("radius", value)?),
            "parallel" => self.parallel = parse_bool("parallel", value)?,
            "allow_dense_newton" => self.allow_dense_newton = parse_bool("allow_dense_newton", value)?,
            other => return Err(config_err(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ExperimentError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.methods.is_empty() {
            return Err(config_err("at least one method is required"));
        }
        if self.dim == 0 {
            return Err(config_err("dim must be >= 1"));
        }
        if let StartScale::Fixed(c) = self.x0_scale {
            if !c.is_finite() {
                return Err(config_err("x0_scale must be finite"));
            }
        }
        if self.x0_scale == StartScale::Regime && self.triple.is_none() {
            return Err(config_err("x0_scale = regime needs a triple"));
        }
        Ok(())
    }

    pub fn init_for(&self, method: Method) -> InitPolicy {
        self.init_overrides.get(method.label()).cloned().unwrap_or_else(|| self.init.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [Self::Fig1, Self::Fig2, Self::Fig3, Self::Fig4, Self::Fig5, Self::Fig6];

    /// Accepts `fig1`..`fig6` or `1`..`6`.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim().to_ascii_lowercase();
        let n = t.strip_prefix("fig").unwrap_or(&t);
        match n {
            "1" => Some(Self::Fig1),
            "2" => Some(Self::Fig2),
            "3" => Some(Self::Fig3),
            "4" => Some(Self::Fig4),
            "5" => Some(Self::Fig5),
            "6" => Some(Self::Fig6),
            _ => None,
        }
    }

    pub fn spec(self) -> FigureSpec {
        let (kind, dim, scale) = match self {
            Self::Fig1 => (BuiltinKind::F1, 30, 0.45),
            Self::Fig2 => (BuiltinKind::F1, 3000, 0.45),
            Self::Fig3 => (BuiltinKind::F2, 30, 0.95),
            Self::Fig4 => (BuiltinKind::F2, 3000, 0.99),
            Self::Fig5 => (BuiltinKind::F3, 30, 1.0),
            Self::Fig6 => (BuiltinKind::F3, 3000, 0.99),
        };
        FigureSpec { id: self, objective: kind, dim, x0_scale: scale }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub id: FigureId,
    pub objective: BuiltinKind,
    pub dim: usize,
    pub x0_scale: f64,
}

impl FigureSpec {
    pub fn config(&self, output_dir: impl Into<PathBuf>) -> ExperimentConfig {
        ExperimentConfig {
            objective: ObjectiveSpec::Builtin(self.objective.clone()),
            dim: self.dim,
            x0_scale: StartScale::Fixed(self.x0_scale),
            methods: vec![Method::Bfgs, Method::Newton, Method::GradientDescent],
            output_dir: output_dir.into(),
            ..ExperimentConfig::default()
        }
    }
}

/// Objective, starting point and context shared by every method of one
/// experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: ObjectiveModel,
    pub ctx: MetricContext,
    pub x0: Vector,
    pub x0_scale: f64,
}

fn model_for(kind: &BuiltinKind, dim: usize, x0: &Vector, radius: Option<f64>) -> Result<ObjectiveModel, ExperimentError> {
    let b = crate::objectives::make_builtin(kind.clone(), dim)?;
    let radius = radius.unwrap_or_else(|| 1.1 * (x0 - crate::objectives::Objective::optimum(&b)).norm());
    let constants = b.analytic_constants(radius);
    Ok(ObjectiveModel::new(Arc::new(b), constants))
}

/// Initial potential for `system` when starting from the exact Hessian.
fn initial_potential(model: &ObjectiveModel, ctx: &MetricContext, x0: &Vector, system: System) -> Result<f64, ExperimentError> {
    let hess = model.oracle.hessian(x0);
    Ok(match system {
        System::Dfp => ctx.potential_b(&hess.to_dense())?,
        System::Bfgs => ctx.potential_h(&hess.inverse().map_err(MetricError::Linalg)?.to_dense())?,
    })
}

/// Whether `x₀ = c·1` satisfies `σ₀ ≤ ε`, initial potential `≤ δ` and lies
/// inside the exact-Hessian start radius.
fn in_regime(kind: &BuiltinKind, dim: usize, c: f64, system: System, triple: &ConditionTriple) -> Result<bool, ExperimentError> {
    let x0 = Vector::from_element(dim, c);
    let model = model_for(kind, dim, &x0, None)?;
    let ctx = metrics::build_context(&model)?;
    let cert = conditions(system, triple);
    let radius = cert.radii(&model.constants, dim).exact_hessian_start;
    Ok(ctx.sigma(&x0)? <= triple.epsilon
        && (&x0 - model.optimum()).norm() <= radius
        && initial_potential(&model, &ctx, &x0, system)? <= triple.delta)
}

/// Scale `c` for `x₀ = c·1` inside the initialization regime of `triple`,
/// at 90% of the largest admissible value found by bisection.
pub fn regime_scale(kind: &BuiltinKind, dim: usize, system: System, triple: &ConditionTriple) -> Result<f64, ExperimentError> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if in_regime(kind, dim, hi, system, triple)? {
        return Ok(hi);
    }
    let mut found = false;
    for _ in 0..200 {
        let mid = if lo == 0.0 { hi / 2.0 } else { 0.5 * (lo + hi) };
        if in_regime(kind, dim, mid, system, triple)? {
            lo = mid;
            found = true;
        } else {
            hi = mid;
        }
        if found && hi - lo <= 1e-6 * hi {
            break;
        }
    }
    if !found {
        return Err(config_err("no admissible starting scale found"));
    }
    Ok(0.9 * lo)
}

fn system_of(method: Method) -> Option<System> {
    match method {
        Method::Dfp => Some(System::Dfp),
        Method::Bfgs => Some(System::Bfgs),
        _ => None,
    }
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let kind = config.objective.kind()?;
        let scale = match config.x0_scale {
            StartScale::Fixed(c) => c,
            StartScale::Regime => {
                let triple = config.triple.as_ref().expect("validated");
                let mut c = f64::INFINITY;
                for system in config.methods.iter().filter_map(|m| system_of(*m)) {
                    c = c.min(regime_scale(&kind, config.dim, system, triple)?);
                }
                if !c.is_finite() {
                    return Err(config_err("x0_scale = regime needs dfp or bfgs among the methods"));
                }
                c
            }
        };
        let x0 = Vector::from_element(config.dim, scale);
        let model = model_for(&kind, config.dim, &x0, config.radius)?;
        let ctx = metrics::build_context(&model)?;
        Ok(Self { model, ctx, x0, x0_scale: scale })
    }
}

/// Result of replaying one finished trace.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub trace: Trace,
    pub frames: Vec<WeightedFrame>,
    pub ratios: Vec<f64>,
    pub monitor: Option<MonitorReport>,
    pub audit: Option<AuditCounts>,
    pub lemma4: Lemma4Counts,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AuditCounts {
    pub passed: usize,
    pub failed: usize,
    pub hypothesis_violated: usize,
    pub not_applicable: usize,
    /// Failures that only hold with the `4δ` decrease term.
    pub only_weaker_form: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Lemma4Counts {
    pub passed: usize,
    pub failed: usize,
    pub hypothesis_violated: usize,
}

impl MethodRun {
    /// First `k` with ratio at or below `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.ratios.iter().position(|r| *r <= threshold)
    }

    /// Indices `k ≥ 1` above the residual floor where `ratio > (1/√k)^k`
    /// beyond the envelope slack.
    pub fn envelope_violations(&self) -> Vec<usize> {
        corollary_envelope_violations(&self.ratios)
    }

    pub fn breakdown_above_floor(&self) -> bool {
        matches!(self.trace.termination, Termination::NumericalBreakdown(_))
            && self.ratios.last().is_some_and(|r| *r > tolerance::RESIDUAL_FLOOR)
    }
}

pub fn corollary_envelope_violations(ratios: &[f64]) -> Vec<usize> {
    (1..ratios.len())
        .filter(|&k| ratios[k] > tolerance::RESIDUAL_FLOOR)
        .filter(|&k| {
            let env = theory::rate_envelope(theory::EnvelopeForm::CorollaryForm, None, k).expect("k >= 1");
            !(ratios[k] < env * (1.0 + tolerance::ENVELOPE))
        })
        .collect()
}

/// Audits every admissible step, with `δ` the largest observed potential.
pub fn audit_frames(frames: &[WeightedFrame], system: System) -> AuditCounts {
    let potential = |f: &WeightedFrame| match system {
        System::Dfp => f.potential_b,
        System::Bfgs => f.potential_h,
    };
    let delta = frames.iter().filter_map(potential).fold(0.0, f64::max);
    let mut c = AuditCounts { delta, ..AuditCounts::default() };
    for pair in frames.windows(2) {
        let a = match system {
            System::Dfp => theory::dfp_potential_audit(&pair[0], &pair[1], delta),
            System::Bfgs => theory::bfgs_potential_audit(&pair[0], &pair[1], delta),
        };
        match a {
            Applicability::Checked(a) if a.pass => c.passed += 1,
            Applicability::Checked(a) => {
                c.failed += 1;
                c.only_weaker_form += a.only_weaker_form_holds as usize;
            }
            Applicability::HypothesisViolated(_) => c.hypothesis_violated += 1,
            Applicability::NotApplicable(_) => c.not_applicable += 1,
        }
    }
    c
}

// wasm32-unknown-unknown has no clock behind `Instant`; wall time reads 0 there.
fn stopwatch() -> Option<Instant> {
    (!cfg!(target_arch = "wasm32")).then(Instant::now)
}

/// Runs `method` from the shared setup and replays it.
pub fn run_method(setup: &Setup, config: &ExperimentConfig, method: Method) -> Result<MethodRun, ExperimentError> {
    let mut oc = OptimizerConfig::new(method, setup.x0.clone()).with_max_iters(config.max_iters);
    if method.is_quasi_newton() {
        oc = oc.with_init(config.init_for(method));
    }
    if method == Method::GradientDescent {
        oc = oc.with_gd_step(config.gd_step.unwrap_or(1.0 / setup.model.constants.lip_grad));
    }
    oc.track_hessian_approx = method == Method::Dfp && config.audit;
    let start = stopwatch();
    let trace = optimizer::run(&setup.model, &oc)?;
    let wall_time_s = start.map_or(0.0, |t| t.elapsed().as_secs_f64());

    let frames = metrics::frames(&setup.ctx, &trace)?;
    let r0 = frames[0].r_norm();
    let ratios: Vec<f64> = frames.iter().map(|f| f.r_norm() / r0).collect();
    let system = system_of(method);
    let monitor = match (system, &config.triple) {
        (Some(s), Some(t)) => Some(theory::trajectory_monitor(&frames, s, t)),
        _ => None,
    };
    let audit = match system {
        Some(s) if config.audit => Some(audit_frames(&frames, s)),
        _ => None,
    };
    let mut lemma4 = Lemma4Counts::default();
    for f in &frames {
        match metrics::lemma4_report(f) {
            Applicability::Checked(checks) if checks.iter().all(|c| c.pass) => lemma4.passed += 1,
            Applicability::Checked(_) => lemma4.failed += 1,
            Applicability::HypothesisViolated(_) => lemma4.hypothesis_violated += 1,
            Applicability::NotApplicable(_) => {}
        }
    }
    Ok(MethodRun { method, trace, frames, ratios, monitor, audit, lemma4, wall_time_s })
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes the trace CSV; returns whether any NaN was written.
pub fn write_trace_csv(
    path: &Path,
    header: &[(String, String)],
    run: &MethodRun,
    potential: bool,
) -> Result<bool, ExperimentError> {
    let mut out = String::new();
    for (k, v) in header {
        writeln!(out, "# {k} = {v}").expect("write to string");
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["k", "ratio", "ratio_kth_root", "sigma", "tau", "potential", "env", "env_root"])?;
    let mut saw_nan = false;
    for (f, &ratio) in run.frames.iter().zip(&run.ratios) {
        let k = f.k;
        let (root, env, env_root) = if k == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let kf = k as f64;
            (ratio.powf(1.0 / kf), (1.0 / kf.sqrt()).powf(kf), 1.0 / kf.sqrt())
        };
        let pot = if potential {
            match run.method {
                Method::Dfp => f.potential_b,
                Method::Bfgs => f.potential_h,
                _ => None,
            }
        } else {
            None
        };
        let row = [
            k.to_string(),
            fmt_f64(ratio),
            fmt_f64(root),
            fmt_f64(f.sigma),
            fmt_opt(f.tau),
            fmt_opt(pot),
            fmt_f64(env),
            fmt_f64(env_root),
        ];
        saw_nan |= row.iter().any(|c| c == "nan");
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(saw_nan)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: &'static str,
    pub csv: Option<String>,
    pub termination: String,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub final_ratio: f64,
    pub iterations_to_1e10: Option<usize>,
    /// `None` for Newton and GD, which the envelope does not cover.
    pub envelope_violations: Option<Vec<usize>>,
    pub monitor_hypotheses_hold: Option<bool>,
    pub monitor: Option<VerdictCounts>,
    pub audit: Option<AuditCounts>,
    pub lemma4: Lemma4Counts,
    pub incomplete: bool,
    pub skipped: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub objective: String,
    pub dim: usize,
    pub x0_scale: f64,
    pub seed: u64,
    pub constants: LocalConstants,
    pub constants_certificate: ConstantsCertificate,
    pub started_outside_ball: bool,
    pub certificate: Option<ConditionCertificate>,
    pub radii: Option<NeighborhoodRadii>,
    pub x0_distance: f64,
    pub methods: Vec<MethodSummary>,
    pub incomplete: bool,
}

impl ExperimentSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m.label())
    }
}

/// Everything produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub runs: Vec<MethodRun>,
}

impl ExperimentOutcome {
    pub fn run(&self, m: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == m)
    }
}

fn skip_reason(setup: &Setup, config: &ExperimentConfig, method: Method) -> Option<String> {
    let dense = matches!(setup.model.hessian_at_optimum(), linalg::SymOperator::Dense(_));
    (method == Method::Newton && dense && setup.model.dim() > DENSE_NEWTON_LIMIT && !config.allow_dense_newton)
        .then(|| "dense Newton above the dimension limit; set allow_dense_newton".to_string())
}

/// Runs every configured method, writes one CSV per method plus
/// `summary.json` into `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let setup = Setup::new(config)?;
    fs::create_dir_all(&config.output_dir)?;

    let active: Vec<Method> = config.methods.iter().copied().filter(|m| skip_reason(&setup, config, *m).is_none()).collect();
    let results: Vec<Result<MethodRun, ExperimentError>> = if config.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = active
                .iter()
                .map(|&m| {
                    let setup = &setup;
                    scope.spawn(move || run_method(setup, config, m))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("method worker panicked")).collect()
        })
    } else {
        active.iter().map(|&m| run_method(&setup, config, m)).collect()
    };

    let c = setup.model.constants;
    let base_header = |method: Method| -> Vec<(String, String)> {
        vec![
            ("objective".into(), config.objective.label()),
            ("dim".into(), config.dim.to_string()),
            ("method".into(), method.label().into()),
            ("x0_scale".into(), fmt_f64(setup.x0_scale)),
            ("init".into(), init_label(&config.init_for(method))),
            ("max_iters".into(), config.max_iters.to_string()),
            ("seed".into(), config.seed.to_string()),
            ("radius".into(), fmt_f64(c.radius)),
            ("mu".into(), fmt_f64(c.mu)),
            ("lip_grad".into(), fmt_f64(c.lip_grad)),
            ("lip_hess_at_opt".into(), fmt_f64(c.lip_hess_at_opt)),
        ]
    };

    let mut summaries = Vec::new();
    let mut runs = Vec::new();
    let mut results = results.into_iter();
    for &method in &config.methods {
        if let Some(reason) = skip_reason(&setup, config, method) {
            summaries.push(MethodSummary {
                method: method.label(),
                csv: None,
                termination: String::new(),
                iterations: 0,
                wall_time_s: 0.0,
                final_ratio: f64::NAN,
                iterations_to_1e10: None,
                envelope_violations: None,
                monitor_hypotheses_hold: None,
                monitor: None,
                audit: None,
                lemma4: Lemma4Counts::default(),
                incomplete: false,
                skipped: Some(reason),
                error: None,
            });
            continue;
        }
        match results.next().expect("one result per active method") {
            Ok(run) => {
                let path = config.output_dir.join(format!("{}.csv", method.label()));
                let mut header = base_header(method);
                header.push(("termination".into(), run.trace.termination.label()));
                let saw_nan = write_trace_csv(&path, &header, &run, config.audit)?;
                summaries.push(MethodSummary {
                    method: method.label(),
                    csv: Some(path.display().to_string()),
                    termination: run.trace.termination.label(),
                    iterations: run.trace.records.len() - 1,
                    wall_time_s: run.wall_time_s,
                    final_ratio: *run.ratios.last().expect("non-empty"),
                    iterations_to_1e10: run.iterations_to(COMPARISON_THRESHOLD),
                    envelope_violations: method.is_quasi_newton().then(|| run.envelope_violations()),
                    monitor_hypotheses_hold: run.monitor.as_ref().map(|m| m.hypotheses_hold()),
                    monitor: run.monitor.as_ref().map(|m| m.counts()),
                    audit: run.audit,
                    lemma4: run.lemma4,
                    incomplete: saw_nan,
                    skipped: None,
                    error: None,
                });
                runs.push(run);
            }
            Err(e) => summaries.push(MethodSummary {
                method: method.label(),
                csv: None,
                termination: String::new(),
                iterations: 0,
                wall_time_s: 0.0,
                final_ratio: f64::NAN,
                iterations_to_1e10: None,
                envelope_violations: None,
                monitor_hypotheses_hold: None,
                monitor: None,
                audit: None,
                lemma4: Lemma4Counts::default(),
                incomplete: true,
                skipped: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let certificate = config.triple.as_ref().and_then(|t| {
        let system = config.methods.iter().find_map(|m| system_of(*m))?;
        Some(conditions(system, t))
    });
    let radii = certificate.as_ref().map(|cert| cert.radii(&c, config.dim));
    let summary = ExperimentSummary {
        objective: config.objective.label(),
        dim: config.dim,
        x0_scale: setup.x0_scale,
        seed: config.seed,
        constants: c,
        constants_certificate: certify_constants(&setup.model, c.radius, 256),
        started_outside_ball: runs.iter().any(|r| r.trace.started_outside_ball),
        certificate,
        radii,
        x0_distance: (&setup.x0 - setup.model.optimum()).norm(),
        incomplete: summaries.iter().any(|s| s.incomplete),
        methods: summaries,
    };
    // serde_json writes non-finite floats as null.
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(config.output_dir.join("summary.json"), json)?;
    Ok(ExperimentOutcome { summary, runs })
}

/// Runs a figure's pinned configuration.
pub fn figure(id: FigureId, output_dir: impl Into<PathBuf>) -> Result<ExperimentOutcome, ExperimentError> {
    run_experiment(&id.spec().config(output_dir))
}

/// Outcome of [`verify`].
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub certificates: Vec<ConditionCertificate>,
    pub outcome: ExperimentOutcome,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Certifies the triple, runs with auditing and monitors, and collects
/// every failed verdict.
pub fn verify(config: &ExperimentConfig) -> Result<VerifyReport, ExperimentError> {
    let triple = config.triple.ok_or_else(|| config_err("verify needs a triple"))?;
    let mut config = config.clone();
    config.audit = true;
    let systems: Vec<System> = config.methods.iter().filter_map(|m| system_of(*m)).collect();
    if systems.is_empty() {
        return Err(config_err("verify needs dfp or bfgs among the methods"));
    }
    let certificates: Vec<ConditionCertificate> = systems.iter().map(|s| conditions(*s, &triple)).collect();
    let mut failures = Vec::new();
    for c in &certificates {
        for i in c.inequalities.iter().filter(|i| !i.pass) {
            failures.push(format!("{:?} certificate: {} ({} > {})", c.system, i.name, i.lhs, i.rhs));
        }
    }
    let outcome = run_experiment(&config)?;
    for run in &outcome.runs {
        let label = run.method.label();
        if let Some(m) = &run.monitor {
            for i in m.initial.iter().filter(|i| !i.pass) {
                failures.push(format!("{label} initial condition: {} ({} > {})", i.name, i.lhs, i.rhs));
            }
            // Conclusions are only binding when the hypotheses hold.
            if m.hypotheses_hold() {
                for (k, i) in m.failures() {
                    failures.push(format!("{label} k={k}: {} ({} > {})", i.name, i.lhs, i.rhs));
                }
                if !m.cumulative_sigma.pass {
                    failures.push(format!("{label}: {}", m.cumulative_sigma.name));
                }
            }
        }
        if let Some(a) = &run.audit {
            if a.failed > 0 {
                failures.push(format!("{label}: {} potential audit failures", a.failed));
            }
        }
        if run.lemma4.failed > 0 {
            failures.push(format!("{label}: {} frame inequality failures", run.lemma4.failed));
        }
    }
    for s in &outcome.summary.methods {
        if let Some(e) = &s.error {
            failures.push(format!("{}: {e}", s.method));
        }
    }
    Ok(VerifyReport { certificates, outcome, failures })
}

/// Human-readable certificate, one inequality per line.
pub fn describe_certificate(c: &ConditionCertificate, radii: Option<&NeighborhoodRadii>) -> String {
    let t = &c.triple;
    let mut s = format!(
        "{:?} system, (r, eps, delta) = ({}, {}, {}): {}\n",
        c.system,
        t.r,
        t.epsilon,
        t.delta,
        if c.overall_pass { "PASS" } else { "FAIL" }
    );
    for i in &c.inequalities {
        let _ = writeln!(s, "  {:<20} {:.6e} <= {:.6e}  {}", i.name, i.lhs, i.rhs, if i.pass { "ok" } else { "VIOLATED" });
    }
    let _ = writeln!(s, "  iterate radius      {} * mu^1.5/(M sqrt L)", t.epsilon);
    let _ = writeln!(s, "  matrix radius       {}", c.neighborhood_radius_matrix);
    if let Some(r) = radii {
        let _ = writeln!(s, "  on this objective:  iterate radius {:.6e}, exact-Hessian start radius {:.6e}", r.iterate, r.exact_hessian_start);
    }
    s
}
