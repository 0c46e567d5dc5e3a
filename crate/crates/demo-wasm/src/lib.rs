//! Browser bindings for the `www/` page. Every export returns a JSON string;
//! the plain-Rust versions are public so they can be tested natively.

use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

use qnlab::experiment::{run_method, ExperimentConfig, ExperimentError, ObjectiveSpec, Setup, StartScale};
use qnlab::optimizer::Method;
use qnlab::report::InequalityCheck;
use qnlab::theory::{conditions, ConditionTriple, System, TheoryError, VerdictCounts};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("unknown system {0:?} (expected dfp or bfgs)")]
    UnknownSystem(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Largest dimension the page accepts; keeps the tab responsive.
pub const MAX_DIM: usize = 500;

#[derive(Debug, Serialize)]
pub struct Series {
    pub method: &'static str,
    pub termination: String,
    /// `‖r_k‖/‖r₀‖`; exact zeros are kept, the page clamps them for log axes.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub objective: String,
    pub dim: usize,
    pub x0_scale: f64,
    pub series: Vec<Series>,
    /// `(1/√k)^k`, same length as the longest series.
    pub envelope: Vec<f64>,
}

fn parse_system(s: &str) -> Result<System, DemoError> {
    match s {
        "dfp" => Ok(System::Dfp),
        "bfgs" => Ok(System::Bfgs),
        other => Err(DemoError::UnknownSystem(other.to_string())),
    }
}

fn base_config(objective: &str, dim: usize) -> Result<ExperimentConfig, DemoError> {
    if dim > MAX_DIM {
        return Err(ExperimentError::Config(format!("dim is capped at {MAX_DIM} in the browser")).into());
    }
    Ok(ExperimentConfig { objective: ObjectiveSpec::parse(objective)?, dim, ..ExperimentConfig::default() })
}

/// BFGS, DFP, Newton and GD from `x₀ = c·1`, plus the envelope.
pub fn compare_methods(objective: &str, dim: usize, x0_scale: f64, max_iters: usize) -> Result<Comparison, DemoError> {
    let mut config = base_config(objective, dim)?;
    config.x0_scale = StartScale::Fixed(x0_scale);
    config.max_iters = max_iters;
    config.methods = vec![Method::Bfgs, Method::Dfp, Method::Newton, Method::GradientDescent];
    let setup = Setup::new(&config)?;
    let mut series = Vec::new();
    for &m in &config.methods {
        let run = run_method(&setup, &config, m)?;
        series.push(Series { method: m.label(), termination: run.trace.termination.label(), ratios: run.ratios });
    }
    let len = series.iter().map(|s| s.ratios.len()).max().unwrap_or(0);
    let envelope = (0..len).map(|k| if k == 0 { 1.0 } else { (k as f64).powf(-0.5 * k as f64) }).collect();
    Ok(Comparison { objective: config.objective.label(), dim, x0_scale, series, envelope })
}

#[derive(Debug, Serialize)]
pub struct CertifyResult {
    pub system: System,
    pub pass: bool,
    pub inequalities: Vec<InequalityCheck>,
}

/// Condition-system check for one triple such as `1/2,1/200,1/12`.
pub fn certify_triple(triple: &str, system: &str) -> Result<CertifyResult, DemoError> {
    let t = ConditionTriple::parse(triple)?;
    let c = conditions(parse_system(system)?, &t);
    Ok(CertifyResult { system: c.system, pass: c.overall_pass, inequalities: c.inequalities })
}

#[derive(Debug, Serialize)]
pub struct MonitorStepView {
    pub k: usize,
    pub sigma: f64,
    pub potential: Option<f64>,
    pub suspended: bool,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct MonitorResult {
    pub system: System,
    pub x0_scale: f64,
    pub hypotheses_hold: bool,
    pub conclusions_pass: bool,
    pub counts: VerdictCounts,
    pub steps: Vec<MonitorStepView>,
}

/// Runs DFP or BFGS on `f1` from the largest start inside the triple's
/// regime and replays the trajectory monitor.
pub fn regime_monitor(system: &str, triple: &str, dim: usize) -> Result<MonitorResult, DemoError> {
    let system = parse_system(system)?;
    let mut config = base_config("f1", dim)?;
    config.triple = Some(ConditionTriple::parse(triple)?);
    config.x0_scale = StartScale::Regime;
    config.audit = true;
    let method = match system {
        System::Dfp => Method::Dfp,
        System::Bfgs => Method::Bfgs,
    };
    config.methods = vec![method];
    let setup = Setup::new(&config)?;
    let run = run_method(&setup, &config, method)?;
    let monitor = run.monitor.expect("triple is set");
    let steps = monitor
        .steps
        .iter()
        .zip(&run.frames)
        .map(|(s, f)| MonitorStepView {
            k: s.k,
            sigma: f.sigma,
            potential: match system {
                System::Dfp => f.potential_b,
                System::Bfgs => f.potential_h,
            },
            suspended: s.suspended,
            pass: s.checks().all(|c| c.pass),
        })
        .collect();
    Ok(MonitorResult {
        system,
        x0_scale: setup.x0_scale,
        hypotheses_hold: monitor.hypotheses_hold(),
        conclusions_pass: monitor.conclusions_pass(),
        counts: monitor.counts(),
        steps,
    })
}

fn to_js<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn compare(objective: &str, dim: usize, x0_scale: f64, max_iters: usize) -> Result<String, JsError> {
    to_js(compare_methods(objective, dim, x0_scale, max_iters))
}

#[wasm_bindgen]
pub fn certify(triple: &str, system: &str) -> Result<String, JsError> {
    to_js(certify_triple(triple, system))
}

#[wasm_bindgen]
pub fn monitor(system: &str, triple: &str, dim: usize) -> Result<String, JsError> {
    to_js(regime_monitor(system, triple, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_has_all_methods_and_envelope() {
        let c = compare_methods("f1", 10, 0.45, 30).unwrap();
        assert_eq!(c.series.len(), 4);
        assert_eq!(c.series[0].ratios[0], 1.0);
        let longest = c.series.iter().map(|s| s.ratios.len()).max().unwrap();
        assert_eq!(c.envelope.len(), longest);
        assert!((c.envelope[4] - 1.0 / 16.0).abs() < 1e-15);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"method\":\"newton\""));
    }

    #[test]
    fn certify_matches_known_verdicts() {
        assert!(certify_triple("1/2,1/200,1/12", "dfp").unwrap().pass);
        assert!(certify_triple("1/2,1/400,1/24", "bfgs").unwrap().pass);
        assert!(!certify_triple("0.5,0.3,0.3", "bfgs").unwrap().pass);
        assert!(matches!(certify_triple("0.5,0.3,0.3", "sr1"), Err(DemoError::UnknownSystem(_))));
    }

    #[test]
    fn regime_monitor_passes() {
        let m = regime_monitor("bfgs", "1/2,1/400,1/24", 5).unwrap();
        assert!(m.hypotheses_hold && m.conclusions_pass, "{m:?}");
        assert!(m.x0_scale > 0.0);
        assert_eq!(m.counts.failed, 0);
    }

    #[test]
    fn oversized_dimension_is_refused() {
        assert!(compare_methods("f1", MAX_DIM + 1, 0.45, 10).is_err());
    }
}
