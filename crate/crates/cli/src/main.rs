//! `qnlab` command line.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage error, 3 numerical
//! breakdown.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qnlab::experiment::{self, ExperimentConfig, ExperimentError, ExperimentOutcome, FigureId};
use qnlab::suites::{run_suite, Suite};
use qnlab::theory::{conditions, ConditionTriple, System};

const PASS: u8 = 0;
const VERIFY_FAILED: u8 = 1;
const USAGE: u8 = 2;
const BREAKDOWN: u8 = 3;

#[derive(Parser)]
#[command(name = "qnlab", version, about = "Quasi-Newton (DFP/BFGS) convergence lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured methods and write CSV traces plus summary.json.
    Run(ConfigArgs),
    /// Reproduce one of the six pinned figure configurations.
    Figure {
        /// fig1..fig6 (or 1..6).
        #[arg(value_parser = parse_figure)]
        id: FigureId,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        parallel: bool,
    },
    /// Certify a triple, run with audits and monitors, fail on any verdict.
    Verify(ConfigArgs),
    /// Check a condition triple against the DFP and/or BFGS system.
    Certify {
        /// r,epsilon,delta; fractions allowed, e.g. 1/2,1/200,1/12.
        triple: String,
        /// dfp, bfgs or both.
        #[arg(long, default_value = "both")]
        system: String,
    },
    /// Randomized checks of the matrix lemmas and frame inequalities.
    Lemmas {
        /// Suite name, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        cases: usize,
    },
}

/// Flags mirror the config-file keys one to one; flags win over the file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// f1, f2, f3 or quadratic:<csv>.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    /// A positive real, or `regime` (needs --triple).
    #[arg(long)]
    x0_scale: Option<String>,
    /// Comma-separated subset of dfp, bfgs, newton, gd; repeatable.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// exact-hessian, identity, scaled:<c> or explicit:<csv>.
    #[arg(long)]
    init: Option<String>,
    /// Per-method init, e.g. bfgs=identity; repeatable.
    #[arg(long = "init-for", value_name = "METHOD=POLICY")]
    init_for: Vec<String>,
    #[arg(long)]
    gd_step: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    triple: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    allow_dense_newton: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut c = ExperimentConfig::default();
        if let Some(path) = &self.config {
            c.apply_text(&std::fs::read_to_string(path)?)?;
        }
        let scalar = [
            ("objective", &self.objective),
            ("dim", &self.dim),
            ("x0_scale", &self.x0_scale),
            ("init", &self.init),
            ("gd_step", &self.gd_step),
            ("max_iters", &self.max_iters),
            ("triple", &self.triple),
            ("out", &self.out),
            ("seed", &self.seed),
            ("radius", &self.radius),
        ];
        for (key, value) in scalar {
            if let Some(v) = value {
                c.set(key, v)?;
            }
        }
        if !self.methods.is_empty() {
            c.set("methods", &self.methods.join(","))?;
        }
        for entry in &self.init_for {
            let (m, policy) = entry
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config(format!("--init-for expects METHOD=POLICY, got {entry:?}")))?;
            c.set(&format!("init.{}", m.trim()), policy)?;
        }
        c.audit |= self.audit;
        c.parallel |= self.parallel;
        c.allow_dense_newton |= self.allow_dense_newton;
        c.validate()?;
        Ok(c)
    }
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    FigureId::parse(s).ok_or_else(|| format!("unknown figure {s:?} (expected fig1..fig6)"))
}

fn error_code(e: &ExperimentError) -> u8 {
    match e {
        ExperimentError::Metric(_) => BREAKDOWN,
        _ => USAGE,
    }
}

fn print_outcome(out: &ExperimentOutcome) {
    let s = &out.summary;
    println!("{} d={} x0_scale={}{}", s.objective, s.dim, s.x0_scale, if s.incomplete { " (incomplete)" } else { "" });
    for m in &s.methods {
        if let Some(reason) = &m.skipped {
            println!("  {:<6} skipped: {reason}", m.method);
            continue;
        }
        let to = m.iterations_to_1e10.map_or("never".to_string(), |k| k.to_string());
        let env = m.envelope_violations.as_ref().map_or("n/a".to_string(), |v| v.len().to_string());
        println!(
            "  {:<6} {:<24} iters={:<3} final_ratio={:.3e} to_1e-10={to:<5} envelope_violations={env} {:.3}s",
            m.method,
            m.termination,
            m.iterations,
            m.final_ratio,
            m.wall_time_s
        );
        if let Some(v) = &m.monitor {
            println!("         monitor: {} passed, {} failed, {} suspended", v.passed, v.failed, v.suspended);
        }
        if let Some(a) = &m.audit {
            println!("         audit: {} passed, {} failed, delta={:.3e}", a.passed, a.failed, a.delta);
        }
        if let Some(e) = &m.error {
            println!("         error: {e}");
        }
    }
}

fn run_code(out: &ExperimentOutcome) -> u8 {
    let broke = out.runs.iter().any(|r| r.breakdown_above_floor()) || out.summary.methods.iter().any(|m| m.error.is_some());
    if broke {
        BREAKDOWN
    } else {
        PASS
    }
}

fn execute(command: Command) -> Result<u8, ExperimentError> {
    match command {
        Command::Run(args) => {
            let config = args.build()?;
            let out = experiment::run_experiment(&config)?;
            print_outcome(&out);
            println!("wrote {}", config.output_dir.display());
            Ok(run_code(&out))
        }
        Command::Figure { id, out, parallel } => {
            let mut config = id.spec().config(out);
            config.parallel = parallel;
            let outcome = experiment::run_experiment(&config)?;
            print_outcome(&outcome);
            println!("wrote {}", config.output_dir.display());
            Ok(run_code(&outcome))
        }
        Command::Verify(args) => {
            let config = args.build()?;
            let report = experiment::verify(&config)?;
            let radii = report.outcome.summary.radii.as_ref();
            for c in &report.certificates {
                print!("{}", experiment::describe_certificate(c, radii));
            }
            print_outcome(&report.outcome);
            for f in &report.failures {
                println!("FAIL {f}");
            }
            if !report.pass() {
                return Ok(VERIFY_FAILED);
            }
            println!("verify: PASS");
            Ok(run_code(&report.outcome))
        }
        Command::Certify { triple, system } => {
            let triple = ConditionTriple::parse(&triple)?;
            let systems = match system.as_str() {
                "dfp" => vec![System::Dfp],
                "bfgs" => vec![System::Bfgs],
                "both" => vec![System::Dfp, System::Bfgs],
                other => return Err(ExperimentError::Config(format!("unknown system {other:?}"))),
            };
            let mut ok = true;
            for s in systems {
                let c = conditions(s, &triple);
                print!("{}", experiment::describe_certificate(&c, None));
                ok &= c.overall_pass;
            }
            Ok(if ok { PASS } else { VERIFY_FAILED })
        }
        Command::Lemmas { suite, seed, cases } => {
            let suites = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![Suite::from_label(&suite).ok_or_else(|| ExperimentError::Config(format!("unknown suite {suite:?}")))?]
            };
            let mut ok = true;
            for s in suites {
                let r = run_suite(s, seed, cases);
                println!(
                    "{:<11} {} checked={} skipped={} violations={}{}",
                    s.label(),
                    if r.pass() { "PASS" } else { "FAIL" },
                    r.checked,
                    r.skipped,
                    r.violations,
                    r.first_violation.map_or(String::new(), |i| format!(" first_case={i}"))
                );
                ok &= r.pass();
            }
            Ok(if ok { PASS } else { VERIFY_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
