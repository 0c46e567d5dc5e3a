//! Randomized suites for the matrix lemmas, the gradient-variation
//! corollary and the hat-frame inequalities.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{self, Matrix, SymMatrix, Vector};
use crate::metrics::{self, lemma4_report};
use crate::objectives::{check_corollary1, make_builtin, BuiltinKind, ObjectiveModel};
use crate::optimizer::IterateRecord;
use crate::report::Applicability;
use crate::theory::{check_banach, check_lemma1, check_lemma2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    Lemma1,
    Lemma2,
    Banach,
    Corollary1,
    Lemma4,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Self::Lemma1, Self::Lemma2, Self::Banach, Self::Corollary1, Self::Lemma4];

    pub fn label(self) -> &'static str {
        match self {
            Self::Lemma1 => "lemma1",
            Self::Lemma2 => "lemma2",
            Self::Banach => "banach",
            Self::Corollary1 => "corollary1",
            Self::Lemma4 => "lemma4",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub cases: usize,
    pub checked: usize,
    /// Instances outside the statement's hypotheses.
    pub skipped: usize,
    pub violations: usize,
    /// First failing case index, for replay.
    pub first_violation: Option<usize>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

fn dim(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(2..=12)
}

fn gaussianish(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
    let r = gaussianish(rng, d, d);
    let shift = rng.random_range(0.05..1.0);
    SymMatrix::from_upper(r.transpose() * &r + Matrix::identity(d, d) * shift).expect("square")
}

fn in_ball(rng: &mut ChaCha8Rng, center: &Vector, radius: f64) -> Vector {
    let d = center.len();
    let dir = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let scale = radius * rng.random::<f64>().powf(1.0 / d as f64) / dir.norm().max(f64::MIN_POSITIVE);
    center + dir * scale
}

fn random_model(rng: &mut ChaCha8Rng, d: usize) -> ObjectiveModel {
    let kind = match rng.random_range(0..4) {
        0 => BuiltinKind::F1,
        1 => BuiltinKind::F2,
        2 => BuiltinKind::F3,
        _ => BuiltinKind::Quadratic {
            a: random_spd(rng, d),
            b: Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
        },
    };
    let radius = rng.random_range(0.01..1.0);
    let b = make_builtin(kind, d).expect("valid instance");
    let constants = b.analytic_constants(radius);
    ObjectiveModel::new(Arc::new(b), constants)
}

enum Outcome {
    Pass,
    Fail,
    Skip,
}

fn case(suite: Suite, rng: &mut ChaCha8Rng) -> Outcome {
    let verdict = |pass: bool| if pass { Outcome::Pass } else { Outcome::Fail };
    let d = dim(rng);
    match suite {
        Suite::Lemma1 => {
            let a = SymMatrix::from_upper(gaussianish(rng, d, d) * rng.random_range(0.1..10.0)).expect("square");
            let u = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)).normalize();
            match check_lemma1(&a, &u) {
                Ok(r) => verdict(r.pass),
                Err(_) => Outcome::Fail,
            }
        }
        Suite::Lemma2 => {
            let a = random_spd(rng, d);
            let cols = rng.random_range(1..=12);
            let b = gaussianish(rng, d, cols);
            match check_lemma2(&a, &b) {
                Ok(r) => verdict(r.pass()),
                Err(_) => Outcome::Fail,
            }
        }
        Suite::Banach => {
            let a = gaussianish(rng, d, d) + Matrix::identity(d, d) * rng.random_range(1.0..3.0);
            let Some(a_inv) = a.clone().try_inverse() else { return Outcome::Skip };
            let e = gaussianish(rng, d, d);
            let (Ok(ai), Ok(en)) = (linalg::operator_norm(&a_inv), linalg::operator_norm(&e)) else {
                return Outcome::Skip;
            };
            let e = e * (rng.random_range(0.0..0.99) / (ai * en));
            match check_banach(&a, &e) {
                Ok(Applicability::Checked(r)) => verdict(r.pass),
                Ok(_) => Outcome::Skip,
                Err(_) => Outcome::Fail,
            }
        }
        Suite::Corollary1 => {
            let model = random_model(rng, d);
            let r = model.constants.radius;
            let x = in_ball(rng, model.optimum(), r);
            let y = in_ball(rng, model.optimum(), r);
            verdict(check_corollary1(&model, &x, &y).pass)
        }
        Suite::Lemma4 => {
            let model = random_model(rng, d);
            let Ok(ctx) = metrics::build_context(&model) else { return Outcome::Fail };
            let r = model.constants.radius;
            let x = in_ball(rng, model.optimum(), r);
            let x_next = in_ball(rng, model.optimum(), r);
            let obj = model.oracle.as_ref();
            let (g, g_next) = (obj.gradient(&x), obj.gradient(&x_next));
            let record = |k, x: &Vector, grad: &Vector, s, y| IterateRecord {
                k,
                x: x.clone(),
                grad: grad.clone(),
                s,
                y,
                h: None,
                b: None,
                step_accepted: true,
            };
            let current = record(0, &x, &g, Some(&x_next - &x), Some(&g_next - &g));
            let next = record(1, &x_next, &g_next, None, None);
            match metrics::frame(&ctx, &current, Some(&next)).map(|f| lemma4_report(&f)) {
                Ok(Applicability::Checked(checks)) => verdict(checks.iter().all(|c| c.pass)),
                Ok(_) => Outcome::Skip,
                Err(_) => Outcome::Fail,
            }
        }
    }
}

/// Runs `cases` seeded instances of `suite`. Case `i` uses its own stream
/// derived from `seed`, so single failures can be replayed.
pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> SuiteReport {
    let mut report = SuiteReport { suite, seed, cases, checked: 0, skipped: 0, violations: 0, first_violation: None };
    for i in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        match case(suite, &mut rng) {
            Outcome::Pass => report.checked += 1,
            Outcome::Skip => report.skipped += 1,
            Outcome::Fail => {
                report.checked += 1;
                report.violations += 1;
                report.first_violation.get_or_insert(i);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_reproducible_and_clean() {
        for suite in Suite::ALL {
            let a = run_suite(suite, 7, 300);
            assert_eq!(a, run_suite(suite, 7, 300));
            assert!(a.pass(), "{a:?}");
            assert!(a.checked > 150, "{a:?}");
        }
    }

    #[test]
    fn labels_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(Suite::from_label(suite.label()), Some(suite));
        }
        assert_eq!(Suite::from_label("lemma9"), None);
    }
}
