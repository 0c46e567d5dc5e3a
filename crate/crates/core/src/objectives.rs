//! Strongly convex test objectives with analytic derivatives, a known
//! optimum, and local constants (μ, L, M) certified on a ball around it.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, DiagonalMatrix, LinalgError, SymMatrix, SymOperator, Vector};
use crate::tolerance;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("dimension must be >= 1")]
    InvalidDim,
    #[error("unknown objective {0:?} (expected f1, f2, f3 or quadratic)")]
    UnknownName(String),
    #[error("quadratic matrix must be symmetric positive definite: {0}")]
    NotSpd(#[from] LinalgError),
    #[error("quadratic file is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Value, gradient and Hessian oracles plus the location of the minimizer.
pub trait Objective: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> SymOperator;
    fn optimum(&self) -> &Vector;

    /// `∇f(x) − ∇f(y) − ∇²f(x*)(x − y)`.
    ///
    /// Implementations with closed forms should override this: evaluated
    /// naively the linear parts cancel only up to the rounding of `∇f`.
    fn curvature_residual(&self, x: &Vector, y: &Vector) -> Vector {
        let linear = self
            .hessian(self.optimum())
            .apply(&(x - y))
            .expect("points share the objective's dimension");
        self.gradient(x) - self.gradient(y) - linear
    }
}

/// Integer power by repeated squaring. Underflows to zero like IEEE
/// multiplication does, which is what `x^400` does for `|x| < 0.17`.
pub fn int_pow(x: f64, mut n: u32) -> f64 {
    let mut base = x;
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

/// The separable family `x₁^p + c·x₁² + Σ_{i≥2} x_i²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparablePolynomial {
    pub exponent: u32,
    pub coefficient: f64,
}

impl SeparablePolynomial {
    fn head_value(&self, t: f64) -> f64 {
        int_pow(t, self.exponent) + self.coefficient * t * t
    }

    fn head_slope(&self, t: f64) -> f64 {
        self.exponent as f64 * int_pow(t, self.exponent - 1) + 2.0 * self.coefficient * t
    }

    fn head_curvature(&self, t: f64) -> f64 {
        let p = self.exponent as f64;
        p * (p - 1.0) * int_pow(t, self.exponent - 2) + 2.0 * self.coefficient
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinKind {
    F1,
    F2,
    F3,
    /// `½ xᵀAx − bᵀx` with `A` SPD.
    Quadratic { a: SymMatrix, b: Vector },
}

impl BuiltinKind {
    pub fn polynomial(&self) -> Option<SeparablePolynomial> {
        match self {
            Self::F1 => Some(SeparablePolynomial { exponent: 4, coefficient: 1.0 }),
            Self::F2 => Some(SeparablePolynomial { exponent: 40, coefficient: 100.0 }),
            Self::F3 => Some(SeparablePolynomial { exponent: 400, coefficient: 10000.0 }),
            Self::Quadratic { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::Quadratic { .. } => "quadratic",
        }
    }

    /// Parses `f1`, `f2` or `f3`. Quadratics need their data; see
    /// [`load_quadratic_csv`].
    pub fn from_name(name: &str) -> Result<Self, ObjectiveError> {
        match name.to_ascii_lowercase().as_str() {
            "f1" => Ok(Self::F1),
            "f2" => Ok(Self::F2),
            "f3" => Ok(Self::F3),
            other => Err(ObjectiveError::UnknownName(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Builtin {
    kind: BuiltinKind,
    dim: usize,
    optimum: Vector,
}

pub fn make_builtin(kind: BuiltinKind, dim: usize) -> Result<Builtin, ObjectiveError> {
    if dim == 0 {
        return Err(ObjectiveError::InvalidDim);
    }
    let optimum = match &kind {
        BuiltinKind::Quadratic { a, b } => {
            if a.dim() != dim || b.len() != dim {
                return Err(ObjectiveError::Malformed(format!(
                    "expected A {dim}x{dim} and b of length {dim}, got A {0}x{0} and b of length {1}",
                    a.dim(),
                    b.len()
                )));
            }
            linalg::solve_spd(a, b)?
        }
        _ => Vector::zeros(dim),
    };
    Ok(Builtin { kind, dim, optimum })
}

impl Builtin {
    pub fn kind(&self) -> &BuiltinKind {
        &self.kind
    }

    /// Closed-form μ, L, M on the ball of radius `radius` around `x*`.
    pub fn analytic_constants(&self, radius: f64) -> LocalConstants {
        match &self.kind {
            BuiltinKind::Quadratic { a, .. } => {
                let f = linalg::spectral_factor(a).expect("quadratic matrix was validated");
                LocalConstants { radius, mu: f.min(), lip_grad: f.max(), lip_hess_at_opt: 0.0 }
            }
            kind => {
                let poly = kind.polynomial().expect("separable builtin");
                let p = poly.exponent as f64;
                // The head curvature p(p-1)t^{p-2} + 2c is even and increasing
                // in |t|, so its extremes on the ball sit at t = 0 and |t| = R.
                let head_min = 2.0 * poly.coefficient;
                let head_max = poly.head_curvature(radius);
                let (mu, lip_grad) = if self.dim == 1 {
                    (head_min, head_max)
                } else {
                    (head_min.min(2.0), head_max.max(2.0))
                };
                // ‖∇²f(x) − ∇²f(0)‖/‖x‖ = p(p-1)|x₁|^{p-2}/‖x‖ ≤ p(p-1)R^{p-3}.
                let lip_hess = p * (p - 1.0) * int_pow(radius, poly.exponent - 3);
                LocalConstants { radius, mu, lip_grad, lip_hess_at_opt: lip_hess }
            }
        }
    }
}

impl Objective for Builtin {
    fn name(&self) -> String {
        self.kind.label().to_string()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            BuiltinKind::Quadratic { a, b } => 0.5 * x.dot(&(a.as_matrix() * x)) - b.dot(x),
            kind => {
                let poly = kind.polynomial().expect("separable builtin");
                poly.head_value(x[0]) + x.rows(1, self.dim - 1).norm_squared()
            }
        }
    }

    fn gradient(&self, x: &Vector) -> Vector {
        match &self.kind {
            BuiltinKind::Quadratic { a, b } => a.as_matrix() * x - b,
            kind => {
                let poly = kind.polynomial().expect("separable builtin");
                let mut g = x * 2.0;
                g[0] = poly.head_slope(x[0]);
                g
            }
        }
    }

    fn hessian(&self, x: &Vector) -> SymOperator {
        match &self.kind {
            BuiltinKind::Quadratic { a, .. } => SymOperator::Dense(a.clone()),
            kind => {
                let poly = kind.polynomial().expect("separable builtin");
                let mut diag = Vector::from_element(self.dim, 2.0);
                diag[0] = poly.head_curvature(x[0]);
                SymOperator::Diagonal(DiagonalMatrix::new(diag).expect("dim >= 1"))
            }
        }
    }

    fn optimum(&self) -> &Vector {
        &self.optimum
    }

    fn curvature_residual(&self, x: &Vector, y: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        if let Some(poly) = self.kind.polynomial() {
            // Only the x₁^p term is nonlinear, and its curvature at 0 is zero.
            let p = poly.exponent;
            out[0] = p as f64 * (int_pow(x[0], p - 1) - int_pow(y[0], p - 1));
        }
        out
    }
}

/// Local constants on the ball `‖x − x*‖ ≤ radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConstants {
    pub radius: f64,
    /// Strong convexity.
    pub mu: f64,
    /// Gradient Lipschitz constant.
    pub lip_grad: f64,
    /// Hessian Lipschitz constant at the optimum.
    pub lip_hess_at_opt: f64,
}

/// An objective paired with the constants certified for one ball.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    pub oracle: Arc<dyn Objective>,
    pub constants: LocalConstants,
}

impl ObjectiveModel {
    pub fn new(oracle: Arc<dyn Objective>, constants: LocalConstants) -> Self {
        Self { oracle, constants }
    }

    /// A builtin with its closed-form constants on the ball of `radius`.
    pub fn builtin(kind: BuiltinKind, dim: usize, radius: f64) -> Result<Self, ObjectiveError> {
        let b = make_builtin(kind, dim)?;
        let constants = b.analytic_constants(radius);
        Ok(Self::new(Arc::new(b), constants))
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn optimum(&self) -> &Vector {
        self.oracle.optimum()
    }

    pub fn hessian_at_optimum(&self) -> SymOperator {
        self.oracle.hessian(self.oracle.optimum())
    }
}

/// Sampled constant estimates and any stored constants they contradict.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsCertificate {
    pub radius: f64,
    pub samples: usize,
    pub mu_hat: f64,
    pub lip_grad_hat: f64,
    pub lip_hess_hat: f64,
    pub violations: Vec<String>,
}

impl ConstantsCertificate {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Deterministic low-discrepancy offsets in the ball of `radius`.
///
/// The first points are the axis extremes `±R e_i` (for up to 32 axes);
/// the remainder follow a Kronecker sequence whose first coordinate sets the
/// radial fraction and whose others set the direction.
pub fn ball_samples(dim: usize, radius: f64, n: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(n + 2 * dim.min(32));
    for i in 0..dim.min(32) {
        for sign in [1.0, -1.0] {
            let mut v = Vector::zeros(dim);
            v[i] = sign * radius;
            out.push(v);
        }
    }

    // Generalized golden ratio: positive root of φ^{m+1} = φ + 1.
    let m = dim + 1;
    let mut phi = 2.0f64;
    for _ in 0..64 {
        let f = phi.powi(m as i32 + 1) - phi - 1.0;
        let df = (m as f64 + 1.0) * phi.powi(m as i32) - 1.0;
        phi -= f / df;
    }
    let alphas: Vec<f64> = (1..=m).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();

    for i in 1..=n {
        let u = |j: usize| (0.5 + i as f64 * alphas[j]).fract();
        let dir = Vector::from_fn(dim, |j, _| 2.0 * u(j + 1) - 1.0);
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        out.push(dir * (radius * u(0) / norm));
    }
    out
}

pub fn certify_constants(model: &ObjectiveModel, radius: f64, samples: usize) -> ConstantsCertificate {
    let obj = &model.oracle;
    let xs = obj.optimum();
    let h_star = obj.hessian(xs);

    let mut mu_hat = f64::INFINITY;
    let mut l_hat = 0.0f64;
    let mut m_hat = 0.0f64;
    let mut violations = Vec::new();

    let points = ball_samples(obj.dim(), radius, samples);
    for offset in &points {
        let x = xs + offset;
        let h = obj.hessian(&x);
        match h.eigen_range() {
            Ok((lo, hi)) => {
                mu_hat = mu_hat.min(lo);
                l_hat = l_hat.max(hi);
            }
            Err(e) => violations.push(format!("hessian eigenvalues unavailable: {e}")),
        }
        let dist = offset.norm();
        if dist > 0.0 {
            if let Ok(gap) = h.sub(&h_star).and_then(|d| d.spectral_norm()) {
                m_hat = m_hat.max(gap / dist);
            }
        }
    }

    let c = &model.constants;
    if radius <= c.radius * (1.0 + 1e-12) {
        let tol = 1e-10;
        if mu_hat < c.mu * (1.0 - tol) {
            violations.push(format!("sampled mu {mu_hat:e} below stored mu {:e}", c.mu));
        }
        if l_hat > c.lip_grad * (1.0 + tol) {
            violations.push(format!("sampled L {l_hat:e} above stored L {:e}", c.lip_grad));
        }
        if m_hat > c.lip_hess_at_opt * (1.0 + tol) + tol {
            violations.push(format!("sampled M {m_hat:e} above stored M {:e}", c.lip_hess_at_opt));
        }
    }

    ConstantsCertificate {
        radius,
        samples: points.len(),
        mu_hat,
        lip_grad_hat: l_hat,
        lip_hess_hat: m_hat,
        violations,
    }
}

/// `‖∇f(x) − ∇f(y) − ∇²f(x*)(x − y)‖ ≤ M‖x − y‖·max(‖x − x*‖, ‖y − x*‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corollary1Report {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn check_corollary1(model: &ObjectiveModel, x: &Vector, y: &Vector) -> Corollary1Report {
    let obj = &model.oracle;
    let xs = obj.optimum();
    let diff = x - y;
    let lhs = obj.curvature_residual(x, y).norm();
    let reach = (x - xs).norm().max((y - xs).norm());
    let rhs = model.constants.lip_hess_at_opt * diff.norm() * reach;
    Corollary1Report { lhs, rhs, pass: lhs <= rhs + tolerance::COROLLARY_ABSOLUTE }
}

/// Reads a quadratic from CSV: `d` rows holding `A` followed by one row
/// holding `b`. Lines starting with `#` are ignored.
pub fn load_quadratic_csv(path: impl AsRef<Path>) -> Result<BuiltinKind, ObjectiveError> {
    let text = std::fs::read_to_string(path)?;
    parse_quadratic_csv(&text)
}

pub fn parse_quadratic_csv(text: &str) -> Result<BuiltinKind, ObjectiveError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| ObjectiveError::Malformed(format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let d = rows.first().map(Vec::len).unwrap_or(0);
    if d == 0 || rows.len() != d + 1 || rows.iter().any(|r| r.len() != d) {
        return Err(ObjectiveError::Malformed(format!(
            "expected {0} rows of {1} values (A then b), found {2} rows",
            d + 1,
            d,
            rows.len()
        )));
    }
    let flat: Vec<f64> = rows[..d].iter().flatten().copied().collect();
    let a = SymMatrix::from_row_slice(d, &flat)?;
    linalg::inverse_spd(&a)?;
    let b = Vector::from_vec(rows[d].clone());
    Ok(BuiltinKind::Quadratic { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtin(kind: BuiltinKind, dim: usize) -> Builtin {
        make_builtin(kind, dim).unwrap()
    }

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn central_gradient(obj: &dyn Objective, x: &Vector, h: f64) -> Vector {
        Vector::from_fn(obj.dim(), |i, _| {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += h;
            m[i] -= h;
            (obj.value(&p) - obj.value(&m)) / (2.0 * h)
        })
    }

    #[test]
    fn f1_closed_forms() {
        let f = builtin(BuiltinKind::F1, 2);
        let o = v(&[0.0, 0.0]);
        assert_eq!(f.value(&o), 0.0);
        assert_eq!(f.gradient(&o), o);
        assert_eq!(f.hessian(&o).to_dense().diagonal(), v(&[2.0, 2.0]));

        let x = v(&[1.0, 1.0]);
        assert_eq!(f.value(&x), 3.0);
        assert_eq!(f.gradient(&x), v(&[6.0, 2.0]));
        assert_eq!(f.hessian(&x).to_dense().diagonal(), v(&[14.0, 2.0]));
    }

    #[test]
    fn f2_matches_finite_differences() {
        let f = builtin(BuiltinKind::F2, 1);
        let x = v(&[1.0]);
        assert_eq!(f.value(&x), 101.0);
        let h = 1e-5;
        let fd_grad = (f.value(&v(&[1.0 + h])) - f.value(&v(&[1.0 - h]))) / (2.0 * h);
        let fd_hess = (f.value(&v(&[1.0 + h])) - 2.0 * f.value(&x) + f.value(&v(&[1.0 - h]))) / (h * h);
        assert_eq!(f.gradient(&x)[0], 240.0);
        assert!((fd_grad - 240.0).abs() <= 1e-5 * 240.0);
        let hess = f.hessian(&x).to_dense()[(0, 0)];
        assert_eq!(hess, 1760.0);
        assert!((fd_hess - 1760.0).abs() <= 1e-5 * 1760.0 * 10.0, "fd_hess {fd_hess}");
    }

    #[test]
    fn int_pow_underflows_quietly() {
        assert_eq!(int_pow(0.1, 400), 0.0);
        assert_eq!(int_pow(-1.0, 399), -1.0);
        assert_eq!(int_pow(2.0, 10), 1024.0);
        assert_eq!(int_pow(3.0, 0), 1.0);
    }

    #[test]
    fn derivatives_consistent_at_seeded_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for kind in [BuiltinKind::F1, BuiltinKind::F2, BuiltinKind::F3] {
            let f = builtin(kind, 4);
            for _ in 0..100 {
                let x = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
                let g = f.gradient(&x);
                let fd = central_gradient(&f, &x, 1e-6);
                let tol = 1e-6f64.max(1e-5 * g.norm());
                assert!((&fd - &g).norm() <= tol, "{}: fd gradient off by {:e}", f.name(), (&fd - &g).norm());

                let h = f.hessian(&x).to_dense();
                let step = 1e-6;
                for j in 0..4 {
                    let mut p = x.clone();
                    let mut m = x.clone();
                    p[j] += step;
                    m[j] -= step;
                    let col = (f.gradient(&p) - f.gradient(&m)) / (2.0 * step);
                    let exact = h.column(j).into_owned();
                    let tol = 1e-6f64.max(1e-5 * exact.norm());
                    assert!((col - &exact).norm() <= tol, "{}: fd hessian column {j}", f.name());
                }
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let a = SymMatrix::from_row_slice(2, &[4.0, 1.0, 1.0, 3.0]).unwrap();
        let kinds = [
            BuiltinKind::F1,
            BuiltinKind::F2,
            BuiltinKind::F3,
            BuiltinKind::Quadratic { a, b: v(&[1.0, 2.0]) },
        ];
        for kind in kinds {
            let f = builtin(kind, 2);
            assert!(f.gradient(f.optimum()).amax() <= 1e-10);
        }
    }

    #[test]
    fn quadratic_constants_are_exact() {
        let a = SymMatrix::from_diagonal(&v(&[1.0, 5.0]));
        let model = ObjectiveModel::builtin(BuiltinKind::Quadratic { a, b: v(&[0.0, 0.0]) }, 2, 3.0).unwrap();
        let cert = certify_constants(&model, 3.0, 64);
        assert_eq!(cert.mu_hat, 1.0);
        assert_eq!(cert.lip_grad_hat, 5.0);
        assert_eq!(cert.lip_hess_hat, 0.0);
        assert!(cert.consistent());
    }

    #[test]
    fn f1_certificate_on_half_ball() {
        let model = ObjectiveModel::builtin(BuiltinKind::F1, 2, 0.5).unwrap();
        let cert = certify_constants(&model, 0.5, 500);
        assert_eq!(cert.mu_hat, 2.0);
        // Oracle: 12 t² + 2 is maximized over |t| ≤ 0.5 at the boundary.
        let oracle = (0..=1000)
            .map(|i| -0.5 + i as f64 / 1000.0)
            .map(|t| 12.0 * t * t + 2.0)
            .fold(0.0f64, f64::max);
        assert_eq!(oracle, 5.0);
        assert!((cert.lip_grad_hat - oracle).abs() <= 1e-12);
        assert!((cert.lip_hess_hat - 6.0).abs() <= 1e-12);
        assert!(cert.consistent(), "{:?}", cert.violations);
        assert_eq!(model.constants.lip_hess_at_opt, 6.0);
    }

    #[test]
    fn certificate_flags_understated_constants() {
        let mut model = ObjectiveModel::builtin(BuiltinKind::F1, 3, 0.5).unwrap();
        model.constants.lip_hess_at_opt = 1.0;
        let cert = certify_constants(&model, 0.5, 50);
        assert!(!cert.consistent());
    }

    #[test]
    fn closed_form_residual_matches_generic_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for kind in [BuiltinKind::F1, BuiltinKind::F2, BuiltinKind::F3] {
            let f = make_builtin(kind, 4).unwrap();
            for _ in 0..50 {
                let x = Vector::from_fn(4, |_, _| rng.random_range(-0.9..0.9));
                let y = Vector::from_fn(4, |_, _| rng.random_range(-0.9..0.9));
                let generic = f.gradient(&x) - f.gradient(&y) - f.hessian(f.optimum()).apply(&(&x - &y)).unwrap();
                let scale = f.gradient(&x).norm() + f.gradient(&y).norm();
                assert!((f.curvature_residual(&x, &y) - generic).norm() <= 1e-14 * scale.max(1.0));
            }
        }
        let q = make_builtin(
            BuiltinKind::Quadratic { a: SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 3.0]).unwrap(), b: v(&[1.0, 0.0]) },
            2,
        )
        .unwrap();
        assert_eq!(q.curvature_residual(&v(&[0.3, 0.9]), &v(&[-2.0, 0.1])).norm(), 0.0);
    }

    #[test]
    fn corollary1_cases() {
        let model = ObjectiveModel::builtin(BuiltinKind::F1, 3, 0.5).unwrap();
        let x = v(&[0.2, -0.1, 0.3]);
        let r = check_corollary1(&model, &x, &x);
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);

        let a = SymMatrix::from_row_slice(2, &[3.0, 1.0, 1.0, 2.0]).unwrap();
        let q = ObjectiveModel::builtin(BuiltinKind::Quadratic { a, b: v(&[1.0, -1.0]) }, 2, 1.0).unwrap();
        let r = check_corollary1(&q, &v(&[0.3, 0.9]), &v(&[-2.0, 0.1]));
        assert!(r.lhs < 1e-14 && r.pass);
        assert_eq!(q.constants.lip_hess_at_opt, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let points = ball_samples(3, 0.5, 200);
        for _ in 0..200 {
            let x = &points[rng.random_range(0..points.len())];
            let y = &points[rng.random_range(0..points.len())];
            assert!(check_corollary1(&model, x, y).pass);
        }
    }

    #[test]
    fn samples_stay_in_ball() {
        for d in [1, 2, 7, 300] {
            let pts = ball_samples(d, 0.7, 100);
            assert!(pts.iter().all(|p| p.norm() <= 0.7 * (1.0 + 1e-12)));
            assert_eq!(pts, ball_samples(d, 0.7, 100));
        }
    }

    #[test]
    fn quadratic_csv_round_trip() {
        let kind = parse_quadratic_csv("# A then b\n2, 0\n0, 4\n1, 1\n").unwrap();
        let f = make_builtin(kind, 2).unwrap();
        assert!((f.optimum() - v(&[0.5, 0.25])).amax() < 1e-15);
        assert!(parse_quadratic_csv("1,2\n3,4\n").is_err());
        assert!(matches!(parse_quadratic_csv("1,0\n0,-1\n0,0\n"), Err(ObjectiveError::NotSpd(_))));
        assert!(matches!(make_builtin(BuiltinKind::F1, 0), Err(ObjectiveError::InvalidDim)));
    }
}
