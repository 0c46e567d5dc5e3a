//! Dense symmetric linear algebra: spectral factorization, matrix roots,
//! norms and SPD solves, plus a diagonal fast path.
//!
//! Storage is `nalgebra`; the symmetric eigensolver is nalgebra's
//! tridiagonalization + implicit QR (`SymmetricEigen`).

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::tolerance;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix or vector contains NaN or infinite entries")]
    NonFinite,
    #[error("eigensolver exceeded its iteration budget")]
    NoConvergence,
    #[error("matrix is not positive definite (eigenvalues in [{min:e}, {max:e}])")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix must be square with dimension >= 1 (got {rows}x{cols})")]
    InvalidShape { rows: usize, cols: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Which root [`matrix_power_half`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSign {
    Positive,
    Negative,
}

/// A square matrix whose entries are exactly symmetric.
///
/// Every constructor copies the upper triangle onto the lower one, so
/// `a[(i, j)] == a[(j, i)]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Builds a symmetric matrix from `m`, taking the upper triangle as
    /// authoritative.
    pub fn from_upper(mut m: Matrix) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols || rows == 0 {
            return Err(LinalgError::InvalidShape { rows, cols });
        }
        mirror_upper(&mut m);
        Ok(Self(m))
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_upper(Matrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &Vector) -> Self {
        Self(Matrix::from_diagonal(diag))
    }

    /// `v vᵀ`.
    pub fn outer(v: &Vector) -> Self {
        let mut m = v * v.transpose();
        mirror_upper(&mut m);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `self - I`.
    pub fn minus_identity(&self) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= 1.0;
        }
        Self(m)
    }

    /// `Q self Q` for symmetric `Q`.
    pub fn congruence(&self, q: &SymMatrix) -> Result<Self> {
        check_dim(q.dim(), self.dim())?;
        Self::from_upper(&q.0 * &self.0 * &q.0)
    }
}

impl Deref for SymMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

fn mirror_upper(m: &mut Matrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactorization {
    pub eigenvalues: Vector,
    pub eigenvectors: Matrix,
}

impl SpectralFactorization {
    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `Q f(Λ) Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        let mut m = scaled * q.transpose();
        mirror_upper(&mut m);
        SymMatrix(m)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|l| l)
    }
}

pub fn spectral_factor(a: &SymMatrix) -> Result<SpectralFactorization> {
    check_finite(a.iter())?;
    let budget = tolerance::EIGEN_SWEEPS_PER_DIM * a.dim().max(1);
    let eig = SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, budget)
        .ok_or(LinalgError::NoConvergence)?;

    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = Vector::from_iterator(a.dim(), order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = Matrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok(SpectralFactorization {
        eigenvalues,
        eigenvectors,
    })
}

fn check_pd(min: f64, max: f64) -> Result<()> {
    if max > 0.0 && min > tolerance::PD_RELATIVE * max {
        Ok(())
    } else {
        Err(LinalgError::NotPositiveDefinite { min, max })
    }
}

/// `A^{1/2}` or `A^{-1/2}` for symmetric positive definite `A`.
pub fn matrix_power_half(a: &SymMatrix, sign: RootSign) -> Result<SymMatrix> {
    let f = spectral_factor(a)?;
    check_pd(f.min(), f.max())?;
    Ok(match sign {
        RootSign::Positive => f.map(f64::sqrt),
        RootSign::Negative => f.map(|l| 1.0 / l.sqrt()),
    })
}

pub fn frobenius_norm(a: &Matrix) -> Result<f64> {
    check_finite(a.iter())?;
    Ok(a.norm())
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(a: &SymMatrix) -> Result<f64> {
    let f = spectral_factor(a)?;
    Ok(f.max().abs().max(f.min().abs()))
}

/// Induced 2-norm of a general square matrix (largest singular value).
pub fn operator_norm(a: &Matrix) -> Result<f64> {
    check_finite(a.iter())?;
    Ok(a.clone().svd(false, false).singular_values.max())
}

/// `‖Q A Q‖_F`.
pub fn weighted_frobenius(a: &Matrix, q: &SymMatrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::InvalidShape {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    check_dim(q.dim(), a.nrows())?;
    frobenius_norm(&(&q.0 * a * &q.0))
}

fn cholesky(a: &SymMatrix) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    check_finite(a.iter())?;
    Cholesky::new(a.0.clone()).ok_or_else(|| {
        let (min, max) = spectral_factor(a)
            .map(|f| (f.min(), f.max()))
            .unwrap_or((f64::NAN, f64::NAN));
        LinalgError::NotPositiveDefinite { min, max }
    })
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &Vector) -> Result<Vector> {
    check_dim(a.dim(), b.len())?;
    check_finite(b.iter())?;
    Ok(cholesky(a)?.solve(b))
}

pub fn inverse_spd(a: &SymMatrix) -> Result<SymMatrix> {
    SymMatrix::from_upper(cholesky(a)?.inverse())
}

/// Diagonal matrix, stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMatrix(Vector);

impl DiagonalMatrix {
    pub fn new(diag: Vector) -> Result<Self> {
        if diag.is_empty() {
            return Err(LinalgError::InvalidShape { rows: 0, cols: 0 });
        }
        Ok(Self(diag))
    }

    pub fn diagonal(&self) -> &Vector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_dense(&self) -> SymMatrix {
        SymMatrix::from_diagonal(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.0.max()
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        check_finite(self.0.iter())?;
        Ok(self.0.amax())
    }

    pub fn power_half(&self, sign: RootSign) -> Result<Self> {
        check_finite(self.0.iter())?;
        check_pd(self.min_eigenvalue(), self.max_eigenvalue())?;
        Ok(Self(match sign {
            RootSign::Positive => self.0.map(f64::sqrt),
            RootSign::Negative => self.0.map(|l| 1.0 / l.sqrt()),
        }))
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        check_dim(self.dim(), b.len())?;
        check_finite(self.0.iter().chain(b.iter()))?;
        check_pd(self.min_eigenvalue(), self.max_eigenvalue())?;
        Ok(b.component_div(&self.0))
    }

    pub fn inverse(&self) -> Result<Self> {
        check_pd(self.min_eigenvalue(), self.max_eigenvalue())?;
        Ok(Self(self.0.map(|l| 1.0 / l)))
    }
}

/// A symmetric matrix that is either diagonal or dense.
///
/// Hessians of the separable builtin objectives are diagonal, which keeps
/// roots, solves and products O(d) at d in the thousands.
#[derive(Debug, Clone, PartialEq)]
pub enum SymOperator {
    Diagonal(DiagonalMatrix),
    Dense(SymMatrix),
}

impl SymOperator {
    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.dim(),
            Self::Dense(m) => m.dim(),
        }
    }

    pub fn to_dense(&self) -> SymMatrix {
        match self {
            Self::Diagonal(d) => d.to_dense(),
            Self::Dense(m) => m.clone(),
        }
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.dim(), v.len())?;
        Ok(match self {
            Self::Diagonal(d) => d.diagonal().component_mul(v),
            Self::Dense(m) => &m.0 * v,
        })
    }

    /// `Q A Q` with `Q = self`.
    pub fn congruence(&self, a: &SymMatrix) -> Result<SymMatrix> {
        check_dim(self.dim(), a.dim())?;
        match self {
            Self::Diagonal(d) => {
                let q = d.diagonal();
                let mut m = a.0.clone();
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        m[(i, j)] *= q[i] * q[j];
                    }
                }
                SymMatrix::from_upper(m)
            }
            Self::Dense(q) => a.congruence(q),
        }
    }

    pub fn power_half(&self, sign: RootSign) -> Result<Self> {
        Ok(match self {
            Self::Diagonal(d) => Self::Diagonal(d.power_half(sign)?),
            Self::Dense(m) => Self::Dense(matrix_power_half(m, sign)?),
        })
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        match self {
            Self::Diagonal(d) => d.solve(b),
            Self::Dense(m) => solve_spd(m, b),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(match self {
            Self::Diagonal(d) => Self::Diagonal(d.inverse()?),
            Self::Dense(m) => Self::Dense(inverse_spd(m)?),
        })
    }

    /// `(λ_min, λ_max)`.
    pub fn eigen_range(&self) -> Result<(f64, f64)> {
        match self {
            Self::Diagonal(d) => {
                check_finite(d.diagonal().iter())?;
                Ok((d.min_eigenvalue(), d.max_eigenvalue()))
            }
            Self::Dense(m) => {
                let f = spectral_factor(m)?;
                Ok((f.min(), f.max()))
            }
        }
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        match self {
            Self::Diagonal(d) => d.spectral_norm(),
            Self::Dense(m) => spectral_norm(m),
        }
    }

    pub fn sub(&self, other: &SymOperator) -> Result<SymOperator> {
        check_dim(self.dim(), other.dim())?;
        Ok(match (self, other) {
            (Self::Diagonal(a), Self::Diagonal(b)) => {
                Self::Diagonal(DiagonalMatrix(a.diagonal() - b.diagonal()))
            }
            _ => Self::Dense(self.to_dense().sub(&other.to_dense())),
        })
    }
}
