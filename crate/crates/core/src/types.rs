//! Domain types: data matrices and separable covariance parameters.

use crate::error::{Error, Result};
use crate::linalg::{ensure_symmetric, symmetrize};
use nalgebra::{DMatrix, DVector};

/// A square relational data matrix. Entry (i, j) measures the directed
/// relation from node i to node j.
///
/// When `diagonal_defined` is false the diagonal entries are structurally
/// undefined (self-relations carry no data) and are stored as zeros; all
/// estimators then operate on the zero-filled matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalMatrix {
    entries: DMatrix<f64>,
    diagonal_defined: bool,
}

impl RelationalMatrix {
    /// Wraps a fully observed matrix.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        Self::validate(&entries)?;
        Ok(Self {
            entries,
            diagonal_defined: true,
        })
    }

    /// Wraps a matrix whose diagonal is undefined; whatever was on the
    /// diagonal is replaced by zeros.
    pub fn with_missing_diagonal(mut entries: DMatrix<f64>) -> Result<Self> {
        for i in 0..entries.nrows().min(entries.ncols()) {
            entries[(i, i)] = 0.0;
        }
        Self::validate(&entries)?;
        Ok(Self {
            entries,
            diagonal_defined: false,
        })
    }

    fn validate(entries: &DMatrix<f64>) -> Result<()> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "relational matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() < 2 {
            return Err(Error::InvalidArgument(
                "relational matrix needs at least 2 nodes".into(),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("relational matrix entry".into()));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn diagonal_defined(&self) -> bool {
        self.diagonal_defined
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Row and column covariance pair (Sigma_r, Sigma_c), both m by m symmetric
/// positive definite. The implied covariance of vec(Y) is the Kronecker
/// product Sigma_c (x) Sigma_r, which is never materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableCovariance {
    sigma_r: DMatrix<f64>,
    sigma_c: DMatrix<f64>,
}

impl SeparableCovariance {
    pub fn new(sigma_r: DMatrix<f64>, sigma_c: DMatrix<f64>) -> Result<Self> {
        ensure_symmetric(&sigma_r, "row covariance")?;
        ensure_symmetric(&sigma_c, "column covariance")?;
        if sigma_r.nrows() != sigma_c.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "row covariance is {}x{} but column covariance is {}x{}",
                sigma_r.nrows(),
                sigma_r.ncols(),
                sigma_c.nrows(),
                sigma_c.ncols()
            )));
        }
        for (mat, what) in [(&sigma_r, "row"), (&sigma_c, "column")] {
            let min = symmetrize(mat).symmetric_eigen().eigenvalues.min();
            if min <= 0.0 {
                return Err(Error::NotPositiveDefinite(format!(
                    "{what} covariance has eigenvalue {min:.3e} after symmetrization"
                )));
            }
        }
        Ok(Self { sigma_r, sigma_c })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            sigma_r: DMatrix::identity(m, m),
            sigma_c: DMatrix::identity(m, m),
        }
    }

    /// Exchangeable pair: each factor is (1 - rho) I + rho 11^t, the
    /// covariance with constant correlation rho between any two rows (or
    /// columns). Positive definite for rho in (-1/(m-1), 1).
    pub fn exchangeable(m: usize, rho_r: f64, rho_c: f64) -> Result<Self> {
        Self::new(exchangeable_matrix(m, rho_r)?, exchangeable_matrix(m, rho_c)?)
    }

    pub fn m(&self) -> usize {
        self.sigma_r.nrows()
    }

    pub fn sigma_r(&self) -> &DMatrix<f64> {
        &self.sigma_r
    }

    pub fn sigma_c(&self) -> &DMatrix<f64> {
        &self.sigma_c
    }
}

/// (1 - rho) I + rho 11^t, checked for positive definiteness.
pub fn exchangeable_matrix(m: usize, rho: f64) -> Result<DMatrix<f64>> {
    if m < 2 {
        return Err(Error::InvalidArgument("need m >= 2".into()));
    }
    let lo = -1.0 / (m as f64 - 1.0);
    if !(rho > lo && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exchangeable correlation {rho} outside ({lo:.6}, 1) is not positive definite at m = {m}"
        )));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { rho }))
}

/// Diagonal restriction of `SeparableCovariance`: positive vectors d_r, d_c
/// representing D_r = diag(d_r) and D_c = diag(d_c). This is the null model
/// of the dependence test (heteroscedastic but independent rows and columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCovariance {
    d_r: DVector<f64>,
    d_c: DVector<f64>,
}

impl DiagonalCovariance {
    pub fn new(d_r: DVector<f64>, d_c: DVector<f64>) -> Result<Self> {
        if d_r.len() != d_c.len() {
            return Err(Error::DimensionMismatch(format!(
                "d_r has {} entries but d_c has {}",
                d_r.len(),
                d_c.len()
            )));
        }
        if d_r.iter().chain(d_c.iter()).any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "diagonal covariance entries must be strictly positive".into(),
            ));
        }
        Ok(Self { d_r, d_c })
    }

    pub fn m(&self) -> usize {
        self.d_r.len()
    }

    pub fn d_r(&self) -> &DVector<f64> {
        &self.d_r
    }

    pub fn d_c(&self) -> &DVector<f64> {
        &self.d_c
    }

    /// log|D_c (x) D_r| = m (sum log d_r + sum log d_c), computed without
    /// forming the m^2 by m^2 product.
    pub fn log_det_kron(&self) -> f64 {
        let m = self.m() as f64;
        let s: f64 = self.d_r.iter().chain(self.d_c.iter()).map(|&v| v.ln()).sum();
        m * s
    }

    pub fn to_separable(&self) -> SeparableCovariance {
        SeparableCovariance {
            sigma_r: DMatrix::from_diagonal(&self.d_r),
            sigma_c: DMatrix::from_diagonal(&self.d_c),
        }
    }
}
