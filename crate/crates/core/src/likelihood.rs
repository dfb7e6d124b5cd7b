//! The scaled log likelihood of the matrix normal model.
//!
//! Throughout the crate the objective being minimized is
//!
//! ```text
//! l(Sigma_r, Sigma_c; Y) = tr[Sigma_r^-1 Y Sigma_c^-1 Y^t]
//!                          + m log|Sigma_r| + m log|Sigma_c|
//! ```
//!
//! which is -2 log density - m^2 log(2 pi). Smaller is better. The m^2 by
//! m^2 Kronecker covariance is never formed.

use crate::error::{Error, Result};
use crate::linalg::{ensure_full_rank, symmetrize};
use crate::types::{DiagonalCovariance, RelationalMatrix, SeparableCovariance};
use nalgebra::DMatrix;

/// Scaled log likelihood at a full covariance pair.
pub fn scaled_log_likelihood(y: &RelationalMatrix, cov: &SeparableCovariance) -> Result<f64> {
    if cov.m() != y.m() {
        return Err(Error::DimensionMismatch(format!(
            "data is {0}x{0} but covariance is {1}x{1}",
            y.m(),
            cov.m()
        )));
    }
    ensure_full_rank(y.entries())?;
    scaled_log_likelihood_unchecked(y.entries(), cov)
}

pub(crate) fn scaled_log_likelihood_unchecked(
    y: &DMatrix<f64>,
    cov: &SeparableCovariance,
) -> Result<f64> {
    let m = y.nrows();
    let er = symmetrize(cov.sigma_r()).symmetric_eigen();
    let ec = symmetrize(cov.sigma_c()).symmetric_eigen();
    for eig in [&er, &ec] {
        let min = eig.eigenvalues.min();
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "covariance eigenvalue {min:.3e} is not positive"
            )));
        }
    }
    // With Sigma = U L U^t the trace term is sum_{jk} A_jk^2/(lr_j lc_k)
    // where A = U_r^t Y U_c.
    let a = er.eigenvectors.transpose() * y * &ec.eigenvectors;
    let mut trace = 0.0;
    for k in 0..m {
        for j in 0..m {
            trace += a[(j, k)] * a[(j, k)] / (er.eigenvalues[j] * ec.eigenvalues[k]);
        }
    }
    let logdet_r: f64 = er.eigenvalues.iter().map(|&l| l.ln()).sum();
    let logdet_c: f64 = ec.eigenvalues.iter().map(|&l| l.ln()).sum();
    Ok(trace + (m as f64) * (logdet_r + logdet_c))
}

/// Scaled log likelihood at a diagonal covariance pair (the null model).
pub fn scaled_log_likelihood_diag(y: &RelationalMatrix, d: &DiagonalCovariance) -> Result<f64> {
    if d.m() != y.m() {
        return Err(Error::DimensionMismatch(format!(
            "data is {0}x{0} but diagonal covariance has {1} entries",
            y.m(),
            d.m()
        )));
    }
    let e = y.entries();
    let m = y.m();
    let mut trace = 0.0;
    for k in 0..m {
        for j in 0..m {
            trace += e[(j, k)] * e[(j, k)] / (d.d_r()[j] * d.d_c()[k]);
        }
    }
    Ok(trace + d.log_det_kron())
}
