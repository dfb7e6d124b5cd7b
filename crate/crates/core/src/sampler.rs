//! Random matrix generators: matrix normal and matrix-t draws.

use crate::error::{Error, Result};
use crate::linalg::spd_sqrt;
use crate::rng::RngStream;
use crate::types::{RelationalMatrix, SeparableCovariance};
use nalgebra::DMatrix;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// m by m matrix of i.i.d. standard normals, filled column by column.
pub fn standard_normal_matrix(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_iterator(m, m, (0..m * m).map(|_| rng.sample(StandardNormal)))
}

/// Draws Y = Sigma_r^{1/2} Z Sigma_c^{1/2} with Z i.i.d. standard normal,
/// so vec(Y) ~ N(0, Sigma_c (x) Sigma_r).
pub fn sample_matrix_normal(
    m: usize,
    cov: &SeparableCovariance,
    stream: &RngStream,
) -> Result<RelationalMatrix> {
    let mut rng = stream.rng();
    sample_matrix_normal_with(m, cov, &mut rng)
}

fn sample_matrix_normal_with(
    m: usize,
    cov: &SeparableCovariance,
    rng: &mut ChaCha8Rng,
) -> Result<RelationalMatrix> {
    if cov.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "covariance is for m = {} but m = {m} was requested",
            cov.m()
        )));
    }
    let z = standard_normal_matrix(m, rng);
    let y = if cov.sigma_r().is_identity(0.0) && cov.sigma_c().is_identity(0.0) {
        z
    } else {
        let sr = spd_sqrt(cov.sigma_r())?;
        let sc = spd_sqrt(cov.sigma_c())?;
        &sr * z * &sc
    };
    RelationalMatrix::new(y)
}

/// Matrix-t draw: a matrix normal divided by sqrt(W) where W ~ chi2(dof)/dof
/// is a single mixing scalar per matrix. As dof grows this approaches the
/// matrix normal; small dof gives heavy elliptical tails.
pub fn sample_matrix_t(
    m: usize,
    cov: &SeparableCovariance,
    dof: f64,
    stream: &RngStream,
) -> Result<RelationalMatrix> {
    if dof <= 0.0 || !dof.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom must be positive and finite, got {dof}"
        )));
    }
    let mut rng = stream.rng();
    let normal = sample_matrix_normal_with(m, cov, &mut rng)?;
    let chi2 = ChiSquared::new(dof)
        .map_err(|e| Error::InvalidArgument(format!("chi-square({dof}): {e}")))?;
    let w: f64 = chi2.sample(&mut rng) / dof;
    RelationalMatrix::new(normal.into_entries() / w.sqrt())
}
