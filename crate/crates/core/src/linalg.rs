//! Dense symmetric linear algebra helpers shared by the estimators.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// A matrix is treated as rank deficient when its smallest singular value
/// divided by its largest falls below this threshold.
pub const RANK_RATIO_THRESHOLD: f64 = 1e-10;

/// Iterates of the covariance updates must keep all eigenvalues above this
/// floor; falling below it aborts the fit.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Returns sigma_min / sigma_max of `a` (0 when the matrix is exactly zero).
pub fn singular_value_ratio(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Fails loudly on numerically rank-deficient input.
pub fn ensure_full_rank(a: &DMatrix<f64>) -> Result<()> {
    let ratio = singular_value_ratio(a);
    if !ratio.is_finite() || ratio < RANK_RATIO_THRESHOLD {
        return Err(Error::RankDeficient {
            ratio,
            threshold: RANK_RATIO_THRESHOLD,
        });
    }
    Ok(())
}

/// Checks symmetry to within `SYMMETRY_REL_TOL` relative to the largest
/// absolute entry.
pub fn ensure_symmetric(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1e-300);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_REL_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "{what} is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// (A + A^t)/2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = a.clone();
    for i in 0..a.nrows() {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Symmetric positive definite square root via eigendecomposition, so that
/// near-singular input produces an eigenvalue-threshold error instead of a
/// factorization failure.
pub fn spd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetrize(a).symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {min:.3e} is not positive"
        )));
    }
    let mut scaled = eig.eigenvectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= eig.eigenvalues[k].sqrt();
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Log determinant of a symmetric positive definite matrix.
pub fn spd_logdet(a: &DMatrix<f64>) -> Result<f64> {
    let eig = symmetrize(a).symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {min:.3e} is not positive"
        )));
    }
    Ok(eig.eigenvalues.iter().map(|&l| l.ln()).sum())
}

/// log|det A| for a general square matrix via LU; returns -inf when singular.
pub fn logabsdet(a: &DMatrix<f64>) -> f64 {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows().min(u.ncols()) {
        acc += u[(i, i)].abs().ln();
    }
    acc
}

/// Inverse and log determinant of a symmetric positive definite matrix.
///
/// Uses Cholesky when the factorization is comfortably positive definite and
/// falls back to an eigendecomposition otherwise, so that a fit iterate that
/// loses definiteness is reported against `EIGENVALUE_FLOOR` rather than as an
/// opaque factorization failure.
pub struct SpdFactor {
    pub inv: DMatrix<f64>,
    pub logdet: f64,
}

impl SpdFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if let Some(chol) = a.clone().cholesky() {
            let l = chol.l();
            let mut min_piv = f64::INFINITY;
            let mut logdet = 0.0;
            for i in 0..a.nrows() {
                let piv = l[(i, i)] * l[(i, i)];
                min_piv = min_piv.min(piv);
                logdet += piv.ln();
            }
            if min_piv >= EIGENVALUE_FLOOR {
                return Ok(Self {
                    inv: chol.inverse(),
                    logdet,
                });
            }
        }
        // Marginal or indefinite: classify precisely by eigenvalues.
        let eig = symmetrize(a).symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min < EIGENVALUE_FLOOR {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min:.3e} is below the floor {EIGENVALUE_FLOOR:.0e}"
            )));
        }
        let mut scaled = eig.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col /= eig.eigenvalues[k];
        }
        Ok(Self {
            inv: &scaled * eig.eigenvectors.transpose(),
            logdet: eig.eigenvalues.iter().map(|&l| l.ln()).sum(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn sqrt_of_identity_is_identity() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let s = spd_sqrt(&i3).unwrap();
        assert_relative_eq!(s, i3, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = dmatrix![4.0, 1.0; 1.0, 3.0];
        let s = spd_sqrt(&a).unwrap();
        assert_relative_eq!(&s * &s, a, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = dmatrix![1.0, 2.0; 2.0, 1.0]; // eigenvalues 3, -1
        assert!(matches!(spd_sqrt(&a), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn logdet_matches_hand_value() {
        let a = dmatrix![2.0, 0.0; 0.0, 5.0];
        assert_relative_eq!(spd_logdet(&a).unwrap(), (10.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn logabsdet_handles_large_scale() {
        // det = (1e6)^4 would overflow a naive product at larger sizes; the
        // log-space path must stay finite and exact here.
        let a = DMatrix::<f64>::identity(4, 4) * 1.0e6;
        assert_relative_eq!(logabsdet(&a), 4.0 * (1.0e6f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn logabsdet_of_singular_is_neg_inf() {
        let a = dmatrix![1.0, 2.0; 2.0, 4.0];
        assert_eq!(logabsdet(&a), f64::NEG_INFINITY);
    }

    #[test]
    fn rank_ratio_flags_singular() {
        let a = dmatrix![1.0, 2.0; 2.0, 4.0];
        assert!(ensure_full_rank(&a).is_err());
        let b = dmatrix![1.0, 0.0; 0.0, 1.0];
        assert!(ensure_full_rank(&b).is_ok());
    }

    #[test]
    fn spd_factor_matches_eigen_inverse() {
        let a = dmatrix![4.0, 1.0, 0.5; 1.0, 3.0, 0.2; 0.5, 0.2, 2.0];
        let f = SpdFactor::new(&a).unwrap();
        assert_relative_eq!(&a * &f.inv, DMatrix::identity(3, 3), epsilon = 1e-10);
        assert_relative_eq!(f.logdet, spd_logdet(&a).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn spd_factor_enforces_floor() {
        let a = dmatrix![1.0, 0.0; 0.0, 1e-14];
        assert!(matches!(
            SpdFactor::new(&a),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn ensure_symmetric_rejects_asymmetry() {
        let a = dmatrix![1.0, 2.0; 2.1, 1.0];
        assert!(ensure_symmetric(&a, "test matrix").is_err());
    }
}
