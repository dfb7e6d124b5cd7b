//! Power simulation harness: rejection rates of the dependence test along
//! grids of alternatives.
//!
//! Three families of alternatives are built in:
//! - exchangeable row and column correlation,
//! - a maximally sparse pair (only rows 1 and 2 correlated),
//! - a two-group stochastic blockmodel, whose induced covariance is not
//!   separable.

use crate::error::{Error, Result};
use crate::lrt::{self, TestSpec};
use crate::rng::{derive_seed, RngStream};
use crate::sampler::standard_normal_matrix;
use crate::types::RelationalMatrix;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;

/// Domain tag separating data-generation streams from null-simulation
/// streams that share the user's seed.
const POWER_DATA_DOMAIN: u64 = 0x504f_5752_4441_5441;

/// One point of a power study: the data-generating model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlternativeSpec {
    /// Row covariance (1-rho_r) I + rho_r 11^t, column covariance likewise.
    Exchangeable { m: usize, rho_r: f64, rho_c: f64 },
    /// Identity covariances except rows 1 and 2 correlated at rho.
    SparsePair { m: usize, rho: f64 },
    /// y_ij = mu (v_j - u_i) + e_ij with u, v independent Bernoulli(1/2)
    /// group indicators; not a separable covariance.
    Blockmodel { m: usize, mu: f64 },
}

impl AlternativeSpec {
    pub fn m(&self) -> usize {
        match *self {
            AlternativeSpec::Exchangeable { m, .. }
            | AlternativeSpec::SparsePair { m, .. }
            | AlternativeSpec::Blockmodel { m, .. } => m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AlternativeSpec::Exchangeable { .. } => "exchangeable",
            AlternativeSpec::SparsePair { .. } => "sparse_pair",
            AlternativeSpec::Blockmodel { .. } => "blockmodel",
        }
    }

    /// Kind-specific parameters in a fixed order, for reporting.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            AlternativeSpec::Exchangeable { rho_r, rho_c, .. } => {
                vec![("rho_r", rho_r), ("rho_c", rho_c)]
            }
            AlternativeSpec::SparsePair { rho, .. } => vec![("rho", rho)],
            AlternativeSpec::Blockmodel { mu, .. } => vec![("mu", mu)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "alternatives need m >= 2, got {m}"
            )));
        }
        match *self {
            AlternativeSpec::Exchangeable { rho_r, rho_c, .. } => {
                let lo = -1.0 / (m as f64 - 1.0);
                for (name, rho) in [("rho_r", rho_r), ("rho_c", rho_c)] {
                    // rho = 1 is a valid (singular) covariance; the open lower
                    // bound is where positive semidefiniteness fails.
                    if !(rho > lo && rho <= 1.0) {
                        return Err(Error::InvalidArgument(format!(
                            "exchangeable {name} must lie in ({lo}, 1], got {rho}"
                        )));
                    }
                }
            }
            AlternativeSpec::SparsePair { rho, .. } => {
                if rho.abs() >= 1.0 || rho.is_nan() {
                    return Err(Error::InvalidArgument(format!(
                        "sparse pair needs |rho| < 1, got {rho}"
                    )));
                }
            }
            AlternativeSpec::Blockmodel { mu, .. } => {
                if !(mu >= 0.0 && mu.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "blockmodel needs mu >= 0, got {mu}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rejection count at one alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub alt: AlternativeSpec,
    pub n_reps: usize,
    pub rejections: usize,
    /// rejections / n_reps.
    pub power: f64,
    /// Binomial standard error sqrt(power (1 - power) / n_reps).
    pub mc_se: f64,
}

/// Draws one matrix from the alternative.
pub fn sample_alternative(
    alt: &AlternativeSpec,
    rng: &mut ChaCha8Rng,
) -> Result<RelationalMatrix> {
    alt.validate()?;
    let m = alt.m();
    let entries = match *alt {
        AlternativeSpec::Exchangeable { rho_r, rho_c, .. } => {
            let z = standard_normal_matrix(m, rng);
            exchangeable_mix_columns(exchangeable_mix_rows(z, rho_r), rho_c)
        }
        AlternativeSpec::SparsePair { rho, .. } => {
            // Square root of [[1, rho], [rho, 1]] acting on rows 1 and 2.
            let alpha = ((1.0 + rho).sqrt() + (1.0 - rho).sqrt()) / 2.0;
            let beta = ((1.0 + rho).sqrt() - (1.0 - rho).sqrt()) / 2.0;
            let mut z = standard_normal_matrix(m, rng);
            for j in 0..m {
                let (a, b) = (z[(0, j)], z[(1, j)]);
                z[(0, j)] = alpha * a + beta * b;
                z[(1, j)] = beta * a + alpha * b;
            }
            z
        }
        AlternativeSpec::Blockmodel { mu, .. } => {
            let u: Vec<f64> = (0..m).map(|_| f64::from(rng.random::<bool>())).collect();
            let v: Vec<f64> = (0..m).map(|_| f64::from(rng.random::<bool>())).collect();
            let mut e = standard_normal_matrix(m, rng);
            for j in 0..m {
                for i in 0..m {
                    e[(i, j)] += mu * (v[j] - u[i]);
                }
            }
            e
        }
    };
    RelationalMatrix::new(entries)
}

/// Left-multiplies by the square root of (1-rho) I + rho 11^t, which is
/// b I + ((a-b)/m) 11^t with a = sqrt(1 + (m-1) rho), b = sqrt(1 - rho).
fn exchangeable_mix_rows(z: nalgebra::DMatrix<f64>, rho: f64) -> nalgebra::DMatrix<f64> {
    if rho == 0.0 {
        return z;
    }
    let m = z.nrows();
    let a = (1.0 + (m as f64 - 1.0) * rho).sqrt();
    let b = (1.0 - rho).sqrt();
    let c = (a - b) / m as f64;
    let mut out = z;
    for j in 0..m {
        let col_sum: f64 = out.column(j).sum();
        for i in 0..m {
            out[(i, j)] = b * out[(i, j)] + c * col_sum;
        }
    }
    out
}

fn exchangeable_mix_columns(z: nalgebra::DMatrix<f64>, rho: f64) -> nalgebra::DMatrix<f64> {
    if rho == 0.0 {
        return z;
    }
    let mut out = z.transpose();
    out = exchangeable_mix_rows(out, rho);
    out.transpose()
}

/// Estimates the rejection rate of the level-`level` test at each
/// alternative. All alternatives must share the spec's m; the critical
/// value is the (1 - level) quantile of the null sample for `spec`
/// (loaded from `cache_dir` when given). Rejections count draws with a
/// statistic strictly above the critical value. Deterministic in
/// (spec.seed, alternative index, replication index).
pub fn power_curve(
    alts: &[AlternativeSpec],
    n_reps: usize,
    level: f64,
    spec: &TestSpec,
    cache_dir: Option<&Path>,
) -> Result<Vec<PowerPoint>> {
    spec.validate()?;
    if alts.is_empty() {
        return Err(Error::InvalidArgument("no alternatives given".into()));
    }
    if n_reps == 0 {
        return Err(Error::InvalidArgument("n_reps must be positive".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level must lie inside (0, 1), got {level}"
        )));
    }
    if spec.p != 1 || spec.missing_diagonal || spec.heteroscedastic {
        return Err(Error::InvalidArgument(
            "power studies draw single complete matrices; the spec must have \
             p = 1 and no diagonal or scale flags"
                .into(),
        ));
    }
    for alt in alts {
        alt.validate()?;
        if alt.m() != spec.m {
            return Err(Error::DimensionMismatch(format!(
                "alternative has m = {} but the null spec has m = {}",
                alt.m(),
                spec.m
            )));
        }
    }
    let (null_sorted, _) = match cache_dir {
        Some(dir) => crate::cache::load_or_generate(spec, dir)?,
        None => (lrt::null_distribution(spec)?, false),
    };
    let critical = lrt::quantile(&null_sorted, 1.0 - level)?;
    let data_seed = derive_seed(spec.seed, POWER_DATA_DOMAIN);
    alts.iter()
        .enumerate()
        .map(|(a, alt)| {
            let rejections = (0..n_reps as u64)
                .into_par_iter()
                .map(|r| -> Result<usize> {
                    let mut rng = RngStream::new(data_seed, ((a as u64) << 32) | r).rng();
                    let y = sample_alternative(alt, &mut rng)?;
                    Ok(usize::from(lrt::statistic(&y)? > critical))
                })
                .try_reduce(|| 0, |x, y| Ok(x + y))?;
            let power = rejections as f64 / n_reps as f64;
            Ok(PowerPoint {
                alt: *alt,
                n_reps,
                rejections,
                power,
                mc_se: (power * (1.0 - power) / n_reps as f64).sqrt(),
            })
        })
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Correlation grids stop short of 1, where the covariance is singular and
/// every draw is rank deficient.
const RHO_CAP: f64 = 0.98;

fn grid_side(full: bool) -> usize {
    if full {
        25
    } else {
        7
    }
}

/// Square grid over (rho_r, rho_c), spanning the positive-definite range.
pub fn exchangeable_grid(m: usize, full: bool) -> Vec<AlternativeSpec> {
    let lo = -0.9 / (m as f64 - 1.0);
    let side = linspace(lo, RHO_CAP, grid_side(full));
    side.iter()
        .flat_map(|&rho_r| {
            side.iter()
                .map(move |&rho_c| AlternativeSpec::Exchangeable { m, rho_r, rho_c })
        })
        .collect()
}

pub fn sparse_pair_grid(m: usize, full: bool) -> Vec<AlternativeSpec> {
    linspace(-0.9, 0.9, grid_side(full))
        .into_iter()
        .map(|rho| AlternativeSpec::SparsePair { m, rho })
        .collect()
}

pub fn blockmodel_grid(m: usize, full: bool) -> Vec<AlternativeSpec> {
    linspace(0.0, 4.0, grid_side(full))
        .into_iter()
        .map(|mu| AlternativeSpec::Blockmodel { m, mu })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parameter_bounds_are_enforced() {
        assert!(AlternativeSpec::Exchangeable { m: 10, rho_r: 1.0, rho_c: 0.0 }
            .validate()
            .is_ok());
        assert!(AlternativeSpec::Exchangeable { m: 10, rho_r: -1.0 / 9.0, rho_c: 0.0 }
            .validate()
            .is_err());
        assert!(AlternativeSpec::Exchangeable { m: 10, rho_r: 1.01, rho_c: 0.0 }
            .validate()
            .is_err());
        assert!(AlternativeSpec::SparsePair { m: 5, rho: 1.0 }.validate().is_err());
        assert!(AlternativeSpec::SparsePair { m: 5, rho: -0.99 }.validate().is_ok());
        assert!(AlternativeSpec::Blockmodel { m: 5, mu: -0.1 }.validate().is_err());
        assert!(AlternativeSpec::Blockmodel { m: 5, mu: 0.0 }.validate().is_ok());
    }

    #[test]
    fn zero_correlation_is_the_identity_transform() {
        let stream = RngStream::new(5, 0);
        let alt = AlternativeSpec::Exchangeable { m: 6, rho_r: 0.0, rho_c: 0.0 };
        let y = sample_alternative(&alt, &mut stream.rng()).unwrap();
        let z = standard_normal_matrix(6, &mut stream.rng());
        assert_eq!(y.entries(), &z);
    }

    #[test]
    fn exchangeable_rows_have_the_requested_correlation() {
        // E[Y Y^t] = tr(Sigma_c) Sigma_r = m Sigma_r when diag(Sigma_c) = 1.
        let m = 4;
        let alt = AlternativeSpec::Exchangeable { m, rho_r: 0.6, rho_c: -0.2 };
        let mut acc = nalgebra::DMatrix::<f64>::zeros(m, m);
        let n = 20_000;
        let mut rng = RngStream::new(11, 0).rng();
        for _ in 0..n {
            let y = sample_alternative(&alt, &mut rng).unwrap();
            acc += y.entries() * y.entries().transpose();
        }
        acc /= (n * m) as f64;
        let want = crate::types::exchangeable_matrix(m, 0.6).unwrap();
        assert_relative_eq!(acc, want, epsilon = 0.05);
    }

    #[test]
    fn sparse_pair_couples_only_the_first_two_rows() {
        let m = 5;
        let alt = AlternativeSpec::SparsePair { m, rho: 0.8 };
        let mut acc = nalgebra::DMatrix::<f64>::zeros(m, m);
        let n = 20_000;
        let mut rng = RngStream::new(12, 0).rng();
        for _ in 0..n {
            let y = sample_alternative(&alt, &mut rng).unwrap();
            acc += y.entries() * y.entries().transpose();
        }
        acc /= (n * m) as f64;
        let mut want = nalgebra::DMatrix::<f64>::identity(m, m);
        want[(0, 1)] = 0.8;
        want[(1, 0)] = 0.8;
        assert_relative_eq!(acc, want, epsilon = 0.05);
    }

    #[test]
    fn blockmodel_entries_center_on_the_group_offsets() {
        let alt = AlternativeSpec::Blockmodel { m: 50, mu: 2.0 };
        let mut rng = RngStream::new(13, 0).rng();
        let y = sample_alternative(&alt, &mut rng).unwrap();
        // Each entry is mu (v_j - u_i) + noise, so the global mean over a
        // single draw concentrates near mu (v_bar - u_bar), which is small.
        let grand = y.entries().sum() / 2500.0;
        assert!(grand.abs() < 1.0, "grand mean {grand}");
    }

    #[test]
    fn power_curve_orders_null_and_strong_alternative() {
        let mut spec = TestSpec::new(5, 200, 3);
        spec.seed = 3;
        let alts = [
            AlternativeSpec::Exchangeable { m: 5, rho_r: 0.0, rho_c: 0.0 },
            AlternativeSpec::Exchangeable { m: 5, rho_r: 0.9, rho_c: 0.9 },
        ];
        let points = power_curve(&alts, 60, 0.05, &spec, None).unwrap();
        assert_eq!(points.len(), 2);
        assert!(points[0].power < 0.3, "null power {}", points[0].power);
        assert!(points[1].power > 0.5, "alt power {}", points[1].power);
        for p in &points {
            assert_eq!(p.power, p.rejections as f64 / p.n_reps as f64);
        }
        // Deterministic rerun.
        let again = power_curve(&alts, 60, 0.05, &spec, None).unwrap();
        assert_eq!(points, again);
    }

    #[test]
    fn grids_have_the_documented_shapes() {
        assert_eq!(exchangeable_grid(10, false).len(), 49);
        assert_eq!(exchangeable_grid(10, true).len(), 625);
        assert_eq!(sparse_pair_grid(5, false).len(), 7);
        assert_eq!(blockmodel_grid(5, true).len(), 25);
        for alt in exchangeable_grid(10, true) {
            alt.validate().unwrap();
        }
    }

    #[test]
    fn rejects_mismatched_m() {
        let spec = TestSpec::new(5, 200, 3);
        let alts = [AlternativeSpec::SparsePair { m: 6, rho: 0.5 }];
        assert!(power_curve(&alts, 10, 0.05, &spec, None).is_err());
    }
}
