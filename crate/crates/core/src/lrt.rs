//! The likelihood ratio statistic and its simulated null distribution.
//!
//! The statistic T(Y) is the fitted null (diagonal) scaled log likelihood
//! minus the fitted unrestricted one, which for a single matrix reduces to
//! m (log|D_c| + log|D_r| - log|Y Y^t / m|). It is nonnegative, invariant
//! under rescaling of rows and columns by positive diagonal matrices, and
//! unchanged across the whole elliptical family sharing the Kronecker
//! covariance, so one simulated reference distribution per shape
//! (m, p, diagonal handling) calibrates every null hypothesis instance.

use crate::error::{Error, Result};
use crate::estimator::{self, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::linalg::ensure_full_rank;
use crate::rng::RngStream;
use crate::sampler::standard_normal_matrix;
use crate::types::RelationalMatrix;
use rayon::prelude::*;
use std::path::Path;

/// Default Monte Carlo sample count for interactive use.
pub const DEFAULT_S_INTERACTIVE: usize = 10_000;
/// Monte Carlo sample count used for the reference quantile tables.
pub const DEFAULT_S_TABLE: usize = 100_000;

/// Values in (-STAT_CLAMP, 0) are rounding residue of an exactly-zero
/// statistic and are clamped to 0.
const STAT_CLAMP: f64 = 1e-9;

/// The single-matrix statistic needs a tighter inner tolerance than the
/// default fit so that its diagonal-scaling invariance holds to 1e-8 even
/// for slowly converging instances; the sweeps are O(m^2), so this is cheap.
const SINGLE_TOL: f64 = 1e-12;
const SINGLE_MAX_ITER: usize = 5_000;

/// Resample cap for degenerate (measure-zero) simulated draws.
const MAX_RESAMPLE_ATTEMPTS: u64 = 255;

/// Specification of a Monte Carlo null distribution and the data shape it
/// calibrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestSpec {
    /// Node count.
    pub m: usize,
    /// Replicate count; 1 means a single matrix.
    pub p: usize,
    /// Structurally undefined (zero-filled) diagonals.
    pub missing_diagonal: bool,
    /// Per-replicate variance scales in both fitted models.
    pub heteroscedastic: bool,
    /// Monte Carlo sample count.
    pub s: usize,
    pub seed: u64,
}

impl TestSpec {
    /// Single-matrix spec with the interactive default sample count.
    pub fn new(m: usize, s: usize, seed: u64) -> Self {
        Self {
            m,
            p: 1,
            missing_diagonal: false,
            heteroscedastic: false,
            s,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidArgument("spec needs m >= 2".into()));
        }
        if self.p < 1 {
            return Err(Error::InvalidArgument("spec needs p >= 1".into()));
        }
        if self.s < 100 {
            return Err(Error::InvalidArgument(format!(
                "spec needs S >= 100 Monte Carlo samples, got {}",
                self.s
            )));
        }
        Ok(())
    }
}

/// Count, mean, and sample standard deviation of the simulated null sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullSampleSummary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Full outcome of a calibrated test.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub statistic: f64,
    /// Add-one Monte Carlo p-value (1 + #{T_s >= statistic}) / (S + 1).
    pub p_value: f64,
    /// 95th percentile of the simulated null distribution.
    pub quantile_95: f64,
    pub null_sample_summary: NullSampleSummary,
    pub spec: TestSpec,
    /// True when the statistic was computed on regression residuals, whose
    /// null distribution is only asymptotically correct.
    pub approximate_null: bool,
    /// True when the null sample was read from a quantile cache file.
    pub cache_hit: bool,
}

/// Data accepted by `run_test`.
#[derive(Debug, Clone)]
pub enum TestData {
    Single(RelationalMatrix),
    Replicates(Vec<RelationalMatrix>),
}

fn clamp_statistic(t: f64) -> f64 {
    if t > -STAT_CLAMP && t < 0.0 {
        0.0
    } else {
        t
    }
}

/// Likelihood ratio statistic of a single matrix (zero-filled diagonal
/// included as data when the diagonal is undefined).
pub fn statistic(y: &RelationalMatrix) -> Result<f64> {
    ensure_full_rank(y.entries())?;
    let t = raw_statistic_single(y)?;
    if !t.is_finite() {
        return Err(Error::NonFinite("test statistic".into()));
    }
    Ok(t)
}

fn raw_statistic_single(y: &RelationalMatrix) -> Result<f64> {
    let null = estimator::null_stack_unchecked(
        std::slice::from_ref(y),
        false,
        SINGLE_TOL,
        SINGLE_MAX_ITER,
    )?;
    let full = estimator::full_loglik_unchecked(y.entries());
    Ok(clamp_statistic(null.scaled_loglik - full))
}

/// Likelihood ratio statistic of a replicate stack; with
/// `heteroscedastic = true` both fitted models carry per-replicate scales.
/// A stack of one delegates to the single-matrix statistic.
pub fn statistic_replicates(ys: &[RelationalMatrix], heteroscedastic: bool) -> Result<f64> {
    estimator::validate_stack(ys, true)?;
    let t = raw_statistic_replicates(ys, heteroscedastic)?;
    if !t.is_finite() {
        return Err(Error::NonFinite("test statistic".into()));
    }
    Ok(t)
}

fn raw_statistic_replicates(ys: &[RelationalMatrix], heteroscedastic: bool) -> Result<f64> {
    if ys.len() == 1 {
        // The per-replicate scale is pure gauge when p = 1.
        return raw_statistic_single(&ys[0]);
    }
    let null = estimator::null_stack_unchecked(ys, heteroscedastic, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let full = estimator::full_stack_unchecked(ys, heteroscedastic, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(clamp_statistic(null.scaled_loglik - full.scaled_loglik))
}

/// Simulates the null distribution of the statistic for `spec`: S
/// independent standard matrix normal draws (stacks of p, zero-filled
/// diagonals when requested), each on its own random stream, statistics
/// sorted ascending. Deterministic for a fixed spec regardless of the
/// worker count.
pub fn null_distribution(spec: &TestSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut stats = (0..spec.s as u64)
        .into_par_iter()
        .map(|s| simulate_one(spec, s))
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_unstable_by(f64::total_cmp);
    Ok(stats)
}

fn simulate_one(spec: &TestSpec, s: u64) -> Result<f64> {
    let mut last_err = None;
    for attempt in 0..=MAX_RESAMPLE_ATTEMPTS {
        let stream = if attempt == 0 {
            RngStream::new(spec.seed, s)
        } else {
            // Reserved stream block far above any replicate index.
            RngStream::new(spec.seed, (1u64 << 63) + s * (MAX_RESAMPLE_ATTEMPTS + 1) + attempt)
        };
        match draw_and_score(spec, &stream) {
            Ok(t) if t.is_finite() => return Ok(t),
            Ok(_) => {
                log::warn!("degenerate simulated draw for replicate {s} (attempt {attempt}); resampling");
                last_err = Some(Error::NonFinite("simulated statistic".into()));
            }
            Err(e) => {
                log::warn!(
                    "simulated draw for replicate {s} failed (attempt {attempt}): {e}; resampling"
                );
                last_err = Some(e);
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::NonFinite("simulated statistic".into())))
}

fn draw_and_score(spec: &TestSpec, stream: &RngStream) -> Result<f64> {
    let mut rng = stream.rng();
    let mut ys = Vec::with_capacity(spec.p);
    for _ in 0..spec.p {
        let z = standard_normal_matrix(spec.m, &mut rng);
        let y = if spec.missing_diagonal {
            RelationalMatrix::with_missing_diagonal(z)?
        } else {
            RelationalMatrix::new(z)?
        };
        ys.push(y);
    }
    raw_statistic_replicates(&ys, spec.heteroscedastic)
}

/// Empirical quantile rule: the smallest sample value t such that the
/// fraction of sample values <= t is at least q.
pub fn quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must be inside (0, 1), got {q}"
        )));
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let n = sorted.len();
    // k = ceil(q n) as the 1-based order statistic; the small shift keeps
    // exactly representable products like 0.95 * 100000 from rounding up.
    let k = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[k.min(n) - 1])
}

/// Add-one Monte Carlo p-value against a sorted null sample.
pub fn p_value(sorted_null: &[f64], t_obs: f64) -> f64 {
    let below = sorted_null.partition_point(|&t| t < t_obs);
    let ge = sorted_null.len() - below;
    (1.0 + ge as f64) / (sorted_null.len() as f64 + 1.0)
}

/// Assembles a `TestResult` from a computed statistic and a sorted null
/// sample.
pub fn compose_result(
    statistic: f64,
    null_sorted: &[f64],
    spec: &TestSpec,
    cache_hit: bool,
    approximate_null: bool,
) -> Result<TestResult> {
    let n = null_sorted.len();
    if n != spec.s {
        return Err(Error::InvalidArgument(format!(
            "null sample has {n} values but the spec asks for {}",
            spec.s
        )));
    }
    let mean = null_sorted.iter().sum::<f64>() / n as f64;
    let var = null_sorted.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Ok(TestResult {
        statistic,
        p_value: p_value(null_sorted, statistic),
        quantile_95: quantile(null_sorted, 0.95)?,
        null_sample_summary: NullSampleSummary {
            count: n,
            mean,
            sd: var.sqrt(),
        },
        spec: *spec,
        approximate_null,
        cache_hit,
    })
}

/// Computes the statistic of `data`, obtains the null distribution (from the
/// cache directory when given, regenerating and persisting on a miss), and
/// reports the calibrated result.
pub fn run_test(data: &TestData, spec: &TestSpec, cache_dir: Option<&Path>) -> Result<TestResult> {
    spec.validate()?;
    let t = match data {
        TestData::Single(y) => {
            check_shape(y, spec, 0)?;
            if spec.p != 1 {
                return Err(Error::DimensionMismatch(format!(
                    "spec asks for p = {} replicates but a single matrix was given",
                    spec.p
                )));
            }
            statistic(y)?
        }
        TestData::Replicates(ys) => {
            if ys.len() != spec.p {
                return Err(Error::DimensionMismatch(format!(
                    "spec asks for p = {} replicates but {} were given",
                    spec.p,
                    ys.len()
                )));
            }
            for (i, y) in ys.iter().enumerate() {
                check_shape(y, spec, i)?;
            }
            statistic_replicates(ys, spec.heteroscedastic)?
        }
    };
    let (null_sorted, cache_hit) = match cache_dir {
        Some(dir) => crate::cache::load_or_generate(spec, dir)?,
        None => (null_distribution(spec)?, false),
    };
    compose_result(t, &null_sorted, spec, cache_hit, false)
}

fn check_shape(y: &RelationalMatrix, spec: &TestSpec, index: usize) -> Result<()> {
    if y.m() != spec.m {
        return Err(Error::DimensionMismatch(format!(
            "replicate {index} is {}x{} but the spec says m = {}",
            y.m(),
            y.m(),
            spec.m
        )));
    }
    if y.diagonal_defined() == spec.missing_diagonal {
        return Err(Error::InvalidArgument(format!(
            "replicate {index} has diagonal_defined = {} which contradicts \
             missing_diagonal = {} in the spec",
            y.diagonal_defined(),
            spec.missing_diagonal
        )));
    }
    Ok(())
}
