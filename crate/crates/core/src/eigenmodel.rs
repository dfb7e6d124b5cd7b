//! Probit eigenmodel for binary networks and fuzzy p-values.
//!
//! A binary adjacency matrix is modeled through a latent matrix:
//! a_ij = 1 exactly when y_ij > gamma, with y_ij = u_i' v_j + e_ij,
//! e_ij iid standard normal, and m x R latent factor matrices U, V. A
//! Gibbs sampler draws from the posterior over (Y, U, V, gamma); applying
//! the dependence test to each posterior draw of Y - U V' yields a
//! distribution of p-values ("fuzzy" p-values) instead of a single number.
//!
//! Priors: rows of U and V are N(0, 10 I); gamma is N(0, 100), or fixed at
//! the probit quantile matching the observed density. The noise variance
//! is 1.

use crate::error::{Error, Result};
use crate::lrt::{self, TestSpec};
use crate::rng::RngStream;
use crate::types::RelationalMatrix;
use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::path::Path;

/// Prior variance of each latent factor coordinate.
const TAU2: f64 = 10.0;
/// Prior standard deviation of the threshold gamma.
const GAMMA_PRIOR_SD: f64 = 10.0;

/// An observed binary adjacency matrix.
#[derive(Debug, Clone)]
pub struct BinaryNetwork {
    a: DMatrix<f64>,
    diagonal_meaningful: bool,
}

impl BinaryNetwork {
    /// Entries must be exactly 0 or 1. When the diagonal is not meaningful
    /// (self-relations undefined), diagonal entries are ignored by the
    /// sampler but must still be 0 or 1 here.
    pub fn new(a: DMatrix<f64>, diagonal_meaningful: bool) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "adjacency matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() < 2 {
            return Err(Error::InvalidArgument(
                "networks need at least two nodes".into(),
            ));
        }
        if a.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::InvalidArgument(
                "adjacency entries must be exactly 0 or 1".into(),
            ));
        }
        Ok(BinaryNetwork { a, diagonal_meaningful })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn diagonal_meaningful(&self) -> bool {
        self.diagonal_meaningful
    }

    /// Edge density over the meaningful entries.
    pub fn density(&self) -> f64 {
        let m = self.m();
        let (sum, count) = if self.diagonal_meaningful {
            (self.a.sum(), m * m)
        } else {
            (self.a.sum() - self.a.diagonal().sum(), m * (m - 1))
        };
        sum / count as f64
    }
}

/// How the threshold is treated during sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaHandling {
    /// Full conditional draw under the N(0, 100) prior.
    Sample,
    /// Fixed at the probit quantile matching the observed density; helps
    /// mixing on sparse graphs.
    FixAtDensity,
}

/// One retained draw of the sampler.
#[derive(Debug, Clone)]
pub struct EigenmodelState {
    pub y: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub gamma: f64,
    pub diagonal_meaningful: bool,
}

impl EigenmodelState {
    /// The residual matrix Y - U V' that the dependence test consumes;
    /// zero-filled diagonal when self-relations are undefined.
    pub fn residual(&self) -> Result<RelationalMatrix> {
        let mut e = &self.y - &self.u * self.v.transpose();
        if self.diagonal_meaningful {
            RelationalMatrix::new(e)
        } else {
            e.fill_diagonal(0.0);
            RelationalMatrix::with_missing_diagonal(e)
        }
    }
}

/// The test statistic and p-value of each retained posterior draw.
#[derive(Debug, Clone)]
pub struct FuzzyPValueSample {
    pub draws: Vec<(f64, f64)>,
}

/// Runs the Gibbs sampler and returns the retained states: iterations
/// t = burn_in + thin, burn_in + 2 thin, ... up to n_iter.
pub fn gibbs_fit(
    net: &BinaryNetwork,
    r: usize,
    n_iter: usize,
    burn_in: usize,
    thin: usize,
    gamma: GammaHandling,
    stream: RngStream,
) -> Result<Vec<EigenmodelState>> {
    let m = net.m();
    if r >= m {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must be below the matrix size {m}"
        )));
    }
    if n_iter <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "n_iter = {n_iter} must exceed burn_in = {burn_in}"
        )));
    }
    if thin == 0 {
        return Err(Error::InvalidArgument("thin must be at least 1".into()));
    }
    let mut rng = stream.rng();
    let a = net.adjacency();
    let diag_ok = net.diagonal_meaningful;

    let mut gamma_val = match gamma {
        GammaHandling::Sample => 0.0,
        GammaHandling::FixAtDensity => {
            let density = net.density();
            if !(density > 0.0 && density < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "cannot fix gamma on a network of density {density}"
                )));
            }
            Normal::standard().inverse_cdf(1.0 - density)
        }
    };
    // Start the latent matrix half a unit past the threshold on the correct
    // side, so the sign constraint holds from the first sweep.
    let mut y = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            if diag_ok || i != j {
                y[(i, j)] = gamma_val + if a[(i, j)] == 1.0 { 0.5 } else { -0.5 };
            }
        }
    }
    // Seed the factors from the leading singular triplets of the centered
    // initial sign band. A cold (zero) start would make the first factor
    // update a pure prior draw, and the truncation feedback can then
    // amplify that random direction into a self-consistent mode unrelated
    // to the data. Centering matters: without it the top direction of a
    // sparse band is the constant offset, whose job belongs to the
    // threshold, and the factors would burn their rank on it.
    let (mut u, mut v) = (DMatrix::<f64>::zeros(m, r), DMatrix::<f64>::zeros(m, r));
    if r > 0 {
        let centered = y.add_scalar(-y.mean());
        let svd = centered.svd(true, true);
        let left = svd.u.as_ref().expect("left singular vectors requested");
        let right = svd.v_t.as_ref().expect("right singular vectors requested");
        for k in 0..r {
            let s = svd.singular_values[k].sqrt();
            for i in 0..m {
                u[(i, k)] = s * left[(i, k)];
                v[(i, k)] = s * right[(k, i)];
            }
        }
    }

    let mut states = Vec::new();
    for t in 1..=n_iter {
        // Latent entries given factors, threshold, and the sign constraint.
        for j in 0..m {
            for i in 0..m {
                if !diag_ok && i == j {
                    continue;
                }
                let mean = u.row(i).dot(&v.row(j));
                y[(i, j)] = if a[(i, j)] == 1.0 {
                    truncated_normal(&mut rng, mean, 1.0, gamma_val, f64::INFINITY)
                } else {
                    truncated_normal(&mut rng, mean, 1.0, f64::NEG_INFINITY, gamma_val)
                };
            }
        }
        if r > 0 {
            update_factor_rows(&mut u, &v, &y, diag_ok, false, &mut rng)?;
            update_factor_rows(&mut v, &u, &y, diag_ok, true, &mut rng)?;
        }
        if gamma == GammaHandling::Sample {
            // gamma lies above every latent value at a = 0 and below every
            // latent value at a = 1.
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for j in 0..m {
                for i in 0..m {
                    if !diag_ok && i == j {
                        continue;
                    }
                    if a[(i, j)] == 1.0 {
                        hi = hi.min(y[(i, j)]);
                    } else {
                        lo = lo.max(y[(i, j)]);
                    }
                }
            }
            gamma_val = truncated_normal(&mut rng, 0.0, GAMMA_PRIOR_SD, lo, hi);
        }
        debug_assert!(constraint_holds(a, &y, gamma_val, diag_ok));

        if t > burn_in && (t - burn_in) % thin == 0 {
            states.push(EigenmodelState {
                y: y.clone(),
                u: u.clone(),
                v: v.clone(),
                gamma: gamma_val,
                diagonal_meaningful: diag_ok,
            });
        }
    }
    Ok(states)
}

/// Conjugate update of every row of `target` given the other factor. For
/// row index i the likelihood terms are y_ij = u_i' v_j (+ noise) over the
/// valid j; `transposed` flips to the column version y_ji = u_j' v_i.
fn update_factor_rows(
    target: &mut DMatrix<f64>,
    other: &DMatrix<f64>,
    y: &DMatrix<f64>,
    diag_ok: bool,
    transposed: bool,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let m = target.nrows();
    let r = target.ncols();
    for i in 0..m {
        let mut lambda = DMatrix::<f64>::identity(r, r) / TAU2;
        let mut b = DVector::<f64>::zeros(r);
        for j in 0..m {
            if !diag_ok && i == j {
                continue;
            }
            let oj = other.row(j).transpose();
            let obs = if transposed { y[(j, i)] } else { y[(i, j)] };
            lambda += &oj * oj.transpose();
            b += oj * obs;
        }
        let chol = nalgebra::Cholesky::new(lambda).ok_or_else(|| {
            Error::NotPositiveDefinite("factor precision matrix".into())
        })?;
        let mean = chol.solve(&b);
        let z = DVector::from_fn(r, |_, _| rng.sample(StandardNormal));
        // L^-t z has covariance (L L^t)^-1.
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite("factor precision matrix".into()))?;
        target.row_mut(i).copy_from(&(mean + noise).transpose());
    }
    Ok(())
}

fn constraint_holds(a: &DMatrix<f64>, y: &DMatrix<f64>, gamma: f64, diag_ok: bool) -> bool {
    let m = a.nrows();
    (0..m).all(|j| {
        (0..m).all(|i| {
            (!diag_ok && i == j) || ((y[(i, j)] > gamma) == (a[(i, j)] == 1.0))
        })
    })
}

/// Applies the dependence test to each retained draw of Y - U V'. The spec
/// fixes the null sample (m must match the states, p = 1, no replicate
/// scales, and the diagonal flag must mirror the states' diagonal
/// handling).
pub fn fuzzy_p_values(
    states: &[EigenmodelState],
    spec: &TestSpec,
    cache_dir: Option<&Path>,
) -> Result<FuzzyPValueSample> {
    spec.validate()?;
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("no retained states".into()))?;
    let m = first.y.nrows();
    if spec.m != m || spec.p != 1 || spec.heteroscedastic {
        return Err(Error::InvalidArgument(
            "fuzzy p-values need a single-matrix spec with the states' m".into(),
        ));
    }
    if spec.missing_diagonal == first.diagonal_meaningful {
        return Err(Error::InvalidArgument(
            "spec.missing_diagonal must mirror the fit's diagonal handling".into(),
        ));
    }
    if states
        .iter()
        .any(|s| s.y.nrows() != m || s.diagonal_meaningful != first.diagonal_meaningful)
    {
        return Err(Error::DimensionMismatch(
            "retained states disagree on shape or diagonal handling".into(),
        ));
    }
    let (null_sorted, _) = match cache_dir {
        Some(dir) => crate::cache::load_or_generate(spec, dir)?,
        None => (lrt::null_distribution(spec)?, false),
    };
    let draws = states
        .par_iter()
        .map(|state| {
            let t = lrt::statistic(&state.residual()?)?;
            Ok((t, lrt::p_value(&null_sorted, t)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FuzzyPValueSample { draws })
}

/// Draws from a normal distribution conditioned on the open interval
/// (lo, hi); either bound may be infinite.
pub fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    mean + sd * truncated_standard(rng, (lo - mean) / sd, (hi - mean) / sd)
}

fn truncated_standard(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    debug_assert!(a < b, "empty truncation interval [{a}, {b}]");
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return rng.sample(StandardNormal);
    }
    if b == f64::INFINITY {
        return lower_tail(rng, a);
    }
    if a == f64::NEG_INFINITY {
        return -lower_tail(rng, -b);
    }
    // Two-sided. Pick the proposal with acceptance bounded away from zero.
    if a <= 0.0 && b >= 0.0 {
        if b - a >= 1.0 {
            loop {
                let x: f64 = rng.sample(StandardNormal);
                if x > a && x < b {
                    return x;
                }
            }
        }
        return uniform_rejection(rng, a, b, 0.0);
    }
    if a > 0.0 {
        if b - a >= 0.5 {
            loop {
                let x = lower_tail(rng, a);
                if x < b {
                    return x;
                }
            }
        }
        return uniform_rejection(rng, a, b, a);
    }
    // b < 0: mirror image.
    -truncated_standard(rng, -b, -a)
}

/// Uniform proposals on (a, b), accepted against the normal density
/// normalized at its maximum over the interval (attained at c).
fn uniform_rejection(rng: &mut ChaCha8Rng, a: f64, b: f64, c: f64) -> f64 {
    loop {
        let x = rng.random_range(a..b);
        let accept = ((c * c - x * x) / 2.0).exp();
        if x > a && rng.random::<f64>() <= accept {
            return x;
        }
    }
}

/// Standard normal conditioned on exceeding a. Plain rejection near the
/// bulk; for far tails, a shifted exponential proposal with rate
/// (a + sqrt(a^2 + 4)) / 2 whose acceptance stays above 0.5.
fn lower_tail(rng: &mut ChaCha8Rng, a: f64) -> f64 {
    if a < 0.45 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            if x > a {
                return x;
            }
        }
    }
    let lambda = (a + (a * a + 4.0).sqrt()) / 2.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        let x = a + e / lambda;
        let accept = (-(x - lambda) * (x - lambda) / 2.0).exp();
        if rng.random::<f64>() <= accept {
            return x;
        }
    }
}
