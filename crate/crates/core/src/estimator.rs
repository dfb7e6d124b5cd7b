//! Maximum likelihood estimation of the separable covariance model.
//!
//! The unrestricted single-matrix MLE has a closed form; the diagonal (null)
//! model and all replicate variants are fit by block coordinate descent on
//! the scaled log likelihood, alternating closed-form updates of the row
//! factor, the column factor, and (heteroscedastic case) the per-replicate
//! scales. Every block update is an exact minimizer given the other blocks,
//! so the objective is non-increasing sweep by sweep.

use crate::error::{Error, Result};
use crate::linalg::{ensure_full_rank, logabsdet, symmetrize, SpdFactor};
use crate::types::{DiagonalCovariance, RelationalMatrix, SeparableCovariance};
use nalgebra::{DMatrix, DVector};

/// Default relative-decrease convergence tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default sweep limit.
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Result of the diagonal (null model) fit of a single matrix.
///
/// `d` is normalized so the geometric mean of `d_r` is 1, with the factor
/// absorbed into `d_c`; the Kronecker product and the likelihood value are
/// unaffected. `scaled_loglik` equals `m^2 + log|D_c (x) D_r|` at the fit.
#[derive(Debug, Clone)]
pub struct NullFitResult {
    pub d: DiagonalCovariance,
    pub scaled_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Result of the unrestricted single-matrix fit.
///
/// The MLE is not unique: every pair (Y Sigma_c^-1 Y^t / m, Sigma_c) attains
/// the same likelihood. The canonical representative (Y Y^t / m, I) is
/// returned; `scaled_loglik = m^2 + m log|Y Y^t / m|` is shared by all of
/// them.
#[derive(Debug, Clone)]
pub struct FullFitResult {
    pub cov: SeparableCovariance,
    pub scaled_loglik: f64,
}

/// Fitted covariance of a replicate-stack model.
#[derive(Debug, Clone)]
pub enum FittedCovariance {
    Full(SeparableCovariance),
    Diagonal(DiagonalCovariance),
}

/// Result of a replicate-stack fit, possibly heteroscedastic.
///
/// Replicate i is modeled as N(0, d_obs[i] Sigma_r, Sigma_c). The gauge
/// freedoms are fixed by d_obs[0] = 1 and log|Sigma_r| = 0 (for the diagonal
/// model that is a unit geometric mean of d_r), with all scale absorbed into
/// the column factor. Homoscedastic fits report d_obs identically 1.
#[derive(Debug, Clone)]
pub struct HeteroFitResult {
    pub d_obs: DVector<f64>,
    pub cov: FittedCovariance,
    pub scaled_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Closed-form unrestricted MLE of a fully observed matrix.
pub fn fit_full(y: &RelationalMatrix) -> Result<FullFitResult> {
    if !y.diagonal_defined() {
        return Err(Error::InvalidArgument(
            "unrestricted fit requires a defined diagonal".into(),
        ));
    }
    ensure_full_rank(y.entries())?;
    let m = y.m();
    let scaled_loglik = full_loglik_unchecked(y.entries());
    let sigma_r = symmetrize(&(y.entries() * y.entries().transpose() / m as f64));
    let cov = SeparableCovariance::new(sigma_r, DMatrix::identity(m, m))?;
    Ok(FullFitResult { cov, scaled_loglik })
}

/// m^2 + m log|Y Y^t / m| computed in log space: log|Y Y^t / m| =
/// 2 log|det Y| - m log m. Returns -inf for singular input.
pub(crate) fn full_loglik_unchecked(y: &DMatrix<f64>) -> f64 {
    let m = y.nrows() as f64;
    let ld = 2.0 * logabsdet(y) - m * m.ln();
    m * m + m * ld
}

/// Diagonal (null model) fit by block coordinate descent from D_c = I.
pub fn fit_null(y: &RelationalMatrix, tol: f64, max_iter: usize) -> Result<NullFitResult> {
    let init = DVector::from_element(y.m(), 1.0);
    fit_null_with_init(y, &init, tol, max_iter)
}

/// As `fit_null`, also returning the objective value after every sweep.
pub fn fit_null_traced(
    y: &RelationalMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<(NullFitResult, Vec<f64>)> {
    ensure_full_rank(y.entries())?;
    validate_iteration_params(tol, max_iter)?;
    let init = DVector::from_element(y.m(), 1.0);
    let mut trace = Vec::new();
    let fit = null_fit_core(
        std::slice::from_ref(y),
        false,
        &init,
        tol,
        max_iter,
        Some(&mut trace),
    )?;
    Ok((single_from_hetero(fit)?, trace))
}

/// Diagonal fit from an arbitrary positive starting value of d_c. Any
/// positive start converges to the same normalized optimum.
pub fn fit_null_with_init(
    y: &RelationalMatrix,
    d_c_init: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NullFitResult> {
    ensure_full_rank(y.entries())?;
    validate_iteration_params(tol, max_iter)?;
    if d_c_init.len() != y.m() {
        return Err(Error::DimensionMismatch(format!(
            "initial d_c has {} entries for an m = {} matrix",
            d_c_init.len(),
            y.m()
        )));
    }
    if d_c_init.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial d_c must be strictly positive".into(),
        ));
    }
    let fit = null_fit_core(std::slice::from_ref(y), false, d_c_init, tol, max_iter, None)?;
    single_from_hetero(fit)
}

fn single_from_hetero(fit: HeteroFitResult) -> Result<NullFitResult> {
    match fit.cov {
        FittedCovariance::Diagonal(d) => Ok(NullFitResult {
            d,
            scaled_loglik: fit.scaled_loglik,
            iterations: fit.iterations,
            converged: fit.converged,
        }),
        FittedCovariance::Full(_) => unreachable!("diagonal fit produced a full covariance"),
    }
}

/// Diagonal (null model) fit of a replicate stack; with
/// `heteroscedastic = true` each replicate gets its own scale d_obs[i].
pub fn fit_null_replicates(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    tol: f64,
    max_iter: usize,
) -> Result<HeteroFitResult> {
    let (m, _) = validate_stack(ys, true)?;
    validate_iteration_params(tol, max_iter)?;
    let init = DVector::from_element(m, 1.0);
    null_fit_core(ys, heteroscedastic, &init, tol, max_iter, None)
}

/// As `fit_null_replicates`, also returning per-sweep objective values.
pub fn fit_null_replicates_traced(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    tol: f64,
    max_iter: usize,
) -> Result<(HeteroFitResult, Vec<f64>)> {
    let (m, _) = validate_stack(ys, true)?;
    validate_iteration_params(tol, max_iter)?;
    let init = DVector::from_element(m, 1.0);
    let mut trace = Vec::new();
    let fit = null_fit_core(ys, heteroscedastic, &init, tol, max_iter, Some(&mut trace))?;
    Ok((fit, trace))
}

/// Unrestricted fit of a replicate stack. For p = 1 this is the closed form;
/// for p >= 2 it is the flip-flop iteration on the summed likelihood
/// equations, returning a stationary point (uniqueness is not claimed).
pub fn fit_full_replicates(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    tol: f64,
    max_iter: usize,
) -> Result<HeteroFitResult> {
    validate_stack(ys, true)?;
    validate_iteration_params(tol, max_iter)?;
    full_replicates_core(ys, heteroscedastic, tol, max_iter, None)
}

/// As `fit_full_replicates`, also returning per-sweep objective values.
pub fn fit_full_replicates_traced(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    tol: f64,
    max_iter: usize,
) -> Result<(HeteroFitResult, Vec<f64>)> {
    validate_stack(ys, true)?;
    validate_iteration_params(tol, max_iter)?;
    let mut trace = Vec::new();
    let fit = full_replicates_core(ys, heteroscedastic, tol, max_iter, Some(&mut trace))?;
    Ok((fit, trace))
}

/// Fit entry points for simulated draws, which are full rank with
/// probability one: shape/rank validation is skipped and degenerate draws
/// surface as errors or non-finite objectives for the caller to resample.
pub(crate) fn null_stack_unchecked(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    tol: f64,
    max_iter: usize,
) -> Result<HeteroFitResult> {
    let init = DVector::from_element(ys[0].m(), 1.0);
    null_fit_core(ys, heteroscedastic, &init, tol, max_iter, None)
}

pub(crate) fn full_stack_unchecked(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    tol: f64,
    max_iter: usize,
) -> Result<HeteroFitResult> {
    full_replicates_core(ys, heteroscedastic, tol, max_iter, None)
}

fn validate_iteration_params(tol: f64, max_iter: usize) -> Result<()> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// Shared shape and rank validation; returns (m, p).
pub(crate) fn validate_stack(ys: &[RelationalMatrix], check_rank: bool) -> Result<(usize, usize)> {
    let first = ys
        .first()
        .ok_or_else(|| Error::InvalidArgument("replicate stack is empty".into()))?;
    let m = first.m();
    for (i, y) in ys.iter().enumerate() {
        if y.m() != m {
            return Err(Error::DimensionMismatch(format!(
                "replicate {i} is {}x{} but replicate 0 is {m}x{m}",
                y.m(),
                y.m()
            )));
        }
        if check_rank {
            ensure_full_rank(y.entries())?;
        }
    }
    Ok((m, ys.len()))
}

/// Convergence rule shared by all fits: stop when the decrease of the
/// objective falls below tol * (1 + |previous value|).
fn has_converged(l_prev: f64, l: f64, tol: f64) -> bool {
    l_prev.is_finite() && (l_prev - l) <= tol * (1.0 + l_prev.abs())
}

/// Block coordinate descent for the diagonal model on a stack of p >= 1
/// matrices. Update order per sweep: d_r, d_c, then (heteroscedastic) the
/// replicate scales. Immediately after the d_c update the trace term equals
/// m^2 p with the homoscedastic scales, and after the d_obs update it equals
/// m^2 p again, so the objective after a sweep is available from the log
/// determinants alone; this value is exact, not an approximation.
fn null_fit_core(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    d_c_init: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<HeteroFitResult> {
    let m = ys[0].m();
    let p = ys.len();
    let mf = m as f64;
    let pf = p as f64;

    // Squared entries, column-major contiguous per replicate.
    let w: Vec<Vec<f64>> = ys
        .iter()
        .map(|y| y.entries().iter().map(|v| v * v).collect())
        .collect();

    let mut d_r = vec![0.0f64; m];
    let mut inv_d_r = vec![0.0f64; m];
    let mut d_c: Vec<f64> = d_c_init.iter().copied().collect();
    let mut d_obs = vec![1.0f64; p];
    let mut l_prev = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iter {
        iterations += 1;

        // d_r[j] <- (1/(mp)) sum_i (1/d_i) sum_k w_i[j,k]/d_c[k]
        d_r.fill(0.0);
        for (wi, &di) in w.iter().zip(&d_obs) {
            let inv_di = 1.0 / di;
            for k in 0..m {
                let scale = inv_di / d_c[k];
                let col = &wi[k * m..(k + 1) * m];
                for j in 0..m {
                    d_r[j] += col[j] * scale;
                }
            }
        }
        for v in &mut d_r {
            *v /= mf * pf;
        }
        for j in 0..m {
            inv_d_r[j] = 1.0 / d_r[j];
        }

        // d_c[k] <- (1/(mp)) sum_i (1/d_i) sum_j w_i[j,k]/d_r[j]
        for (k, dck) in d_c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (wi, &di) in w.iter().zip(&d_obs) {
                let col = &wi[k * m..(k + 1) * m];
                let mut s = 0.0;
                for j in 0..m {
                    s += col[j] * inv_d_r[j];
                }
                acc += s / di;
            }
            *dck = acc / (mf * pf);
        }

        // d_obs[i] <- tr_i / m^2 where tr_i is replicate i's trace term.
        if heteroscedastic {
            for (wi, di) in w.iter().zip(&mut d_obs) {
                let mut tr = 0.0;
                for k in 0..m {
                    let col = &wi[k * m..(k + 1) * m];
                    let mut s = 0.0;
                    for j in 0..m {
                        s += col[j] * inv_d_r[j];
                    }
                    tr += s / d_c[k];
                }
                *di = tr / (mf * mf);
            }
        }

        let log_sum: f64 = d_r.iter().chain(d_c.iter()).map(|&v| v.ln()).sum();
        let log_obs: f64 = d_obs.iter().map(|&v| v.ln()).sum();
        let l = pf * mf * mf + mf * mf * log_obs + mf * pf * log_sum;
        if let Some(t) = trace.as_deref_mut() {
            t.push(l);
        }
        if has_converged(l_prev, l, tol) {
            l_prev = l;
            converged = true;
            break;
        }
        l_prev = l;
    }

    if !l_prev.is_finite() {
        return Err(Error::NonFinite(
            "diagonal fit objective diverged; input may be numerically degenerate".into(),
        ));
    }

    // Gauge fixing: unit geometric mean of d_r, then d_obs[0] = 1, with all
    // factors absorbed into d_c.
    let g = (d_r.iter().map(|&v| v.ln()).sum::<f64>() / mf).exp();
    for v in &mut d_r {
        *v /= g;
    }
    for v in &mut d_c {
        *v *= g;
    }
    let d0 = d_obs[0];
    for v in &mut d_obs {
        *v /= d0;
    }
    for v in &mut d_c {
        *v *= d0;
    }

    let d = DiagonalCovariance::new(
        DVector::from_vec(d_r),
        DVector::from_vec(d_c),
    )?;
    Ok(HeteroFitResult {
        d_obs: DVector::from_vec(d_obs),
        cov: FittedCovariance::Diagonal(d),
        scaled_loglik: l_prev,
        iterations,
        converged,
    })
}

/// Flip-flop iteration for the unrestricted replicate model from
/// Sigma_c = I. Update order per sweep: Sigma_r, Sigma_c, then the scales.
/// The objective after a sweep is p m^2 plus the log-determinant terms by
/// the same exactness argument as the diagonal fit.
fn full_replicates_core(
    ys: &[RelationalMatrix],
    heteroscedastic: bool,
    tol: f64,
    max_iter: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<HeteroFitResult> {
    let m = ys[0].m();
    let p = ys.len();
    let mf = m as f64;
    let pf = p as f64;

    if p == 1 {
        // Closed form; gauge-fixed so log|Sigma_r| = 0.
        let y = ys[0].entries();
        let scaled_loglik = full_loglik_unchecked(y);
        let ld = 2.0 * logabsdet(y) - mf * mf.ln();
        let alpha = (ld / mf).exp();
        let sigma_r = symmetrize(&(y * y.transpose() / (mf * alpha)));
        let sigma_c = DMatrix::identity(m, m) * alpha;
        return Ok(HeteroFitResult {
            d_obs: DVector::from_element(1, 1.0),
            cov: FittedCovariance::Full(SeparableCovariance::new(sigma_r, sigma_c)?),
            scaled_loglik,
            iterations: 0,
            converged: true,
        });
    }

    let mut sigma_r = DMatrix::<f64>::zeros(m, m);
    let mut sigma_c = DMatrix::<f64>::identity(m, m);
    let mut c_fac = SpdFactor::new(&sigma_c)?;
    let mut d_obs = vec![1.0f64; p];
    let mut l_prev = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut r_logdet = 0.0;

    while iterations < max_iter {
        iterations += 1;

        // Sigma_r <- (1/(mp)) sum_i (1/d_i) Y_i Sigma_c^-1 Y_i^t
        let mut acc = DMatrix::<f64>::zeros(m, m);
        for (y, &di) in ys.iter().zip(&d_obs) {
            let g = y.entries() * &c_fac.inv;
            acc += (g * y.entries().transpose()) / di;
        }
        sigma_r = symmetrize(&(acc / (mf * pf)));
        let r_fac = SpdFactor::new(&sigma_r)?;
        r_logdet = r_fac.logdet;

        // Sigma_c <- (1/(mp)) sum_i (1/d_i) Y_i^t Sigma_r^-1 Y_i
        let mut acc = DMatrix::<f64>::zeros(m, m);
        for (y, &di) in ys.iter().zip(&d_obs) {
            let h = &r_fac.inv * y.entries();
            acc += (y.entries().transpose() * h) / di;
        }
        sigma_c = symmetrize(&(acc / (mf * pf)));
        c_fac = SpdFactor::new(&sigma_c)?;

        // d_i <- tr[Sigma_r^-1 Y_i Sigma_c^-1 Y_i^t] / m^2, via
        // tr = <Sigma_r^-1 Y_i, Y_i Sigma_c^-1> entrywise.
        if heteroscedastic {
            for (y, di) in ys.iter().zip(&mut d_obs) {
                let h = &r_fac.inv * y.entries();
                let g = y.entries() * &c_fac.inv;
                *di = h.dot(&g) / (mf * mf);
            }
        }

        let log_obs: f64 = d_obs.iter().map(|&v| v.ln()).sum();
        let l = pf * mf * mf + mf * mf * log_obs + mf * pf * (r_logdet + c_fac.logdet);
        if let Some(t) = trace.as_deref_mut() {
            t.push(l);
        }
        if has_converged(l_prev, l, tol) {
            l_prev = l;
            converged = true;
            break;
        }
        l_prev = l;
    }

    if !l_prev.is_finite() {
        return Err(Error::NonFinite(
            "unrestricted replicate fit objective diverged".into(),
        ));
    }

    // Gauge fixing: log|Sigma_r| = 0 and d_obs[0] = 1, factors into Sigma_c.
    let alpha = (r_logdet / mf).exp();
    sigma_r /= alpha;
    sigma_c *= alpha;
    let d0 = d_obs[0];
    for v in &mut d_obs {
        *v /= d0;
    }
    sigma_c *= d0;

    Ok(HeteroFitResult {
        d_obs: DVector::from_vec(d_obs),
        cov: FittedCovariance::Full(SeparableCovariance::new(sigma_r, sigma_c)?),
        scaled_loglik: l_prev,
        iterations,
        converged,
    })
}
