//! Dyadic OLS regression for removing a nonzero mean before testing.
//!
//! The regression treats each observed relation y_ijk (ordered pair (i, j),
//! replicate k) as one row. Features may vary with the sender i, the
//! receiver j, or the pair. Undefined diagonal entries contribute no rows;
//! their residuals are fixed at zero so the demeaned matrices remain valid
//! zero-diagonal inputs for the dependence test.

use crate::error::{Error, Result};
use crate::lrt::{self, TestResult, TestSpec};
use crate::types::RelationalMatrix;
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Design matrix builder over the (i, j, k) grid. Rows are ordered with the
/// replicate k outermost, then the column j, then the row i, matching the
/// column-major stacking of the matrices themselves.
#[derive(Debug, Clone)]
pub struct DyadicDesign {
    m: usize,
    p: usize,
    include_diagonal: bool,
    /// Full-grid columns of length m*m*p; diagonal rows are dropped when
    /// the design excludes them, at solve time.
    columns: Vec<Vec<f64>>,
}

impl DyadicDesign {
    pub fn new(m: usize, p: usize, include_diagonal: bool) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "designs need m >= 2, got {m}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument(
                "designs need at least one replicate".into(),
            ));
        }
        Ok(DyadicDesign { m, p, include_diagonal, columns: Vec::new() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn replicates(&self) -> usize {
        self.p
    }

    pub fn include_diagonal(&self) -> bool {
        self.include_diagonal
    }

    /// Number of fitted coefficients.
    pub fn px(&self) -> usize {
        self.columns.len()
    }

    /// Number of regression rows (diagonal excluded when undefined).
    pub fn rows(&self) -> usize {
        if self.include_diagonal {
            self.m * self.m * self.p
        } else {
            self.m * (self.m - 1) * self.p
        }
    }

    pub fn add_intercept(&mut self) -> Result<()> {
        self.columns.push(vec![1.0; self.m * self.m * self.p]);
        Ok(())
    }

    /// Feature of the sender: x has length m*p, laid out [k*m + i], and the
    /// value x[k*m + i] applies to every pair (i, *) in replicate k.
    pub fn add_row_feature(&mut self, x: &[f64]) -> Result<()> {
        self.add_node_feature(x, true)
    }

    /// Feature of the receiver: x[k*m + j] applies to every pair (*, j).
    pub fn add_column_feature(&mut self, x: &[f64]) -> Result<()> {
        self.add_node_feature(x, false)
    }

    fn add_node_feature(&mut self, x: &[f64], by_row: bool) -> Result<()> {
        let (m, p) = (self.m, self.p);
        if x.len() != m * p {
            return Err(Error::DimensionMismatch(format!(
                "node feature has {} values, expected m*p = {}",
                x.len(),
                m * p
            )));
        }
        ensure_finite(x)?;
        let mut col = Vec::with_capacity(m * m * p);
        for k in 0..p {
            for j in 0..m {
                for i in 0..m {
                    col.push(x[k * m + if by_row { i } else { j }]);
                }
            }
        }
        self.columns.push(col);
        Ok(())
    }

    /// Pair-specific feature: x has length m*m*p, laid out
    /// [k*m*m + j*m + i].
    pub fn add_dyadic_feature(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.m * self.m * self.p {
            return Err(Error::DimensionMismatch(format!(
                "dyadic feature has {} values, expected m*m*p = {}",
                x.len(),
                self.m * self.m * self.p
            )));
        }
        ensure_finite(x)?;
        self.columns.push(x.to_vec());
        Ok(())
    }

    /// Materializes the regression design, dropping diagonal rows when they
    /// carry no data.
    fn design_matrix(&self) -> DMatrix<f64> {
        let n = self.rows();
        let mut x = DMatrix::zeros(n, self.px());
        for (c, col) in self.columns.iter().enumerate() {
            let mut row = 0;
            for k in 0..self.p {
                for j in 0..self.m {
                    for i in 0..self.m {
                        if !self.include_diagonal && i == j {
                            continue;
                        }
                        x[(row, c)] = col[k * self.m * self.m + j * self.m + i];
                        row += 1;
                    }
                }
            }
        }
        x
    }
}

fn ensure_finite(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design feature".into()));
    }
    Ok(())
}

/// Output of the dyadic regression.
#[derive(Debug, Clone)]
pub struct ResidualStack {
    /// Residual matrices, zero on undefined diagonals.
    pub residuals: Vec<RelationalMatrix>,
    pub beta_hat: DVector<f64>,
}

/// Least squares fit of the observed relations on the design, returning the
/// residual matrices. An empty design returns the inputs unchanged.
pub fn ols_demean(ys: &[RelationalMatrix], design: &DyadicDesign) -> Result<ResidualStack> {
    if ys.is_empty() {
        return Err(Error::InvalidArgument("replicate stack is empty".into()));
    }
    if ys.len() != design.p {
        return Err(Error::DimensionMismatch(format!(
            "{} replicates given but the design covers {}",
            ys.len(),
            design.p
        )));
    }
    for (k, y) in ys.iter().enumerate() {
        if y.m() != design.m {
            return Err(Error::DimensionMismatch(format!(
                "replicate {k} is {}x{} but the design has m = {}",
                y.m(),
                y.m(),
                design.m
            )));
        }
        if y.diagonal_defined() != design.include_diagonal {
            return Err(Error::InvalidArgument(format!(
                "replicate {k} has diagonal_defined = {} but the design says {}",
                y.diagonal_defined(),
                design.include_diagonal
            )));
        }
    }
    if design.px() == 0 {
        return Ok(ResidualStack {
            residuals: ys.to_vec(),
            beta_hat: DVector::zeros(0),
        });
    }

    let x = design.design_matrix();
    let n = x.nrows();
    if n < design.px() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients cannot be fit from {n} observations",
            design.px()
        )));
    }
    let mut obs = DVector::zeros(n);
    let mut row = 0;
    for y in ys {
        let e = y.entries();
        for j in 0..design.m {
            for i in 0..design.m {
                if !design.include_diagonal && i == j {
                    continue;
                }
                obs[row] = e[(i, j)];
                row += 1;
            }
        }
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..design.px()).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio < crate::linalg::RANK_RATIO_THRESHOLD {
        return Err(Error::RankDeficient {
            ratio,
            threshold: crate::linalg::RANK_RATIO_THRESHOLD,
        });
    }
    let beta_hat = r
        .solve_upper_triangular(&(qr.q().transpose() * &obs))
        .ok_or(Error::RankDeficient {
            ratio,
            threshold: crate::linalg::RANK_RATIO_THRESHOLD,
        })?;

    let fitted = x * &beta_hat;
    let mut residuals = Vec::with_capacity(design.p);
    let mut row = 0;
    for _ in 0..design.p {
        let mut e = DMatrix::zeros(design.m, design.m);
        for j in 0..design.m {
            for i in 0..design.m {
                if !design.include_diagonal && i == j {
                    continue;
                }
                e[(i, j)] = obs[row] - fitted[row];
                row += 1;
            }
        }
        residuals.push(if design.include_diagonal {
            RelationalMatrix::new(e)?
        } else {
            RelationalMatrix::with_missing_diagonal(e)?
        });
    }
    Ok(ResidualStack { residuals, beta_hat })
}

/// Full pipeline for replicated matrices with covariates and an undefined
/// diagonal: demean by OLS, then run the heteroscedastic replicate test
/// against the matching simulated null. The result is flagged
/// `approximate_null = true` because residuals are only asymptotically
/// exchangeable with the errors.
pub fn trade_workflow(
    ys: &[RelationalMatrix],
    design: &DyadicDesign,
    spec: &TestSpec,
    cache_dir: Option<&Path>,
) -> Result<TestResult> {
    spec.validate()?;
    if !spec.missing_diagonal || !spec.heteroscedastic {
        return Err(Error::InvalidArgument(
            "this workflow tests residuals against the missing-diagonal \
             heteroscedastic null; set both flags in the spec"
                .into(),
        ));
    }
    if design.include_diagonal {
        return Err(Error::InvalidArgument(
            "the design must exclude the diagonal for this workflow".into(),
        ));
    }
    if spec.m != design.m || spec.p != design.p {
        return Err(Error::DimensionMismatch(format!(
            "spec is (m = {}, p = {}) but the design is (m = {}, p = {})",
            spec.m, spec.p, design.m, design.p
        )));
    }
    let demeaned = ols_demean(ys, design)?;
    let t = lrt::statistic_replicates(&demeaned.residuals, true)?;
    let (null_sorted, cache_hit) = match cache_dir {
        Some(dir) => crate::cache::load_or_generate(spec, dir)?,
        None => (lrt::null_distribution(spec)?, false),
    };
    lrt::compose_result(t, &null_sorted, spec, cache_hit, true)
}
