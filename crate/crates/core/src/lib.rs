//! Likelihood ratio test for row and column dependence in square
//! relational data matrices under a separable (Kronecker) covariance
//! model.
//!
//! The observed m x m matrix Y (sociomatrix, trade table, migration
//! flows) is modeled as matrix normal with covariance
//! `sigma_c (x) sigma_r`. The test compares that fit against the null of
//! independent heteroscedastic rows and columns, i.e. diagonal
//! `sigma_r` and `sigma_c`. The statistic is invariant under nonzero
//! row and column scalings of Y, so its null distribution depends only
//! on the dimensions and can be simulated once and cached.
//!
//! Entry points:
//! - [`statistic`] / [`statistic_replicates`]: the test statistic alone.
//! - [`run_test`]: statistic plus Monte Carlo p-value and 95% quantile,
//!   optionally served from an on-disk cache.
//! - [`power_curve`]: rejection rates along a grid of alternatives.
//! - [`ols_demean`] and [`trade_workflow`]: regression preprocessing for
//!   matrices with covariates and replicates.
//! - [`gibbs_fit`] and [`fuzzy_p_values`]: posterior checks for binary
//!   networks through a probit eigenmodel.

pub mod cache;
pub mod eigenmodel;
pub mod error;
pub mod estimator;
pub mod likelihood;
pub mod linalg;
pub mod lrt;
pub mod meanmodel;
pub mod power;
pub mod rng;
pub mod sampler;
pub mod types;

pub use eigenmodel::{
    fuzzy_p_values, gibbs_fit, BinaryNetwork, EigenmodelState, FuzzyPValueSample, GammaHandling,
};
pub use error::{Error, Result};
pub use estimator::{
    fit_full, fit_full_replicates, fit_null, fit_null_replicates, fit_null_with_init,
    FittedCovariance, FullFitResult, HeteroFitResult, NullFitResult, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
pub use likelihood::{scaled_log_likelihood, scaled_log_likelihood_diag};
pub use meanmodel::{ols_demean, trade_workflow, DyadicDesign, ResidualStack};
pub use power::{power_curve, sample_alternative, AlternativeSpec, PowerPoint};
pub use lrt::{
    null_distribution, p_value, quantile, run_test, statistic, statistic_replicates,
    NullSampleSummary, TestData, TestResult, TestSpec, DEFAULT_S_INTERACTIVE, DEFAULT_S_TABLE,
};
pub use rng::{derive_seed, RngStream};
pub use sampler::{sample_matrix_normal, sample_matrix_t};
pub use types::{DiagonalCovariance, RelationalMatrix, SeparableCovariance};
