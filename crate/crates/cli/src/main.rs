//! `matlrt` — likelihood ratio test of row/column dependence in square
//! relational data matrices, with simulated-null calibration, power studies,
//! regression demeaning, and a latent-eigenmodel front end for binary
//! networks.

mod io;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matlrt::cache::{cache_file_name, load_or_generate};
use matlrt::lrt::compose_result;
use matlrt::power::{blockmodel_grid, exchangeable_grid, sparse_pair_grid};
use matlrt::rng::RngStream;
use matlrt::{
    gibbs_fit, fuzzy_p_values, null_distribution, ols_demean, power_curve, quantile, run_test,
    statistic_replicates, BinaryNetwork, GammaHandling, RelationalMatrix, TestData, TestResult,
    TestSpec, DEFAULT_S_INTERACTIVE, DEFAULT_S_TABLE,
};

const VERSION: &str = env!("MATLRT_VERSION");

/// Error carrying the process exit code: 2 for data or configuration
/// problems, 3 for numerical failures inside the computation.
#[derive(Debug)]
pub enum CliError {
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(msg) | CliError::Numerical(msg) => f.write_str(msg),
        }
    }
}

impl From<matlrt::Error> for CliError {
    fn from(e: matlrt::Error) -> Self {
        use matlrt::Error as E;
        match e {
            E::DimensionMismatch(_)
            | E::InvalidArgument(_)
            | E::RankDeficient { .. }
            | E::Cache(_)
            | E::Io(_) => CliError::Data(e.to_string()),
            E::NotPositiveDefinite(_) | E::NonFinite(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "matlrt",
    version = VERSION,
    about = "Likelihood ratio test of row/column dependence in square relational data matrices"
)]
struct Cli {
    /// Worker threads for Monte Carlo loops (default: all logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr (-v: info, -vv: debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a matrix or replicate stack for row/column dependence.
    Test(TestArgs),
    /// Simulate a null distribution and store it as a quantile cache file.
    Null(NullArgs),
    /// Estimate a power curve over a family of alternatives.
    Power(PowerArgs),
    /// Fit a latent eigenmodel to a binary network and report per-draw
    /// dependence p-values for its residuals.
    Eigen(EigenArgs),
    /// Remove a dyadic regression mean and write the residual stack.
    Demean(DemeanArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dense m-by-m CSV matrix (optional header row).
    #[arg(long, conflicts_with = "replicates", required_unless_present = "replicates")]
    input: Option<PathBuf>,
    /// Long-format CSV stack with columns i,j,k,y (1-based indices).
    #[arg(long)]
    replicates: Option<PathBuf>,
    /// Treat the diagonal as undefined (NA or absent in the input).
    #[arg(long)]
    missing_diagonal: bool,
}

impl DataArgs {
    fn load(&self) -> Result<(Vec<RelationalMatrix>, String), CliError> {
        match (&self.input, &self.replicates) {
            (Some(path), None) => {
                let y = io::read_relational(path, self.missing_diagonal)?;
                Ok((vec![y], path.display().to_string()))
            }
            (None, Some(path)) => {
                let ys = io::read_long_stack(path, self.missing_diagonal)?;
                Ok((ys, path.display().to_string()))
            }
            _ => unreachable!("clap enforces exactly one input source"),
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Long-format CSV with columns i,j,k and one column per covariate; when
    /// given, the test runs on the residuals of a least-squares fit.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Give every replicate its own noise scale under the null.
    #[arg(long)]
    heteroscedastic: bool,
    /// Monte Carlo draws for the simulated null distribution.
    #[arg(long = "S", default_value_t = DEFAULT_S_INTERACTIVE)]
    s: usize,
    /// Seed of the simulated null (and of nothing else).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rejection level echoed into the report.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Directory of reusable null quantile cache files. The environment
    /// variable MATLRT_CACHE_DIR overrides this flag.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct NullArgs {
    /// Matrix dimension.
    #[arg(long)]
    m: usize,
    /// Number of replicate matrices per draw.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Simulate the null for data with an undefined diagonal.
    #[arg(long)]
    missing_diagonal: bool,
    /// Simulate the null with per-replicate noise scales.
    #[arg(long)]
    heteroscedastic: bool,
    /// Monte Carlo draws.
    #[arg(long = "S", default_value_t = DEFAULT_S_TABLE)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the cache file (env MATLRT_CACHE_DIR overrides).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AltKind {
    /// Exchangeable row and column correlations.
    Exchangeable,
    /// One correlated row/column pair.
    SparsePair,
    /// Two-block mean structure of strength mu.
    Blockmodel,
}

#[derive(Args)]
struct PowerArgs {
    /// Alternative family to sweep.
    #[arg(long, value_enum)]
    kind: AltKind,
    /// Matrix dimension.
    #[arg(long)]
    m: usize,
    /// Sweep the dense 25-point-per-axis grid instead of the 7-point one.
    #[arg(long)]
    full_grid: bool,
    /// Test replications per alternative.
    #[arg(long, default_value_t = 2000)]
    n_reps: usize,
    /// Rejection level.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Monte Carlo draws for the simulated null distribution.
    #[arg(long = "S", default_value_t = DEFAULT_S_INTERACTIVE)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of reusable null quantile cache files (env MATLRT_CACHE_DIR
    /// overrides).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EigenArgs {
    /// Dense m-by-m CSV adjacency matrix of zeros and ones.
    #[arg(long)]
    input: PathBuf,
    /// Number of latent multiplicative factors.
    #[arg(long, default_value_t = 1)]
    rank: usize,
    /// Hold the link threshold at the value matching the observed density
    /// instead of sampling it (helps mixing on sparse graphs).
    #[arg(long)]
    fix_gamma: bool,
    /// Treat diagonal entries as data rather than structurally absent.
    #[arg(long)]
    diagonal_meaningful: bool,
    /// Gibbs sweeps.
    #[arg(long, default_value_t = 10_000)]
    n_iter: usize,
    /// Sweeps discarded before retaining draws.
    #[arg(long, default_value_t = 5_000)]
    burn_in: usize,
    /// Retain every thin-th sweep after burn-in.
    #[arg(long, default_value_t = 25)]
    thin: usize,
    /// Monte Carlo draws for the simulated null distribution.
    #[arg(long = "S", default_value_t = DEFAULT_S_INTERACTIVE)]
    s: usize,
    /// Seed shared by the sampler and the simulated null.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of reusable null quantile cache files (env MATLRT_CACHE_DIR
    /// overrides).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DemeanArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Long-format CSV with columns i,j,k and one column per covariate.
    #[arg(long)]
    covariates: PathBuf,
    /// Residual stack destination (long-format CSV).
    #[arg(long)]
    output: PathBuf,
}

fn resolve_cache_dir(flag: Option<&Path>) -> Option<PathBuf> {
    std::env::var_os("MATLRT_CACHE_DIR")
        .map(PathBuf::from)
        .or_else(|| flag.map(Path::to_path_buf))
}

fn load_null(
    spec: &TestSpec,
    cache_dir: Option<&Path>,
) -> Result<(Vec<f64>, bool), CliError> {
    let (null, hit) = match cache_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
            load_or_generate(spec, dir)?
        }
        None => (null_distribution(spec)?, false),
    };
    log::info!(
        "null sample: {} draws for m={}, p={} ({})",
        null.len(),
        spec.m,
        spec.p,
        if hit { "cache hit" } else { "simulated" }
    );
    Ok((null, hit))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_test(args: &TestArgs) -> Result<(), CliError> {
    let (ys, input_label) = args.data.load()?;
    let (m, p) = (ys[0].m(), ys.len());
    log::info!("read {input_label}: m = {m}, p = {p}");
    let mut spec = TestSpec::new(m, args.s, args.seed);
    spec.p = p;
    spec.missing_diagonal = args.data.missing_diagonal;
    spec.heteroscedastic = args.heteroscedastic;
    let cache_dir = resolve_cache_dir(args.cache_dir.as_deref());

    let result: TestResult = match &args.covariates {
        None => {
            let data = if p == 1 {
                TestData::Single(ys.into_iter().next().expect("p = 1"))
            } else {
                TestData::Replicates(ys)
            };
            match cache_dir.as_deref() {
                Some(dir) => {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
                    run_test(&data, &spec, Some(dir))?
                }
                None => run_test(&data, &spec, None)?,
            }
        }
        Some(cov_path) => {
            let (design, _) = io::read_design(cov_path, m, p, args.data.missing_diagonal)?;
            let demeaned = ols_demean(&ys, &design)?;
            let t = statistic_replicates(&demeaned.residuals, args.heteroscedastic)?;
            let (null, hit) = load_null(&spec, cache_dir.as_deref())?;
            compose_result(t, &null, &spec, hit, true)?
        }
    };
    emit(
        &report::test_report(&result, args.level, &input_label, VERSION),
        args.output.as_deref(),
    )
}

fn cmd_null(args: &NullArgs) -> Result<(), CliError> {
    let mut spec = TestSpec::new(args.m, args.s, args.seed);
    spec.p = args.p;
    spec.missing_diagonal = args.missing_diagonal;
    spec.heteroscedastic = args.heteroscedastic;
    let dir = resolve_cache_dir(args.cache_dir.as_deref()).ok_or_else(|| {
        CliError::Data("a cache directory is required: pass --cache-dir or set MATLRT_CACHE_DIR".into())
    })?;
    let (null, preexisting) = load_null(&spec, Some(&dir))?;
    let q95 = quantile(&null, 0.95)?;
    let path = dir.join(cache_file_name(&spec));
    print!(
        "{}",
        report::null_report(&spec, &path.display().to_string(), q95, preexisting, VERSION)
    );
    Ok(())
}

fn cmd_power(args: &PowerArgs) -> Result<(), CliError> {
    let alts = match args.kind {
        AltKind::Exchangeable => exchangeable_grid(args.m, args.full_grid),
        AltKind::SparsePair => sparse_pair_grid(args.m, args.full_grid),
        AltKind::Blockmodel => blockmodel_grid(args.m, args.full_grid),
    };
    let spec = TestSpec::new(args.m, args.s, args.seed);
    let cache_dir = resolve_cache_dir(args.cache_dir.as_deref());
    if let Some(dir) = cache_dir.as_deref() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    let points = power_curve(&alts, args.n_reps, args.level, &spec, cache_dir.as_deref())?;
    emit(&report::power_csv(&points, args.level), args.output.as_deref())
}

fn cmd_eigen(args: &EigenArgs) -> Result<(), CliError> {
    let a = io::read_dense(&args.input, !args.diagonal_meaningful)?;
    let net = BinaryNetwork::new(a, args.diagonal_meaningful)?;
    let m = net.adjacency().nrows();
    log::info!(
        "read {}: m = {m}, density = {:.4}",
        args.input.display(),
        net.density()
    );
    let gamma = if args.fix_gamma {
        GammaHandling::FixAtDensity
    } else {
        GammaHandling::Sample
    };
    let states = gibbs_fit(
        &net,
        args.rank,
        args.n_iter,
        args.burn_in,
        args.thin,
        gamma,
        RngStream::new(args.seed, 0),
    )?;
    log::info!("retained {} posterior draws", states.len());

    let mut spec = TestSpec::new(m, args.s, args.seed);
    spec.missing_diagonal = !args.diagonal_meaningful;
    let cache_dir = resolve_cache_dir(args.cache_dir.as_deref());
    if let Some(dir) = cache_dir.as_deref() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    let fuzzy = fuzzy_p_values(&states, &spec, cache_dir.as_deref())?;
    emit(&report::eigen_csv(&fuzzy.draws), args.output.as_deref())
}

fn cmd_demean(args: &DemeanArgs) -> Result<(), CliError> {
    let (ys, _) = args.data.load()?;
    let (m, p) = (ys[0].m(), ys.len());
    let (design, names) = io::read_design(&args.covariates, m, p, args.data.missing_diagonal)?;
    let demeaned = ols_demean(&ys, &design)?;
    io::write_long_stack(&args.output, &demeaned.residuals)?;
    print!(
        "{}",
        report::demean_report(
            &names,
            &demeaned.beta_hat,
            m,
            p,
            args.data.missing_diagonal,
            &args.output.display().to_string(),
            VERSION,
        )
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_filter = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_filter))
        .init();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    let outcome = match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Null(args) => cmd_null(args),
        Command::Power(args) => cmd_power(args),
        Command::Eigen(args) => cmd_eigen(args),
        Command::Demean(args) => cmd_demean(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
