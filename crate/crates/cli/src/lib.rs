//! The `covdist` command line: argument parsing, subcommands and the
//! mapping of failures onto exit codes.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use covdist::distances::{
    dist_ai_exact, dist_aihs, dist_alpha_procrustes, dist_bw, dist_hs, dist_loghs, dist_power_euclid, dist_sqrt,
    log_euclidean, sinkhorn_gauss,
};
use covdist::experiments::{run_classification, run_convergence, run_gram_oracle};
use covdist::identity::{run_identity_check, FactorIdentities};
use covdist::io::{self, IoError};
use covdist::{
    ClassificationConfig, ConvergenceConfig, CovError, GaussianMoments, OracleConfig, RegularizedOperator, SymMatrix,
};

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<CovError> for CliError {
    fn from(e: CovError) -> Self {
        let code = match e {
            CovError::Config(_) => EXIT_INPUT,
            _ => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "covdist",
    version,
    about = "Distances between covariance matrices and Gaussian-process covariance operators"
)]
pub struct Cli {
    /// Worker threads for trials and repeats [default: available cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance between two matrices stored as CSV files
    Dist(DistArgs),
    /// Path-based estimates over a range of sample-path counts
    Converge(ConvergeArgs),
    /// Nearest-neighbour classification of empirical covariance matrices
    Classify(RunArgs),
    /// Randomized check of the factor identities against ambient computation
    IdentityCheck(IdentityArgs),
    /// Gram-matrix estimates between Brownian covariance operators against the closed form
    Oracle(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistMetric {
    Hs,
    Sqrt,
    Bw,
    PowerEuclid,
    LogEuclid,
    Procrustes,
    Loghs,
    Aihs,
    AiExact,
    Sinkhorn,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, value_enum)]
    pub metric: DistMetric,
    /// Regularization (loghs, aihs)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Regularization of the second operand [default: --gamma]
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Power (power-euclid, procrustes)
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Entropic regularization (sinkhorn)
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment definition
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (converge, oracle) or directory (classify)
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `base_seed` from the config
    #[arg(long, env = "COVDIST_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Fill the wall_time_ms column (output is then no longer reproducible)
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[arg(long, env = "COVDIST_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

/// Fixed-point with 12 decimals in the usual range, scientific outside it.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-4..1e12).contains(&v.abs()) {
        format!("{v:.12}")
    } else {
        format!("{v:.12e}")
    }
}

fn load_sym(path: &Path) -> Result<SymMatrix, CliError> {
    let m = io::read_matrix(path)?;
    let scale = m.amax();
    if m.is_square() && (&m - m.transpose()).amax() > 1e-10 * scale {
        return Err(CliError::input(format!("{}: matrix is not symmetric", path.display())));
    }
    SymMatrix::new(m).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn metric_name(metric: DistMetric) -> String {
    metric
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default()
}

fn require(value: Option<f64>, flag: &str, metric: DistMetric) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::input(format!("--{flag} is required for metric {}", metric_name(metric))))
}

fn reject(value: Option<f64>, flag: &str, metric: DistMetric) -> CliResult {
    match value {
        Some(_) => Err(CliError::input(format!(
            "--{flag} is not used by metric {}",
            metric_name(metric)
        ))),
        None => Ok(()),
    }
}

pub fn cmd_dist(args: &DistArgs, out: &mut dyn Write) -> CliResult {
    use DistMetric::*;
    let m = args.metric;
    let regularized = matches!(m, Loghs | Aihs);
    let powered = matches!(m, PowerEuclid | Procrustes);
    if !regularized {
        reject(args.gamma, "gamma", m)?;
        reject(args.gamma2, "gamma2", m)?;
    }
    if !powered {
        reject(args.alpha, "alpha", m)?;
    }
    if m != Sinkhorn {
        reject(args.epsilon, "epsilon", m)?;
    }
    let gammas = if regularized {
        let g1 = require(args.gamma, "gamma", m)?;
        Some((g1, args.gamma2.unwrap_or(g1)))
    } else {
        None
    };
    let alpha = if powered {
        Some(require(args.alpha, "alpha", m)?)
    } else {
        None
    };
    let epsilon = if m == Sinkhorn {
        Some(require(args.epsilon, "epsilon", m)?)
    } else {
        None
    };

    let a = load_sym(&args.a)?;
    let b = load_sym(&args.b)?;
    if a.dim() != b.dim() {
        return Err(CliError::input(format!(
            "{} is {n}x{n} but {} is {k}x{k}",
            args.a.display(),
            args.b.display(),
            n = a.dim(),
            k = b.dim()
        )));
    }
    let d = match m {
        Hs => dist_hs(&a, &b),
        Sqrt => dist_sqrt(&a, &b),
        Bw => dist_bw(&a, &b),
        PowerEuclid => dist_power_euclid(&a, &b, alpha.unwrap()),
        LogEuclid => log_euclidean(&a, &b),
        Procrustes => dist_alpha_procrustes(&a, &b, alpha.unwrap()),
        Loghs | Aihs => {
            let (g1, g2) = gammas.unwrap();
            RegularizedOperator::new(a, g1).and_then(|p| {
                let q = RegularizedOperator::new(b, g2)?;
                if m == Loghs {
                    dist_loghs(&p, &q)
                } else {
                    dist_aihs(&p, &q)
                }
            })
        }
        AiExact => dist_ai_exact(&a, &b),
        Sinkhorn => sinkhorn_gauss(
            &GaussianMoments::centered(a),
            &GaussianMoments::centered(b),
            epsilon.unwrap(),
        ),
    }
    .map_err(|e| CliError {
        code: EXIT_NUMERICAL,
        message: e.to_string(),
    })?;
    writeln!(out, "{}", format_value(d))?;
    Ok(())
}

pub fn cmd_converge(args: &ConvergeArgs, out: &mut dyn Write) -> CliResult {
    let mut cfg: ConvergenceConfig = io::read_config(&args.run.config)?;
    if let Some(seed) = args.run.seed {
        cfg.base_seed = seed;
    }
    cfg.record_wall_time |= args.timing;
    cfg.validate()?;
    let rows = run_convergence(&cfg)?;
    io::write_results(&args.run.out, &rows)?;
    let summary = io::summary_path(&args.run.out);
    io::write_summary(&summary, &rows, cfg.reference)?;
    writeln!(out, "{} rows -> {}", rows.len(), args.run.out.display())?;
    writeln!(out, "summary -> {}", summary.display())?;
    Ok(())
}

pub fn cmd_classify(args: &RunArgs, out: &mut dyn Write) -> CliResult {
    let mut cfg: ClassificationConfig = io::read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    let outcome = run_classification(&cfg)?;
    io::write_classification(&args.out, &outcome)?;
    writeln!(out, "metric,mean_error,std_error")?;
    for row in &outcome.table {
        writeln!(out, "{},{:.4},{:.4}", row.metric, row.mean, row.std)?;
    }
    Ok(())
}

pub fn cmd_oracle(args: &RunArgs, out: &mut dyn Write) -> CliResult {
    let mut cfg: OracleConfig = io::read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    let rows = run_gram_oracle(&cfg)?;
    io::write_oracle(&args.out, &rows)?;
    for r in &rows {
        writeln!(
            out,
            "trial {} {}: estimate {} oracle {} rel_error {:.3e}",
            r.trial,
            r.metric,
            format_value(r.estimate),
            format_value(r.oracle),
            r.rel_error
        )?;
    }
    Ok(())
}

/// Prints the largest deviation per identity; a violation is an
/// `EXIT_FAILURE` error naming the seed and trial.
pub fn cmd_identity_check(seed: u64, trials: usize, impls: &FactorIdentities, out: &mut dyn Write) -> CliResult {
    if trials == 0 {
        return Err(CliError::input("--trials must be >= 1"));
    }
    let report = run_identity_check(seed, trials, impls)?;
    let mut failures = Vec::new();
    for r in &report.results {
        let status = if r.passed() { "ok" } else { "FAIL" };
        writeln!(
            out,
            "{:<20} max deviation {:.3e} (tolerance {:.0e}) {status}",
            r.name, r.max_deviation, r.tolerance
        )?;
        if !r.passed() {
            failures.push(format!("{} (seed {seed}, trial {})", r.name, r.worst_trial));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_FAILURE,
            message: format!("identity check failed: {}", failures.join(", ")),
        })
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::input("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    match &cli.command {
        Command::Dist(args) => cmd_dist(args, out),
        Command::Converge(args) => cmd_converge(args, out),
        Command::Classify(args) => cmd_classify(args, out),
        Command::IdentityCheck(args) => cmd_identity_check(args.seed, args.trials, &FactorIdentities::default(), out),
        Command::Oracle(args) => cmd_oracle(args, out),
    }
}
