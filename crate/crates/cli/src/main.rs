//! `relbel`: relative belief multiple testing from the command line.

mod commands;
mod config;
mod error;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::Ctx;
use config::Settings;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "relbel", version, about = "Evidence-based multiple testing with relative belief ratios")]
struct Cli {
    /// TOML file of settings (flat keys, or a previous run's manifest).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for report.csv, plot.csv and manifest.toml; stdout otherwise.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Monte Carlo worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Random seed [env RELBEL_SEED, default 1].
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

// Argument values are read back through `Settings` so that config files
// and flags share one path; the structs only declare and validate them.
#[derive(Debug, Subcommand)]
#[allow(dead_code)]
enum Command {
    /// Elicit prior hyperparameters.
    Elicit(ElicitArgs),
    /// Check a regression prior for prior-data conflict.
    CheckPrior(CheckArgs),
    /// Evidence, strength and verdict for every hypothesis.
    Analyze(AnalyzeArgs),
    /// Prior probabilities of false positives and false negatives.
    Bias(BiasArgs),
    /// Accept and reject guided by an estimate of the true-null proportion.
    Select(SelectArgs),
    /// Regenerate a published table or figure.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
#[group(skip)]
#[allow(dead_code)]
struct RegressionPriorArgs {
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    /// Bound on the mean response, for eliciting λ0.
    #[arg(long)]
    m0: Option<f64>,
    /// Lower bound on σ, for eliciting (α1, α2).
    #[arg(long)]
    s1: Option<f64>,
    /// Upper bound on σ.
    #[arg(long)]
    s2: Option<f64>,
    /// Virtual-certainty probability [default 0.99].
    #[arg(long)]
    gamma: Option<f64>,
    /// Override τ0 instead of computing it from the design.
    #[arg(long)]
    tau0: Option<f64>,
    /// Gamma hyperparameter solver [default published].
    #[arg(long, value_parser = ["published", "exact"])]
    solver: Option<String>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[allow(dead_code)]
struct ElicitArgs {
    #[arg(long, value_parser = ["normal", "laplace", "regression"])]
    model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    m0: Option<f64>,
    #[arg(long)]
    s1: Option<f64>,
    #[arg(long)]
    s2: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    /// Dataset from which to compute τ0.
    #[arg(long)]
    data: Option<String>,
    #[arg(long, value_parser = ["published", "exact"])]
    solver: Option<String>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[allow(dead_code)]
struct CheckArgs {
    #[arg(long)]
    data: Option<String>,
    /// Constant subtracted from the response.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    #[command(flatten)]
    prior: RegressionPriorArgs,
    #[arg(long)]
    draws: Option<usize>,
    /// Tail probability below which a conflict is reported [default 0.05].
    #[arg(long)]
    level: Option<f64>,
    /// Exit with status 4 when a conflict is found.
    #[arg(long)]
    fail_on_conflict: bool,
}

#[derive(Debug, Args)]
#[group(skip)]
#[allow(dead_code)]
struct AnalyzeArgs {
    #[arg(long, value_parser = ["normal", "regression"])]
    model: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Group size when the data are group means.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    mu0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    #[command(flatten)]
    prior: RegressionPriorArgs,
    /// Width of the hypothesis cells [default 1].
    #[arg(long)]
    delta: Option<f64>,
    /// Grid half-width in cells; the prior's 99% interval by default.
    #[arg(long)]
    t_max: Option<u64>,
    /// Closed form of the regression ratio at 0 [default published].
    #[arg(long, value_parser = ["published", "density-ratio"])]
    form: Option<String>,
    #[arg(long)]
    q_r: Option<f64>,
    #[arg(long)]
    q_a: Option<f64>,
    /// Estimate the proportion of true nulls and select by it.
    #[arg(long)]
    xi: bool,
    #[arg(long, value_parser = ["mc", "exact"])]
    xi_method: Option<String>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    plot_hypothesis: Option<String>,
    #[arg(long)]
    plot_variable: Option<String>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[allow(dead_code)]
struct BiasArgs {
    #[arg(long, value_parser = ["normal", "regression"])]
    model: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    #[command(flatten)]
    prior: RegressionPriorArgs,
    #[arg(long)]
    data: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    #[arg(long)]
    q_r: Option<f64>,
    #[arg(long)]
    q_a: Option<f64>,
    /// Alternatives sit at ±delta/2 [default 1].
    #[arg(long)]
    delta: Option<f64>,
    /// Also simulate the discretized analysis (normal model).
    #[arg(long)]
    discretized: bool,
    /// Regression evidence [default published].
    #[arg(long, value_parser = ["published", "density-ratio", "discretized"])]
    evidence: Option<String>,
    #[arg(long)]
    draws: Option<usize>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[allow(dead_code)]
struct SelectArgs {
    /// Report CSV with hypothesis (or variable), rb and strength columns.
    #[arg(long)]
    data: Option<String>,
    /// Estimated proportion of true nulls.
    #[arg(long)]
    xi: Option<f64>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[allow(dead_code)]
struct ReproduceArgs {
    #[arg(value_parser = reproduce::IDS)]
    id: Option<String>,
    #[arg(long)]
    draws: Option<usize>,
    /// Single k for table6.
    #[arg(long)]
    k: Option<u64>,
    /// Cell width for table6 [default 0.5].
    #[arg(long)]
    delta: Option<f64>,
}

fn run() -> Result<(), CliError> {
    let matches = Cli::command().get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let settings = Settings::load(cli.config.as_deref(), sub)?;
    if cli.workers == Some(0) {
        return Err(CliError::Usage("--workers must be positive".into()));
    }
    let ctx = Ctx { settings: &settings, workers: cli.workers };
    let bundle = match cli.command {
        Command::Elicit(_) => commands::elicit(&ctx),
        Command::CheckPrior(_) => commands::check_prior(&ctx),
        Command::Analyze(_) => commands::analyze(&ctx),
        Command::Bias(_) => commands::bias(&ctx),
        Command::Select(_) => commands::select(&ctx),
        Command::Reproduce(_) => reproduce::run(&ctx),
    }?;
    for key in settings.unused() {
        eprintln!("warning: setting `{key}` is not used by {name}");
    }
    output::emit(&bundle, name, &settings, cli.out.as_deref())?;
    match bundle.deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
