use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::List;

#[derive(Parser, Debug)]
#[command(
    name = "ergm-bayes",
    version,
    about = "Bayesian inference for exponential random graph models"
)]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` file with defaults for any long flag; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the posterior of one model with the exchange sampler.
    Fit(FitArgs),
    /// Compare models by auto reversible jump and report Bayes factors.
    Select(SelectArgs),
    /// Posterior predictive goodness of fit from a saved trace.
    Gof(GofArgs),
    /// Draw one network at a given parameter.
    Simulate(SimulateArgs),
    /// Compare samplers with exact enumeration on a small graph.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "ERGM_BAYES_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Adjacency matrix file (whitespace-separated 0/1 rows).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Treat the network as directed.
    #[arg(long)]
    pub directed: bool,
    /// Nodal attribute as NAME=PATH, one label per line. Repeatable.
    #[arg(long = "attr", value_name = "NAME=PATH")]
    pub attrs: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProposalArg {
    TieNoTie,
    RandomDyad,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Sequential,
    Snapshot,
}

#[derive(Args, Debug, Clone)]
pub struct SamplerArgs {
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub main_iters: Option<usize>,
    /// Toggle proposals per auxiliary network simulation.
    #[arg(long)]
    pub aux_iters: Option<usize>,
    /// Population size; 1 selects single-chain block updates.
    #[arg(long)]
    pub nchains: Option<usize>,
    /// ADS move scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Diagonal entry of the proposal covariance.
    #[arg(long)]
    pub sigma_epsilon: Option<f64>,
    /// Sd of the independent normal prior on each coefficient.
    #[arg(long)]
    pub prior_sd: Option<f64>,
    #[arg(long, value_enum)]
    pub proposal: Option<ProposalArg>,
    /// How chains of the population see each other within an iteration.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Args, Debug, Clone)]
pub struct BinArgs {
    #[arg(long)]
    pub n_ideg: Option<usize>,
    #[arg(long)]
    pub n_odeg: Option<usize>,
    #[arg(long)]
    pub n_deg: Option<usize>,
    #[arg(long)]
    pub n_dist: Option<usize>,
    #[arg(long)]
    pub n_esp: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Model formula, e.g. `y ~ edges + mutual + ctriple("job")`.
    #[arg(long)]
    pub formula: Option<String>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Largest ACF lag reported.
    #[arg(long)]
    pub lag_max: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// File with one formula per line.
    #[arg(long)]
    pub formulae: Option<PathBuf>,
    /// Online reversible-jump iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub aux_iters: Option<usize>,
    /// Offline burn-in per model; one value or one per model.
    #[arg(long)]
    pub burn_ins: Option<List<usize>>,
    /// Offline main iterations per model.
    #[arg(long)]
    pub main_iters: Option<List<usize>>,
    /// Offline ADS move scale per model.
    #[arg(long)]
    pub gammas: Option<List<f64>>,
    /// Offline population size per model.
    #[arg(long)]
    pub nchains: Option<List<usize>>,
    #[arg(long)]
    pub sigma_epsilon: Option<f64>,
    #[arg(long)]
    pub prior_sd: Option<f64>,
    #[arg(long, value_enum)]
    pub proposal: Option<ProposalArg>,
    #[arg(long)]
    pub lag_max: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GofArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub formula: Option<String>,
    /// Posterior trace written by `fit` (defaults to `<out>/trace.csv`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Number of simulated networks.
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub aux_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub proposal: Option<ProposalArg>,
    #[command(flatten)]
    pub bins: BinArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub formula: Option<String>,
    /// Parameter vector, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<List<f64>>,
    /// Start from the empty graph on this many nodes instead of `--data`.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub aux_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub proposal: Option<ProposalArg>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub formula: Option<String>,
    /// Parameter for the expectation check (default all zeros).
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<List<f64>>,
    /// Graph size for the expectation check when `--data` is absent.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Simulated networks for the expectation check.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Grid points per axis for the posterior check.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Grid covers `[-w, w]` on every axis.
    #[arg(long)]
    pub grid_width: Option<f64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
