//! `disi`: dataset generation, training, restoration, sweeps, dumps and
//! the verification suite.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};

const THREADS_VAR: &str = "DISI_THREADS";

#[derive(Parser)]
#[command(
    name = "disi",
    version,
    about = "Two-time stochastic interpolants: restoration, training and verification",
    after_help = "Environment:\n  DISI_THREADS  number of worker threads for data-parallel loops (default: all cores)\n\nExit codes: 0 success, 1 check failure, 2 usage or configuration error, 3 I/O error"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient table (r, g, alpha, beta, lambda, gamma, dalpha, dbeta) on an N x N grid.
    ScheduleDump(ScheduleDumpArgs),
    /// Discretized trajectory as (t, r, g) rows.
    Traj(TrajArgs),
    /// Forward states of every pair along a trajectory.
    Simulate(SimulateArgs),
    /// Convergence table of the analytic sampler against a fine Euler reference.
    Bench(BenchArgs),
    /// Restores a degraded cloud with a checkpoint or the Gaussian oracle.
    Restore(RestoreArgs),
    /// MSE and energy distance over a (delta, eta, NFE) grid.
    Sweep(SweepArgs),
    /// Trains a denoiser and writes a checkpoint.
    Train(TrainArgs),
    /// Runs the acceptance checks and prints a JSON report.
    Verify(VerifyArgs),
    /// Writes a toy pair dataset with its JSON sidecar.
    GenData(GenDataArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PathKind {
    Elliptical,
    Linear,
    Regression,
    Vpath,
    QuadBezier,
}

#[derive(Args, Clone, Debug)]
pub struct PathArgs {
    /// Peak noise level of the path.
    #[arg(long)]
    pub delta: Option<f64>,
    /// V-path profile exponent.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
}

#[derive(Args)]
pub struct ScheduleDumpArgs {
    /// Clean/degraded correlation.
    #[arg(long)]
    pub rho: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_d: f64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrajArgs {
    #[arg(long, value_enum)]
    pub kind: PathKind,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Correlation fixing the regression half-range phi.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub traj: PathKind,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Pair CSV (sigma_d and rho from its sidecar, or estimated).
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Gaussian,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub oracle: OracleKind,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "elliptical")]
    pub traj: PathKind,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value_t = 10_000)]
    pub euler_steps: usize,
    /// Comma-separated sampler step counts.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50,100")]
    pub sampler_steps: Vec<usize>,
    /// Number of (x1, noise) draws averaged per row.
    #[arg(long, default_value_t = 100)]
    pub noises: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Regression path, one step.
    DisiR,
    /// Elliptical path, ten deterministic steps with booting.
    DisiG,
}

#[derive(Args)]
pub struct DenoiserArgs {
    /// Checkpoint JSON.
    #[arg(long, conflicts_with = "oracle")]
    pub model: Option<PathBuf>,
    /// Use the closed-form Gaussian denoiser instead of a checkpoint.
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    /// Correlation for the oracle.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Data scale for the oracle.
    #[arg(long)]
    pub sigma_d: Option<f64>,
}

#[derive(Args)]
pub struct RestoreArgs {
    /// JSON run config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub denoiser: DenoiserArgs,
    /// Degraded cloud CSV; for a pair CSV the x1 columns are used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub traj: Option<PathKind>,
    #[command(flatten)]
    pub path: PathArgs,
    /// Denoiser evaluations.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub boot_epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub denoiser: DenoiserArgs,
    /// Test pair CSV; with the oracle and no data, Gaussian pairs are generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Generated test pairs.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub etas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub nfes: Vec<usize>,
    #[arg(long)]
    pub boot_epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SamplerName {
    Elliptical,
    Linear,
    Regression,
    Uniform,
    LogitNormal,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `scurve`, `gaussian` or a pair CSV.
    #[arg(long)]
    pub data: Option<String>,
    /// Generated dataset size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Correlation of generated Gaussian pairs.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long, value_enum)]
    pub time_sampler: Option<SamplerName>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub ema_decay: Option<f64>,
    /// Hidden widths, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
    #[arg(long)]
    pub emb_dim: Option<usize>,
    /// Train with w = 0.
    #[arg(long)]
    pub no_adaptive: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss trace CSV (step, loss).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Run one check group (gvp, boundary, regression, manifold, kappa, euler,
    /// posterior, gradient, training, sweep, timesampler) or criterion id.
    #[arg(long)]
    pub only: Option<String>,
    /// Also write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DataKind {
    Scurve,
    Gaussian,
}

#[derive(Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Gaussian pairs only.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Gaussian pairs only.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = commands::SCURVE_JITTER)]
    pub jitter: f64,
    #[arg(long, default_value_t = commands::SCURVE_STRENGTH)]
    pub strength: f64,
    #[arg(long, default_value_t = commands::SCURVE_NOISE)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_d: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pair CSV; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::ScheduleDump(a) => commands::schedule_dump(a),
        Command::Traj(a) => commands::traj(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
        Command::Restore(a) => commands::restore(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Train(a) => commands::train(a),
        Command::Verify(a) => commands::verify(a),
        Command::GenData(a) => commands::gen_data(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed downstream pipe (e.g. `| head`) is not a failure
        Err(CliError::Core(disi::Error::Io(e))) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
