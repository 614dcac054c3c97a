mod commands;
mod inputs;
mod output;
mod scenario;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or invalid configuration, unwritable output.
    Usage(String),
    /// A requested check ran and did not pass.
    Check(String),
    Numeric(wkblab_core::Error),
}

impl From<wkblab_core::Error> for Failure {
    fn from(e: wkblab_core::Error) -> Self {
        match e {
            wkblab_core::Error::InvalidInput(msg) => Failure::Usage(msg),
            e => Failure::Numeric(e),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Numeric(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value = "csv", global = true)]
    pub format: Format,
    /// Random seed [default: 1]; for `run` it overrides the scenario's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Main numerical tolerance; each command documents its default.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Size of the worker pool (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl Common {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn tol_or(&self, default: f64) -> Result<f64, Failure> {
        match self.tol {
            Some(t) if !(t > 0.0) || !t.is_finite() => Err(Failure::Usage(format!("--tol must be positive, got {t}"))),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wkblab", version, about = "Monodromy, WKB growth, fibers and flat dynamics for sl2-systems on genus-2 curves")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monodromy of the surface-group generators (and extra loops) at each t.
    Monodromy(commands::MonodromyArgs),
    /// log|trace| of the monodromy of one loop over a t-grid, with the fitted slope.
    WkbSweep(commands::WkbSweepArgs),
    /// Widths of loops for a quadratic differential.
    Width(commands::WidthArgs),
    /// Search a flat surface for a loop on which one width strictly beats the other.
    FindWkbCurve(commands::FindWkbArgs),
    /// Solutions of det A = phi up to conjugation.
    DetFiber(commands::DetFiberArgs),
    /// Spectral periods and the conic scaling check.
    Spectral(commands::SpectralArgs),
    /// Holomorphic sectional curvature samples of the model metric.
    ModelMetric(commands::ModelMetricArgs),
    /// Run every check of a scenario file and write a summary.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "wkblab-out")]
    out_dir: PathBuf,
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let c = &cli.common;
    match &cli.command {
        Command::Monodromy(a) => commands::monodromy(c, a),
        Command::WkbSweep(a) => commands::wkb_sweep(c, a),
        Command::Width(a) => commands::width(c, a),
        Command::FindWkbCurve(a) => commands::find_wkb_curve(c, a),
        Command::DetFiber(a) => commands::det_fiber(c, a),
        Command::Spectral(a) => commands::spectral(c, a),
        Command::ModelMetric(a) => commands::model_metric(c, a),
        Command::Run(a) => scenario::run(c, &a.scenario, &a.out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.common.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Usage(format!("cannot build worker pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("wkblab: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
