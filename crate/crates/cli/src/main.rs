use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lossyrom::Extraction;
use lossyrom_cli::{Bundle, ExperimentConfig, Failure, Stage};

#[derive(Parser)]
#[command(
    name = "lossyrom",
    version,
    about = "ROM inversion for 1-D lossy layered media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON); flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bundle directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// ROM order.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    omega_max: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    fd_cells: Option<usize>,
    #[arg(long, global = true, value_enum)]
    extraction: Option<ExtractionArg>,
    /// Relative noise level on the transfer samples.
    #[arg(long, global = true)]
    noise: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Regularization weight of the direct loss estimate.
    #[arg(long, global = true)]
    reg: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Worker threads for stage-internal parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample the transfer function of the medium.
    Forward,
    /// Poles and residues, exact or by rational fitting.
    Fit,
    /// Lanczos ROM and its ladder coefficients.
    Rom,
    /// Spectrally matched grid.
    Grid,
    /// Impedance and loss on the grid.
    Invert,
    /// Gauss-Newton refinement in ROM coefficient space.
    Optimize,
    /// All stages in order.
    Full,
}

#[derive(ValueEnum, Clone, Copy)]
enum ExtractionArg {
    Exact,
    Ratfit,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.n {
        cfg.n = v;
    }
    if let Some(v) = cli.omega_max {
        cfg.omega_max = Some(v);
    }
    if let Some(v) = cli.samples {
        cfg.n_samples = v;
    }
    if let Some(v) = cli.fd_cells {
        cfg.fd_cells = v;
    }
    if let Some(v) = cli.extraction {
        cfg.extraction = match v {
            ExtractionArg::Exact => Extraction::Exact,
            ExtractionArg::Ratfit => Extraction::Ratfit,
        };
    }
    if let Some(v) = cli.noise {
        cfg.noise = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.reg {
        cfg.reg = v;
    }
    if let Some(v) = cli.max_iter {
        cfg.max_iter = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let bundle = Bundle::new(cli.out.clone(), config(cli)?);
    match cli.command {
        Command::Forward => bundle.run(Stage::Forward),
        Command::Fit => bundle.run(Stage::Fit),
        Command::Rom => bundle.run(Stage::Rom),
        Command::Grid => bundle.run(Stage::Grid),
        Command::Invert => bundle.run(Stage::Invert),
        Command::Optimize => bundle.run(Stage::Optimize),
        Command::Full => bundle.run_all(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LOSSYROM_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            log::warn!("thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
