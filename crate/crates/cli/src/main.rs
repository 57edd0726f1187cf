//! `fscil` command-line driver.

mod commands;
mod config;
mod parallel;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fscil::eval::ReportFormat;

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration.
    Config(String),
    /// Failure while running a command.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<fscil::FscilError> for CliError {
    fn from(e: fscil::FscilError) -> Self {
        use fscil::FscilError as E;
        match e {
            E::Parameter(_) | E::Schedule(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "fscil", version, about = "Few-shot class-incremental learning lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Axis {
    K,
    Similarity,
    Embedding,
    LangReg,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides paths.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and embedding files.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train base models; writes a checkpoint and log per seed.
    TrainBase {
        #[command(flatten)]
        common: Common,
    },
    /// Run every incremental session from the base checkpoints.
    RunIncremental {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Base checkpoint to start from (single seed only).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score a checkpoint on the query set of the last session it covers.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweep one axis over the seed list and tabulate the results.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values; defaults to the config's list.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Finite-difference check of every analytic gradient.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-render a CSV table (with its .meta.json sidecar).
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
        /// Directory to write into instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { common } => commands::gen_data(&commands::load(&common.config, common.out, common.seed)?),
        Command::TrainBase { common } => commands::train_base(&commands::load(&common.config, common.out, common.seed)?),
        Command::RunIncremental { common, format, checkpoint } => commands::run_incremental(
            &commands::load(&common.config, common.out, common.seed)?,
            format.into(),
            checkpoint,
        ),
        Command::Evaluate { common, format, checkpoint } => {
            commands::evaluate(&commands::load(&common.config, common.out, common.seed)?, format.into(), checkpoint)
        }
        Command::Ablate { common, axis, values, format } => commands::ablate(
            &commands::load(&common.config, common.out, common.seed)?,
            axis,
            values.as_deref(),
            format.into(),
        ),
        Command::Gradcheck { seed } => commands::gradcheck(seed),
        Command::Report { input, format, out } => commands::report(&input, format.into(), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
