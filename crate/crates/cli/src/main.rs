//! `telesynth`: bootstrap, train, generate and compare synthetic telematics
//! portfolios, one artifact-producing command per stage.

mod artifacts;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use telesynth::claims::CountMode;
use telesynth::dataio::RunConfig;
use telesynth::Error;

use pipeline::Context;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Missing(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Missing(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Missing(_) => 2,
            CliError::Core(e) => match e {
                Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
                Error::InvalidArgument(_) => 2,
                Error::Validation { .. }
                | Error::HeaderMismatch { .. }
                | Error::Parse { .. }
                | Error::UnknownCategory { .. }
                | Error::UnknownVariable(_)
                | Error::MissingVariable { .. }
                | Error::EncoderMismatch(_)
                | Error::SingleClass
                | Error::NoClaimants => 3,
                Error::Numeric(_) => 4,
                _ => 1,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "telesynth",
    version,
    about = "Synthetic telematics insurance portfolios"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Source portfolio CSV used instead of `<out>/real.csv`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Overrides one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a source portfolio from the ground-truth generator.
    Bootstrap {
        /// Number of policies.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Bayesian search for the four network architectures.
    Tune {
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Fit the encoder and the three-stage claim count cascade.
    TrainFrequency {
        #[arg(long)]
        epochs: Option<usize>,
        /// Architecture keys written by `tune`.
        #[arg(long)]
        archs: Option<PathBuf>,
    },
    /// Fit the claim amount regressor.
    TrainSeverity {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        archs: Option<PathBuf>,
    },
    /// Generate synthetic features with the extended SMOTE.
    GenerateFeatures {
        /// Number of synthetic policies.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Attach simulated claim counts and amounts to synthetic features.
    SimulateClaims {
        /// `threshold` or `bernoulli`.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Fidelity report of the synthetic portfolio against the source.
    Compare,
    /// Every stage in order.
    RunAll {
        #[arg(long)]
        archs: Option<PathBuf>,
    },
}

fn build_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_text(&artifacts::read_text(path)?)?,
        None => RunConfig::default(),
    };
    for entry in &common.set {
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{entry}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(i) = &common.input {
        cfg.input = Some(i.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = build_config(&cli.common)?;
    match &cli.command {
        Command::Bootstrap { rows } => {
            if let Some(n) = rows {
                cfg.n_real = *n;
            }
        }
        Command::Tune { budget } => {
            if let Some(b) = budget {
                cfg.tuning_budget = *b;
            }
        }
        Command::TrainFrequency { epochs, archs } => {
            if let Some(e) = epochs {
                cfg.frequency_epochs = *e;
            }
            if let Some(a) = archs {
                pipeline::apply_archs(&mut cfg, a)?;
            }
        }
        Command::TrainSeverity { epochs, archs } => {
            if let Some(e) = epochs {
                cfg.severity_epochs = *e;
            }
            if let Some(a) = archs {
                pipeline::apply_archs(&mut cfg, a)?;
            }
        }
        Command::GenerateFeatures { rows, alpha } => {
            if let Some(n) = rows {
                cfg.n_synthetic = *n;
            }
            if let Some(a) = alpha {
                cfg.u_shape_alpha = *a;
            }
        }
        Command::SimulateClaims { mode } => {
            if let Some(m) = mode {
                cfg.count_mode = CountMode::parse(m)
                    .ok_or_else(|| CliError::Usage(format!("unknown count mode `{m}`")))?;
            }
        }
        Command::Compare => {}
        Command::RunAll { archs } => {
            if let Some(a) = archs {
                pipeline::apply_archs(&mut cfg, a)?;
            }
        }
    }
    cfg.validate()?;
    let mut ctx = Context { cfg };
    match cli.command {
        Command::Bootstrap { .. } => pipeline::bootstrap(&ctx),
        Command::Tune { .. } => pipeline::tune(&ctx),
        Command::TrainFrequency { .. } => pipeline::train_frequency(&ctx),
        Command::TrainSeverity { .. } => pipeline::train_severity_stage(&ctx),
        Command::GenerateFeatures { .. } => pipeline::generate_features(&ctx),
        Command::SimulateClaims { .. } => pipeline::simulate(&ctx),
        Command::Compare => pipeline::compare_stage(&ctx),
        Command::RunAll { .. } => pipeline::run_all(&mut ctx),
    }?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("telesynth: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
