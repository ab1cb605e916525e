use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crosslinear::cli::{self, Overrides};
use crosslinear::ndgrad::BackwardFault;

#[derive(Parser)]
#[command(name = "crosslinear", version, about = "Cross-variable linear forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for initialization, shuffling and masking.
    #[arg(long)]
    seed: Option<u64>,
    /// Report metrics in original data units instead of z-scores.
    #[arg(long)]
    raw_units: bool,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            raw_units: self.raw_units,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write result.json and checkpoint.json.
    Train(RunArgs),
    /// Train each embedding variant with identical data and seeds.
    Ablate(RunArgs),
    /// Evaluate the test set under endogenous and exogenous input masking.
    MaskStudy {
        #[command(flatten)]
        run: RunArgs,
        /// Evaluate this checkpoint instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Write the learned cross-variable weights as a labelled CSV.
    ExportWeights {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate an exogenous-driven synthetic series as CSV.
    Synth {
        /// Generator settings (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> crosslinear::Result<bool> {
    match cli.command {
        Command::Train(a) => cli::cmd_train(&a.config, &a.overrides()).map(|_| true),
        Command::Ablate(a) => cli::cmd_ablate(&a.config, &a.overrides()).map(|_| true),
        Command::MaskStudy { run, checkpoint } => {
            cli::cmd_mask_study(&run.config, &run.overrides(), checkpoint.as_deref()).map(|_| true)
        }
        Command::Gradcheck {
            config,
            seed,
            out,
            inject_fault,
        } => {
            let fault = inject_fault.then_some(BackwardFault::ScaleMatMulRhs(1.5));
            let doc = cli::cmd_gradcheck(config.as_deref(), seed, fault)?;
            if let Some(out) = out {
                std::fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
            }
            Ok(doc.passed)
        }
        Command::ExportWeights { checkpoint, out } => {
            cli::cmd_export_weights(&checkpoint, &out).map(|_| true)
        }
        Command::Synth { config, out, seed } => {
            let mut spec = cli::load_synth_spec(&config)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            cli::cmd_synth(&spec, &out).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
