use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lens_cli::config::{ExperimentConfig, Overrides};
use lens_cli::error::CliResult;
use lens_cli::{report, run};

/// Locality-tolerant robustness metrics for model attributions.
#[derive(Parser)]
#[command(name = "lens", version, disable_help_subcommand = true)]
struct Cli {
    /// Experiment configuration file (flat `key = value` lines).
    #[arg(short, long, global = true, default_value = "lens.conf")]
    config: PathBuf,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Evaluate only this many sampled images.
    #[arg(long, global = true)]
    samples: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the built-in glyph dataset into `dataset_dir`.
    GenData,
    /// Train one checkpoint per configured regime.
    Train,
    /// Run the full attack x metric grid and write CSV results.
    Evaluate,
    /// Aggregate window-tolerant metrics across `w_values`.
    SweepW,
    /// Aggregate set metrics across `k_values`.
    SweepK,
    /// Render `aggregates.csv` as pivot tables.
    Report,
}

fn dispatch(cli: &Cli) -> CliResult<String> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        samples: cli.samples,
    };
    let cfg = ExperimentConfig::load(&cli.config, &overrides)?;
    match cli.command {
        Command::GenData => run::cmd_gen_data(&cfg),
        Command::Train => run::cmd_train(&cfg),
        Command::Evaluate => run::cmd_evaluate(&cfg),
        Command::SweepW => run::cmd_sweep_w(&cfg),
        Command::SweepK => run::cmd_sweep_k(&cfg),
        Command::Report => report::cmd_report(&cfg.out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
