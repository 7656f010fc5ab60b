use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commlab::harness::{analyze, emit_plot_data, load_config, run_experiment, RunSummary};
use commlab::Result;

#[derive(Debug, Parser)]
#[command(
    name = "commlab",
    version,
    about = "Emergent vs. fixed-protocol communication in a cooperative gridworld"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every condition x seed and write logs plus summary.json
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the summary from an experiment directory's logs
    Analyze {
        dir: PathBuf,
        /// Final-episode window (default: min(100, episodes))
        #[arg(long)]
        window: Option<usize>,
    },
    /// Write learning-curve, symbol-frequency and entropy CSVs under <dir>/plots
    PlotData { dir: PathBuf },
}

fn print_summary(summary: &RunSummary) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => load_config(&config).and_then(|mut cfg| {
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let summary = run_experiment(&cfg)?;
            eprintln!(
                "wrote {}",
                cfg.output_dir
                    .join(commlab::harness::SUMMARY_FILE)
                    .display()
            );
            print_summary(&summary)
        }),
        Command::Analyze { dir, window } => analyze(&dir, window).and_then(|s| print_summary(&s)),
        Command::PlotData { dir } => emit_plot_data(&dir).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
