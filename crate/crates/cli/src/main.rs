use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pacs_cli::{cmd_bench, cmd_plotdata, cmd_run, BenchManifest, CliError, EmitFlags, RunManifest, METRICS_FILE};
use pacs_core::sim::FilterKind;

#[derive(Parser)]
#[command(name = "pacs", version, about = "Path-consistent safety filter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write metrics (and optionally traces).
    Run {
        /// Scenario file; repeat for several.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// First seed; rollouts use seed .. seed + reps.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the scenario's filter.
        #[arg(long, value_parser = parse_filter)]
        filter: Option<FilterKind>,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 1 if any rollout violates its safety specification.
        #[arg(long)]
        assert_safe: bool,
        /// Write one NDJSON trace per rollout.
        #[arg(long)]
        trace: bool,
        /// Write plotdata.csv over all rollouts.
        #[arg(long)]
        plotdata: bool,
    },
    /// Time the shield step and trajectory construction; prints JSON.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
    },
    /// Export traces as a CSV table.
    Plotdata {
        #[arg(long, num_args = 0..)]
        trace: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_filter(s: &str) -> Result<FilterKind, String> {
    s.parse().map_err(|e: pacs_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, reps, seed, filter, out, assert_safe, trace, plotdata } => {
            let manifest = RunManifest {
                scenarios: scenario,
                out_dir: out.clone(),
                reps,
                seed_base: seed,
                filter,
                emit: EmitFlags { trace, plotdata, assert_safe },
            };
            let summary = cmd_run(&manifest)?;
            eprintln!(
                "{} rollouts, {} with violations; metrics in {}",
                summary.rollouts.len(),
                summary.unsafe_rollouts(),
                out.join(METRICS_FILE).display()
            );
        }
        Command::Bench { scenario, iters } => {
            let report = cmd_bench(&BenchManifest { scenario, iters })?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Plotdata { trace, out } => {
            let rows = cmd_plotdata(&trace, &out)?;
            eprintln!("{rows} rows written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
