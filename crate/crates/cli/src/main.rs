//! `agora`: run, replicate, replay, and report on simulation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use agora_cli::{
    cmd_replay, cmd_replicate, cmd_report, cmd_run, CliError, ReplicateOptions, ReportOptions,
    RunOptions,
};

#[derive(Parser)]
#[command(name = "agora")]
#[command(about = "Deterministic multi-agent behavioral simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config into a run directory.
    Run {
        /// Scenario config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output run directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed embedded in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Backend: http, replay, or scripted (default scripted).
        #[arg(long)]
        backend: Option<String>,
        /// Scripted policy id; defaults to the config's scenario kind.
        #[arg(long)]
        policy: Option<String>,
        /// Scripted policy parameters as inline JSON.
        #[arg(long)]
        params: Option<String>,
        /// Chat model name for the http backend.
        #[arg(long)]
        model: Option<String>,
        /// Transcript file for the replay backend.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run every (cell, replication) of an experiment pack.
    Replicate {
        /// Experiment pack JSON.
        #[arg(long)]
        pack: PathBuf,
        /// Batch output root.
        #[arg(long)]
        out: PathBuf,
        /// Parallel worker count.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the pack's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a replicated batch into report tables.
    Report {
        /// Batch root written by replicate.
        #[arg(long)]
        out: PathBuf,
        /// Pack file; defaults to the snapshot stored in the batch root.
        #[arg(long)]
        pack: Option<PathBuf>,
    },
    /// Re-execute a recorded run from its transcript.
    Replay {
        /// Existing run directory.
        run_dir: PathBuf,
        /// Output directory for the replayed run.
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            backend,
            policy,
            params,
            model,
            transcript,
        } => {
            let meta = cmd_run(&RunOptions {
                config,
                out: out.clone(),
                seed,
                backend,
                policy,
                params,
                model,
                transcript,
            })?;
            println!(
                "run {} finished ({} at tick {}) -> {}",
                meta.run_id,
                meta.halted.reason,
                meta.halted.tick,
                out.display()
            );
            Ok(())
        }
        Command::Replicate {
            pack,
            out,
            jobs,
            seed,
        } => {
            let summary = cmd_replicate(&ReplicateOptions {
                pack,
                out: out.clone(),
                jobs,
                seed,
            })?;
            let failures = summary.failures();
            println!(
                "replicated {}: {} runs, {} failed -> {}",
                summary.pack_id,
                summary.runs.len(),
                failures.len(),
                out.display()
            );
            for failure in &failures {
                eprintln!(
                    "failed: {} (seed {}): {}",
                    failure.dir,
                    failure.seed,
                    failure.error.as_deref().unwrap_or("unknown error")
                );
            }
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "{} of {} runs failed",
                    failures.len(),
                    summary.runs.len()
                )))
            }
        }
        Command::Report { out, pack } => {
            let report = cmd_report(&ReportOptions {
                out: out.clone(),
                pack,
            })?;
            println!(
                "report for {} written to {} ({} groups)",
                report.pack_id,
                out.display(),
                report.agent_run.groups.len()
            );
            Ok(())
        }
        Command::Replay { run_dir, out } => {
            let meta = cmd_replay(&run_dir, &out)?;
            println!("replayed {} -> {}", meta.run_id, out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("{}", error.record());
            ExitCode::FAILURE
        }
    }
}
