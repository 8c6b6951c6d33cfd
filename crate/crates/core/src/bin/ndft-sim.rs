use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ndft_sim::experiment::{load_config, run_experiment, seed_override_from_env, validate_config, write_outputs, RunOptions};
use ndft_sim::SimError;

#[derive(Parser)]
#[command(name = "ndft-sim", version, about = "CPU + NDP simulator and offloading scheduler for LR-TDDFT pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario matrix of a configuration file and write CSV reports.
    Run {
        config: PathBuf,
        /// Only run the scenario with this name.
        #[arg(long)]
        scenario: Option<String>,
        /// Execute the pseudopotential kernel numerically where the system is small enough.
        #[arg(long)]
        exec_pseudo: bool,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the event timeline of every scenario.
        #[arg(long)]
        timeline: bool,
    },
    /// Check a configuration file and list every problem found.
    Validate { config: PathBuf },
}

fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Config { .. } => 2,
        SimError::Capacity(_) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run {
            config,
            scenario,
            exec_pseudo,
            out,
            timeline,
        } => {
            let cfg = load_config(&config)?;
            let opts = RunOptions {
                scenario,
                exec_pseudo,
                seed_override: seed_override_from_env()?,
            };
            let result = run_experiment(&cfg, &opts)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let written = write_outputs(&dir, &cfg, &result, timeline)?;
            for r in &result.summary {
                println!(
                    "{:<32} makespan {:>12.6e} s  speedup {:>6.3}  overhead {:>6.3}%",
                    r.label,
                    r.makespan_s,
                    r.speedup_vs_cpu_only,
                    100.0 * r.overhead_frac
                );
            }
            log::info!("wrote {} files to {}", written.len(), dir.display());
            Ok(())
        }
        Command::Validate { config } => {
            let diags = validate_config(&config)?;
            if diags.is_empty() {
                println!("{}: ok", config.display());
                return Ok(());
            }
            for d in &diags {
                println!("{d}");
            }
            let first = diags.into_iter().next().expect("non-empty");
            Err(SimError::config(first.path, first.message))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
