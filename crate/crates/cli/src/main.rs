//! `tcm`: run, sweep and verify the tropical climate model simulator.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors (and failed
//! oracle checks), 2 when the integration stops on blow-up or a non-finite
//! state.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tcm_core::harness::{self, parse_config, HarnessError};

#[derive(Debug, Parser)]
#[command(name = "tcm", version, about = "Pseudospectral tropical climate model runs and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one configuration and write diagnostics.csv, snapshot.tcm and manifest.toml.
    Run {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat a run for several cone widths and write sweep_summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated epsilon values, e.g. `0.1,0.05,0.025`.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        epsilons: Vec<f64>,
    },
    /// Run the oracle checks on the configured grid and data.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Run { config } => {
            let config = parse_config(&config)?;
            let outcome = harness::run(&config)?;
            let result = &outcome.manifest.result;
            println!(
                "{}: {} steps to t = {}, decay verdict {}, outputs in {}",
                result.termination,
                result.steps_taken,
                result.final_time,
                result.decay_verdict,
                config.output_dir.display()
            );
            Ok(outcome.exit_code)
        }
        Command::Sweep { config, epsilons } => {
            let config = parse_config(&config)?;
            let summary = harness::sweep(&config, &epsilons)?;
            for row in &summary.rows {
                match &row.error {
                    Some(e) => println!("epsilon {}: error: {e}", row.epsilon),
                    None => println!(
                        "epsilon {}: {} condition {:.6e} sup e^t E {:.6e} decay {}",
                        row.epsilon,
                        row.termination.map(|t| t.as_str()).unwrap_or("-"),
                        row.condition_lhs.unwrap_or(f64::NAN),
                        row.sup_scaled_forcing.unwrap_or(f64::NAN),
                        row.decay_verdict.unwrap_or(false)
                    ),
                }
            }
            if let Some(path) = &summary.path {
                println!("summary: {}", path.display());
            }
            Ok(summary.rows.iter().map(|r| r.exit_code).max().unwrap_or(0))
        }
        Command::Verify { config } => {
            let config = parse_config(&config)?;
            let checks = harness::verify(&config)?;
            let all = harness::run::report_checks(&mut std::io::stdout().lock(), &checks)
                .map_err(|e| HarnessError::Output(e.to_string()))?;
            Ok(if all { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            1
        }
    };
    ExitCode::from(code as u8)
}
