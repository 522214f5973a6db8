//! `vpd`: run, check, compare and fit damped Vlasov–Poisson particle runs.
//!
//! Exit codes: 0 success, 1 usage/configuration error or failed check,
//! 2 numerical abort. Log level via `VPD_LOG` (e.g. `VPD_LOG=info`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use vpd_core::io::commands::{
    cmd_check, cmd_compare, cmd_fit, cmd_run, exit_code_for, run_exit_code, RunOverrides, EXIT_OK,
    EXIT_USAGE,
};

#[derive(Parser)]
#[command(
    name = "vpd",
    version,
    about = "Particle simulator for Vlasov-Poisson with radiation damping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured run and write series, snapshots and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads for field evaluation; 1 is bit-deterministic.
        #[arg(long)]
        workers: Option<usize>,
        /// Diagnostic stride in steps (overrides `diag_stride`).
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Check identities and decay bounds of a completed run; writes report.json.
    Check { run_dir: PathBuf },
    /// Compare a damped run with its gauge-transformed counterpart.
    Compare { first: PathBuf, second: PathBuf },
    /// Fit a power-law tail to one series column.
    Fit {
        series: PathBuf,
        #[arg(long)]
        column: String,
        /// Window as `LO,HI`; defaults to the second half of the series.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VPD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_USAGE as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    let code = match cli.command {
        Command::Run {
            config,
            output,
            workers,
            stride,
        } => {
            let overrides = RunOverrides {
                output_dir: output,
                workers,
                diag_stride: stride,
            };
            match cmd_run(&config, &overrides) {
                Ok(outcome) => {
                    println!(
                        "{}",
                        serde_json::json!({
                            "output_dir": outcome.output_dir,
                            "status": outcome.status,
                            "rows": outcome.rows,
                            "steps": outcome.steps,
                            "last_valid_time": outcome.last_valid_time,
                            "error": outcome.error,
                        })
                    );
                    run_exit_code(&outcome)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Check { run_dir } => match cmd_check(&run_dir) {
            Ok(report) => {
                print!("{}", report.table());
                if report.pass {
                    EXIT_OK
                } else {
                    EXIT_USAGE
                }
            }
            Err(e) => fail(&e),
        },
        Command::Compare { first, second } => match cmd_compare(&first, &second) {
            Ok(report) => {
                println!("{}", serde_json::to_string(&report).expect("serialisable"));
                if report.pass {
                    EXIT_OK
                } else {
                    EXIT_USAGE
                }
            }
            Err(e) => fail(&e),
        },
        Command::Fit {
            series,
            column,
            window,
        } => match cmd_fit(&series, &column, window) {
            Ok(fit) => {
                println!("{}", serde_json::to_string(&fit).expect("serialisable"));
                EXIT_OK
            }
            Err(e) => fail(&e),
        },
    };
    ExitCode::from(code as u8)
}

fn fail(e: &vpd_core::Error) -> i32 {
    error!("{e}");
    eprintln!("error: {e}");
    exit_code_for(e)
}
