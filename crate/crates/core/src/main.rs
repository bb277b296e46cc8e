use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adiabat::error::Error;
use adiabat::runner::{run, run_batch, run_to_dir, RunReport};
use adiabat::scenario::load_scenario;

/// Adiabaticity diagnostics for driven quantum systems.
#[derive(Parser)]
#[command(name = "adiabat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV series and JSON report.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run every `*.json` scenario in a directory.
    Batch {
        dir: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the identities of one scenario without writing files.
    Verify { scenario: PathBuf },
}

const EXIT_IDENTITY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn error_code(e: &Error) -> u8 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn summarize(path: &Path, report: &RunReport) -> u8 {
    for c in &report.checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        println!(
            "{}: {status} {} = {:e} (limit {:e})",
            report.name, c.name, c.value, c.threshold
        );
    }
    println!("{}: {}", report.name, report.regime.verdict);
    match report.first_failed_check() {
        None => 0,
        Some(c) => {
            eprintln!("{}: identity check `{}` failed", path.display(), c.name);
            EXIT_IDENTITY
        }
    }
}

fn fail(path: &Path, e: &Error) -> u8 {
    eprintln!("{}: {e}", path.display());
    error_code(e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, out } => {
            match load_scenario(&scenario).and_then(|s| run_to_dir(&s, &out)) {
                Ok((report, files)) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                    summarize(&scenario, &report)
                }
                Err(e) => fail(&scenario, &e),
            }
        }
        Command::Verify { scenario } => match load_scenario(&scenario).and_then(|s| run(&s)) {
            Ok(output) => summarize(&scenario, &output.report),
            Err(e) => fail(&scenario, &e),
        },
        Command::Batch { dir, out } => match run_batch(&dir, &out) {
            Ok(results) => {
                // the first failing scenario in file order decides the exit status
                let mut code = 0;
                for (path, result) in &results {
                    let c = match result {
                        Ok(report) => summarize(path, report),
                        Err(e) => fail(path, e),
                    };
                    if code == 0 {
                        code = c;
                    }
                }
                code
            }
            Err(e) => fail(&dir, &e),
        },
    };
    ExitCode::from(code)
}
