use std::error::Error as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metric_surgery_cli::{cmd_diagram, cmd_sweep, cmd_train, cmd_verify, load_config, render_verify, CliError};

#[derive(Parser)]
#[command(
    name = "metric-surgery",
    version,
    about = "Gradient-surgery metric learning experiments"
)]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `output.dir` from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oracle and invariant suites; exits nonzero on any failure.
    Verify,
    /// Train every seed of a config and write recall, stats and diagram CSVs.
    Train { config: PathBuf },
    /// Vary one axis over a list of values and summarize holdout recall@1.
    Sweep {
        config: PathBuf,
        /// direction, pair_weight, triplet_weight or lr
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Train every seed of a config and write only the triplet diagram.
    Diagram { config: PathBuf },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out = cli.output_dir.as_deref();
    match cli.command {
        Command::Verify => {
            let report = cmd_verify();
            print!("{}", render_verify(&report));
            return Ok(report.all_passed());
        }
        Command::Train { config } => {
            let run = load_config(&config, out)?;
            cmd_train(&run)?;
            println!("wrote {}", run.output_dir.display());
        }
        Command::Diagram { config } => {
            let run = load_config(&config, out)?;
            cmd_diagram(&run)?;
            println!("wrote {}", run.output_dir.display());
        }
        Command::Sweep { config, axis, values } => {
            let run = load_config(&config, out)?;
            let axis = axis.parse()?;
            for row in cmd_sweep(&run, axis, &values)? {
                println!("{axis}={:<22} recall@1 {:.4} ± {:.4}", row.value, row.mean(), row.std());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
