use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ogc::cli::{self, RunOptions};

#[derive(Parser)]
#[command(name = "ogc", about = "Online gradient control simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory, summary, and metadata files
    Run {
        scenario: PathBuf,
        /// Output directory (default: scenario's `output.directory` or `out`)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Inclusive seed range N..M; runs one episode per seed and writes
        /// the aggregate table
        #[arg(long, conflicts_with = "seed")]
        seeds: Option<String>,
        /// Override the step size
        #[arg(long)]
        alpha: Option<f64>,
        /// Override the measurement error radius
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Parse and validate a scenario file without running it
    Validate { scenario: PathBuf },
    /// Rebuild the summary table from a run's trajectory and metadata
    Report { log_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            seeds,
            alpha,
            epsilon,
        } => (|| {
            let seeds = seeds.as_deref().map(cli::parse_seed_range).transpose()?;
            let opts = RunOptions {
                out,
                seed,
                seeds,
                alpha,
                epsilon,
            };
            let dir = cli::run_command(&scenario, &opts)?;
            println!("ok: results written to {}", dir.display());
            Ok(())
        })(),
        Command::Validate { scenario } => cli::validate_command(&scenario).map(|()| {
            println!("ok: {} is valid", scenario.display());
        }),
        Command::Report { log_dir } => cli::report_command(&log_dir).map(|summary| {
            print!("{summary}");
        }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
