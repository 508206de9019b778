use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qbound_cli::{execute, Command, Options};

#[derive(Parser)]
#[command(name = "qbound", version, about = "Quantum limits on moment estimation of subdiffraction objects")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Working precision in bits (overrides QBOUND_PRECISION_BITS and the config).
    #[arg(long)]
    precision: Option<u32>,
}

#[derive(Subcommand)]
enum Sub {
    /// K̃ table with residuals, verdicts and baselines.
    Bound(Common),
    /// Log-log slope fit over a Δ sweep.
    Scaling(Common),
    /// QSNR and its prefactor bounds.
    Snr(Common),
    /// Thermal-state property suite on seeded random models.
    Thermal(Common),
    /// Self-consistency checks for a config.
    Validate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Bound(c) => (Command::Bound, c),
        Sub::Scaling(c) => (Command::Scaling, c),
        Sub::Snr(c) => (Command::Snr, c),
        Sub::Thermal(c) => (Command::Thermal, c),
        Sub::Validate(c) => (Command::Validate, c),
    };
    let opts = Options {
        out: common.out,
        precision: common.precision,
    };
    match execute(command, &common.config, &opts) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(1)
        }
    }
}
