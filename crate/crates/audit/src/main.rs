use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use credit_audit::{run, CliError, Command, Format, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "credit-audit",
    version,
    about = "Credit-score benchmarking and fairness audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let manifest = run(cli.command, &cfg)?;
    println!(
        "{}: wrote {} file(s) to {}",
        manifest.command,
        manifest.outputs.len() + 1,
        cfg.out_dir().display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
