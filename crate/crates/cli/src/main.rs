use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use umbra_cli::config::Analysis;
use umbra_cli::error::CliError;
use umbra_cli::{demo, RunOptions, DEFAULT_SEED};

#[derive(Parser)]
#[command(
    name = "umbra",
    version,
    about = "Eclipse impact analyses for PV plants and distribution feeders"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses a scenario selects.
    Run {
        /// Scenario file; defaults to scenario.toml in $UMBRA_CONFIG_DIR or the working directory.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        analysis: Option<Analysis>,
        /// Output directory; overrides the scenario's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "UMBRA_CONFIG_DIR", hide_env_values = true)]
        config_dir: Option<PathBuf>,
    },
    /// Write the synthetic demo inputs and scenario.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Run {
            config,
            analysis,
            out,
            seed,
            config_dir,
        } => {
            let config = config.unwrap_or_else(|| config_dir.unwrap_or_default().join("scenario.toml"));
            umbra_cli::run(&RunOptions {
                config,
                analysis,
                out,
                seed,
            })
            .map(|r| log::info!("wrote {}", r.out.display()))
        }
        Command::Demo { out, seed } => demo::write_bundle(&out, seed).map_err(|e| CliError::runtime("demo", e)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
