use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nematic_amr::{output, run_experiment, ConfigError, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "nematic-amr", version, about = "Adaptive Q2 solver for electrically coupled nematic liquid crystals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// uniform or amr
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        levels: Option<String>,
        /// Dörfler marking fraction
        #[arg(long)]
        nu: Option<String>,
        /// Unit-length penalty weight
        #[arg(long)]
        zeta: Option<String>,
        /// Output directory
        #[arg(long)]
        out: Option<String>,
    },
}

fn load(path: &PathBuf, overrides: [(&str, Option<String>); 5]) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        field: "--config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut config = ExperimentConfig::parse(&text)?;
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Run { config, mode, levels, nu, zeta, out } = Cli::parse().command;
    let result = load(&config, [("mode", mode), ("levels", levels), ("nu", nu), ("zeta", zeta), ("out", out)])
        .and_then(|c| run_experiment(&c));
    match result {
        Ok((_, report)) => {
            print!("{}", output::summary_table(&report));
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
