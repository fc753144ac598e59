use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teleop_gateway::{Gateway, GatewayConfig};
use tracing::{error, info};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "gateway", about = "Teleoperation gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run until interrupted.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted `key=value` override, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config file and print the effective config.
    ValidateConfig {
        path: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the default config as TOML.
    DefaultConfig,
}

fn load(path: Option<&PathBuf>, overrides: &[String]) -> anyhow::Result<GatewayConfig> {
    Ok(match path {
        Some(p) => GatewayConfig::load(p, overrides)?,
        None => GatewayConfig::from_toml("", overrides)?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::DefaultConfig => {
            print!("{}", GatewayConfig::default().to_toml());
            Ok(())
        }
        Command::ValidateConfig { path, overrides } => load(Some(&path), &overrides).and_then(|c| {
            c.validate()?;
            print!("{}", c.to_toml());
            Ok(())
        }),
        Command::Run { config, overrides } => load(config.as_ref(), &overrides).and_then(run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(config: GatewayConfig) -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(EnvFilter::try_new(&config.log_level)?)
        .init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let gateway = Gateway::start(config).await?;
        tokio::signal::ctrl_c().await?;
        info!("interrupt received");
        let report = gateway.shutdown().await;
        if report.clean {
            info!(elapsed_ms = report.elapsed_ms, "shutdown complete");
        } else {
            error!(elapsed_ms = report.elapsed_ms, "shutdown overran its deadline");
        }
        Ok(())
    })
}
