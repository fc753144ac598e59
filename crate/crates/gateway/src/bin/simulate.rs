use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use serde::Deserialize;
use teleop_core::episode::ReplayTiming;
use teleop_core::model::Handedness;
use teleop_core::sim::{NoiseSpec, TrajectorySpec, generate_frames};
use teleop_gateway::emit::{
    Backoff, EmissionReport, HandleTarget, emit_gesture_stream, emit_handle_stream, replay_episode,
};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Gesture,
    Handle,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Hands {
    Left,
    Right,
    Both,
}

#[derive(Parser)]
#[command(name = "simulate", about = "Synthetic tracking device")]
struct Cli {
    #[arg(long, value_enum, default_value = "gesture")]
    mode: Mode,
    /// TOML or JSON file with `trajectory` and `noise` tables.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    rate: f64,
    /// Seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Overrides the seed in the trajectory file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "right")]
    hands: Hands,
    /// Gateway hand UDP address.
    #[arg(long, default_value = "127.0.0.1:9870")]
    target: SocketAddr,
    /// Gateway handle socket address.
    #[arg(long, default_value = "127.0.0.1:8765")]
    handle_target: SocketAddr,
    /// Root certificate for a TLS handle socket.
    #[arg(long)]
    ca: Option<PathBuf>,
    #[arg(long, default_value = "localhost")]
    server_name: String,
    /// Re-emit a recorded episode instead of a synthetic stream.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "as-recorded")]
    timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Timing {
    AsRecorded,
    MaxSpeed,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SpecFile {
    trajectory: TrajectorySpec,
    noise: NoiseSpec,
}

fn read_spec(path: &Path) -> anyhow::Result<SpecFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(reports) => {
            println!("{}", serde_json::to_string_pretty(&reports).unwrap());
            if reports.iter().any(|(_, r)| r.failure.is_some()) {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

async fn run(cli: Cli) -> anyhow::Result<Vec<(&'static str, EmissionReport)>> {
    let handle_target = HandleTarget {
        addr: cli.handle_target,
        tls: match &cli.ca {
            Some(ca) => Some((teleop_gateway::tls::connector(ca)?, cli.server_name.clone())),
            None => None,
        },
    };
    if let Some(dir) = &cli.replay {
        let timing = match cli.timing {
            Timing::AsRecorded => ReplayTiming::AsRecorded,
            Timing::MaxSpeed => ReplayTiming::MaxSpeed,
        };
        let report = replay_episode(dir, Some(cli.target), Some(handle_target), timing).await?;
        return Ok(vec![("replay", report)]);
    }

    let mut spec = match &cli.trajectory {
        Some(p) => read_spec(p)?,
        None => SpecFile::default(),
    };
    if let Some(seed) = cli.seed {
        spec.noise.seed = seed;
    }
    let frames = generate_frames(&spec.trajectory, &spec.noise, cli.rate, cli.duration)?;
    let hands = match cli.hands {
        Hands::Left => vec![Handedness::Left],
        Hands::Right => vec![Handedness::Right],
        Hands::Both => vec![Handedness::Left, Handedness::Right],
    };
    let gesture = matches!(cli.mode, Mode::Gesture | Mode::Both)
        .then(|| emit_gesture_stream(&frames, &hands, cli.target, cli.rate));
    let handle = matches!(cli.mode, Mode::Handle | Mode::Both)
        .then(|| emit_handle_stream(&frames, &hands, handle_target, cli.rate, Backoff::default()));
    let mut reports = Vec::new();
    match (gesture, handle) {
        (Some(g), Some(h)) => {
            let (g, h) = tokio::join!(g, h);
            reports.push(("gesture", g?));
            reports.push(("handle", h?));
        }
        (Some(g), None) => reports.push(("gesture", g.await?)),
        (None, Some(h)) => reports.push(("handle", h.await?)),
        (None, None) => {}
    }
    Ok(reports)
}
