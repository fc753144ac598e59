//! Gateway configuration: one TOML document, every key overridable from the
//! command line as `--override dotted.key=value`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use teleop_core::ik::KinematicChain;
use teleop_core::pipeline::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("override {0:?} is not of the form key=value")]
    Override(String),
    #[error("override {key}: {message}")]
    OverridePath { key: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Persistent socket for handle frames (JSON text messages).
    pub handle_bind: SocketAddr,
    /// UDP port for binary hand datagrams.
    pub udp_bind: SocketAddr,
    /// Operator control endpoint.
    pub control_bind: SocketAddr,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            handle_bind: "127.0.0.1:8765".parse().unwrap(),
            udp_bind: "127.0.0.1:9870".parse().unwrap(),
            control_bind: "127.0.0.1:8766".parse().unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TlsMode {
    #[default]
    Off,
    On,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TlsConfig {
    pub mode: TlsMode,
    /// PEM certificate chain.
    pub cert: Option<PathBuf>,
    /// PEM private key.
    pub key: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotConfig {
    /// Directory holding `hand.json` and `handle.json`.
    pub dir: PathBuf,
    pub interval_ms: u64,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("snapshots"),
            interval_ms: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub dir: PathBuf,
    pub flush_interval_ms: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("episodes"),
            flush_interval_ms: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueueConfig {
    /// Per-stream ingest queue; drop-oldest on overflow.
    pub ingest_capacity: usize,
    /// Pipeline to recorder queue; pipelines wait when it is full so
    /// episodes never lose records.
    pub record_capacity: usize,
    pub snapshot_capacity: usize,
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self {
            ingest_capacity: 256,
            record_capacity: 4096,
            snapshot_capacity: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub network: NetworkConfig,
    pub tls: TlsConfig,
    pub pipeline: PipelineConfig,
    /// `arm6`, `planar3`, or a path to a chain JSON file.
    pub chain: String,
    pub snapshot: SnapshotConfig,
    pub episodes: EpisodeConfig,
    pub queues: QueueConfig,
    /// Tracing filter directive, e.g. `info` or `teleop_gateway=debug`.
    pub log_level: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            tls: TlsConfig::default(),
            pipeline: PipelineConfig::default(),
            chain: "arm6".to_string(),
            snapshot: SnapshotConfig::default(),
            episodes: EpisodeConfig::default(),
            queues: QueueConfig::default(),
            log_level: "info".to_string(),
        }
    }
}

/// Parses `key=value`; the value is read as a TOML value, or as a bare
/// string when it does not parse.
fn parse_override(raw: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(raw.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(raw.to_string()));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), parsed))
}

fn apply_override(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let mut table = root;
    for (i, part) in path[..path.len() - 1].iter().enumerate() {
        let entry = table
            .entry(part.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::OverridePath {
            key: path.join("."),
            message: format!("{} is not a table", path[..=i].join(".")),
        })?;
    }
    table.insert(path[path.len() - 1].clone(), value);
    Ok(())
}

impl GatewayConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for raw in overrides {
            let (path, value) = parse_override(raw)?;
            apply_override(&mut table, &path, value)?;
        }
        // Relative paths in the document resolve against the working
        // directory, like the command-line overrides.
        let config: GatewayConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load_chain(&self) -> Result<KinematicChain, ConfigError> {
        match self.chain.as_str() {
            "arm6" => Ok(KinematicChain::arm6()),
            "planar3" => Ok(KinematicChain::planar3()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: PathBuf::from(path),
                    source,
                })?;
                KinematicChain::from_json(&text).map_err(|e| ConfigError::Invalid(format!("chain {path}: {e}")))
            }
        }
    }

    pub fn snapshot_interval(&self) -> Duration {
        Duration::from_millis(self.snapshot.interval_ms)
    }

    pub fn flush_interval(&self) -> Duration {
        Duration::from_millis(self.episodes.flush_interval_ms)
    }

    /// Checks everything that can be checked without binding sockets and
    /// creates the snapshot and episode directories.
    pub fn validate(&self) -> Result<KinematicChain, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        let n = &self.network;
        let ports = [
            ("handle_bind", n.handle_bind),
            ("udp_bind", n.udp_bind),
            ("control_bind", n.control_bind),
        ];
        for (i, (a, pa)) in ports.iter().enumerate() {
            for (b, pb) in &ports[i + 1..] {
                // The UDP port may share a number with a TCP port.
                let udp_pair = *a == "udp_bind" || *b == "udp_bind";
                if pa.port() != 0 && pa.port() == pb.port() && !udp_pair {
                    return Err(invalid(format!("{a} and {b} share port {}", pa.port())));
                }
            }
        }
        if self.tls.mode == TlsMode::On {
            for (name, path) in [("tls.cert", &self.tls.cert), ("tls.key", &self.tls.key)] {
                match path {
                    None => return Err(invalid(format!("{name} is required when tls.mode = \"on\""))),
                    Some(p) if !p.is_file() => return Err(invalid(format!("{name} {} does not exist", p.display()))),
                    _ => {}
                }
            }
        }
        self.pipeline
            .filter
            .validate()
            .map_err(|e| invalid(format!("pipeline.filter: {e}")))?;
        self.pipeline
            .ik
            .validate()
            .map_err(|e| invalid(format!("pipeline.ik: {e}")))?;
        let r = self.pipeline.quantization.resolution;
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!(
                "pipeline.quantization.resolution must be > 0, got {r}"
            )));
        }
        if self.snapshot.interval_ms == 0 {
            return Err(invalid("snapshot.interval_ms must be > 0".into()));
        }
        let q = &self.queues;
        if q.ingest_capacity == 0 || q.record_capacity == 0 || q.snapshot_capacity == 0 {
            return Err(invalid("queue capacities must be > 0".into()));
        }
        tracing_subscriber::EnvFilter::try_new(&self.log_level)
            .map_err(|e| invalid(format!("log_level {:?}: {e}", self.log_level)))?;
        let chain = self.load_chain()?;
        for (name, dir) in [
            ("snapshot.dir", &self.snapshot.dir),
            ("episodes.dir", &self.episodes.dir),
        ] {
            std::fs::create_dir_all(dir).map_err(|e| invalid(format!("{name} {}: {e}", dir.display())))?;
        }
        Ok(chain)
    }
}
