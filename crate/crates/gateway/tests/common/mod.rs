#![allow(dead_code)]

use std::future::Future;
use std::time::Duration;

use serde_json::Value;
use teleop_gateway::{Gateway, GatewayConfig, GatewayStatus};
use tempfile::TempDir;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};

/// Loopback config on ephemeral ports with all files under `dir`.
pub fn test_config(dir: &TempDir) -> GatewayConfig {
    let mut c = GatewayConfig::default();
    c.network.handle_bind = "127.0.0.1:0".parse().unwrap();
    c.network.udp_bind = "127.0.0.1:0".parse().unwrap();
    c.network.control_bind = "127.0.0.1:0".parse().unwrap();
    c.snapshot.dir = dir.path().join("snapshots");
    c.episodes.dir = dir.path().join("episodes");
    c.log_level = "warn".into();
    c
}

pub async fn start() -> (Gateway, TempDir) {
    start_with(|_| {}).await
}

pub async fn start_with(tweak: impl FnOnce(&mut GatewayConfig)) -> (Gateway, TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut c = test_config(&dir);
    tweak(&mut c);
    (Gateway::start(c).await.unwrap(), dir)
}

/// Polls the status until `done` holds, panicking after `timeout`.
pub async fn wait_for(gw: &Gateway, timeout: Duration, done: impl Fn(&GatewayStatus) -> bool) -> GatewayStatus {
    let until = tokio::time::Instant::now() + timeout;
    loop {
        let s = gw.status();
        if done(&s) {
            return s;
        }
        if tokio::time::Instant::now() > until {
            panic!(
                "condition not reached in {timeout:?}; status: {}",
                serde_json::to_string_pretty(&s).unwrap()
            );
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

pub async fn eventually<F: Future<Output = bool>>(timeout: Duration, mut check: impl FnMut() -> F) {
    let until = tokio::time::Instant::now() + timeout;
    while !check().await {
        assert!(
            tokio::time::Instant::now() < until,
            "condition not reached in {timeout:?}"
        );
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

/// Line-protocol client for the control endpoint.
pub struct ControlClient {
    read: BufReader<OwnedReadHalf>,
    write: OwnedWriteHalf,
}

impl ControlClient {
    pub async fn connect(gw: &Gateway) -> Self {
        let (read, write) = TcpStream::connect(gw.addrs().control).await.unwrap().into_split();
        Self {
            read: BufReader::new(read),
            write,
        }
    }

    pub async fn send(&mut self, line: &str) -> Value {
        self.write.write_all(format!("{line}\n").as_bytes()).await.unwrap();
        let mut out = String::new();
        self.read.read_line(&mut out).await.unwrap();
        serde_json::from_str(&out).unwrap_or_else(|e| panic!("bad response {out:?}: {e}"))
    }
}

pub fn stream<'a>(s: &'a GatewayStatus, key: &str) -> &'a teleop_gateway::status::StreamStatus {
    s.streams
        .get(key)
        .unwrap_or_else(|| panic!("no stream {key}; have {:?}", s.streams.keys()))
}
