//! Simulator side of both wire protocols: paced emission of synthetic or
//! recorded frames.
//!
//! Pacing uses absolute deadlines (`start + k * interval`), so a late send
//! does not push every later send back.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use futures_util::SinkExt;
use serde::Serialize;
use teleop_core::codec::{encode_hand_payload, serialize_handle_frame_json};
use teleop_core::episode::{ReplayTiming, read_records};
use teleop_core::model::{HandFrame, Handedness, HandleFrame};
use teleop_core::pipeline::RawFrame;
use teleop_core::sim::{SimFrame, hand_frame, handle_frame};
use tokio::net::{TcpStream, UdpSocket};
use tokio::time::Instant;
use tokio_rustls::TlsConnector;
use tokio_tungstenite::WebSocketStream;
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, info, warn};

use crate::tls::BoxedStream;

/// How far back replay looks for a frame it already sent.
const RECENT_FRAMES: usize = 64;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EmissionReport {
    /// Frames handed to the emitter.
    pub generated: usize,
    /// Frames that went out on the wire.
    pub sent: usize,
    /// Frames skipped on purpose (simulated loss).
    pub dropped: usize,
    /// Frames that could not be delivered (socket down or send error).
    pub lost: usize,
    pub datagrams: usize,
    pub reconnects: usize,
    pub elapsed_s: f64,
    /// Sends per second over the run.
    pub mean_rate_hz: f64,
    pub interval_mean_ms: f64,
    pub interval_std_ms: f64,
    /// Latest send relative to its deadline.
    pub max_lateness_ms: f64,
    /// Set when the run was abandoned.
    pub failure: Option<String>,
}

/// Tracks send instants and fills in the timing part of a report.
struct Timing {
    start: Instant,
    sends: Vec<Instant>,
    max_late: Duration,
}

impl Timing {
    fn new(start: Instant) -> Self {
        Self {
            start,
            sends: Vec::new(),
            max_late: Duration::ZERO,
        }
    }

    fn sent(&mut self, deadline: Instant) {
        let now = Instant::now();
        self.max_late = self.max_late.max(now.saturating_duration_since(deadline));
        self.sends.push(now);
    }

    fn finish(self, report: &mut EmissionReport) {
        let elapsed = self.start.elapsed().as_secs_f64();
        report.elapsed_s = elapsed;
        report.max_lateness_ms = self.max_late.as_secs_f64() * 1e3;
        let intervals: Vec<f64> = self
            .sends
            .windows(2)
            .map(|w| w[1].duration_since(w[0]).as_secs_f64() * 1e3)
            .collect();
        if let (Some(first), Some(last)) = (self.sends.first(), self.sends.last()) {
            let span = last.duration_since(*first).as_secs_f64();
            if span > 0.0 {
                report.mean_rate_hz = (self.sends.len() - 1) as f64 / span;
            }
        }
        if !intervals.is_empty() {
            let n = intervals.len() as f64;
            let mean = intervals.iter().sum::<f64>() / n;
            let var = intervals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            report.interval_mean_ms = mean;
            report.interval_std_ms = var.sqrt();
        }
    }
}

fn interval(rate: f64) -> anyhow::Result<Duration> {
    anyhow::ensure!(rate > 0.0 && rate.is_finite(), "rate must be positive, got {rate}");
    Ok(Duration::from_secs_f64(1.0 / rate))
}

pub fn unix_us() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_micros() as u64)
}

/// Sends one datagram per hand per frame to `target` at `rate` Hz. Frames
/// marked dropped are skipped and counted. Sequence numbers are the frame
/// index, so intentional drops show up as gaps at the receiver.
pub async fn emit_gesture_stream(
    frames: &[SimFrame],
    hands: &[Handedness],
    target: SocketAddr,
    rate: f64,
) -> anyhow::Result<EmissionReport> {
    let interval = interval(rate)?;
    let bind: SocketAddr = if target.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse()?;
    let socket = UdpSocket::bind(bind).await.context("binding UDP socket")?;
    socket
        .connect(target)
        .await
        .with_context(|| format!("connecting to {target}"))?;
    let start_us = unix_us();
    let start = Instant::now();
    let mut timing = Timing::new(start);
    let mut report = EmissionReport {
        generated: frames.len(),
        ..EmissionReport::default()
    };
    for (k, frame) in frames.iter().enumerate() {
        let deadline = start + interval.mul_f64(k as f64);
        tokio::time::sleep_until(deadline).await;
        if frame.dropped {
            report.dropped += 1;
            continue;
        }
        let mut ok = true;
        for side in hands {
            let hf = hand_frame(frame, 0, side.clone());
            let buf = encode_hand_payload(&hf.hands[0], frame.index as u32, start_us + frame.offset_us)?;
            match socket.send(&buf).await {
                Ok(_) => report.datagrams += 1,
                Err(e) => {
                    // Usually ICMP port unreachable from a previous send.
                    debug!("UDP send failed: {e}");
                    ok = false;
                }
            }
        }
        if ok {
            report.sent += 1;
            timing.sent(deadline);
        } else {
            report.lost += 1;
        }
    }
    timing.finish(&mut report);
    Ok(report)
}

/// Where handle frames go: `ws://host:port/` or, with a root certificate,
/// `wss://`.
#[derive(Clone)]
pub struct HandleTarget {
    pub addr: SocketAddr,
    /// TLS connector and server name; plain TCP when absent.
    pub tls: Option<(TlsConnector, String)>,
}

impl HandleTarget {
    pub fn plain(addr: SocketAddr) -> Self {
        Self { addr, tls: None }
    }

    fn url(&self) -> String {
        match &self.tls {
            None => format!("ws://{}/", self.addr),
            Some((_, host)) => format!("wss://{host}:{}/", self.addr.port()),
        }
    }

    async fn connect(&self) -> anyhow::Result<WebSocketStream<BoxedStream>> {
        let tcp = TcpStream::connect(self.addr).await?;
        tcp.set_nodelay(true)?;
        let stream: BoxedStream = match &self.tls {
            None => Box::new(tcp),
            Some((connector, host)) => Box::new(connector.connect(crate::tls::server_name(host)?, tcp).await?),
        };
        let (ws, _) = tokio_tungstenite::client_async(self.url(), stream).await?;
        Ok(ws)
    }
}

/// Reconnect policy: exponential backoff between attempts, giving up after
/// `max_attempts` consecutive failures.
#[derive(Debug, Clone, Copy)]
pub struct Backoff {
    pub initial: Duration,
    pub max: Duration,
    pub max_attempts: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            initial: Duration::from_millis(50),
            max: Duration::from_secs(1),
            max_attempts: 20,
        }
    }
}

/// A socket that reconnects lazily: while down, frames are discarded and a
/// new connection is attempted once the backoff delay has passed.
struct Reconnecting {
    target: HandleTarget,
    backoff: Backoff,
    ws: Option<WebSocketStream<BoxedStream>>,
    failures: u32,
    delay: Duration,
    next_attempt: Instant,
    ever_connected: bool,
}

impl Reconnecting {
    fn new(target: HandleTarget, backoff: Backoff) -> Self {
        Self {
            target,
            backoff,
            ws: None,
            failures: 0,
            delay: backoff.initial,
            next_attempt: Instant::now(),
            ever_connected: false,
        }
    }

    /// Returns whether `text` was sent; counts reconnects into `report`.
    async fn send(&mut self, text: String, report: &mut EmissionReport) -> anyhow::Result<bool> {
        if self.ws.is_none() {
            if Instant::now() < self.next_attempt {
                return Ok(false);
            }
            match self.target.connect().await {
                Ok(ws) => {
                    if self.ever_connected {
                        report.reconnects += 1;
                        info!(reconnects = report.reconnects, "handle socket reconnected");
                    }
                    self.ever_connected = true;
                    self.ws = Some(ws);
                    self.failures = 0;
                    self.delay = self.backoff.initial;
                }
                Err(e) => {
                    self.failures += 1;
                    if self.failures >= self.backoff.max_attempts {
                        anyhow::bail!("handle server unreachable after {} attempts: {e}", self.failures);
                    }
                    debug!(attempt = self.failures, "handle connect failed: {e}");
                    self.next_attempt = Instant::now() + self.delay;
                    self.delay = (self.delay * 2).min(self.backoff.max);
                    return Ok(false);
                }
            }
        }
        let ws = self.ws.as_mut().unwrap();
        match ws.send(Message::text(text)).await {
            Ok(()) => Ok(true),
            Err(e) => {
                warn!("handle socket send failed: {e}");
                self.ws = None;
                self.next_attempt = Instant::now();
                Ok(false)
            }
        }
    }

    async fn close(&mut self) {
        if let Some(mut ws) = self.ws.take() {
            let _ = ws.close(None).await;
        }
    }
}

/// Sends one JSON handle frame per frame over a persistent socket at `rate`
/// Hz, reconnecting with bounded backoff when the connection drops.
pub async fn emit_handle_stream(
    frames: &[SimFrame],
    hands: &[Handedness],
    target: HandleTarget,
    rate: f64,
    backoff: Backoff,
) -> anyhow::Result<EmissionReport> {
    let interval = interval(rate)?;
    let start_ms = unix_us() / 1000;
    let start = Instant::now();
    let mut timing = Timing::new(start);
    let mut report = EmissionReport {
        generated: frames.len(),
        ..EmissionReport::default()
    };
    let mut socket = Reconnecting::new(target, backoff);
    for (k, frame) in frames.iter().enumerate() {
        let deadline = start + interval.mul_f64(k as f64);
        tokio::time::sleep_until(deadline).await;
        if frame.dropped {
            report.dropped += 1;
            continue;
        }
        let mut handles = Vec::new();
        for side in hands {
            handles.extend(handle_frame(frame, start_ms, side.clone()).handles);
        }
        let hf = HandleFrame {
            timestamp: start_ms + frame.offset_us / 1000,
            handles,
        };
        match socket.send(serialize_handle_frame_json(&hf), &mut report).await {
            Ok(true) => {
                report.sent += 1;
                timing.sent(deadline);
            }
            Ok(false) => report.lost += 1,
            Err(e) => {
                report.lost += 1 + frames[k + 1..].iter().filter(|f| !f.dropped).count();
                report.dropped += frames[k + 1..].iter().filter(|f| f.dropped).count();
                report.failure = Some(e.to_string());
                break;
            }
        }
    }
    socket.close().await;
    timing.finish(&mut report);
    Ok(report)
}

/// Re-emits a recorded episode's raw frames over the wire protocols:
/// gesture frames as datagrams, handle frames over the socket.
pub async fn replay_episode(
    dir: &Path,
    udp_target: Option<SocketAddr>,
    handle_target: Option<HandleTarget>,
    timing: ReplayTiming,
) -> anyhow::Result<EmissionReport> {
    let outcome = read_records(dir, false)?;
    let mut records = outcome.records;
    records.sort_by_key(|r| r.t);
    let udp = match udp_target {
        Some(t) => {
            let s = UdpSocket::bind("0.0.0.0:0").await?;
            s.connect(t).await?;
            Some(s)
        }
        None => None,
    };
    let mut socket = handle_target.map(|t| Reconnecting::new(t, Backoff::default()));
    let mut report = EmissionReport::default();
    let start = Instant::now();
    let mut timer = Timing::new(start);
    let first = records.first().map_or(0, |r| r.arrival_us);
    // A frame carrying both sides is recorded once per stream, and the two
    // records need not be adjacent. Remember recent frames to send it once.
    let mut recent: VecDeque<&RawFrame> = VecDeque::with_capacity(RECENT_FRAMES);
    for r in &records {
        let deadline = match timing {
            ReplayTiming::AsRecorded => start + Duration::from_micros(r.arrival_us.saturating_sub(first)),
            ReplayTiming::MaxSpeed => Instant::now(),
        };
        tokio::time::sleep_until(deadline).await;
        if recent.iter().any(|prev| **prev == r.raw) {
            continue;
        }
        if recent.len() == RECENT_FRAMES {
            recent.pop_front();
        }
        recent.push_back(&r.raw);
        report.generated += 1;
        let sent = match (&r.raw, &udp, socket.as_mut()) {
            (RawFrame::Gesture(f), Some(udp), _) => {
                send_hands(udp, f, r.seq.unwrap_or(r.t as u32), &mut report).await?
            }
            (RawFrame::Handle(f), _, Some(sock)) => sock.send(serialize_handle_frame_json(f), &mut report).await?,
            _ => false,
        };
        if sent {
            report.sent += 1;
            timer.sent(deadline);
        } else {
            report.lost += 1;
        }
    }
    if let Some(s) = socket.as_mut() {
        s.close().await;
    }
    timer.finish(&mut report);
    Ok(report)
}

async fn send_hands(udp: &UdpSocket, frame: &HandFrame, seq: u32, report: &mut EmissionReport) -> anyhow::Result<bool> {
    let mut ok = true;
    for hand in &frame.hands {
        let buf = encode_hand_payload(hand, seq, frame.timestamp * 1000)?;
        match udp.send(&buf).await {
            Ok(_) => report.datagrams += 1,
            Err(_) => ok = false,
        }
    }
    Ok(ok)
}
