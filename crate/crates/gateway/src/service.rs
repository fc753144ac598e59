//! Wiring: ingestion tasks feed per-stream queues with one pipeline task
//! per stream. The recorder and snapshot writer sit behind their own queues.
//!
//! ```text
//! udp ----\                      /-> pipeline(gesture/left)  --\
//!          >-- route by stream -+--> pipeline(handle/right) ---+--> recorder
//! handle -/         |            \-> ...                      \--> commands
//!                   \--> snapshot writer
//! ```

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use parking_lot::Mutex;
use serde::Serialize;
use serde_json::{Value, json};
use teleop_core::episode::{EpisodeManifest, EpisodeRecord, EpisodeWriter};
use teleop_core::ik::KinematicChain;
use teleop_core::model::{Hand, HandFrame, Handedness, Handle, HandleFrame, Source};
use teleop_core::pipeline::{Command, RawFrame, StepOutput, StreamKey, StreamPipeline};
use teleop_core::snapshot::{remove_stale_temps, snapshot_write};
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use crate::config::{GatewayConfig, TlsMode};
use crate::queue::{DropOldestQueue, QueueStats};
use crate::status::{GatewayStatus, Metrics, RecordingState};

/// Deadline for draining queues on shutdown.
pub const SHUTDOWN_DEADLINE: Duration = Duration::from_secs(2);

pub const HAND_SNAPSHOT: &str = "hand.json";
pub const HANDLE_SNAPSHOT: &str = "handle.json";

/// A frame as delivered by an ingestion task.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub raw: Arc<RawFrame>,
    pub arrival: Instant,
    /// Datagram sequence number on the gesture channel.
    pub seq: Option<u32>,
}

/// An emitted joint command, as seen by command subscribers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandEvent {
    pub stream: StreamKey,
    pub command: Command,
}

struct RecordItem {
    epoch: u64,
    key: StreamKey,
    arrival: Instant,
    seq: Option<u32>,
    raw: RawFrame,
    step: StepOutput,
}

enum RecorderMsg {
    Record(Box<RecordItem>),
    Start {
        label: String,
        reply: oneshot::Sender<Result<String, String>>,
    },
    Stop {
        reply: oneshot::Sender<Result<EpisodeManifest, String>>,
    },
}

/// Recording epoch. Pipelines restart from bootstrap whenever `epoch`
/// changes, so every episode is self-contained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Epoch {
    epoch: u64,
    recording: bool,
}

enum SnapshotItem {
    Hand(u64, Hand),
    Handle(u64, Handle),
}

pub(crate) struct Core {
    config: GatewayConfig,
    chain: KinematicChain,
    pub(crate) metrics: Metrics,
    queues: Mutex<BTreeMap<StreamKey, DropOldestQueue<Ingested>>>,
    pipelines: Mutex<Vec<JoinHandle<()>>>,
    record_tx: Mutex<Option<mpsc::Sender<RecorderMsg>>>,
    epoch: watch::Receiver<Epoch>,
    snapshots: DropOldestQueue<SnapshotItem>,
    commands: broadcast::Sender<CommandEvent>,
    closing: Mutex<bool>,
}

impl Core {
    /// Hands a decoded frame to the pipelines of every stream it carries.
    pub(crate) fn deliver(self: &Arc<Self>, raw: RawFrame, seq: Option<u32>, arrival: Instant) {
        let channel = match raw.source() {
            Source::Gesture => "udp",
            Source::Handle => "handle",
        };
        let keys = raw.stream_keys();
        if keys.is_empty() {
            self.metrics.reject(channel, "no known handedness");
            return;
        }
        match &raw {
            RawFrame::Gesture(f) => {
                for h in &f.hands {
                    self.snapshots.push(SnapshotItem::Hand(f.timestamp, h.clone()));
                }
            }
            RawFrame::Handle(f) => {
                for h in &f.handles {
                    self.snapshots.push(SnapshotItem::Handle(f.timestamp, h.clone()));
                }
            }
        }
        let item = Ingested {
            raw: Arc::new(raw),
            arrival,
            seq,
        };
        for key in keys {
            let Some(queue) = self.queue_for(&key) else {
                return;
            };
            self.metrics.received(&key, arrival);
            if queue.push(item.clone()).is_some() {
                debug!(stream = %key, "ingest queue full, dropped oldest frame");
            }
        }
    }

    fn queue_for(self: &Arc<Self>, key: &StreamKey) -> Option<DropOldestQueue<Ingested>> {
        if *self.closing.lock() {
            return None;
        }
        let mut queues = self.queues.lock();
        if let Some(q) = queues.get(key) {
            return Some(q.clone());
        }
        let q = DropOldestQueue::new(self.config.queues.ingest_capacity);
        queues.insert(key.clone(), q.clone());
        let record_tx = self.record_tx.lock().clone();
        let task = tokio::spawn(run_stream(self.clone(), key.clone(), q.clone(), record_tx));
        self.pipelines.lock().push(task);
        info!(stream = %key, "stream opened");
        Some(q)
    }

    pub(crate) fn queue_stats(&self) -> BTreeMap<StreamKey, QueueStats> {
        self.queues.lock().iter().map(|(k, q)| (k.clone(), q.stats())).collect()
    }

    pub(crate) fn status(&self) -> GatewayStatus {
        self.metrics.status(&self.queue_stats())
    }

    /// Runs one control-endpoint command and returns its JSON response.
    pub(crate) async fn control(&self, line: &str) -> Value {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["status"] => json!({ "ok": true, "status": self.status() }),
            ["config", "get"] => json!({ "ok": true, "config": self.config }),
            ["record", "start", label @ ..] => {
                let label = if label.is_empty() {
                    "episode".to_string()
                } else {
                    label.join(" ")
                };
                match self.recorder_call(|reply| RecorderMsg::Start { label, reply }).await {
                    Ok(id) => json!({ "ok": true, "episode_id": id }),
                    Err(e) => json!({ "ok": false, "error": e }),
                }
            }
            ["record", "stop"] => match self.recorder_call(|reply| RecorderMsg::Stop { reply }).await {
                Ok(m) => json!({ "ok": true, "manifest": manifest_summary(&m) }),
                Err(e) => json!({ "ok": false, "error": e }),
            },
            _ => json!({ "ok": false, "error": format!("unknown command: {}", line.trim()) }),
        }
    }

    async fn recorder_call<T>(
        &self,
        msg: impl FnOnce(oneshot::Sender<Result<T, String>>) -> RecorderMsg,
    ) -> Result<T, String> {
        let tx = self.record_tx.lock().clone().ok_or("gateway is shutting down")?;
        let (reply, rx) = oneshot::channel();
        tx.send(msg(reply)).await.map_err(|_| "recorder stopped".to_string())?;
        rx.await.map_err(|_| "recorder stopped".to_string())?
    }
}

fn manifest_summary(m: &EpisodeManifest) -> Value {
    json!({
        "episode_id": m.episode_id,
        "label": m.label,
        "start_ms": m.start_ms,
        "end_ms": m.end_ms,
        "frame_count": m.frame_count,
        "accepted_count": m.accepted_count,
        "sources": m.sources,
        "status": m.status,
        "chain_id": m.chain_id,
    })
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

async fn run_stream(
    core: Arc<Core>,
    key: StreamKey,
    queue: DropOldestQueue<Ingested>,
    record_tx: Option<mpsc::Sender<RecorderMsg>>,
) {
    let fresh = || StreamPipeline::new(key.clone(), core.config.pipeline.clone(), core.chain.clone());
    let mut epoch = *core.epoch.borrow();
    let mut pipeline = fresh();
    while let Some(item) = queue.pop().await {
        let current = *core.epoch.borrow();
        if current.epoch != epoch.epoch {
            pipeline = fresh();
        }
        epoch = current;
        match pipeline.process(&item.raw) {
            Ok(step) => {
                core.metrics.decided(&key, &step.decision);
                if let Some(command) = &step.command {
                    let _ = core.commands.send(CommandEvent {
                        stream: key.clone(),
                        command: command.clone(),
                    });
                }
                if let (true, Some(tx)) = (epoch.recording, &record_tx) {
                    let msg = RecorderMsg::Record(Box::new(RecordItem {
                        epoch: epoch.epoch,
                        key: key.clone(),
                        arrival: item.arrival,
                        seq: item.seq,
                        raw: (*item.raw).clone(),
                        step,
                    }));
                    // Waits when the recorder is behind; ingestion is
                    // decoupled by the drop-oldest queue in front of us.
                    let _ = tx.send(msg).await;
                }
            }
            Err(skip) => {
                core.metrics.skipped(&key, skip.reason());
                debug!(stream = %key, reason = skip.reason(), "frame skipped: {skip}");
            }
        }
    }
    debug!(stream = %key, "pipeline drained");
}

struct Recording {
    writer: EpisodeWriter,
    start: Instant,
    next_t: u64,
}

async fn run_recorder(core: Arc<Core>, mut rx: mpsc::Receiver<RecorderMsg>, epoch_tx: watch::Sender<Epoch>) {
    let mut active: Option<Recording> = None;
    let mut tick = tokio::time::interval(core.config.flush_interval().max(Duration::from_millis(1)));
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        let msg = tokio::select! {
            msg = rx.recv() => msg,
            _ = tick.tick() => {
                if let Some(rec) = active.as_mut()
                    && let Err(e) = rec.writer.flush_due() {
                        warn!(episode = rec.writer.id(), "episode flush failed: {e}");
                    }
                continue;
            }
        };
        let Some(msg) = msg else { break };
        match msg {
            RecorderMsg::Record(item) => {
                let current = *epoch_tx.borrow();
                let Some(rec) = active.as_mut() else { continue };
                if item.epoch != current.epoch || !rec.writer.is_open() {
                    continue;
                }
                let arrival_us = item.arrival.saturating_duration_since(rec.start).as_micros() as u64;
                let record = EpisodeRecord::from_step(rec.next_t, arrival_us, &item.key, item.seq, item.raw, item.step);
                match rec.writer.append(&record) {
                    Ok(()) => rec.next_t += 1,
                    Err(e) => warn!(episode = rec.writer.id(), "episode append failed: {e}"),
                }
            }
            RecorderMsg::Start { label, reply } => {
                if let Some(rec) = &active {
                    let _ = reply.send(Err(format!("already recording {}", rec.writer.id())));
                    continue;
                }
                let created = EpisodeWriter::create(
                    &core.config.episodes.dir,
                    &label,
                    unix_ms(),
                    core.config.pipeline.clone(),
                    core.chain.clone(),
                    core.config.flush_interval(),
                );
                match created {
                    Ok(writer) => {
                        let id = writer.id().to_string();
                        info!(episode = %id, "recording started");
                        let next = Epoch {
                            epoch: epoch_tx.borrow().epoch + 1,
                            recording: true,
                        };
                        epoch_tx.send_replace(next);
                        core.metrics
                            .set_recording(RecordingState::Recording { episode_id: id.clone() });
                        active = Some(Recording {
                            writer,
                            start: Instant::now(),
                            next_t: 0,
                        });
                        let _ = reply.send(Ok(id));
                    }
                    Err(e) => {
                        let _ = reply.send(Err(format!("cannot start episode: {e}")));
                    }
                }
            }
            RecorderMsg::Stop { reply } => {
                let Some(rec) = active.take() else {
                    let _ = reply.send(Err("not recording".to_string()));
                    continue;
                };
                let result = finish(&core, &epoch_tx, rec);
                let _ = reply.send(result);
            }
        }
    }
    if let Some(rec) = active.take()
        && let Err(e) = finish(&core, &epoch_tx, rec) {
            warn!("finalizing episode on shutdown: {e}");
        }
}

fn finish(core: &Core, epoch_tx: &watch::Sender<Epoch>, rec: Recording) -> Result<EpisodeManifest, String> {
    epoch_tx.send_modify(|e| e.recording = false);
    core.metrics.set_recording(RecordingState::Idle);
    let id = rec.writer.id().to_string();
    let manifest = rec.writer.finish(unix_ms()).map_err(|e| e.to_string())?;
    info!(
        episode = %id,
        frames = manifest.frame_count,
        accepted = manifest.accepted_count,
        "recording finalized"
    );
    Ok(manifest)
}

/// Keeps the latest hand and handle per side and rewrites the snapshot
/// files at most once per interval.
async fn run_snapshots(core: Arc<Core>, queue: DropOldestQueue<SnapshotItem>) {
    let dir = core.config.snapshot.dir.clone();
    for name in [HAND_SNAPSHOT, HANDLE_SNAPSHOT] {
        if let Ok(n @ 1..) = remove_stale_temps(&dir.join(name)) {
            info!(removed = n, "removed stale snapshot temp files");
        }
    }
    let mut hands: BTreeMap<Handedness, (u64, Hand)> = BTreeMap::new();
    let mut handles: BTreeMap<Handedness, (u64, Handle)> = BTreeMap::new();
    let (mut hands_dirty, mut handles_dirty) = (false, false);
    let mut tick = tokio::time::interval(core.config.snapshot_interval());
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut open = true;
    while open {
        tokio::select! {
            item = queue.pop() => match item {
                Some(SnapshotItem::Hand(ts, h)) => {
                    hands.insert(h.handedness.clone(), (ts, h));
                    hands_dirty = true;
                    continue;
                }
                Some(SnapshotItem::Handle(ts, h)) => {
                    handles.insert(h.handedness.clone(), (ts, h));
                    handles_dirty = true;
                    continue;
                }
                None => open = false,
            },
            _ = tick.tick() => {}
        }
        if std::mem::take(&mut hands_dirty) {
            let frame = HandFrame {
                timestamp: hands.values().map(|(t, _)| *t).max().unwrap_or(0),
                hands: hands.values().map(|(_, h)| h.clone()).collect(),
            };
            write_snapshot(
                &dir.join(HAND_SNAPSHOT),
                &teleop_core::codec::serialize_hand_frame_json(&frame),
            );
        }
        if std::mem::take(&mut handles_dirty) {
            let frame = HandleFrame {
                timestamp: handles.values().map(|(t, _)| *t).max().unwrap_or(0),
                handles: handles.values().map(|(_, h)| h.clone()).collect(),
            };
            write_snapshot(
                &dir.join(HANDLE_SNAPSHOT),
                &teleop_core::codec::serialize_handle_frame_json(&frame),
            );
        }
    }
}

fn write_snapshot(path: &std::path::Path, text: &str) {
    if let Err(e) = snapshot_write(path, text) {
        warn!("snapshot write failed: {e}");
    }
}

/// Addresses the servers actually bound, useful when the config asks for
/// port 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundAddrs {
    pub handle: SocketAddr,
    pub udp: SocketAddr,
    pub control: SocketAddr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShutdownReport {
    /// Every task finished inside the deadline.
    pub clean: bool,
    pub elapsed_ms: u64,
    pub status: GatewayStatus,
}

/// A running gateway.
pub struct Gateway {
    core: Arc<Core>,
    addrs: BoundAddrs,
    shutdown: watch::Sender<bool>,
    servers: Vec<JoinHandle<()>>,
    recorder: JoinHandle<()>,
    snapshot: JoinHandle<()>,
}

impl Gateway {
    /// Binds every socket and starts all tasks once the config validates.
    pub async fn start(config: GatewayConfig) -> anyhow::Result<Self> {
        let chain = config.validate()?;
        let tls = match config.tls.mode {
            TlsMode::Off => None,
            TlsMode::On => Some(crate::tls::acceptor(
                config.tls.cert.as_deref().context("tls.cert")?,
                config.tls.key.as_deref().context("tls.key")?,
            )?),
        };
        let n = &config.network;
        let udp = UdpSocket::bind(n.udp_bind)
            .await
            .with_context(|| format!("binding hand UDP socket {}", n.udp_bind))?;
        let handle = TcpListener::bind(n.handle_bind)
            .await
            .with_context(|| format!("binding handle socket {}", n.handle_bind))?;
        let control = TcpListener::bind(n.control_bind)
            .await
            .with_context(|| format!("binding control endpoint {}", n.control_bind))?;
        let addrs = BoundAddrs {
            handle: handle.local_addr()?,
            udp: udp.local_addr()?,
            control: control.local_addr()?,
        };

        let (record_tx, record_rx) = mpsc::channel(config.queues.record_capacity);
        let (epoch_tx, epoch_rx) = watch::channel(Epoch::default());
        let (shutdown, shutdown_rx) = watch::channel(false);
        let snapshots = DropOldestQueue::new(config.queues.snapshot_capacity);
        let core = Arc::new(Core {
            chain,
            metrics: Metrics::new(),
            queues: Mutex::new(BTreeMap::new()),
            pipelines: Mutex::new(Vec::new()),
            record_tx: Mutex::new(Some(record_tx)),
            epoch: epoch_rx,
            snapshots: snapshots.clone(),
            commands: broadcast::channel(1024).0,
            closing: Mutex::new(false),
            config,
        });
        let recorder = tokio::spawn(run_recorder(core.clone(), record_rx, epoch_tx));
        let snapshot = tokio::spawn(run_snapshots(core.clone(), snapshots));
        let servers = vec![
            tokio::spawn(crate::udp::serve_hand_udp(udp, core.clone(), shutdown_rx.clone())),
            tokio::spawn(crate::handle_socket::serve_handle_socket(
                handle,
                tls,
                core.clone(),
                shutdown_rx.clone(),
            )),
            tokio::spawn(crate::control::serve_control(control, core.clone(), shutdown_rx)),
        ];
        info!(
            handle = %addrs.handle,
            udp = %addrs.udp,
            control = %addrs.control,
            "gateway started"
        );
        Ok(Self {
            core,
            addrs,
            shutdown,
            servers,
            recorder,
            snapshot,
        })
    }

    pub fn addrs(&self) -> BoundAddrs {
        self.addrs
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.core.config
    }

    pub fn status(&self) -> GatewayStatus {
        self.core.status()
    }

    pub fn subscribe_commands(&self) -> broadcast::Receiver<CommandEvent> {
        self.core.commands.subscribe()
    }

    /// Same as sending `line` to the control endpoint.
    pub async fn control(&self, line: &str) -> Value {
        self.core.control(line).await
    }

    /// Stops ingestion, drains every queue, finalizes any open episode and
    /// writes the last snapshots, all within [`SHUTDOWN_DEADLINE`].
    pub async fn shutdown(self) -> ShutdownReport {
        let started = Instant::now();
        let deadline = tokio::time::Instant::now() + SHUTDOWN_DEADLINE;
        info!("shutting down");
        let _ = self.shutdown.send(true);
        let mut clean = true;
        for task in self.servers {
            clean &= join_by(deadline, task).await;
        }
        *self.core.closing.lock() = true;
        for q in self.core.queues.lock().values() {
            q.close();
        }
        let pipelines = std::mem::take(&mut *self.core.pipelines.lock());
        for task in pipelines {
            clean &= join_by(deadline, task).await;
        }
        self.core.record_tx.lock().take();
        clean &= join_by(deadline, self.recorder).await;
        self.core.snapshots.close();
        clean &= join_by(deadline, self.snapshot).await;
        let status = self.core.status();
        if !clean {
            warn!("shutdown deadline passed; remaining tasks aborted");
        }
        ShutdownReport {
            clean,
            elapsed_ms: started.elapsed().as_millis() as u64,
            status,
        }
    }
}

async fn join_by(deadline: tokio::time::Instant, task: JoinHandle<()>) -> bool {
    let abort = task.abort_handle();
    match tokio::time::timeout_at(deadline, task).await {
        Ok(_) => true,
        Err(_) => {
            abort.abort();
            false
        }
    }
}
