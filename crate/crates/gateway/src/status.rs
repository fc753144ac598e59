//! Counters shared by the gateway tasks and the status report built from
//! them.

use std::collections::{BTreeMap, VecDeque};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use teleop_core::filter::{DecisionKind, FilterDecision};
use teleop_core::pipeline::StreamKey;

use crate::queue::QueueStats;

/// Decisions kept for the acceptance ratio.
pub const ACCEPTANCE_WINDOW: usize = 600;
/// Arrivals kept for the receive rate.
const RATE_WINDOW: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RecordingState {
    Idle,
    Recording { episode_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamStatus {
    pub rate_hz: f64,
    pub received: u64,
    pub processed: u64,
    pub commands: u64,
    pub queue_dropped: u64,
    pub skipped: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UdpStatus {
    pub datagrams: u64,
    pub delivered: u64,
    pub stale: u64,
    pub gaps: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HandleStatus {
    pub connections: u64,
    pub messages: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayStatus {
    pub uptime_s: f64,
    pub recording: RecordingState,
    pub streams: BTreeMap<String, StreamStatus>,
    /// Decode and parse rejections by `channel: reason`.
    pub rejections: BTreeMap<String, u64>,
    /// Executable share of the last evaluated decisions, in `[0, 1]`.
    /// Bootstrap frames are not counted.
    pub acceptance_ratio: f64,
    pub acceptance_window: usize,
    pub udp: UdpStatus,
    pub handle: HandleStatus,
}

#[derive(Default)]
struct StreamCounters {
    arrivals: VecDeque<Instant>,
    status: StreamStatus,
}

struct Inner {
    streams: BTreeMap<StreamKey, StreamCounters>,
    rejections: BTreeMap<String, u64>,
    window: VecDeque<bool>,
    udp: UdpStatus,
    handle: HandleStatus,
    recording: RecordingState,
}

pub struct Metrics {
    start: Instant,
    inner: Mutex<Inner>,
}

impl Default for Metrics {
    fn default() -> Self {
        Self::new()
    }
}

impl Metrics {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            inner: Mutex::new(Inner {
                streams: BTreeMap::new(),
                rejections: BTreeMap::new(),
                window: VecDeque::with_capacity(ACCEPTANCE_WINDOW),
                udp: UdpStatus::default(),
                handle: HandleStatus::default(),
                recording: RecordingState::Idle,
            }),
        }
    }

    pub fn reject(&self, channel: &str, reason: &str) {
        *self
            .inner
            .lock()
            .rejections
            .entry(format!("{channel}: {reason}"))
            .or_default() += 1;
    }

    pub fn received(&self, key: &StreamKey, at: Instant) {
        let mut inner = self.inner.lock();
        let s = inner.streams.entry(key.clone()).or_default();
        s.status.received += 1;
        s.arrivals.push_back(at);
        while s.arrivals.front().is_some_and(|t| at.duration_since(*t) > RATE_WINDOW) {
            s.arrivals.pop_front();
        }
    }

    pub fn decided(&self, key: &StreamKey, decision: &FilterDecision) {
        let mut inner = self.inner.lock();
        let s = inner.streams.entry(key.clone()).or_default();
        s.status.processed += 1;
        if decision.executable {
            s.status.commands += 1;
        }
        if decision.kind != DecisionKind::Bootstrap {
            if inner.window.len() == ACCEPTANCE_WINDOW {
                inner.window.pop_front();
            }
            inner.window.push_back(decision.executable);
        }
    }

    pub fn skipped(&self, key: &StreamKey, reason: &str) {
        let mut inner = self.inner.lock();
        let s = inner.streams.entry(key.clone()).or_default();
        *s.status.skipped.entry(reason.to_string()).or_default() += 1;
    }

    pub fn udp(&self, f: impl FnOnce(&mut UdpStatus)) {
        f(&mut self.inner.lock().udp);
    }

    pub fn handle(&self, f: impl FnOnce(&mut HandleStatus)) {
        f(&mut self.inner.lock().handle);
    }

    pub fn set_recording(&self, state: RecordingState) {
        self.inner.lock().recording = state;
    }

    pub fn recording(&self) -> RecordingState {
        self.inner.lock().recording.clone()
    }

    /// Builds a report; `queues` supplies the ingest queue counters per
    /// stream.
    pub fn status(&self, queues: &BTreeMap<StreamKey, QueueStats>) -> GatewayStatus {
        let now = Instant::now();
        let inner = self.inner.lock();
        let streams = inner
            .streams
            .iter()
            .map(|(key, s)| {
                let mut status = s.status.clone();
                status.rate_hz = rate(&s.arrivals, now);
                status.queue_dropped = queues.get(key).map_or(0, |q| q.dropped);
                (key.to_string(), status)
            })
            .collect();
        let accepted = inner.window.iter().filter(|&&e| e).count();
        GatewayStatus {
            uptime_s: now.duration_since(self.start).as_secs_f64(),
            recording: inner.recording.clone(),
            streams,
            rejections: inner.rejections.clone(),
            acceptance_ratio: if inner.window.is_empty() {
                0.0
            } else {
                accepted as f64 / inner.window.len() as f64
            },
            acceptance_window: inner.window.len(),
            udp: inner.udp.clone(),
            handle: inner.handle.clone(),
        }
    }
}

/// Arrivals per second over the recent window; zero once a stream has been
/// quiet for a whole window.
fn rate(arrivals: &VecDeque<Instant>, now: Instant) -> f64 {
    let recent: Vec<&Instant> = arrivals
        .iter()
        .filter(|t| now.duration_since(**t) <= RATE_WINDOW)
        .collect();
    match (recent.first(), recent.last()) {
        (Some(first), Some(last)) if recent.len() >= 2 => {
            let span = last.duration_since(**first).as_secs_f64();
            if span > 0.0 {
                (recent.len() - 1) as f64 / span
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use teleop_core::model::{Handedness, Source};

    fn key() -> StreamKey {
        StreamKey {
            source: Source::Gesture,
            handedness: Handedness::Left,
        }
    }

    fn decision(kind: DecisionKind, executable: bool) -> FilterDecision {
        FilterDecision {
            executable,
            kind,
            d_t: 0.0,
            max_dtheta: 0.0,
            max_dphi: 0.0,
            layers: [executable; 4],
        }
    }

    #[test]
    fn rate_from_evenly_spaced_arrivals() {
        let m = Metrics::new();
        let t0 = Instant::now();
        for i in 0..61 {
            m.received(&key(), t0 + Duration::from_micros(i * 16_667));
        }
        let arrivals = &m.inner.lock().streams[&key()].arrivals;
        let r = rate(arrivals, t0 + Duration::from_secs(1));
        assert!((r - 60.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn acceptance_ratio_ignores_bootstrap() {
        let m = Metrics::new();
        m.decided(&key(), &decision(DecisionKind::Bootstrap, false));
        assert_eq!(m.status(&BTreeMap::new()).acceptance_window, 0);
        m.decided(&key(), &decision(DecisionKind::Evaluated, true));
        m.decided(&key(), &decision(DecisionKind::Evaluated, false));
        let s = m.status(&BTreeMap::new());
        assert_eq!(s.acceptance_ratio, 0.5);
        assert_eq!(s.streams["gesture/left"].commands, 1);
        assert_eq!(s.streams["gesture/left"].processed, 3);
    }

    #[test]
    fn status_json_shape() {
        let m = Metrics::new();
        m.reject("udp", "bad magic");
        let v = serde_json::to_value(m.status(&BTreeMap::new())).unwrap();
        assert_eq!(v["recording"]["state"], "idle");
        assert_eq!(v["rejections"]["udp: bad magic"], 1);
    }
}
