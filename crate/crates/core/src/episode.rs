//! Episode logs: one directory per recording session.
//!
//! ```text
//! <episodes>/<id>/manifest.json   rewritten atomically on open and close
//! <episodes>/<id>/records.jsonl   one EpisodeRecord per line
//! ```
//!
//! Lines are self-contained, so a crash costs at most the final partial
//! line. The manifest carries the full pipeline config and chain, which is
//! enough to regenerate every decision from the raw frames alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::filter::FilterDecision;
use crate::ik::KinematicChain;
use crate::model::{Handedness, Pose, Source};
use crate::pipeline::{Command, PipelineConfig, RawFrame, Skip, StepOutput, StreamKey, StreamPipeline};
use crate::snapshot::{SnapshotError, snapshot_write};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const DEFAULT_FLUSH_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Frame index, strictly increasing within the episode.
    pub t: u64,
    /// Arrival time relative to the episode start, microseconds.
    pub arrival_us: u64,
    pub source: Source,
    pub handedness: Handedness,
    /// Datagram sequence number, gesture channel only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u32>,
    pub raw: RawFrame,
    pub world_pose: Pose,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub ik_converged: bool,
    pub decision: FilterDecision,
    pub emitted: Option<Command>,
}

impl EpisodeRecord {
    pub fn from_step(
        t: u64,
        arrival_us: u64,
        key: &StreamKey,
        seq: Option<u32>,
        raw: RawFrame,
        step: StepOutput,
    ) -> Self {
        Self {
            t,
            arrival_us,
            source: key.source,
            handedness: key.handedness.clone(),
            seq,
            raw,
            world_pose: step.world_pose,
            theta: step.theta,
            phi: step.phi,
            ik_converged: step.ik_converged,
            decision: step.decision,
            emitted: step.command,
        }
    }

    pub fn key(&self) -> StreamKey {
        StreamKey {
            source: self.source,
            handedness: self.handedness.clone(),
        }
    }

    /// The JSON line for this record, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Open,
    Finalized,
    /// Closed early by an IO error; `truncation` says why.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeManifest {
    pub episode_id: String,
    pub label: String,
    /// Wall clock, milliseconds since the Unix epoch.
    pub start_ms: u64,
    #[serde(default)]
    pub end_ms: Option<u64>,
    pub pipeline: PipelineConfig,
    pub chain_id: String,
    pub chain: KinematicChain,
    pub frame_count: u64,
    pub accepted_count: u64,
    pub sources: BTreeSet<Source>,
    pub status: EpisodeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error("episode {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("record t={t} does not follow t={last}")]
    OutOfOrder { t: u64, last: u64 },
    #[error("record t={t}: emitted must be present iff the decision is executable")]
    Inconsistent { t: u64 },
    #[error("episode is closed")]
    Closed,
    #[error("record t={t} no longer processes: {skip}")]
    Diverged { t: u64, skip: Skip },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EpisodeError + '_ {
    move |source| EpisodeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Lowercase alphanumerics and dashes, at most 40 characters.
fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
        if out.len() >= 40 {
            break;
        }
    }
    let trimmed = out.trim_end_matches('-');
    if trimmed.is_empty() {
        "episode".to_string()
    } else {
        trimmed.to_string()
    }
}

pub fn write_manifest(dir: &Path, manifest: &EpisodeManifest) -> Result<(), EpisodeError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest always serializes");
    snapshot_write(&dir.join(MANIFEST_FILE), &text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<EpisodeManifest, EpisodeError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| EpisodeError::Manifest {
        path,
        message: e.to_string(),
    })
}

/// Appends records for one open episode.
pub struct EpisodeWriter {
    dir: PathBuf,
    manifest: EpisodeManifest,
    out: Option<BufWriter<Box<dyn Write + Send>>>,
    flush_interval: Duration,
    last_flush: Instant,
    last_t: Option<u64>,
}

impl EpisodeWriter {
    /// Creates `<root>/<id>` and an open manifest. The id is derived from the
    /// start time and label, with a numeric suffix if the directory exists.
    pub fn create(
        root: &Path,
        label: &str,
        start_ms: u64,
        pipeline: PipelineConfig,
        chain: KinematicChain,
        flush_interval: Duration,
    ) -> Result<Self, EpisodeError> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        let base = format!("{start_ms}-{}", slug(label));
        let mut id = base.clone();
        let mut n = 1;
        let dir = loop {
            let dir = root.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => break dir,
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    n += 1;
                    id = format!("{base}-{n}");
                }
                Err(e) => return Err(io_err(&dir)(e)),
            }
        };
        let records = dir.join(RECORDS_FILE);
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&records)
            .map_err(io_err(&records))?;
        let manifest = EpisodeManifest {
            episode_id: id,
            label: label.to_string(),
            start_ms,
            end_ms: None,
            pipeline,
            chain_id: chain.id().to_string(),
            chain,
            frame_count: 0,
            accepted_count: 0,
            sources: BTreeSet::new(),
            status: EpisodeStatus::Open,
            truncation: None,
        };
        write_manifest(&dir, &manifest)?;
        Ok(Self::with_sink(dir, manifest, Box::new(file), flush_interval))
    }

    fn with_sink(
        dir: PathBuf,
        manifest: EpisodeManifest,
        sink: Box<dyn Write + Send>,
        flush_interval: Duration,
    ) -> Self {
        Self {
            dir,
            manifest,
            out: Some(BufWriter::new(sink)),
            flush_interval,
            last_flush: Instant::now(),
            last_t: None,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &EpisodeManifest {
        &self.manifest
    }

    pub fn id(&self) -> &str {
        &self.manifest.episode_id
    }

    pub fn is_open(&self) -> bool {
        self.out.is_some()
    }

    /// Appends one record. Malformed records are refused without closing the
    /// episode; an IO error closes it as truncated.
    pub fn append(&mut self, record: &EpisodeRecord) -> Result<(), EpisodeError> {
        if self.out.is_none() {
            return Err(EpisodeError::Closed);
        }
        if let Some(last) = self.last_t
            && record.t <= last {
                return Err(EpisodeError::OutOfOrder { t: record.t, last });
            }
        if record.emitted.is_some() != record.decision.executable {
            return Err(EpisodeError::Inconsistent { t: record.t });
        }
        let mut line = record.to_line();
        line.push('\n');
        let out = self.out.as_mut().unwrap();
        let mut result = out.write_all(line.as_bytes());
        if result.is_ok() && self.last_flush.elapsed() >= self.flush_interval {
            result = out.flush();
            self.last_flush = Instant::now();
        }
        if let Err(e) = result {
            let path = self.dir.join(RECORDS_FILE);
            self.truncate(&e);
            return Err(EpisodeError::Io { path, source: e });
        }
        self.last_t = Some(record.t);
        self.manifest.frame_count += 1;
        if record.decision.executable {
            self.manifest.accepted_count += 1;
        }
        self.manifest.sources.insert(record.source);
        Ok(())
    }

    /// Flushes buffered records if the flush interval has passed. Meant to
    /// be called on a timer so a quiet stream still reaches the disk.
    pub fn flush_due(&mut self) -> Result<(), EpisodeError> {
        let Some(out) = self.out.as_mut() else {
            return Err(EpisodeError::Closed);
        };
        if self.last_flush.elapsed() < self.flush_interval {
            return Ok(());
        }
        self.last_flush = Instant::now();
        if let Err(e) = out.flush() {
            let path = self.dir.join(RECORDS_FILE);
            self.truncate(&e);
            return Err(EpisodeError::Io { path, source: e });
        }
        Ok(())
    }

    fn truncate(&mut self, cause: &io::Error) {
        // Whatever is still buffered may or may not reach the disk.
        if let Some(out) = self.out.take() {
            let _ = out.into_parts();
        }
        self.manifest.status = EpisodeStatus::Truncated;
        self.manifest.truncation = Some(cause.to_string());
        let _ = write_manifest(&self.dir, &self.manifest);
    }

    /// Syncs the records to disk and finalizes the manifest.
    pub fn finish(mut self, end_ms: u64) -> Result<EpisodeManifest, EpisodeError> {
        self.manifest.end_ms = Some(end_ms);
        let Some(mut out) = self.out.take() else {
            write_manifest(&self.dir, &self.manifest)?;
            return Ok(self.manifest);
        };
        let path = self.dir.join(RECORDS_FILE);
        if let Err(e) = out.flush() {
            self.truncate(&e);
            return Err(EpisodeError::Io { path, source: e });
        }
        drop(out);
        if let Ok(f) = File::open(&path) {
            let _ = f.sync_all();
        }
        self.manifest.status = EpisodeStatus::Finalized;
        write_manifest(&self.dir, &self.manifest)?;
        Ok(self.manifest)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReadOutcome {
    pub records: Vec<EpisodeRecord>,
    /// 1-based numbers of complete lines that failed to parse.
    pub skipped_lines: Vec<usize>,
    /// The file ended in an unterminated line, which was ignored.
    pub partial_tail: bool,
}

/// Reads `records.jsonl`. A final line without a newline is crash residue
/// and always ignored. Other malformed lines are skipped, or abort the read
/// with their line number when `strict` is set.
pub fn read_records(dir: &Path, strict: bool) -> Result<ReadOutcome, EpisodeError> {
    let path = dir.join(RECORDS_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    read_records_from(BufReader::new(file), strict).map_err(|e| match e {
        EpisodeError::Io { source, .. } => EpisodeError::Io { path, source },
        other => other,
    })
}

pub fn read_records_from(mut reader: impl BufRead, strict: bool) -> Result<ReadOutcome, EpisodeError> {
    let mut outcome = ReadOutcome::default();
    let mut buf = Vec::new();
    let mut line = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err(Path::new("")))?;
        if n == 0 {
            break;
        }
        line += 1;
        if buf.last() != Some(&b'\n') {
            outcome.partial_tail = true;
            break;
        }
        let text = &buf[..buf.len() - 1];
        if text.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match serde_json::from_slice::<EpisodeRecord>(text) {
            Ok(r) => outcome.records.push(r),
            Err(e) if strict => {
                return Err(EpisodeError::Malformed {
                    line,
                    message: e.to_string(),
                });
            }
            Err(_) => outcome.skipped_lines.push(line),
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayTiming {
    AsRecorded,
    MaxSpeed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub records: usize,
    pub skipped_lines: Vec<usize>,
    pub partial_tail: bool,
    /// Mean |actual - recorded| offset from the first record, milliseconds.
    /// Zero for max-speed replay.
    pub mean_timing_error_ms: f64,
    pub elapsed: Duration,
}

/// Streams an episode's records to `sink` in `t` order.
pub fn replay(
    dir: &Path,
    timing: ReplayTiming,
    strict: bool,
    mut sink: impl FnMut(&EpisodeRecord),
) -> Result<ReplayReport, EpisodeError> {
    let mut outcome = read_records(dir, strict)?;
    outcome.records.sort_by_key(|r| r.t);
    let start = Instant::now();
    let first = outcome.records.first().map_or(0, |r| r.arrival_us);
    let mut error_sum = 0.0;
    for r in &outcome.records {
        if timing == ReplayTiming::AsRecorded {
            let due = Duration::from_micros(r.arrival_us.saturating_sub(first));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
            let actual = start.elapsed().as_secs_f64();
            error_sum += (actual - due.as_secs_f64()).abs() * 1e3;
        }
        sink(r);
    }
    let n = outcome.records.len();
    Ok(ReplayReport {
        records: n,
        skipped_lines: outcome.skipped_lines,
        partial_tail: outcome.partial_tail,
        mean_timing_error_ms: if n == 0 { 0.0 } else { error_sum / n as f64 },
        elapsed: start.elapsed(),
    })
}

/// Reruns every record's raw frame through fresh pipelines built from the
/// manifest and returns the records that produces. Frame index, arrival
/// time and sequence number are carried over.
pub fn regenerate(manifest: &EpisodeManifest, records: &[EpisodeRecord]) -> Result<Vec<EpisodeRecord>, EpisodeError> {
    let mut pipelines: BTreeMap<StreamKey, StreamPipeline> = BTreeMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let key = r.key();
        let pipeline = pipelines
            .entry(key.clone())
            .or_insert_with(|| StreamPipeline::new(key.clone(), manifest.pipeline.clone(), manifest.chain.clone()));
        let step = pipeline
            .process(&r.raw)
            .map_err(|skip| EpisodeError::Diverged { t: r.t, skip })?;
        out.push(EpisodeRecord::from_step(
            r.t,
            r.arrival_us,
            &key,
            r.seq,
            r.raw.clone(),
            step,
        ));
    }
    Ok(out)
}

/// Number of records whose decision is executable.
pub fn count_accepted(records: &[EpisodeRecord]) -> u64 {
    records.iter().filter(|r| r.decision.executable).count() as u64
}

/// Reads the raw bytes of the records file; used by truncation tooling.
pub fn records_bytes(dir: &Path) -> Result<Vec<u8>, EpisodeError> {
    let path = dir.join(RECORDS_FILE);
    let mut bytes = Vec::new();
    File::open(&path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(&path))?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HandleFrame;
    use crate::sim::{NoiseSpec, TrajectorySpec, generate_frames, handle_frame};

    fn right_handle() -> StreamKey {
        StreamKey {
            source: Source::Handle,
            handedness: Handedness::Right,
        }
    }

    /// Runs a seeded handle stream through a pipeline, returning records.
    fn run(n: usize, seed: u64) -> Vec<EpisodeRecord> {
        let noise = NoiseSpec {
            jump_probability: 0.05,
            jump_magnitude: 0.05,
            ..NoiseSpec::silent(seed)
        };
        let frames = generate_frames(&TrajectorySpec::default(), &noise, 90.0, n as f64 / 90.0).unwrap();
        let key = right_handle();
        let mut p = StreamPipeline::new(key.clone(), PipelineConfig::default(), KinematicChain::arm6());
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let raw = RawFrame::Handle(handle_frame(f, 1_000, Handedness::Right));
                let step = p.process(&raw).unwrap();
                EpisodeRecord::from_step(i as u64, f.offset_us, &key, None, raw, step)
            })
            .collect()
    }

    fn writer(root: &Path) -> EpisodeWriter {
        EpisodeWriter::create(
            root,
            "Pick cube!",
            1_700_000_000_000,
            PipelineConfig::default(),
            KinematicChain::arm6(),
            DEFAULT_FLUSH_INTERVAL,
        )
        .unwrap()
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Pick cube!"), "pick-cube");
        assert_eq!(slug("  "), "episode");
    }

    #[test]
    fn append_count_and_recount() {
        let root = tempfile::tempdir().unwrap();
        let records = run(300, 3);
        let mut w = writer(root.path());
        assert_eq!(w.id(), "1700000000000-pick-cube");
        for r in &records {
            w.append(r).unwrap();
        }
        let dir = w.dir().to_path_buf();
        let manifest = w.finish(1_700_000_010_000).unwrap();
        assert_eq!(manifest.status, EpisodeStatus::Finalized);
        assert_eq!(manifest.frame_count, 300);

        let back = read_records(&dir, true).unwrap();
        assert_eq!(back.records, records);
        assert_eq!(count_accepted(&back.records), manifest.accepted_count);
        assert!(manifest.accepted_count > 0);
        assert_eq!(read_manifest(&dir).unwrap(), manifest);
    }

    #[test]
    fn second_episode_with_same_label_gets_suffix() {
        let root = tempfile::tempdir().unwrap();
        let a = writer(root.path());
        let b = writer(root.path());
        assert_ne!(a.id(), b.id());
        assert!(b.id().ends_with("-2"));
    }

    #[test]
    fn refuses_out_of_order_and_inconsistent() {
        let root = tempfile::tempdir().unwrap();
        let records = run(3, 1);
        let mut w = writer(root.path());
        w.append(&records[1]).unwrap();
        assert!(matches!(
            w.append(&records[0]),
            Err(EpisodeError::OutOfOrder { t: 0, last: 1 })
        ));
        let mut bad = records[2].clone();
        bad.emitted = None;
        bad.decision.executable = true;
        assert!(matches!(w.append(&bad), Err(EpisodeError::Inconsistent { t: 2 })));
        assert!(w.is_open());
    }

    #[test]
    fn byte_truncation_recovers_complete_prefix() {
        let root = tempfile::tempdir().unwrap();
        let records = run(20, 5);
        let mut w = writer(root.path());
        for r in &records {
            w.append(r).unwrap();
        }
        let dir = w.dir().to_path_buf();
        w.finish(0).unwrap();
        let bytes = records_bytes(&dir).unwrap();
        let ends: Vec<usize> = bytes
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == b'\n')
            .map(|(i, _)| i + 1)
            .collect();
        for cut in (0..=bytes.len()).step_by(97) {
            let complete = ends.iter().filter(|&&e| e <= cut).count();
            let got = read_records_from(&bytes[..cut], true).unwrap();
            assert_eq!(got.records, records[..complete]);
            assert_eq!(got.partial_tail, !ends.contains(&cut) && cut != 0);
        }
    }

    #[test]
    fn strict_mode_names_the_bad_line() {
        let records = run(40, 2);
        let mut text = String::new();
        for (i, r) in records.iter().enumerate() {
            if i == 36 {
                text.push_str("{\"t\": oops}\n");
            } else {
                text.push_str(&r.to_line());
                text.push('\n');
            }
        }
        let err = read_records_from(text.as_bytes(), true).unwrap_err();
        assert!(matches!(err, EpisodeError::Malformed { line: 37, .. }), "{err}");
        assert!(err.to_string().starts_with("line 37:"));
        let lenient = read_records_from(text.as_bytes(), false).unwrap();
        assert_eq!(lenient.skipped_lines, vec![37]);
        assert_eq!(lenient.records.len(), 39);
    }

    #[test]
    fn empty_episode_replays_nothing() {
        let root = tempfile::tempdir().unwrap();
        let w = writer(root.path());
        let dir = w.dir().to_path_buf();
        w.finish(1).unwrap();
        let mut seen = 0;
        let report = replay(&dir, ReplayTiming::AsRecorded, true, |_| seen += 1).unwrap();
        assert_eq!(seen, 0);
        assert_eq!(report.records, 0);
        assert!(report.skipped_lines.is_empty());
    }

    #[test]
    fn regeneration_reproduces_records() {
        let records = run(200, 9);
        let manifest = EpisodeManifest {
            episode_id: "x".into(),
            label: "x".into(),
            start_ms: 0,
            end_ms: None,
            pipeline: PipelineConfig::default(),
            chain_id: "arm6".into(),
            chain: KinematicChain::arm6(),
            frame_count: 200,
            accepted_count: count_accepted(&records),
            sources: BTreeSet::from([Source::Handle]),
            status: EpisodeStatus::Finalized,
            truncation: None,
        };
        // Through JSON and back first, as a replay would see them.
        let text: String = records.iter().map(|r| r.to_line() + "\n").collect();
        let parsed = read_records_from(text.as_bytes(), true).unwrap().records;
        let again = regenerate(&manifest, &parsed).unwrap();
        for (a, b) in again.iter().zip(&records) {
            assert_eq!(a.to_line(), b.to_line());
        }
    }

    #[test]
    fn as_recorded_timing_is_close() {
        let root = tempfile::tempdir().unwrap();
        let mut records = run(30, 4);
        for (i, r) in records.iter_mut().enumerate() {
            r.arrival_us = i as u64 * 5_000;
        }
        let mut w = writer(root.path());
        for r in &records {
            w.append(r).unwrap();
        }
        let dir = w.dir().to_path_buf();
        w.finish(0).unwrap();
        let report = replay(&dir, ReplayTiming::AsRecorded, true, |_| {}).unwrap();
        assert_eq!(report.records, 30);
        assert!(report.mean_timing_error_ms < 5.0, "{report:?}");
        assert!(report.elapsed >= Duration::from_millis(145));
    }

    struct FailAfter(usize);

    impl Write for FailAfter {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            if self.0 < buf.len() {
                return Err(io::Error::new(io::ErrorKind::StorageFull, "disk full"));
            }
            self.0 -= buf.len();
            Ok(buf.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn io_error_marks_truncation() {
        let root = tempfile::tempdir().unwrap();
        let w = writer(root.path());
        let dir = w.dir().to_path_buf();
        let mut w = EpisodeWriter::with_sink(
            dir.clone(),
            w.manifest().clone(),
            Box::new(FailAfter(0)),
            Duration::ZERO,
        );
        let records = run(2, 1);
        assert!(matches!(w.append(&records[0]), Err(EpisodeError::Io { .. })));
        assert!(!w.is_open());
        assert!(matches!(w.append(&records[1]), Err(EpisodeError::Closed)));
        let m = read_manifest(&dir).unwrap();
        assert_eq!(m.status, EpisodeStatus::Truncated);
        assert!(m.truncation.unwrap().contains("disk full"));
    }

    #[test]
    fn handle_frames_are_not_gesture_records() {
        let r = &run(1, 0)[0];
        assert!(matches!(r.raw, RawFrame::Handle(HandleFrame { .. })));
        assert_eq!(r.seq, None);
        assert!(!r.to_line().contains("\"seq\""));
    }
}
