mod common;

use std::time::Duration;

use common::*;
use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use teleop_core::codec::{parse_hand_frame_json, parse_handle_frame_json};
use teleop_core::episode::{EpisodeStatus, read_manifest, read_records};
use teleop_core::filter::DecisionKind;
use teleop_core::model::Handedness;
use teleop_core::sim::{NoiseSpec, TrajectorySpec, generate_frames};
use teleop_gateway::emit::{Backoff, HandleTarget, emit_gesture_stream, emit_handle_stream};
use teleop_gateway::service::{HAND_SNAPSHOT, HANDLE_SNAPSHOT};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

const WAIT: Duration = Duration::from_secs(10);

fn frames(n: usize) -> Vec<teleop_core::sim::SimFrame> {
    generate_frames(&TrajectorySpec::default(), &NoiseSpec::silent(5), 60.0, n as f64 / 60.0).unwrap()
}

fn episode_dir(gw: &teleop_gateway::Gateway, id: &Value) -> std::path::PathBuf {
    gw.config().episodes.dir.join(id.as_str().unwrap())
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn status_and_unknown_commands() {
    let (gw, _dir) = start().await;
    let mut c = ControlClient::connect(&gw).await;
    let r = c.send("status").await;
    assert_eq!(r["ok"], true);
    assert_eq!(r["status"]["recording"]["state"], "idle");
    let r = c.send("config get").await;
    assert_eq!(r["config"]["chain"], "arm6");
    let r = c.send("launch rockets").await;
    assert_eq!(r["ok"], false);
    assert_eq!(r["error"], "unknown command: launch rockets");
    let r = c.send("record stop").await;
    assert_eq!(r["error"], "not recording");
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn overlong_line_is_refused_and_session_continues() {
    let (gw, _dir) = start().await;
    let mut c = ControlClient::connect(&gw).await;
    let r = c.send(&"x".repeat(10_000)).await;
    assert_eq!(r["error"], "command too long");
    assert_eq!(c.send("status").await["ok"], true);
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn websocket_clients_share_the_port() {
    let (gw, _dir) = start().await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/", gw.addrs().control))
        .await
        .unwrap();
    ws.send(Message::text("status")).await.unwrap();
    let Some(Ok(Message::Text(text))) = ws.next().await else {
        panic!("no reply")
    };
    let v: Value = serde_json::from_str(text.as_str()).unwrap();
    assert_eq!(v["status"]["recording"]["state"], "idle");
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn record_start_stop_writes_every_decided_frame() {
    let (gw, _dir) = start().await;
    let mut c = ControlClient::connect(&gw).await;
    let r = c.send("record start reach test").await;
    assert_eq!(r["ok"], true, "{r}");
    let id = r["episode_id"].clone();
    assert!(id.as_str().unwrap().ends_with("-reach-test"), "{id}");
    let again = c.send("record start other").await;
    assert_eq!(again["error"], format!("already recording {}", id.as_str().unwrap()));
    assert_eq!(c.send("status").await["status"]["recording"]["episode_id"], id);

    let f = frames(120);
    emit_handle_stream(
        &f,
        &[Handedness::Left, Handedness::Right],
        HandleTarget::plain(gw.addrs().handle),
        600.0,
        Backoff::default(),
    )
    .await
    .unwrap();
    wait_for(&gw, WAIT, |s| {
        ["handle/left", "handle/right"]
            .iter()
            .all(|k| s.streams.get(*k).is_some_and(|st| st.processed == 120))
    })
    .await;
    let r = c.send("record stop").await;
    assert_eq!(r["ok"], true, "{r}");
    let m = &r["manifest"];
    assert_eq!(m["frame_count"], 240);
    assert_eq!(m["status"], "finalized");

    let dir = episode_dir(&gw, &id);
    let records = read_records(&dir, true).unwrap();
    assert_eq!(records.records.len(), 240);
    assert!(records.skipped_lines.is_empty());
    assert!(records.records.iter().enumerate().all(|(i, r)| r.t == i as u64));
    // Recording starts every stream afresh.
    for side in [Handedness::Left, Handedness::Right] {
        let first = records.records.iter().find(|r| r.handedness == side).unwrap();
        assert_eq!(first.decision.kind, DecisionKind::Bootstrap);
    }
    let manifest = read_manifest(&dir).unwrap();
    assert_eq!(manifest.accepted_count, m["accepted_count"].as_u64().unwrap());
    assert_eq!(
        manifest.accepted_count as usize,
        records.records.iter().filter(|r| r.emitted.is_some()).count()
    );
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn shutdown_while_recording_finalizes_the_episode() {
    let (gw, _dir) = start().await;
    let id = gw.control("record start interrupted").await["episode_id"].clone();
    let f = frames(60);
    emit_gesture_stream(&f, &[Handedness::Right], gw.addrs().udp, 600.0)
        .await
        .unwrap();
    wait_for(&gw, WAIT, |s| {
        s.streams.get("gesture/right").is_some_and(|st| st.processed == 60)
    })
    .await;
    let dir = episode_dir(&gw, &id);
    let report = gw.shutdown().await;
    assert!(report.clean, "{report:?}");
    assert!(report.elapsed_ms < 2000);
    let manifest = read_manifest(&dir).unwrap();
    assert_eq!(manifest.status, EpisodeStatus::Finalized);
    assert_eq!(manifest.frame_count, 60);
    assert!(manifest.end_ms.is_some());
    assert_eq!(read_records(&dir, true).unwrap().records.len(), 60);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn snapshots_hold_the_latest_frames() {
    let (gw, _dir) = start().await;
    let f = frames(30);
    emit_gesture_stream(&f, &[Handedness::Left, Handedness::Right], gw.addrs().udp, 600.0)
        .await
        .unwrap();
    emit_handle_stream(
        &f,
        &[Handedness::Right],
        HandleTarget::plain(gw.addrs().handle),
        600.0,
        Backoff::default(),
    )
    .await
    .unwrap();
    let snapshots = gw.config().snapshot.dir.clone();
    wait_for(&gw, WAIT, |s| s.handle.delivered == 30 && s.udp.delivered == 60).await;
    let report = gw.shutdown().await;
    assert!(report.clean);

    let hand = parse_hand_frame_json(&std::fs::read_to_string(snapshots.join(HAND_SNAPSHOT)).unwrap()).unwrap();
    assert_eq!(hand.hands.len(), 2);
    let handle = parse_handle_frame_json(&std::fs::read_to_string(snapshots.join(HANDLE_SNAPSHOT)).unwrap()).unwrap();
    assert_eq!(handle.handles.len(), 1);
    assert_eq!(handle.handles[0].pose, f[29].pose);
    let leftovers: Vec<_> = std::fs::read_dir(&snapshots)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != HAND_SNAPSHOT && n != HANDLE_SNAPSHOT)
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn shutdown_closes_idle_client_connections() {
    let (gw, _dir) = start().await;
    let mut control = tokio::net::TcpStream::connect(gw.addrs().control).await.unwrap();
    let (_handle, _) = tokio_tungstenite::connect_async(format!("ws://{}/", gw.addrs().handle))
        .await
        .unwrap();
    wait_for(&gw, WAIT, |s| s.handle.connections == 1).await;
    let report = gw.shutdown().await;
    assert!(report.clean, "{report:?}");
    let mut buf = [0u8; 16];
    let n = tokio::time::timeout(Duration::from_secs(1), control.read(&mut buf))
        .await
        .unwrap()
        .unwrap_or(0);
    assert_eq!(n, 0);
    let _ = control.write_all(b"status\n").await;
}
