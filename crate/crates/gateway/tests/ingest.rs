mod common;

use std::time::Duration;

use common::*;
use futures_util::{SinkExt, StreamExt};
use teleop_core::codec::{encode_hand_payload, serialize_handle_frame_json};
use teleop_core::model::Handedness;
use teleop_core::sim::{NoiseSpec, TrajectoryKind, TrajectorySpec, generate_frames, hand_frame, handle_frame};
use teleop_gateway::emit::{Backoff, HandleTarget, emit_gesture_stream, emit_handle_stream};
use tokio::net::{TcpListener, UdpSocket};
use tokio_tungstenite::tungstenite::Message;

const WAIT: Duration = Duration::from_secs(10);

fn moving(n_seconds: f64) -> Vec<teleop_core::sim::SimFrame> {
    let spec = TrajectorySpec {
        amplitude: 0.15,
        period: 1.0,
        ..TrajectorySpec::default()
    };
    generate_frames(&spec, &NoiseSpec::silent(3), 60.0, n_seconds).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn hundred_handle_frames_arrive_in_order() {
    let (gw, _dir) = start().await;
    let mut commands = gw.subscribe_commands();
    let frames = &moving(10.0)[..100];
    let report = emit_handle_stream(
        frames,
        &[Handedness::Right],
        HandleTarget::plain(gw.addrs().handle),
        500.0,
        Backoff::default(),
    )
    .await
    .unwrap();
    assert_eq!(report.sent, 100);
    let s = wait_for(&gw, WAIT, |s| {
        s.streams.get("handle/right").is_some_and(|st| st.processed == 100)
    })
    .await;
    assert_eq!(s.handle.delivered, 100);
    assert!(s.rejections.is_empty(), "{:?}", s.rejections);

    // Commands leave in source order, never going back in time.
    let mut last = 0;
    let mut n = 0;
    while let Ok(ev) = commands.try_recv() {
        assert!(ev.command.source_timestamp > last);
        last = ev.command.source_timestamp;
        n += 1;
    }
    assert_eq!(n as u64, stream(&s, "handle/right").commands);
    assert!(n > 50, "a brisk trajectory should mostly pass the filter, got {n}");
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn garbage_message_is_counted_and_connection_survives() {
    let (gw, _dir) = start().await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/", gw.addrs().handle))
        .await
        .unwrap();
    ws.send(Message::text("{not json")).await.unwrap();
    ws.send(Message::binary(vec![1u8, 2, 3])).await.unwrap();
    let valid = handle_frame(&moving(1.0)[0], 1000, Handedness::Left);
    ws.send(Message::text(serialize_handle_frame_json(&valid)))
        .await
        .unwrap();
    let s = wait_for(&gw, WAIT, |s| s.handle.delivered == 1).await;
    assert_eq!(s.handle.messages, 3);
    assert_eq!(s.rejections.values().sum::<u64>(), 2, "{:?}", s.rejections);
    assert_eq!(s.rejections.get("handle: binary message"), Some(&1));
    wait_for(&gw, WAIT, |s| {
        s.streams.get("handle/left").is_some_and(|st| st.processed == 1)
    })
    .await;
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn udp_sequence_handling() {
    let (gw, _dir) = start().await;
    let sock = UdpSocket::bind("127.0.0.1:0").await.unwrap();
    sock.connect(gw.addrs().udp).await.unwrap();
    let frames = moving(1.0);
    let send = |seq: u32| {
        let hf = hand_frame(&frames[seq as usize], 0, Handedness::Right);
        encode_hand_payload(&hf.hands[0], seq, 1_000_000 + u64::from(seq) * 16_667).unwrap()
    };
    for seq in [1, 3, 2, 4, 7] {
        sock.send(&send(seq)).await.unwrap();
        // Loopback datagrams keep order; the pause keeps the test honest
        // about which ordering the gateway saw.
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
    sock.send(&[0u8; 10]).await.unwrap();
    let s = wait_for(&gw, WAIT, |s| s.udp.datagrams == 6).await;
    assert_eq!(s.udp.delivered, 4);
    assert_eq!(s.udp.stale, 1);
    assert_eq!(s.udp.gaps, 1 + 2);
    assert_eq!(s.rejections.values().sum::<u64>(), 1, "{:?}", s.rejections);
    wait_for(&gw, WAIT, |s| {
        s.streams.get("gesture/right").is_some_and(|st| st.processed == 4)
    })
    .await;
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn gesture_stream_with_drops_shows_gaps() {
    let (gw, _dir) = start().await;
    let noise = NoiseSpec {
        drop_probability: 0.2,
        ..NoiseSpec::silent(11)
    };
    let frames = generate_frames(&TrajectorySpec::default(), &noise, 60.0, 2.0).unwrap();
    let dropped = frames.iter().filter(|f| f.dropped).count();
    let report = emit_gesture_stream(&frames, &[Handedness::Left, Handedness::Right], gw.addrs().udp, 600.0)
        .await
        .unwrap();
    assert_eq!(report.dropped, dropped);
    assert_eq!(report.sent + report.dropped, frames.len());
    let s = wait_for(&gw, WAIT, |s| s.udp.delivered == 2 * report.sent as u64).await;
    // Leading drops are invisible to the receiver; every later one is a gap.
    let leading = frames.iter().take_while(|f| f.dropped).count();
    let trailing = frames.iter().rev().take_while(|f| f.dropped).count();
    assert_eq!(s.udp.gaps as usize, 2 * (dropped - leading - trailing));
    gw.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn backpressure_drops_oldest_and_conserves_frames() {
    let (gw, _dir) = start_with(|c| c.queues.ingest_capacity = 4).await;
    let frames = moving(20.0);
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/", gw.addrs().handle))
        .await
        .unwrap();
    // Far faster than the nominal 60 Hz: no pacing at all.
    for f in &frames {
        let hf = handle_frame(f, 1000, Handedness::Right);
        ws.feed(Message::text(serialize_handle_frame_json(&hf))).await.unwrap();
    }
    ws.flush().await.unwrap();
    let n = frames.len() as u64;
    let s = wait_for(&gw, WAIT, |s| {
        s.streams.get("handle/right").is_some_and(|st| {
            st.received == n && st.processed + st.queue_dropped + st.skipped.values().sum::<u64>() == n
        })
    })
    .await;
    let st = stream(&s, "handle/right");
    println!(
        "received {} processed {} dropped {}",
        st.received, st.processed, st.queue_dropped
    );
    assert!(st.skipped.is_empty(), "{:?}", st.skipped);
    gw.shutdown().await;
}

/// A server that drops the first connection after `cut` messages and then
/// keeps the next one.
async fn flaky_server(cut: usize) -> (std::net::SocketAddr, tokio::task::JoinHandle<usize>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let task = tokio::spawn(async move {
        let mut received = 0;
        let (tcp, _) = listener.accept().await.unwrap();
        let mut ws = tokio_tungstenite::accept_async(tcp).await.unwrap();
        while received < cut {
            if let Some(Ok(Message::Text(_))) = ws.next().await {
                received += 1;
            }
        }
        drop(ws);
        let (tcp, _) = listener.accept().await.unwrap();
        let mut ws = tokio_tungstenite::accept_async(tcp).await.unwrap();
        while let Some(Ok(msg)) = ws.next().await {
            if msg.is_text() {
                received += 1;
            }
        }
        received
    });
    (addr, task)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn handle_emitter_reconnects() {
    let (addr, server) = flaky_server(20).await;
    let frames = &moving(10.0)[..200];
    let report = emit_handle_stream(
        frames,
        &[Handedness::Right],
        HandleTarget::plain(addr),
        200.0,
        Backoff::default(),
    )
    .await
    .unwrap();
    let received = server.await.unwrap();
    assert!(report.failure.is_none());
    assert_eq!(report.reconnects, 1);
    assert_eq!(report.sent + report.lost, 200);
    // A write into a socket the peer already closed can still succeed
    // locally, so the server may see fewer than `sent`.
    assert!(
        received <= report.sent && received >= 150,
        "received {received}, report {report:?}"
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn handle_emitter_gives_up_after_bounded_attempts() {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let frames = &moving(10.0)[..100];
    let backoff = Backoff {
        initial: Duration::from_millis(5),
        max: Duration::from_millis(20),
        max_attempts: 3,
    };
    let report = emit_handle_stream(frames, &[Handedness::Right], HandleTarget::plain(addr), 1000.0, backoff)
        .await
        .unwrap();
    assert!(report.failure.as_deref().unwrap().contains("3 attempts"));
    assert_eq!(report.sent, 0);
    assert_eq!(report.lost, 100);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn stationary_gestures_produce_no_commands() {
    let (gw, _dir) = start().await;
    let spec = TrajectorySpec {
        kind: TrajectoryKind::Stationary,
        ..TrajectorySpec::default()
    };
    let frames = generate_frames(&spec, &NoiseSpec::silent(1), 60.0, 10.0).unwrap();
    emit_gesture_stream(&frames, &[Handedness::Right], gw.addrs().udp, 600.0)
        .await
        .unwrap();
    let s = wait_for(&gw, WAIT, |s| {
        s.streams.get("gesture/right").is_some_and(|st| st.processed == 600)
    })
    .await;
    assert_eq!(stream(&s, "gesture/right").commands, 0);
    assert_eq!(s.acceptance_ratio, 0.0);
    assert_eq!(s.acceptance_window, 599);
    gw.shutdown().await;
}
