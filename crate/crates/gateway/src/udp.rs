//! Hand channel: one binary payload per datagram.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use teleop_core::codec::decode_hand_payload;
use teleop_core::model::{HandFrame, Handedness};
use teleop_core::pipeline::RawFrame;
use tokio::net::UdpSocket;
use tokio::sync::watch;
use tracing::{debug, warn};

use crate::service::Core;

/// Largest datagram read; anything longer is still rejected on length.
const RECV_BUF: usize = 2048;

/// Per-sender sequence tracking. Frames at or below the last delivered seq
/// are stale; jumps ahead are counted as gaps.
#[derive(Debug, Default)]
pub struct SeqTracker {
    last: HashMap<(SocketAddr, Handedness), u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqVerdict {
    Deliver { gap: u32 },
    Stale,
}

impl SeqTracker {
    pub fn check(&mut self, sender: SocketAddr, side: &Handedness, seq: u32) -> SeqVerdict {
        match self.last.get_mut(&(sender, side.clone())) {
            Some(last) if seq <= *last => SeqVerdict::Stale,
            Some(last) => {
                let gap = seq - *last - 1;
                *last = seq;
                SeqVerdict::Deliver { gap }
            }
            None => {
                self.last.insert((sender, side.clone()), seq);
                SeqVerdict::Deliver { gap: 0 }
            }
        }
    }
}

pub(crate) async fn serve_hand_udp(socket: UdpSocket, core: Arc<Core>, mut shutdown: watch::Receiver<bool>) {
    let mut buf = vec![0u8; RECV_BUF];
    let mut seqs = SeqTracker::default();
    loop {
        let (len, sender) = tokio::select! {
            _ = shutdown.changed() => break,
            r = socket.recv_from(&mut buf) => match r {
                Ok(r) => r,
                Err(e) => {
                    // ICMP errors and the like; the socket stays usable.
                    warn!("hand UDP receive error: {e}");
                    continue;
                }
            },
        };
        let arrival = Instant::now();
        core.metrics.udp(|u| u.datagrams += 1);
        let payload = match decode_hand_payload(&buf[..len]) {
            Ok(p) => p,
            Err(rejection) => {
                core.metrics.reject("udp", rejection.reason());
                debug!(%sender, "datagram rejected: {rejection}");
                continue;
            }
        };
        if !payload.tracking_valid {
            core.metrics.reject("udp", "tracking lost");
            continue;
        }
        match seqs.check(sender, &payload.hand.handedness, payload.seq) {
            SeqVerdict::Stale => {
                core.metrics.udp(|u| u.stale += 1);
                debug!(%sender, seq = payload.seq, "stale datagram dropped");
                continue;
            }
            SeqVerdict::Deliver { gap } => core.metrics.udp(|u| {
                u.gaps += u64::from(gap);
                u.delivered += 1;
            }),
        }
        let frame = HandFrame {
            timestamp: payload.timestamp_us / 1000,
            hands: vec![payload.hand],
        };
        core.deliver(RawFrame::Gesture(frame), Some(payload.seq), arrival);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(seqs: &[u32]) -> (Vec<u32>, u32) {
        let mut t = SeqTracker::default();
        let sender: SocketAddr = "127.0.0.1:1".parse().unwrap();
        let mut delivered = Vec::new();
        let mut gaps = 0;
        for &s in seqs {
            if let SeqVerdict::Deliver { gap } = t.check(sender, &Handedness::Right, s) {
                delivered.push(s);
                gaps += gap;
            }
        }
        (delivered, gaps)
    }

    #[test]
    fn orderings() {
        assert_eq!(run(&[1, 2, 3]), (vec![1, 2, 3], 0));
        assert_eq!(run(&[1, 3, 2]), (vec![1, 3], 1));
        assert_eq!(run(&[1, 2, 5]), (vec![1, 2, 5], 2));
        assert_eq!(run(&[4, 4]), (vec![4], 0));
    }

    #[test]
    fn senders_and_sides_are_independent() {
        let mut t = SeqTracker::default();
        let a: SocketAddr = "127.0.0.1:1".parse().unwrap();
        let b: SocketAddr = "127.0.0.1:2".parse().unwrap();
        assert_eq!(t.check(a, &Handedness::Left, 5), SeqVerdict::Deliver { gap: 0 });
        assert_eq!(t.check(a, &Handedness::Right, 1), SeqVerdict::Deliver { gap: 0 });
        assert_eq!(t.check(b, &Handedness::Left, 1), SeqVerdict::Deliver { gap: 0 });
        assert_eq!(t.check(a, &Handedness::Left, 3), SeqVerdict::Stale);
    }
}
