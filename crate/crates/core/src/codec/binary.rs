//! Fixed-layout binary record for one hand, one per UDP datagram.
//!
//! ```text
//! offset size  field
//!      0    4  magic "MLHP"
//!      4    1  version (1)
//!      5    1  handedness (0 = left, 1 = right)
//!      6    1  flags (bit 0 = tracking valid)
//!      7    1  reserved (0)
//!      8    4  seq            u32
//!     12    8  timestamp_us   u64
//!     20   28  hand pose      7 x f32 (px py pz qx qy qz qw)
//!     48  728  joints         26 x 7 x f32, canonical order
//! ```
//!
//! Everything is little-endian; the record is exactly 776 bytes.

use std::fmt;

use crate::model::{Hand, Handedness, JOINT_COUNT, JointName, Pose};

pub const MAGIC: [u8; 4] = *b"MLHP";
pub const VERSION: u8 = 1;
pub const PAYLOAD_LEN: usize = 20 + 7 * 4 + JOINT_COUNT * 7 * 4;

pub const FLAG_TRACKING_VALID: u8 = 0x01;

const HEADER_LEN: usize = 20;
const POSE_LEN: usize = 28;

/// A decoded datagram.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPayload {
    pub hand: Hand,
    pub seq: u32,
    pub timestamp_us: u64,
    pub tracking_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, thiserror::Error)]
pub enum EncodeError {
    #[error("hand has {0} joints, expected {JOINT_COUNT}")]
    JointCount(usize),
    #[error("hand is missing joint {0}")]
    MissingJoint(JointName),
    #[error("handedness must be left or right")]
    Handedness,
}

/// Why a datagram was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rejection {
    BadLength(usize),
    BadMagic,
    UnsupportedVersion(u8),
    BadHandedness(u8),
    BadHeader,
}

impl Rejection {
    /// Stable label used as a counter key.
    pub fn reason(&self) -> &'static str {
        match self {
            Rejection::BadLength(_) => "bad length",
            Rejection::BadMagic => "bad magic",
            Rejection::UnsupportedVersion(_) => "unsupported version",
            Rejection::BadHandedness(_) => "bad handedness",
            Rejection::BadHeader => "bad header",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::BadLength(n) => write!(f, "bad length: {n} bytes, expected {PAYLOAD_LEN}"),
            Rejection::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            Rejection::BadHandedness(h) => write!(f, "bad handedness byte {h}"),
            other => f.write_str(other.reason()),
        }
    }
}

impl std::error::Error for Rejection {}

fn put_pose(buf: &mut Vec<u8>, pose: &Pose) {
    for c in pose.position.iter().chain(pose.orientation.iter()) {
        buf.extend_from_slice(&(*c as f32).to_le_bytes());
    }
}

fn get_pose(bytes: &[u8]) -> Pose {
    let mut v = [0.0f64; 7];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        v[i] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
    }
    Pose {
        position: [v[0], v[1], v[2]],
        orientation: [v[3], v[4], v[5], v[6]],
    }
}

/// Serializes one hand. Joints are written in canonical order regardless of
/// the order they appear in `hand.joints`.
pub fn encode_hand_payload(hand: &Hand, seq: u32, timestamp_us: u64) -> Result<Vec<u8>, EncodeError> {
    if hand.joints.len() != JOINT_COUNT {
        return Err(EncodeError::JointCount(hand.joints.len()));
    }
    let side = match hand.handedness {
        Handedness::Left => 0u8,
        Handedness::Right => 1u8,
        Handedness::Unknown(_) => return Err(EncodeError::Handedness),
    };
    let mut buf = Vec::with_capacity(PAYLOAD_LEN);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&[VERSION, side, FLAG_TRACKING_VALID, 0]);
    buf.extend_from_slice(&seq.to_le_bytes());
    buf.extend_from_slice(&timestamp_us.to_le_bytes());
    put_pose(&mut buf, &hand.pose);
    for name in JointName::ALL {
        let joint = hand.joint(name).ok_or(EncodeError::MissingJoint(name))?;
        put_pose(&mut buf, &joint.pose);
    }
    debug_assert_eq!(buf.len(), PAYLOAD_LEN);
    Ok(buf)
}

/// Parses one datagram. Never panics; anything malformed is a [`Rejection`].
/// Quaternions are not checked here, that is left to validation.
pub fn decode_hand_payload(datagram: &[u8]) -> Result<HandPayload, Rejection> {
    if datagram.len() != PAYLOAD_LEN {
        return Err(Rejection::BadLength(datagram.len()));
    }
    if datagram[0..4] != MAGIC {
        return Err(Rejection::BadMagic);
    }
    if datagram[4] != VERSION {
        return Err(Rejection::UnsupportedVersion(datagram[4]));
    }
    let handedness = match datagram[5] {
        0 => Handedness::Left,
        1 => Handedness::Right,
        other => return Err(Rejection::BadHandedness(other)),
    };
    let flags = datagram[6];
    if flags & !FLAG_TRACKING_VALID != 0 || datagram[7] != 0 {
        return Err(Rejection::BadHeader);
    }
    let seq = u32::from_le_bytes(datagram[8..12].try_into().unwrap());
    let timestamp_us = u64::from_le_bytes(datagram[12..20].try_into().unwrap());
    let pose = get_pose(&datagram[HEADER_LEN..HEADER_LEN + POSE_LEN]);
    let joints_start = HEADER_LEN + POSE_LEN;
    let poses: [Pose; JOINT_COUNT] = std::array::from_fn(|i| {
        let at = joints_start + i * POSE_LEN;
        get_pose(&datagram[at..at + POSE_LEN])
    });
    let mut hand = Hand::from_joint_poses(handedness.to_string(), handedness, poses);
    hand.pose = pose;
    Ok(HandPayload {
        hand,
        seq,
        timestamp_us,
        tracking_valid: flags & FLAG_TRACKING_VALID != 0,
    })
}
