//! Shared spatial and frame types for the gesture and handle channels.
//!
//! Field names follow the wire schemas exactly so that the serde derives
//! double as the JSON codec. Quaternions are stored `[x, y, z, w]`
//! everywhere.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of joints in the hand skeleton.
pub const JOINT_COUNT: usize = 26;

/// A position in meters plus a rotation quaternion `[x, y, z, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl Default for Pose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: [0.0, 0.0, 0.0],
        orientation: [0.0, 0.0, 0.0, 1.0],
    };

    /// Builds a pose, normalizing the quaternion. A zero quaternion becomes
    /// the identity rotation.
    pub fn new(position: [f64; 3], orientation: [f64; 4]) -> Self {
        let n = quat_norm(&orientation);
        let orientation = if n > 0.0 && n.is_finite() {
            orientation.map(|c| c / n)
        } else {
            [0.0, 0.0, 0.0, 1.0]
        };
        Self { position, orientation }
    }

    pub fn from_translation(position: [f64; 3]) -> Self {
        Self {
            position,
            ..Self::IDENTITY
        }
    }

    pub fn from_parts(position: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        let q = rotation.quaternion();
        Self {
            position: [position.x, position.y, position.z],
            orientation: [q.i, q.j, q.k, q.w],
        }
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    /// Rotation as a unit quaternion (renormalized).
    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [x, y, z, w] = self.orientation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
    }

    pub fn orientation_norm(&self) -> f64 {
        quat_norm(&self.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.orientation.iter())
            .all(|c| c.is_finite())
    }

    /// `self * other` as rigid transforms.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r = self.rotation();
        let p = self.translation() + r * other.translation();
        Pose::from_parts(p, r * other.rotation())
    }
}

pub(crate) fn quat_norm(q: &[f64; 4]) -> f64 {
    q.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Left or right. Unrecognized labels survive parsing so the validators can
/// report them instead of the parser failing on them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Handedness {
    Left,
    Right,
    Unknown(String),
}

impl Handedness {
    pub fn as_str(&self) -> &str {
        match self {
            Handedness::Left => "left",
            Handedness::Right => "right",
            Handedness::Unknown(s) => s,
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, Handedness::Unknown(_))
    }
}

impl fmt::Display for Handedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Handedness {
    fn from(s: &str) -> Self {
        match s {
            "left" => Handedness::Left,
            "right" => Handedness::Right,
            other => Handedness::Unknown(other.to_string()),
        }
    }
}

impl Serialize for Handedness {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Handedness {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Handedness::from(s.as_str()))
    }
}

macro_rules! joint_names {
    ($($variant:ident),* $(,)?) => {
        /// The 26 skeleton joints, declared in canonical order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum JointName {
            $($variant),*
        }

        impl JointName {
            pub const ALL: [JointName; JOINT_COUNT] = [$(JointName::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(JointName::$variant => stringify!($variant)),*
                }
            }
        }

        impl FromStr for JointName {
            type Err = UnknownJoint;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok(JointName::$variant),)*
                    _ => Err(UnknownJoint(s.to_string())),
                }
            }
        }
    };
}

joint_names!(
    Palm,
    Wrist,
    ThumbMetacarpal,
    ThumbProximal,
    ThumbDistal,
    ThumbTip,
    IndexMetacarpal,
    IndexProximal,
    IndexIntermediate,
    IndexDistal,
    IndexTip,
    MiddleMetacarpal,
    MiddleProximal,
    MiddleIntermediate,
    MiddleDistal,
    MiddleTip,
    RingMetacarpal,
    RingProximal,
    RingIntermediate,
    RingDistal,
    RingTip,
    LittleMetacarpal,
    LittleProximal,
    LittleIntermediate,
    LittleDistal,
    LittleTip,
);

impl JointName {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for JointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown joint name {0:?}")]
pub struct UnknownJoint(pub String);

/// One skeleton joint. On the wire the pose fields sit next to `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    #[serde(flatten)]
    pub pose: Pose,
}

impl Joint {
    pub fn new(name: JointName, pose: Pose) -> Self {
        Self {
            name: name.as_str().to_string(),
            pose,
        }
    }

    pub fn kind(&self) -> Option<JointName> {
        self.name.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hand {
    pub id: String,
    pub handedness: Handedness,
    /// Representative pose of the whole hand; equal to the Wrist joint.
    pub pose: Pose,
    pub joints: Vec<Joint>,
}

impl Hand {
    /// Builds a hand from joint poses given in canonical order. The hand pose
    /// is taken from the Wrist joint.
    pub fn from_joint_poses(id: impl Into<String>, handedness: Handedness, poses: [Pose; JOINT_COUNT]) -> Self {
        let joints = JointName::ALL
            .iter()
            .zip(poses)
            .map(|(&name, pose)| Joint::new(name, pose))
            .collect();
        Self {
            id: id.into(),
            handedness,
            pose: poses[JointName::Wrist.index()],
            joints,
        }
    }

    pub fn joint(&self, name: JointName) -> Option<&Joint> {
        self.joints.iter().find(|j| j.name == name.as_str())
    }

    pub fn wrist(&self) -> Option<&Pose> {
        self.joint(JointName::Wrist).map(|j| &j.pose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandFrame {
    /// Epoch milliseconds.
    pub timestamp: u64,
    #[serde(rename = "data")]
    pub hands: Vec<Hand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ButtonState {
    pub pressed: bool,
    pub touched: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handle {
    pub id: String,
    pub handedness: Handedness,
    pub profiles: Vec<String>,
    pub buttons: Vec<ButtonState>,
    pub axes: Vec<f64>,
    /// Grip pose.
    pub pose: Pose,
    #[serde(rename = "targetRayPose")]
    pub target_ray_pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandleFrame {
    /// Epoch milliseconds.
    pub timestamp: u64,
    #[serde(rename = "data")]
    pub handles: Vec<Handle>,
}

/// Which acquisition channel a frame came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Gesture,
    Handle,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Gesture => "gesture",
            Source::Handle => "handle",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_starts_with_palm_and_wrist() {
        assert_eq!(JointName::ALL.len(), 26);
        assert_eq!(JointName::ALL[0], JointName::Palm);
        assert_eq!(JointName::ALL[1], JointName::Wrist);
        assert_eq!(JointName::ALL[25], JointName::LittleTip);
        for (i, j) in JointName::ALL.iter().enumerate() {
            assert_eq!(j.index(), i);
            assert_eq!(j.as_str().parse::<JointName>().unwrap(), *j);
        }
    }

    #[test]
    fn unknown_handedness_survives_parse() {
        let h: Handedness = serde_json::from_str("\"center\"").unwrap();
        assert_eq!(h, Handedness::Unknown("center".into()));
        assert_eq!(serde_json::to_string(&h).unwrap(), "\"center\"");
    }

    #[test]
    fn pose_new_normalizes() {
        let p = Pose::new([0.0; 3], [0.0, 0.0, 0.0, 2.0]);
        assert_eq!(p.orientation, [0.0, 0.0, 0.0, 1.0]);
        let p = Pose::new([0.0; 3], [0.0; 4]);
        assert_eq!(p.orientation, [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn joint_json_is_flat() {
        let j = Joint::new(JointName::ThumbTip, Pose::from_translation([1.0, 2.0, 3.0]));
        let v = serde_json::to_value(&j).unwrap();
        assert_eq!(v["name"], "ThumbTip");
        assert_eq!(v["position"], serde_json::json!([1.0, 2.0, 3.0]));
        assert_eq!(v["orientation"], serde_json::json!([0.0, 0.0, 0.0, 1.0]));
    }
}
