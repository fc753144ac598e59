#![allow(dead_code)]

use proptest::prelude::*;
use teleop_core::model::{ButtonState, Hand, HandFrame, Handedness, Handle, HandleFrame, JOINT_COUNT, Pose};

/// Unit quaternion `[x, y, z, w]` from a normalized 4-vector.
pub fn unit_quat() -> impl Strategy<Value = [f64; 4]> + Clone {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |q| q.iter().map(|c| c * c).sum::<f64>() > 1e-3)
        .prop_map(|q| {
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            q.map(|c| c / n)
        })
}

pub fn pose() -> impl Strategy<Value = Pose> + Clone {
    (prop::array::uniform3(-3.0f64..3.0), unit_quat())
        .prop_map(|(position, orientation)| Pose { position, orientation })
}

/// A pose whose components are exactly representable as f32.
pub fn f32_pose() -> impl Strategy<Value = Pose> + Clone {
    (prop::array::uniform3(-3.0f32..3.0), prop::array::uniform4(-1.0f32..1.0)).prop_map(|(p, q)| Pose {
        position: p.map(f64::from),
        orientation: q.map(f64::from),
    })
}

pub fn side() -> impl Strategy<Value = Handedness> {
    prop_oneof![Just(Handedness::Left), Just(Handedness::Right)]
}

pub fn hand_with(p: impl Strategy<Value = Pose> + Clone) -> impl Strategy<Value = Hand> {
    (side(), p.clone(), prop::collection::vec(p, JOINT_COUNT)).prop_map(|(side, pose, joints)| {
        let poses: [Pose; JOINT_COUNT] = joints.try_into().unwrap();
        let mut hand = Hand::from_joint_poses(side.to_string(), side, poses);
        hand.pose = pose;
        hand
    })
}

pub fn hand_frame() -> impl Strategy<Value = HandFrame> {
    (any::<u64>(), prop::collection::vec(hand_with(pose()), 0..3))
        .prop_map(|(timestamp, hands)| HandFrame { timestamp, hands })
}

pub fn button() -> impl Strategy<Value = ButtonState> {
    (any::<bool>(), any::<bool>(), 0.0f64..=1.0).prop_map(|(pressed, touched, value)| ButtonState {
        pressed,
        touched,
        value,
    })
}

pub fn handle() -> impl Strategy<Value = Handle> {
    (
        side(),
        prop::collection::vec("[a-z0-9-]{1,24}", 0..3),
        prop::collection::vec(button(), 0..8),
        prop::collection::vec(-1.0f64..=1.0, 0..6),
        pose(),
        pose(),
    )
        .prop_map(|(side, profiles, buttons, axes, pose, ray)| Handle {
            id: format!("{side}-controller"),
            handedness: side,
            profiles,
            buttons,
            axes,
            pose,
            target_ray_pose: ray,
        })
}

pub fn handle_frame() -> impl Strategy<Value = HandleFrame> {
    (any::<u64>(), prop::collection::vec(handle(), 0..3))
        .prop_map(|(timestamp, handles)| HandleFrame { timestamp, handles })
}
