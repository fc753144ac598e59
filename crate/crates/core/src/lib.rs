//! Core of the teleoperation gateway. Nothing here touches the network;
//! the only I/O is episode and snapshot files.

// `!(x > 0.0)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod buttons;
pub mod codec;
pub mod episode;
pub mod filter;
pub mod ik;
pub mod model;
pub mod pipeline;
pub mod scenario;
pub mod sim;
pub mod snapshot;
pub mod transforms;
pub mod validate;

pub use model::{
    ButtonState, Hand, HandFrame, Handedness, Handle, HandleFrame, JOINT_COUNT, Joint, JointName, Pose, Source,
};
