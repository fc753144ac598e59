//! Scripted target paths for exercising the IK jump layer.
//!
//! These are fixtures for tests and demos, not part of the live pipeline.
//! The paths keep the wrist centre of a spherical-wrist arm fixed and sweep
//! the tool axis past the forearm axis at a chosen offset. A small offset
//! drives the wrist through its singularity, forcing the forearm and wrist
//! roll joints to swing by nearly half a turn within a frame or two.

use nalgebra::{UnitQuaternion, Vector3};

use crate::ik::{ChainError, IkSettings, KinematicChain, solve_ik};
use crate::model::Pose;

/// Offset of the near-singular sweep, radians off the forearm axis.
pub const NEAR_SINGULAR_OFFSET: f64 = 0.03;
/// Offset of the control sweep, comfortably away from the singularity.
pub const CONTROL_OFFSET: f64 = 0.5;
/// Half-width of both sweeps.
pub const SWEEP: f64 = 0.3;
/// Frames per sweep; each step moves the tool tip by about 2.5 mm.
pub const SWEEP_FRAMES: usize = 21;

/// One frame of a scripted run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFrame {
    pub target: Pose,
    pub phi: Vec<f64>,
    pub converged: bool,
}

/// Joint vector with the arm joints at home and the last three zeroed.
pub fn wrist_aligned_seed(chain: &KinematicChain) -> Vec<f64> {
    let mut q = chain.home().to_vec();
    let n = q.len();
    for v in &mut q[n.saturating_sub(3)..] {
        *v = 0.0;
    }
    q
}

/// Targets that sweep the tool axis across the forearm axis.
///
/// `offset` is the closest approach of the swept direction to the forearm
/// axis (0 passes straight through the singularity); `sweep` is the
/// half-width of the sweep and `frames` the number of targets.
pub fn wrist_sweep_path(
    chain: &KinematicChain,
    offset: f64,
    sweep: f64,
    frames: usize,
) -> Result<Vec<Pose>, ChainError> {
    let aligned = chain.forward_kinematics(&wrist_aligned_seed(chain))?;
    let base_rot = aligned.rotation();
    let forearm = base_rot * Vector3::z();
    let across = base_rot * Vector3::x();
    let along = base_rot * Vector3::y();
    let tool_len = chain.tool().translation().norm();
    let wrist_centre = aligned.translation() - forearm * tool_len;

    let denom = frames.saturating_sub(1).max(1) as f64;
    Ok((0..frames)
        .map(|k| {
            let s = -sweep + 2.0 * sweep * k as f64 / denom;
            let dir = (forearm + across * offset + along * s).normalize();
            let tilt = UnitQuaternion::rotation_between(&forearm, &dir).unwrap_or_else(UnitQuaternion::identity);
            Pose::from_parts(wrist_centre + dir * tool_len, tilt * base_rot)
        })
        .collect())
}

/// Solves each target in turn, seeding every solve with the previous
/// solution, and records the joint trajectory.
pub fn ik_jump_scenario(
    chain: &KinematicChain,
    targets: &[Pose],
    seed: &[f64],
    settings: &IkSettings,
) -> Result<Vec<ScenarioFrame>, ChainError> {
    let mut q = seed.to_vec();
    let mut out = Vec::with_capacity(targets.len());
    for target in targets {
        let sol = solve_ik(chain, target, &q, settings)?;
        q = sol.q.clone();
        out.push(ScenarioFrame {
            target: *target,
            phi: sol.q,
            converged: sol.converged,
        });
    }
    Ok(out)
}

/// Largest inter-frame joint change along a run.
pub fn max_joint_step(frames: &[ScenarioFrame]) -> f64 {
    frames
        .windows(2)
        .flat_map(|w| w[0].phi.iter().zip(&w[1].phi).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}
