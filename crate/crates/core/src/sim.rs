//! Synthetic device streams: smooth trajectories with tremor, teleport
//! jumps and intentional drops, all driven by one seeded RNG.
//!
//! Poses are produced in the device's own convention, so they exercise the
//! same harmonization path as real hardware.

use std::f64::consts::TAU;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{ButtonState, Hand, HandFrame, Handedness, Handle, HandleFrame, JOINT_COUNT, JointName, Pose};
use crate::transforms::mirror_lh_to_rh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    /// `center + A (sin wt, sin(2wt)/2, 0)`.
    Lissajous,
    /// Back and forth along device x between `center -/+ A`, constant speed.
    WaypointLinear,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Meters.
    pub amplitude: f64,
    /// Seconds.
    pub period: f64,
    /// Device-frame meters.
    pub center: [f64; 3],
    /// Peak yaw about the device up axis, radians.
    pub orientation_sweep: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Lissajous,
            amplitude: 0.1,
            period: 4.0,
            center: [0.0, 1.1, -0.4],
            orientation_sweep: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Standard deviation of the band-limited positional noise, meters.
    pub tremor_amplitude: f64,
    /// Tremor band in Hz.
    pub tremor_band: [f64; 2],
    pub jump_probability: f64,
    /// Meters.
    pub jump_magnitude: f64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            tremor_amplitude: 0.0005,
            tremor_band: [8.0, 12.0],
            jump_probability: 0.0,
            jump_magnitude: 0.3,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn silent(seed: u64) -> Self {
        Self {
            tremor_amplitude: 0.0,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("{0} must be positive, got {1}")]
    NotPositive(&'static str, f64),
    #[error("{0} must be within [0, 1], got {1}")]
    Probability(&'static str, f64),
    #[error("{0} must be non-negative, got {1}")]
    Negative(&'static str, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFrame {
    pub index: usize,
    /// Nominal offset from stream start, microseconds.
    pub offset_us: u64,
    /// Device pose including noise and any jump.
    pub pose: Pose,
    pub jump: bool,
    /// Marked for intentional loss; emitters skip it.
    pub dropped: bool,
}

/// Second-order band-pass section (RBJ cookbook, 0 dB peak gain).
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    fn band_pass(low: f64, high: f64, sample_rate: f64) -> Self {
        let f0 = (low * high).sqrt();
        let q = f0 / (high - low);
        let w0 = TAU * f0 / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: alpha / a0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn next(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// RMS gain for unit white noise, from the impulse response.
    fn noise_gain(&self) -> f64 {
        let mut f = Biquad {
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
            ..*self
        };
        let mut energy = f.next(1.0).powi(2);
        for _ in 0..8192 {
            energy += f.next(0.0).powi(2);
        }
        energy.sqrt()
    }
}

/// Noise-free pose of the trajectory at `t` seconds.
pub fn trajectory_pose(spec: &TrajectorySpec, t: f64) -> Pose {
    let w = TAU / spec.period;
    let c = Vector3::from(spec.center);
    let a = spec.amplitude;
    let offset = match spec.kind {
        TrajectoryKind::Stationary => Vector3::zeros(),
        TrajectoryKind::Lissajous => Vector3::new(a * (w * t).sin(), 0.5 * a * (2.0 * w * t).sin(), 0.0),
        TrajectoryKind::WaypointLinear => {
            // triangle wave in [-1, 1], starting at 0 and rising
            let phase = (t / spec.period + 0.25).rem_euclid(1.0);
            let tri = if phase < 0.5 {
                4.0 * phase - 1.0
            } else {
                3.0 - 4.0 * phase
            };
            Vector3::new(a * tri, 0.0, 0.0)
        }
    };
    let yaw = match spec.kind {
        TrajectoryKind::Stationary => 0.0,
        _ => spec.orientation_sweep * (w * t).sin(),
    };
    Pose::from_parts(c + offset, UnitQuaternion::from_axis_angle(&Vector3::y_axis(), yaw))
}

/// Largest speed along the noise-free path, m/s.
pub fn peak_speed(spec: &TrajectorySpec) -> f64 {
    let w = TAU / spec.period;
    match spec.kind {
        TrajectoryKind::Stationary => 0.0,
        // |d/dt| = A w sqrt(cos^2 wt + cos^2 2wt), maximal at t = 0
        TrajectoryKind::Lissajous => std::f64::consts::SQRT_2 * spec.amplitude * w,
        TrajectoryKind::WaypointLinear => 4.0 * spec.amplitude / spec.period,
    }
}

fn check(trajectory: &TrajectorySpec, noise: &NoiseSpec, rate: f64, duration: f64) -> Result<(), SimError> {
    for (name, v) in [("rate", rate), ("duration", duration), ("period", trajectory.period)] {
        if !(v > 0.0) {
            return Err(SimError::NotPositive(name, v));
        }
    }
    for (name, v) in [
        ("amplitude", trajectory.amplitude),
        ("tremor_amplitude", noise.tremor_amplitude),
        ("jump_magnitude", noise.jump_magnitude),
    ] {
        if !(v >= 0.0) {
            return Err(SimError::Negative(name, v));
        }
    }
    for (name, v) in [
        ("jump_probability", noise.jump_probability),
        ("drop_probability", noise.drop_probability),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(SimError::Probability(name, v));
        }
    }
    Ok(())
}

/// Number of frames a run of `duration` seconds at `rate` Hz produces.
pub fn frame_count(rate: f64, duration: f64) -> usize {
    (rate * duration + 1e-9).floor() as usize
}

/// Generates `floor(rate * duration)` frames at exact nominal intervals.
///
/// Per frame the RNG is drawn in a fixed order (three tremor normals, jump
/// coin, three jump-direction normals, drop coin), so a seed pins the whole
/// sequence.
pub fn generate_frames(
    trajectory: &TrajectorySpec,
    noise: &NoiseSpec,
    rate: f64,
    duration: f64,
) -> Result<Vec<SimFrame>, SimError> {
    check(trajectory, noise, rate, duration)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);

    // Tremor above Nyquist cannot be represented; the band is clipped to
    // 0.45 of the sample rate and dropped entirely if nothing is left.
    let [low, high] = noise.tremor_band;
    let high = high.min(0.45 * rate);
    let mut filters = (noise.tremor_amplitude > 0.0 && low > 0.0 && high > low).then(|| {
        let f = Biquad::band_pass(low, high, rate);
        let scale = noise.tremor_amplitude / f.noise_gain();
        ([f; 3], scale)
    });

    let n = frame_count(rate, duration);
    let mut frames = Vec::with_capacity(n);
    for index in 0..n {
        let t = index as f64 / rate;
        let mut pose = trajectory_pose(trajectory, t);

        let white: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Some((filters, scale)) = filters.as_mut() {
            for axis in 0..3 {
                pose.position[axis] += filters[axis].next(white[axis] * *scale);
            }
        }

        let jump = rng.random::<f64>() < noise.jump_probability;
        let dir = Vector3::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
        if jump && dir.norm() > 0.0 {
            let d = dir.normalize() * noise.jump_magnitude;
            for axis in 0..3 {
                pose.position[axis] += d[axis];
            }
        }
        let dropped = rng.random::<f64>() < noise.drop_probability;

        frames.push(SimFrame {
            index,
            offset_us: (index as f64 * 1e6 / rate).round() as u64,
            pose,
            jump,
            dropped,
        });
    }
    Ok(frames)
}

/// Joint offsets from the wrist, in the wrist frame, for a flat open hand.
fn skeleton_offset(joint: JointName) -> [f64; 3] {
    use JointName::*;
    let (finger_x, base) = match joint {
        Palm => return [0.0, 0.0, 0.045],
        Wrist => return [0.0, 0.0, 0.0],
        ThumbMetacarpal | ThumbProximal | ThumbDistal | ThumbTip => (0.03, 0.02),
        IndexMetacarpal | IndexProximal | IndexIntermediate | IndexDistal | IndexTip => (0.02, 0.0),
        MiddleMetacarpal | MiddleProximal | MiddleIntermediate | MiddleDistal | MiddleTip => (0.0, 0.0),
        RingMetacarpal | RingProximal | RingIntermediate | RingDistal | RingTip => (-0.018, 0.0),
        LittleMetacarpal | LittleProximal | LittleIntermediate | LittleDistal | LittleTip => (-0.034, 0.005),
    };
    let segment = match joint {
        ThumbMetacarpal | IndexMetacarpal | MiddleMetacarpal | RingMetacarpal | LittleMetacarpal => 0,
        ThumbProximal | IndexProximal | MiddleProximal | RingProximal | LittleProximal => 1,
        IndexIntermediate | MiddleIntermediate | RingIntermediate | LittleIntermediate => 2,
        ThumbDistal | IndexDistal | MiddleDistal | RingDistal | LittleDistal => 3,
        _ => 4,
    };
    [finger_x, 0.0, base + 0.02 + 0.025 * segment as f64]
}

/// A 26-joint hand whose Wrist sits at `wrist`.
pub fn synthetic_hand(wrist: &Pose, handedness: Handedness) -> Hand {
    let mirror = if handedness == Handedness::Left { -1.0 } else { 1.0 };
    let poses: [Pose; JOINT_COUNT] = std::array::from_fn(|i| {
        let [x, y, z] = skeleton_offset(JointName::ALL[i]);
        wrist.compose(&Pose::from_translation([mirror * x, y, z]))
    });
    Hand::from_joint_poses(handedness.to_string(), handedness, poses)
}

/// Trajectories are described in the right-handed handle convention; the
/// gesture device reports the same motion left-handed, so every joint is
/// mirrored on the way out. Both modes then land on the same world pose.
pub fn hand_frame(frame: &SimFrame, start_ms: u64, handedness: Handedness) -> HandFrame {
    let mut hand = synthetic_hand(&frame.pose, handedness);
    hand.pose = mirror_lh_to_rh(&hand.pose);
    for joint in &mut hand.joints {
        joint.pose = mirror_lh_to_rh(&joint.pose);
    }
    HandFrame {
        timestamp: start_ms + frame.offset_us / 1000,
        hands: vec![hand],
    }
}

pub fn handle_frame(frame: &SimFrame, start_ms: u64, handedness: Handedness) -> HandleFrame {
    let side = handedness.to_string();
    HandleFrame {
        timestamp: start_ms + frame.offset_us / 1000,
        handles: vec![Handle {
            id: side,
            handedness,
            profiles: vec![
                "pico-neo3".to_string(),
                "generic-trigger-squeeze-thumbstick".to_string(),
            ],
            buttons: vec![ButtonState::default(); 6],
            axes: vec![0.0; 4],
            pose: frame.pose,
            target_ray_pose: frame.pose.compose(&Pose::new(
                [0.0, 0.0, -0.05],
                [-0.3826834323650898, 0.0, 0.0, 0.9238795325112867],
            )),
        }],
    }
}
