//! Per-stream processing: harmonize, quantize, solve IK, gate.
//!
//! A stream is one tracked device: a hand on the gesture channel or a handle
//! on the handle channel, keyed by handedness. Each stream owns its filter
//! state and two IK seeds:
//!
//! * raw angles (theta) solve the unprocessed world target, seeded by the
//!   previous frame's raw solution;
//! * IK angles (phi) solve the processed target (quantized, with button
//!   adjustments), seeded by the last accepted command.
//!
//! Everything here is deterministic: the same raw frames through a pipeline
//! built from the same config give the same decisions.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::buttons::{ButtonMapping, WristAdjust, map_handle_buttons};
use crate::filter::{DecisionKind, FilterConfig, FilterDecision, FilterError, FrameInputs, MotionFilter};
use crate::ik::{ChainError, IkSettings, KinematicChain, solve_ik};
use crate::model::{HandFrame, Handedness, HandleFrame, Pose, Source};
use crate::transforms::{BasisConvention, QuantizationPolicy, normalize_to_world, quantize_position};
use crate::validate::{FLOAT32_UNIT_NORM_TOLERANCE, ValidationReport, validate_hand_frame_with, validate_handle_frame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub ik: IkSettings,
    pub quantization: QuantizationPolicy,
    pub quantize_handle: bool,
    pub quantize_gesture: bool,
    /// Added to the world-frame device position to get the IK target.
    pub target_offset: [f64; 3],
    pub buttons: ButtonMapping,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            ik: IkSettings::default(),
            quantization: QuantizationPolicy::default(),
            quantize_handle: true,
            quantize_gesture: false,
            target_offset: [0.1, 0.0, -0.5],
            buttons: ButtonMapping::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamKey {
    pub source: Source,
    pub handedness: Handedness,
}

impl std::fmt::Display for StreamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.source, self.handedness)
    }
}

/// A frame exactly as it arrived on either channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawFrame {
    Gesture(HandFrame),
    Handle(HandleFrame),
}

impl RawFrame {
    pub fn source(&self) -> Source {
        match self {
            RawFrame::Gesture(_) => Source::Gesture,
            RawFrame::Handle(_) => Source::Handle,
        }
    }

    pub fn timestamp(&self) -> u64 {
        match self {
            RawFrame::Gesture(f) => f.timestamp,
            RawFrame::Handle(f) => f.timestamp,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            RawFrame::Gesture(f) => validate_hand_frame_with(f, FLOAT32_UNIT_NORM_TOLERANCE),
            RawFrame::Handle(f) => validate_handle_frame(f),
        }
    }

    /// Streams present in this frame.
    pub fn stream_keys(&self) -> Vec<StreamKey> {
        let source = self.source();
        let sides: Vec<Handedness> = match self {
            RawFrame::Gesture(f) => f.hands.iter().map(|h| h.handedness.clone()).collect(),
            RawFrame::Handle(f) => f.handles.iter().map(|h| h.handedness.clone()).collect(),
        };
        sides
            .into_iter()
            .filter(Handedness::is_known)
            .map(|handedness| StreamKey { source, handedness })
            .collect()
    }
}

/// Why a frame produced no decision.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Skip {
    #[error("frame fails validation: {0}")]
    Invalid(String),
    #[error("no {0} device in frame")]
    Absent(StreamKey),
    #[error("frame is from channel {0}, pipeline is {1}")]
    WrongSource(Source, StreamKey),
    #[error("timestamp {got} is older than {last}")]
    Stale { got: u64, last: u64 },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

impl Skip {
    pub fn reason(&self) -> &'static str {
        match self {
            Skip::Invalid(_) => "invalid",
            Skip::Absent(_) => "absent",
            Skip::WrongSource(..) => "wrong source",
            Skip::Stale { .. } => "stale",
            Skip::Filter(_) => "filter",
            Skip::Chain(_) => "chain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub joints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper: Option<f64>,
    /// Source timestamp of the frame the command was derived from.
    pub source_timestamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Device pose in the world frame after quantization.
    pub world_pose: Pose,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub ik_converged: bool,
    pub decision: FilterDecision,
    pub command: Option<Command>,
}

pub struct StreamPipeline {
    key: StreamKey,
    config: PipelineConfig,
    chain: KinematicChain,
    filter: MotionFilter,
    raw_seed: Vec<f64>,
    accepted_seed: Vec<f64>,
    adjust: WristAdjust,
    last_timestamp: Option<u64>,
}

impl StreamPipeline {
    pub fn new(key: StreamKey, config: PipelineConfig, chain: KinematicChain) -> Self {
        let home = chain.home().to_vec();
        Self {
            filter: MotionFilter::new(config.filter),
            key,
            config,
            raw_seed: home.clone(),
            accepted_seed: home,
            chain,
            adjust: WristAdjust::default(),
            last_timestamp: None,
        }
    }

    pub fn key(&self) -> &StreamKey {
        &self.key
    }

    /// Accumulated wrist fine-tuning from handle buttons.
    pub fn wrist_adjust(&self) -> WristAdjust {
        self.adjust
    }

    pub fn process(&mut self, raw: &RawFrame) -> Result<StepOutput, Skip> {
        if raw.source() != self.key.source {
            return Err(Skip::WrongSource(raw.source(), self.key.clone()));
        }
        let report = raw.validate();
        if let Some(issue) = report.errors().next() {
            return Err(Skip::Invalid(issue.to_string()));
        }
        let ts = raw.timestamp();
        if let Some(last) = self.last_timestamp
            && ts < last {
                return Err(Skip::Stale { got: ts, last });
            }

        let (device, convention, quantize, delta, gripper) = match raw {
            RawFrame::Gesture(f) => {
                let hand = f
                    .hands
                    .iter()
                    .find(|h| h.handedness == self.key.handedness)
                    .ok_or_else(|| Skip::Absent(self.key.clone()))?;
                let pose = *hand.wrist().unwrap_or(&hand.pose);
                (
                    pose,
                    BasisConvention::PicoUnity,
                    self.config.quantize_gesture,
                    WristAdjust::default(),
                    None,
                )
            }
            RawFrame::Handle(f) => {
                let handle = f
                    .handles
                    .iter()
                    .find(|h| h.handedness == self.key.handedness)
                    .ok_or_else(|| Skip::Absent(self.key.clone()))?;
                let out = map_handle_buttons(handle, &self.config.buttons);
                (
                    handle.pose,
                    BasisConvention::WebXr,
                    self.config.quantize_handle,
                    out.adjust,
                    out.gripper,
                )
            }
        };
        self.last_timestamp = Some(ts);

        let unquantized = normalize_to_world(&device, convention);
        let world_pose = if quantize {
            quantize_position(&unquantized, &self.config.quantization)
        } else {
            unquantized
        };

        let mut adjust = self.adjust;
        adjust.accumulate(&delta);
        self.adjust = adjust;

        let raw_target = self.target(&unquantized, &WristAdjust::default());
        let target = self.target(&world_pose, &adjust);

        let raw_sol = solve_ik(&self.chain, &raw_target, &self.raw_seed, &self.config.ik)?;
        let sol = solve_ik(&self.chain, &target, &self.accepted_seed, &self.config.ik)?;
        self.raw_seed = raw_sol.q.clone();

        let outcome = self.filter.step(FrameInputs {
            position: world_pose.position,
            raw_angles: raw_sol.q.clone(),
            ik_angles: sol.q.clone(),
        })?;
        // The bootstrap frame becomes the filter reference, so it also seeds
        // the next solve.
        if outcome.command.is_some() || outcome.decision.kind == DecisionKind::Bootstrap {
            self.accepted_seed = sol.q.clone();
        }
        Ok(StepOutput {
            world_pose,
            theta: raw_sol.q,
            phi: sol.q,
            ik_converged: sol.converged,
            decision: outcome.decision,
            command: outcome.command.map(|joints| Command {
                joints,
                gripper,
                source_timestamp: ts,
            }),
        })
    }

    fn target(&self, world: &Pose, adjust: &WristAdjust) -> Pose {
        let offset = Vector3::from(self.config.target_offset);
        let local = UnitQuaternion::from_euler_angles(adjust.roll, adjust.pitch, adjust.yaw);
        Pose::from_parts(world.translation() + offset, world.rotation() * local)
    }
}
