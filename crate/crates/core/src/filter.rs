//! Four-layer jitter and jump gate.
//!
//! Each frame is compared against a reference frame:
//!
//! * L1, L2 (jitter): end-effector displacement `d_t` must reach `delta1`
//!   and `delta2`.
//! * L3 (raw jump): the largest raw joint-angle change must not exceed
//!   `epsilon1`.
//! * L4 (IK jump): the largest IK joint-angle change must not exceed
//!   `epsilon2`.
//!
//! A frame is executable only when all four hold. The reference is the last
//! *accepted* frame, not the previous raw one, so slow motion accumulates
//! until it clears the deadband.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// First jitter threshold, meters.
    pub delta1: f64,
    /// Second jitter threshold, meters.
    pub delta2: f64,
    /// Raw joint-angle jump threshold, radians.
    pub epsilon1: f64,
    /// IK joint-angle jump threshold, radians.
    pub epsilon2: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            delta1: 0.002,
            delta2: 0.002,
            epsilon1: 0.15,
            epsilon2: 0.15,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        let named = [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("epsilon1", self.epsilon1),
            ("epsilon2", self.epsilon2),
        ];
        for (name, v) in named {
            if !(v >= 0.0) || v.is_infinite() {
                return Err(FilterError::Threshold { name, value: v });
            }
        }
        for (name, v) in &named[..2] {
            if *v == 0.0 {
                return Err(FilterError::Threshold { name, value: *v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("{what} has {actual} joints, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("filter state is not initialized")]
    Uninitialized,
    #[error("threshold {name} = {value} is invalid")]
    Threshold { name: &'static str, value: f64 },
}

/// Inputs for one frame: end-effector position, raw joint angles, IK joint
/// angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInputs {
    pub position: [f64; 3],
    pub raw_angles: Vec<f64>,
    pub ik_angles: Vec<f64>,
}

impl FrameInputs {
    fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(&self.raw_angles)
            .chain(&self.ik_angles)
            .all(|v| v.is_finite())
    }
}

/// Values of the last accepted frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub position: [f64; 3],
    pub raw_angles: Vec<f64>,
    pub ik_angles: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub reference: Option<Reference>,
}

impl FilterState {
    pub fn is_initialized(&self) -> bool {
        self.reference.is_some()
    }

    pub fn joint_count(&self) -> Option<usize> {
        self.reference.as_ref().map(|r| r.ik_angles.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    /// First frame of a stream; becomes the reference, nothing emitted.
    Bootstrap,
    Evaluated,
    /// Some input was NaN or infinite.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub executable: bool,
    pub kind: DecisionKind,
    #[serde(with = "lossless_f64")]
    pub d_t: f64,
    #[serde(with = "lossless_f64")]
    pub max_dtheta: f64,
    #[serde(with = "lossless_f64")]
    pub max_dphi: f64,
    /// L1..L4 in order.
    pub layers: [bool; 4],
}

impl FilterDecision {
    fn bootstrap() -> Self {
        Self {
            executable: false,
            kind: DecisionKind::Bootstrap,
            d_t: 0.0,
            max_dtheta: 0.0,
            max_dphi: 0.0,
            layers: [false; 4],
        }
    }
}

/// Largest absolute element-wise difference; NaN if any difference is NaN.
fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| {
        let d = (x - y).abs();
        if d.is_nan() || acc.is_nan() {
            f64::NAN
        } else {
            acc.max(d)
        }
    })
}

fn check_dims(reference: &Reference, inputs: &FrameInputs) -> Result<(), FilterError> {
    let expected = reference.ik_angles.len();
    for (what, actual) in [("theta", inputs.raw_angles.len()), ("phi", inputs.ik_angles.len())] {
        if actual != expected {
            return Err(FilterError::Dimension { what, expected, actual });
        }
    }
    Ok(())
}

/// Scores one frame against the reference without changing it.
pub fn evaluate(
    inputs: &FrameInputs,
    state: &FilterState,
    config: &FilterConfig,
) -> Result<FilterDecision, FilterError> {
    let reference = state.reference.as_ref().ok_or(FilterError::Uninitialized)?;
    check_dims(reference, inputs)?;

    let d_t = inputs
        .position
        .iter()
        .zip(&reference.position)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let max_dtheta = max_abs_diff(&inputs.raw_angles, &reference.raw_angles);
    let max_dphi = max_abs_diff(&inputs.ik_angles, &reference.ik_angles);

    let layers = [
        d_t >= config.delta1,
        d_t >= config.delta2,
        max_dtheta <= config.epsilon1,
        max_dphi <= config.epsilon2,
    ];
    let finite = inputs.is_finite();
    Ok(FilterDecision {
        executable: finite && layers.iter().all(|&l| l),
        kind: if finite {
            DecisionKind::Evaluated
        } else {
            DecisionKind::NonFinite
        },
        d_t,
        max_dtheta,
        max_dphi,
        layers,
    })
}

/// Result of feeding one frame through [`MotionFilter::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub decision: FilterDecision,
    /// IK joint vector to execute, present iff the frame was executable.
    pub command: Option<Vec<f64>>,
}

/// Per-stream filter: configuration plus the reference frame it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFilter {
    config: FilterConfig,
    state: FilterState,
}

impl MotionFilter {
    pub fn new(config: FilterConfig) -> Self {
        Self {
            config,
            state: FilterState::default(),
        }
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn step(&mut self, inputs: FrameInputs) -> Result<StepOutcome, FilterError> {
        let Some(reference) = &self.state.reference else {
            if inputs.raw_angles.len() != inputs.ik_angles.len() {
                return Err(FilterError::Dimension {
                    what: "theta",
                    expected: inputs.ik_angles.len(),
                    actual: inputs.raw_angles.len(),
                });
            }
            if !inputs.is_finite() {
                return Ok(StepOutcome {
                    decision: FilterDecision {
                        kind: DecisionKind::NonFinite,
                        ..FilterDecision::bootstrap()
                    },
                    command: None,
                });
            }
            self.state.reference = Some(Reference {
                position: inputs.position,
                raw_angles: inputs.raw_angles,
                ik_angles: inputs.ik_angles,
            });
            return Ok(StepOutcome {
                decision: FilterDecision::bootstrap(),
                command: None,
            });
        };
        check_dims(reference, &inputs)?;
        let decision = evaluate(&inputs, &self.state, &self.config)?;
        if !decision.executable {
            return Ok(StepOutcome {
                decision,
                command: None,
            });
        }
        let command = inputs.ik_angles.clone();
        self.state.reference = Some(Reference {
            position: inputs.position,
            raw_angles: inputs.raw_angles,
            ik_angles: inputs.ik_angles,
        });
        Ok(StepOutcome {
            decision,
            command: Some(command),
        })
    }
}

/// JSON has no NaN or infinity; encode those as strings so decisions about
/// non-finite frames survive a round trip.
mod lossless_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            },
        }
    }
}
