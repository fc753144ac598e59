//! Schema conformance checks for parsed frames.
//!
//! Violations are data: the validators never fail, they list everything
//! wrong with a frame. Warnings flag suspicious-but-legal content.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::model::{HandFrame, HandleFrame, JOINT_COUNT, JointName, Pose};

/// Unit-norm tolerance for quaternions built in double precision.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;
/// Unit-norm tolerance for quaternions that travelled as float32.
pub const FLOAT32_UNIT_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    /// Dotted location inside the frame, e.g. `data[0].joints[3]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    /// True when there are no errors. Warnings do not affect conformance.
    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn has_message(&self, needle: &str) -> bool {
        self.issues.iter().any(|i| i.message.contains(needle))
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    fn check_pose(&mut self, path: &str, pose: &Pose, tol: f64) {
        if !pose.position.iter().all(|c| c.is_finite()) {
            self.error(path, "non-finite position");
        }
        let n = pose.orientation_norm();
        if !n.is_finite() || (n - 1.0).abs() > tol {
            self.error(path, format!("non-unit quaternion (norm {n})"));
        }
    }
}

pub fn validate_hand_frame(frame: &HandFrame) -> ValidationReport {
    validate_hand_frame_with(frame, UNIT_NORM_TOLERANCE)
}

/// As [`validate_hand_frame`] with an explicit quaternion norm tolerance.
pub fn validate_hand_frame_with(frame: &HandFrame, norm_tolerance: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    if frame.hands.is_empty() {
        report.warn("data", "no hands in frame");
    }
    if frame.hands.len() > 2 {
        report.error("data", format!("{} hands in frame, at most 2", frame.hands.len()));
    }
    let mut seen = HashSet::new();
    for (h, hand) in frame.hands.iter().enumerate() {
        let base = format!("data[{h}]");
        if !hand.handedness.is_known() {
            report.error(&base, format!("unknown handedness {:?}", hand.handedness.as_str()));
        } else if !seen.insert(hand.handedness.clone()) {
            report.error(&base, format!("duplicate handedness {}", hand.handedness));
        }
        report.check_pose(&format!("{base}.pose"), &hand.pose, norm_tolerance);

        if hand.joints.len() != JOINT_COUNT {
            report.error(
                format!("{base}.joints"),
                format!("joints length {} ≠ {JOINT_COUNT}", hand.joints.len()),
            );
        }
        let mut names = HashSet::new();
        for (j, joint) in hand.joints.iter().enumerate() {
            let path = format!("{base}.joints[{j}]");
            match joint.kind() {
                None => report.error(&path, format!("unknown joint name {:?}", joint.name)),
                Some(kind) => {
                    if !names.insert(kind) {
                        report.error(&path, format!("duplicate joint {kind}"));
                    } else if kind.index() != j {
                        report.error(&path, format!("joint {kind} out of canonical order"));
                    }
                }
            }
            report.check_pose(&path, &joint.pose, norm_tolerance);
        }
        match hand.wrist() {
            Some(wrist) if *wrist != hand.pose => {
                report.warn(format!("{base}.pose"), "hand pose differs from Wrist joint")
            }
            None if hand.joints.len() == JOINT_COUNT => {
                report.error(format!("{base}.joints"), format!("missing {}", JointName::Wrist))
            }
            _ => {}
        }
    }
    report
}

pub fn validate_handle_frame(frame: &HandleFrame) -> ValidationReport {
    let mut report = ValidationReport::default();
    if frame.handles.is_empty() {
        report.warn("data", "no handles in frame");
    }
    if frame.handles.len() > 2 {
        report.error("data", format!("{} handles in frame, at most 2", frame.handles.len()));
    }
    let mut seen = HashSet::new();
    for (h, handle) in frame.handles.iter().enumerate() {
        let base = format!("data[{h}]");
        if !handle.handedness.is_known() {
            report.error(&base, format!("unknown handedness {:?}", handle.handedness.as_str()));
        } else if !seen.insert(handle.handedness.clone()) {
            report.error(&base, format!("duplicate handedness {}", handle.handedness));
        }
        if handle.profiles.is_empty() {
            report.warn(format!("{base}.profiles"), "empty profiles");
        }
        for (b, button) in handle.buttons.iter().enumerate() {
            let path = format!("{base}.buttons[{b}]");
            if !(0.0..=1.0).contains(&button.value) {
                report.error(&path, format!("button value {} out of [0,1]", button.value));
            } else if button.pressed && button.value == 0.0 {
                report.warn(&path, "pressed with zero value");
            }
        }
        for (a, axis) in handle.axes.iter().enumerate() {
            if !(-1.0..=1.0).contains(axis) {
                report.error(format!("{base}.axes[{a}]"), format!("axis {axis} out of [-1,1]"));
            }
        }
        report.check_pose(&format!("{base}.pose"), &handle.pose, UNIT_NORM_TOLERANCE);
        report.check_pose(
            &format!("{base}.targetRayPose"),
            &handle.target_ray_pose,
            UNIT_NORM_TOLERANCE,
        );
    }
    report
}
