//! Handle buttons and axes to wrist fine-tuning and gripper commands.

use serde::{Deserialize, Serialize};

use crate::model::Handle;

/// Where a function reads its input from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    /// Held while the button at this index is pressed.
    Button(usize),
    /// Held while the axis at this index is above the axis threshold.
    AxisPositive(usize),
    /// Held while the axis at this index is below minus the threshold.
    AxisNegative(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ButtonMapping {
    /// Button whose analog value drives the gripper.
    pub gripper: Option<usize>,
    pub roll_plus: Option<Binding>,
    pub roll_minus: Option<Binding>,
    pub pitch_plus: Option<Binding>,
    pub pitch_minus: Option<Binding>,
    pub yaw_plus: Option<Binding>,
    pub yaw_minus: Option<Binding>,
    /// Radians added per frame while a function is held.
    pub step: f64,
    pub axis_threshold: f64,
}

impl Default for ButtonMapping {
    /// Standard gamepad layout: trigger at button 0, A/X and B/Y at 4 and 5,
    /// thumbstick on axes 2 and 3.
    fn default() -> Self {
        Self {
            gripper: Some(0),
            roll_plus: Some(Binding::Button(4)),
            roll_minus: Some(Binding::Button(5)),
            pitch_plus: Some(Binding::AxisNegative(3)),
            pitch_minus: Some(Binding::AxisPositive(3)),
            yaw_plus: Some(Binding::AxisNegative(2)),
            yaw_minus: Some(Binding::AxisPositive(2)),
            step: 0.01,
            axis_threshold: 0.5,
        }
    }
}

/// Per-frame wrist deltas in radians.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WristAdjust {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl WristAdjust {
    pub fn accumulate(&mut self, delta: &WristAdjust) {
        self.roll += delta.roll;
        self.pitch += delta.pitch;
        self.yaw += delta.yaw;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButtonOutput {
    pub adjust: WristAdjust,
    /// Gripper closure in `[0, 1]`.
    pub gripper: Option<f64>,
    /// Functions whose binding points at a button or axis the handle lacks.
    pub inert: Vec<&'static str>,
}

fn held(handle: &Handle, binding: Binding, threshold: f64) -> Option<bool> {
    match binding {
        Binding::Button(i) => handle.buttons.get(i).map(|b| b.pressed),
        Binding::AxisPositive(i) => handle.axes.get(i).map(|&a| a > threshold),
        Binding::AxisNegative(i) => handle.axes.get(i).map(|&a| a < -threshold),
    }
}

pub fn map_handle_buttons(handle: &Handle, mapping: &ButtonMapping) -> ButtonOutput {
    let mut inert = Vec::new();
    let mut axis = |plus: (&'static str, Option<Binding>), minus: (&'static str, Option<Binding>)| {
        let mut v = 0.0;
        for ((name, binding), sign) in [(plus, 1.0), (minus, -1.0)] {
            let Some(binding) = binding else { continue };
            match held(handle, binding, mapping.axis_threshold) {
                Some(true) => v += sign * mapping.step,
                Some(false) => {}
                None => inert.push(name),
            }
        }
        v
    };
    let adjust = WristAdjust {
        roll: axis(("roll_plus", mapping.roll_plus), ("roll_minus", mapping.roll_minus)),
        pitch: axis(("pitch_plus", mapping.pitch_plus), ("pitch_minus", mapping.pitch_minus)),
        yaw: axis(("yaw_plus", mapping.yaw_plus), ("yaw_minus", mapping.yaw_minus)),
    };
    let gripper = match mapping.gripper {
        Some(i) => match handle.buttons.get(i) {
            Some(b) => Some(b.value.clamp(0.0, 1.0)),
            None => {
                inert.push("gripper");
                None
            }
        },
        None => None,
    };
    ButtonOutput { adjust, gripper, inert }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ButtonState, Pose};

    fn handle(buttons: usize) -> Handle {
        Handle {
            id: "right".into(),
            handedness: "right".into(),
            profiles: vec!["pico-neo3".into()],
            buttons: vec![ButtonState::default(); buttons],
            axes: vec![0.0; 4],
            pose: Pose::IDENTITY,
            target_ray_pose: Pose::IDENTITY,
        }
    }

    #[test]
    fn trigger_passes_through() {
        let mut h = handle(6);
        h.buttons[0].value = 0.7;
        let out = map_handle_buttons(&h, &ButtonMapping::default());
        assert_eq!(out.gripper, Some(0.7));
    }

    #[test]
    fn idle_handle_has_zero_deltas() {
        let out = map_handle_buttons(&handle(6), &ButtonMapping::default());
        assert_eq!(out.adjust, WristAdjust::default());
        assert!(out.inert.is_empty());
    }

    #[test]
    fn roll_held_for_ten_frames() {
        let mut h = handle(6);
        h.buttons[4].pressed = true;
        let mapping = ButtonMapping::default();
        let mut total = WristAdjust::default();
        for _ in 0..10 {
            total.accumulate(&map_handle_buttons(&h, &mapping).adjust);
        }
        assert!((total.roll - 0.1).abs() < 1e-12);
        assert_eq!(total.pitch, 0.0);
    }

    #[test]
    fn thumbstick_drives_yaw_and_pitch() {
        let mut h = handle(6);
        h.axes[2] = -0.9;
        h.axes[3] = 0.8;
        let out = map_handle_buttons(&h, &ButtonMapping::default());
        assert_eq!(out.adjust.yaw, 0.01);
        assert_eq!(out.adjust.pitch, -0.01);
    }

    #[test]
    fn missing_button_is_inert() {
        let mut h = handle(2);
        h.axes.clear();
        let out = map_handle_buttons(&h, &ButtonMapping::default());
        assert_eq!(out.adjust, WristAdjust::default());
        assert!(out.inert.contains(&"roll_plus"));
        assert!(out.inert.contains(&"yaw_minus"));
        assert_eq!(out.gripper, Some(0.0));
    }
}
