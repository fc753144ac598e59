//! JSON documents for hand and handle frames.
//!
//! Serialization order follows struct declaration order, so identical frames
//! always produce identical bytes. Parsing ignores unknown fields and lists
//! every missing required field at once.

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::model::{HandFrame, HandleFrame};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JsonRejection {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("{}", .0.iter().map(|p| format!("missing {p}")).collect::<Vec<_>>().join(", "))]
    Missing(Vec<String>),
    #[error("invalid frame: {0}")]
    Invalid(String),
}

impl JsonRejection {
    pub fn reason(&self) -> &'static str {
        match self {
            JsonRejection::Malformed(_) => "malformed",
            JsonRejection::Missing(_) => "missing field",
            JsonRejection::Invalid(_) => "invalid",
        }
    }
}

const POSE_FIELDS: &[&str] = &["position", "orientation"];
const BUTTON_FIELDS: &[&str] = &["pressed", "touched", "value"];
const HANDLE_FIELDS: &[&str] = &[
    "id",
    "handedness",
    "profiles",
    "buttons",
    "axes",
    "pose",
    "targetRayPose",
];
const HAND_FIELDS: &[&str] = &["id", "handedness", "pose", "joints"];
const JOINT_FIELDS: &[&str] = &["name", "position", "orientation"];

fn require(obj: &Map<String, Value>, fields: &[&str], path: &str, missing: &mut Vec<String>) {
    for f in fields {
        if !obj.contains_key(*f) {
            missing.push(join(path, f));
        }
    }
}

fn join(path: &str, field: &str) -> String {
    if path.is_empty() {
        field.to_string()
    } else {
        format!("{path}.{field}")
    }
}

/// Walks `key` of `obj` as an array of objects, calling `each` per element.
fn each_object(obj: &Map<String, Value>, key: &str, path: &str, mut each: impl FnMut(&Map<String, Value>, &str)) {
    if let Some(Value::Array(items)) = obj.get(key) {
        for (i, item) in items.iter().enumerate() {
            if let Value::Object(o) = item {
                each(o, &format!("{}[{i}]", join(path, key)));
            }
        }
    }
}

fn check_pose(obj: &Map<String, Value>, key: &str, path: &str, missing: &mut Vec<String>) {
    if let Some(Value::Object(pose)) = obj.get(key) {
        require(pose, POSE_FIELDS, &join(path, key), missing);
    }
}

fn missing_handle_fields(root: &Map<String, Value>) -> Vec<String> {
    let mut missing = Vec::new();
    require(root, &["timestamp", "data"], "", &mut missing);
    each_object(root, "data", "", |handle, path| {
        require(handle, HANDLE_FIELDS, path, &mut missing);
        check_pose(handle, "pose", path, &mut missing);
        check_pose(handle, "targetRayPose", path, &mut missing);
        each_object(handle, "buttons", path, |button, path| {
            require(button, BUTTON_FIELDS, path, &mut missing);
        });
    });
    missing
}

fn missing_hand_fields(root: &Map<String, Value>) -> Vec<String> {
    let mut missing = Vec::new();
    require(root, &["timestamp", "data"], "", &mut missing);
    each_object(root, "data", "", |hand, path| {
        require(hand, HAND_FIELDS, path, &mut missing);
        check_pose(hand, "pose", path, &mut missing);
        each_object(hand, "joints", path, |joint, path| {
            require(joint, JOINT_FIELDS, path, &mut missing);
        });
    });
    missing
}

fn parse_with<T: DeserializeOwned>(
    text: &str,
    missing_fields: fn(&Map<String, Value>) -> Vec<String>,
) -> Result<T, JsonRejection> {
    let value: Value = serde_json::from_str(text).map_err(|e| JsonRejection::Malformed(e.to_string()))?;
    let Value::Object(root) = &value else {
        return Err(JsonRejection::Invalid("root is not an object".into()));
    };
    let missing = missing_fields(root);
    if !missing.is_empty() {
        return Err(JsonRejection::Missing(missing));
    }
    serde_json::from_value(value).map_err(|e| JsonRejection::Invalid(e.to_string()))
}

pub fn parse_handle_frame_json(text: &str) -> Result<HandleFrame, JsonRejection> {
    parse_with(text, missing_handle_fields)
}

pub fn parse_hand_frame_json(text: &str) -> Result<HandFrame, JsonRejection> {
    parse_with(text, missing_hand_fields)
}

pub fn serialize_hand_frame_json(frame: &HandFrame) -> String {
    serde_json::to_string(frame).expect("hand frame serializes")
}

pub fn serialize_handle_frame_json(frame: &HandleFrame) -> String {
    serde_json::to_string(frame).expect("handle frame serializes")
}
