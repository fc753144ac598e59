//! Wire codecs: the binary hand datagram and the JSON frame documents.

pub mod binary;
pub mod json;

pub use binary::{EncodeError, HandPayload, PAYLOAD_LEN, Rejection, decode_hand_payload, encode_hand_payload};
pub use json::{
    JsonRejection, parse_hand_frame_json, parse_handle_frame_json, serialize_hand_frame_json,
    serialize_handle_frame_json,
};
