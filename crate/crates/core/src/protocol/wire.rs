//! Length-prefixed canonical JSON messages.
//!
//! A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
//! object. Object keys are sorted and there is no insignificant whitespace,
//! so equal messages always encode to equal bytes. The message variant is
//! carried in the `type` key.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::attrs::SemanticQuery;
use crate::backend::{BackendTimings, Detection};
use crate::image::Frame;

pub const MAX_PAYLOAD: usize = u32::MAX as usize;

const VARIANTS: [&str; 5] = ["DetectRequest", "DetectResponse", "Ping", "Pong", "ErrorReply"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("payload of {0} bytes exceeds the 4-byte length prefix")]
    PayloadTooLarge(usize),
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("bad payload: {0}")]
    BadPayload(String),
    #[error("unknown message variant {0:?}")]
    UnknownVariant(String),
}

impl WireError {
    pub fn code(&self) -> &'static str {
        match self {
            WireError::PayloadTooLarge(_) => "payload_too_large",
            WireError::BadFrame(_) => "bad_frame",
            WireError::BadPayload(_) => "bad_payload",
            WireError::UnknownVariant(_) => "unknown_variant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub request_id: u64,
    pub query: SemanticQuery,
    pub frame_index: u64,
    pub width: u32,
    pub height: u32,
    /// Base64 (standard alphabet, padded) of the 8-bit grayscale buffer.
    pub image_b64: String,
}

impl DetectRequest {
    pub fn from_frame(request_id: u64, query: SemanticQuery, frame: &Frame) -> Self {
        Self {
            request_id,
            query,
            frame_index: frame.index,
            width: frame.width,
            height: frame.height,
            image_b64: B64.encode(&frame.pixels),
        }
    }

    /// Decodes the carried image. The timestamp is not on the wire and reads as 0.
    pub fn frame(&self) -> Result<Frame, WireError> {
        let pixels = B64
            .decode(self.image_b64.as_bytes())
            .map_err(|e| WireError::BadPayload(alloc::format!("image_b64: {e}")))?;
        Frame::new(self.frame_index, 0.0, self.width, self.height, pixels)
            .map_err(|e| WireError::BadPayload(alloc::format!("image_b64: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub request_id: u64,
    pub detections: Vec<Detection>,
    pub timings: BackendTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub request_id: u64,
    pub code: String,
    pub message: String,
}

impl ErrorReply {
    pub fn for_error(request_id: u64, err: &WireError) -> Self {
        Self { request_id, code: err.code().into(), message: err.to_string() }
    }
}

impl From<DetectRequest> for WireMessage {
    fn from(r: DetectRequest) -> Self {
        WireMessage::DetectRequest(r)
    }
}

impl From<DetectResponse> for WireMessage {
    fn from(r: DetectResponse) -> Self {
        WireMessage::DetectResponse(r)
    }
}

impl From<ErrorReply> for WireMessage {
    fn from(e: ErrorReply) -> Self {
        WireMessage::ErrorReply(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum WireMessage {
    DetectRequest(DetectRequest),
    DetectResponse(DetectResponse),
    Ping { request_id: u64 },
    Pong { request_id: u64 },
    ErrorReply(ErrorReply),
}

impl WireMessage {
    pub fn request_id(&self) -> u64 {
        match self {
            WireMessage::DetectRequest(m) => m.request_id,
            WireMessage::DetectResponse(m) => m.request_id,
            WireMessage::Ping { request_id } | WireMessage::Pong { request_id } => *request_id,
            WireMessage::ErrorReply(m) => m.request_id,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            WireMessage::DetectRequest(_) => "DetectRequest",
            WireMessage::DetectResponse(_) => "DetectResponse",
            WireMessage::Ping { .. } => "Ping",
            WireMessage::Pong { .. } => "Pong",
            WireMessage::ErrorReply(_) => "ErrorReply",
        }
    }

    fn validate(&self) -> Result<(), WireError> {
        match self {
            WireMessage::DetectRequest(r) => {
                if r.query.superset_class.trim().is_empty() {
                    return Err(WireError::BadPayload("query.superset_class is empty".into()));
                }
                r.frame().map(|_| ())
            }
            WireMessage::DetectResponse(r) => {
                for (i, d) in r.detections.iter().enumerate() {
                    if !d.bbox.is_valid() {
                        return Err(WireError::BadPayload(alloc::format!("detections[{i}].box is degenerate")));
                    }
                    if !(0.0..=1.0).contains(&d.detector_score) {
                        return Err(WireError::BadPayload(alloc::format!(
                            "detections[{i}].detector_score outside [0, 1]"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Canonical JSON payload of `msg` (no length prefix).
pub fn encode_payload(msg: &WireMessage) -> Vec<u8> {
    let mut value = serde_json::to_value(msg).expect("wire messages serialize to JSON");
    value.sort_all_objects();
    serde_json::to_vec(&value).expect("JSON values serialize")
}

pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, WireError> {
    let payload = encode_payload(msg);
    if payload.len() > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// A complete frame and the bytes after it.
pub type FrameSplit<'a> = (&'a [u8], &'a [u8]);

/// Splits one complete frame off the front of `buf`. `Ok(None)` means more
/// bytes are needed.
pub fn split_frame(buf: &[u8]) -> Result<Option<FrameSplit<'_>>, WireError> {
    if buf.len() < 4 {
        return Ok(None);
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if buf.len() - 4 < len {
        return Ok(None);
    }
    Ok(Some((&buf[4..4 + len], &buf[4 + len..])))
}

/// Decodes exactly one framed message.
pub fn decode(bytes: &[u8]) -> Result<WireMessage, WireError> {
    if bytes.len() < 4 {
        return Err(WireError::BadFrame(alloc::format!("{} bytes is shorter than the length prefix", bytes.len())));
    }
    let declared = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if declared != bytes.len() - 4 {
        return Err(WireError::BadFrame(alloc::format!(
            "length prefix says {declared} bytes, {} present",
            bytes.len() - 4
        )));
    }
    decode_payload(&bytes[4..])
}

/// Decodes a concatenation of frames, in order.
pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<WireMessage>, WireError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        match split_frame(bytes)? {
            Some((payload, rest)) => {
                out.push(decode_payload(payload)?);
                bytes = rest;
            }
            None => return Err(WireError::BadFrame(alloc::format!("{} trailing bytes", bytes.len()))),
        }
    }
    Ok(out)
}

pub fn decode_payload(payload: &[u8]) -> Result<WireMessage, WireError> {
    let value: Value = serde_json::from_slice(payload).map_err(|e| WireError::BadPayload(e.to_string()))?;
    let tag = value
        .as_object()
        .ok_or_else(|| WireError::BadPayload("payload is not a JSON object".into()))?
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| WireError::BadPayload("missing string field \"type\"".into()))?;
    if !VARIANTS.contains(&tag) {
        return Err(WireError::UnknownVariant(tag.into()));
    }
    let msg: WireMessage = serde_json::from_value(value).map_err(|e| WireError::BadPayload(e.to_string()))?;
    msg.validate()?;
    Ok(msg)
}
