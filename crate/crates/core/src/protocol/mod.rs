//! Front-end/back-end wire format and the virtual-time link model.

mod link;
mod wire;

pub use link::{transmit, Channel, Link, LinkModel};
pub use wire::{
    decode, decode_payload, decode_stream, encode, encode_payload, split_frame, DetectRequest, DetectResponse,
    ErrorReply, WireError, WireMessage, MAX_PAYLOAD,
};
