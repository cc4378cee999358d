//! Message set, wire codecs, the simulated radio channel and bandwidth math.

mod bandwidth;
pub mod binary;
mod channel;
pub mod json;
mod message;

pub use bandwidth::{bandwidth_report, future_path_packet_bytes, BandwidthReport, MAX_UDP_PAYLOAD};
pub use channel::{Channel, ChannelConfig, ChannelStats, Destination, Envelope, NodeId};
pub use message::{Message, MessageKind};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("path has {0} points, at most 120 fit in one message")]
    TooManyPoints(usize),
    #[error("{field} value {value} does not fit the wire encoding")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("initiation messages must target a coordinated mode")]
    InitiationToAuto,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("buffer truncated: needed {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("malformed JSON at line {line}, column {column}: {reason}")]
    Json { line: usize, column: usize, reason: String },
}
