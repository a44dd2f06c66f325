//! Wire formats of the `/stream` socket.

use serde::{Deserialize, Serialize};

/// Frame was rendered at a pose clamped into the hull.
pub const FLAG_CLAMPED: u32 = 1;
/// Payload is a PNG file instead of raw RGB8.
pub const FLAG_PNG: u32 = 2;

pub const HEADER_LEN: usize = 24;

/// Client request for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseMessage {
    pub seq: u32,
    /// Camera centre in meters.
    pub c: [f64; 3],
    #[serde(default)]
    pub look_at: Option<[f64; 3]>,
    #[serde(default)]
    pub up: Option<[f64; 3]>,
    #[serde(default)]
    pub k_planes: Option<usize>,
}

/// Sent instead of a frame when a message cannot be served.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub seq: Option<u32>,
    pub error: String,
}

/// Binary frame header; all fields little-endian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameHeader {
    pub seq: u32,
    pub width: u32,
    pub height: u32,
    pub render_ms: f32,
    pub planes_used: u32,
    pub flags: u32,
}

impl FrameHeader {
    pub fn clamped(&self) -> bool {
        self.flags & FLAG_CLAMPED != 0
    }

    pub fn encode(&self, payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.render_ms.to_le_bytes());
        out.extend_from_slice(&self.planes_used.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        out.extend_from_slice(payload);
        out
    }

    /// Header and payload of a frame message.
    pub fn decode(bytes: &[u8]) -> Option<(Self, &[u8])> {
        if bytes.len() < HEADER_LEN {
            return None;
        }
        let word = |i: usize| <[u8; 4]>::try_from(&bytes[i * 4..i * 4 + 4]).expect("4 bytes");
        let header = Self {
            seq: u32::from_le_bytes(word(0)),
            width: u32::from_le_bytes(word(1)),
            height: u32::from_le_bytes(word(2)),
            render_ms: f32::from_le_bytes(word(3)),
            planes_used: u32::from_le_bytes(word(4)),
            flags: u32::from_le_bytes(word(5)),
        };
        Some((header, &bytes[HEADER_LEN..]))
    }
}
