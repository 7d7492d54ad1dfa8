//! Length-prefixed framing shared by the orderer link and the node RPC.
//!
//! Layout: a 4-byte big-endian length `L`, then `L` bytes made of a 1-byte
//! message type followed by the canonical-encoded payload. `L` therefore
//! counts the type byte; an empty-payload frame has `L == 1`.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{decode_canonical, to_canonical_bytes, CanonicalError, Doc};
use crate::contracts::Audience;

/// Frames larger than this are refused rather than buffered.
pub const MAX_FRAME_LEN: u32 = 64 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    SubmitTx = 0x01,
    Block = 0x02,
    Ack = 0x03,
    EventSub = 0x04,
    Event = 0x05,
    RpcRequest = 0x06,
    RpcResponse = 0x07,
}

impl MessageType {
    pub fn from_byte(b: u8) -> Option<MessageType> {
        Some(match b {
            0x01 => MessageType::SubmitTx,
            0x02 => MessageType::Block,
            0x03 => MessageType::Ack,
            0x04 => MessageType::EventSub,
            0x05 => MessageType::Event,
            0x06 => MessageType::RpcRequest,
            0x07 => MessageType::RpcResponse,
            _ => return None,
        })
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("frame length {0} out of range")]
    BadLength(u32),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("expected {expected:?}, got {got:?}")]
    Unexpected { expected: MessageType, got: MessageType },
    #[error("payload: {0}")]
    Payload(#[from] CanonicalError),
}

impl WireError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, WireError::Io(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: MessageType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode<T: Serialize>(kind: MessageType, value: &T) -> Result<Frame, WireError> {
        Ok(Frame { kind, payload: to_canonical_bytes(value)? })
    }

    pub fn decode<T: DeserializeOwned + Serialize>(&self, expected: MessageType) -> Result<T, WireError> {
        if self.kind != expected {
            return Err(WireError::Unexpected { expected, got: self.kind });
        }
        Ok(decode_canonical(&self.payload)?)
    }

    /// Bytes this frame occupies on the wire.
    pub fn wire_len(&self) -> usize {
        5 + self.payload.len()
    }
}

/// Writes one frame and returns the number of bytes written.
pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<usize, WireError> {
    let len = u32::try_from(frame.payload.len() + 1).map_err(|_| WireError::BadLength(u32::MAX))?;
    if len > MAX_FRAME_LEN {
        return Err(WireError::BadLength(len));
    }
    let mut buf = Vec::with_capacity(frame.wire_len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.push(frame.kind as u8);
    buf.extend_from_slice(&frame.payload);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(buf.len())
}

/// Reads one frame. `Ok(None)` is a clean end of stream at a frame boundary.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, WireError> {
    let mut head = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut head[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(head);
    if len == 0 || len > MAX_FRAME_LEN {
        return Err(WireError::BadLength(len));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    let kind = MessageType::from_byte(body[0]).ok_or(WireError::UnknownType(body[0]))?;
    body.remove(0);
    Ok(Some(Frame { kind, payload: body }))
}

/// Reply to `SubmitTx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub tx_id: crate::ledger::Digest,
    pub accepted: bool,
    pub code: Option<String>,
}

/// What an `EventSub` frame asks for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stream", rename_all = "snake_case")]
pub enum Subscription {
    /// Committed blocks from `from_height` onwards, delivered as `Block` frames.
    Blocks { from_height: u64 },
    /// Committed events from `from_height` onwards, delivered as `Event` frames.
    Events { from_height: u64, audience: Option<Audience> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcRequest {
    pub id: u64,
    pub method: String,
    pub params: Doc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: String,
    pub message: String,
}

impl RpcError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> RpcError {
        RpcError { code: code.into(), message: message.into() }
    }
}

impl std::fmt::Display for RpcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for RpcError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcResponse {
    pub id: u64,
    pub result: Option<Doc>,
    pub error: Option<RpcError>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn length_counts_type_byte() {
        let mut out = Vec::new();
        let n = write_frame(&mut out, &Frame { kind: MessageType::Ack, payload: b"{}".to_vec() }).unwrap();
        assert_eq!(out, [0, 0, 0, 3, 0x03, b'{', b'}']);
        assert_eq!(n, 7);
    }

    #[test]
    fn clean_eof_and_torn_frame() {
        assert!(read_frame(&mut &b""[..]).unwrap().is_none());
        assert!(read_frame(&mut &[0u8, 0, 0, 5, 1, b'{'][..]).is_err());
        assert!(matches!(read_frame(&mut &[0u8, 0, 0, 1, 0x09][..]), Err(WireError::UnknownType(9))));
        assert!(matches!(read_frame(&mut &[0u8, 0, 0, 0][..]), Err(WireError::BadLength(0))));
    }

    #[test]
    fn subscription_shape() {
        let f = Frame::encode(MessageType::EventSub, &Subscription::Events { from_height: 3, audience: Some(Audience::Developers) }).unwrap();
        assert_eq!(
            std::str::from_utf8(&f.payload).unwrap(),
            r#"{"audience":"Developers","from_height":3,"stream":"events"}"#
        );
    }

    proptest! {
        #[test]
        fn frames_concatenate(payloads in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..300), 0..8)) {
            let mut buf = Vec::new();
            let mut total = 0;
            for p in &payloads {
                total += write_frame(&mut buf, &Frame { kind: MessageType::Event, payload: p.clone() }).unwrap();
            }
            prop_assert_eq!(total, buf.len());
            let mut r = &buf[..];
            for p in &payloads {
                prop_assert_eq!(&read_frame(&mut r).unwrap().unwrap().payload, p);
            }
            prop_assert!(read_frame(&mut r).unwrap().is_none());
        }
    }
}
