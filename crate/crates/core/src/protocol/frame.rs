use std::io::{self, Read, Write};

use thiserror::Error;

use super::{Message, MessageError};

/// Hard upper bound on a frame payload.
pub const MAX_FRAME_LEN: usize = 256 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame of {len} bytes exceeds the {limit}-byte limit")]
    Oversize { len: usize, limit: usize },
    #[error("stream ended {got} bytes into a {expected}-byte frame")]
    Truncated { expected: usize, got: usize },
    #[error(transparent)]
    Malformed(#[from] MessageError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl FrameError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, FrameError::Io(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
    }
}

pub fn encode_frame(m: &Message) -> Result<Vec<u8>, FrameError> {
    let payload = m.to_xml()?;
    if payload.len() > MAX_FRAME_LEN {
        return Err(FrameError::Oversize { len: payload.len(), limit: MAX_FRAME_LEN });
    }
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

fn parse_payload(payload: &[u8]) -> Result<Message, FrameError> {
    let text = std::str::from_utf8(payload).map_err(|e| MessageError(format!("payload is not UTF-8: {e}")))?;
    Ok(Message::from_xml(text)?)
}

/// Decodes the first frame of `bytes`, returning it and the bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Message, usize), FrameError> {
    if bytes.len() < 4 {
        return Err(FrameError::Truncated { expected: 4, got: bytes.len() });
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::Oversize { len, limit: MAX_FRAME_LEN });
    }
    let body = &bytes[4..];
    if body.len() < len {
        return Err(FrameError::Truncated { expected: len + 4, got: bytes.len() });
    }
    Ok((parse_payload(&body[..len])?, len + 4))
}

/// Reads until `buf` is full; returns how many bytes arrived before EOF.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

/// Reads one frame. `Ok(None)` means the stream ended cleanly between frames.
///
/// A frame whose payload is not a valid message is consumed in full before
/// `Malformed` is returned, so the stream stays aligned; an oversize frame
/// is not consumed.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Message>, FrameError> {
    let mut head = [0u8; 4];
    let got = read_full(r, &mut head)?;
    if got == 0 {
        return Ok(None);
    }
    if got < 4 {
        return Err(FrameError::Truncated { expected: 4, got });
    }
    let len = u32::from_be_bytes(head) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::Oversize { len, limit: MAX_FRAME_LEN });
    }
    let mut payload = vec![0u8; len];
    let got = read_full(r, &mut payload)?;
    if got < len {
        return Err(FrameError::Truncated { expected: len + 4, got: got + 4 });
    }
    parse_payload(&payload).map(Some)
}

pub fn write_frame(w: &mut impl Write, m: &Message) -> Result<(), FrameError> {
    w.write_all(&encode_frame(m)?)?;
    w.flush()?;
    Ok(())
}
