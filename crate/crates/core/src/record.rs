//! Framing and the sealed record layer.
//!
//! Frame layout: `A5 5A ‖ version(1) ‖ type(1) ‖ length(BE32) ‖ body`.
//!
//! Post-handshake records carry `ciphertext ‖ tag` as the body. Sequence
//! numbers are implicit: each direction counts records from zero, and the
//! count goes into both the nonce (`salt ‖ seq`) and the AAD
//! (`magic ‖ version ‖ type ‖ seq`). A replayed, reordered or dropped frame
//! therefore fails authentication at the receiver, and any such failure is
//! fatal for the connection.

use std::fmt;
use std::io::{self, Read, Write};
use std::time::Duration;

use thiserror::Error;
use zeroize::Zeroize;

use crate::aead::{self, AeadError, AeadKey, SealedRecord, MAX_PLAINTEXT, NONCE_LEN, TAG_LEN};

pub const MAGIC: [u8; 2] = [0xa5, 0x5a];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const MAX_BODY: usize = 65_600;
/// Inactivity limit applied to every blocking frame read.
pub const IO_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    ClientHello = 0x01,
    ServerHello = 0x02,
    ClientFinish = 0x03,
    Data = 0x10,
    Close = 0x11,
    Abort = 0x1f,
}

impl FrameType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0x01 => FrameType::ClientHello,
            0x02 => FrameType::ServerHello,
            0x03 => FrameType::ClientFinish,
            0x10 => FrameType::Data,
            0x11 => FrameType::Close,
            0x1f => FrameType::Abort,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FrameType::ClientHello => "client_hello",
            FrameType::ServerHello => "server_hello",
            FrameType::ClientFinish => "client_finish",
            FrameType::Data => "data",
            FrameType::Close => "close",
            FrameType::Abort => "abort",
        }
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub frame_type: FrameType,
    pub body: Vec<u8>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Frame({}, {} bytes)", self.frame_type, self.body.len())
    }
}

impl Frame {
    pub fn new(frame_type: FrameType, body: Vec<u8>) -> Self {
        Frame { frame_type, body }
    }

    /// Abort frames never carry a reason.
    pub fn abort() -> Self {
        Frame::new(FrameType::Abort, Vec::new())
    }

    pub fn header(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[..2].copy_from_slice(&MAGIC);
        h[2] = VERSION;
        h[3] = self.frame_type as u8;
        h[4..].copy_from_slice(&(self.body.len() as u32).to_be_bytes());
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.body.len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.body);
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad frame magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported frame version {0}")]
    BadVersion(u8),
    #[error("unknown frame type 0x{0:02x}")]
    MalformedFrame(u8),
    #[error("declared body length {0} exceeds {MAX_BODY}")]
    OversizeFrame(u32),
    #[error("timed out waiting for the peer")]
    Timeout,
    /// EOF exactly on a frame boundary.
    #[error("stream closed")]
    Closed,
    /// EOF inside a frame.
    #[error("stream ended mid-frame")]
    Truncated,
    #[error("i/o error: {0}")]
    Io(String),
}

fn map_io(e: io::Error) -> FrameError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => FrameError::Timeout,
        io::ErrorKind::UnexpectedEof => FrameError::Truncated,
        _ => FrameError::Io(e.to_string()),
    }
}

/// Reads one frame. The caller sets the stream's read timeout (see
/// [`IO_TIMEOUT`]); an expired timeout surfaces as [`FrameError::Timeout`].
pub fn frame_read<R: Read + ?Sized>(r: &mut R) -> Result<Frame, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    let first = loop {
        match r.read(&mut header[..1]) {
            Ok(n) => break n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(map_io(e)),
        }
    };
    if first == 0 {
        return Err(FrameError::Closed);
    }
    r.read_exact(&mut header[1..]).map_err(map_io)?;
    if header[..2] != MAGIC {
        return Err(FrameError::BadMagic([header[0], header[1]]));
    }
    if header[2] != VERSION {
        return Err(FrameError::BadVersion(header[2]));
    }
    let frame_type = FrameType::from_u8(header[3]).ok_or(FrameError::MalformedFrame(header[3]))?;
    let len = u32::from_be_bytes(header[4..].try_into().unwrap());
    if len as usize > MAX_BODY {
        return Err(FrameError::OversizeFrame(len));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).map_err(map_io)?;
    Ok(Frame { frame_type, body })
}

pub fn frame_write<W: Write + ?Sized>(w: &mut W, frame: &Frame) -> Result<(), FrameError> {
    if frame.body.len() > MAX_BODY {
        return Err(FrameError::OversizeFrame(frame.body.len() as u32));
    }
    // One buffer, one write: frames never interleave on a shared stream.
    w.write_all(&frame.to_bytes()).map_err(map_io)?;
    w.flush().map_err(map_io)
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RecordError {
    #[error("record authentication failed")]
    AuthFailure,
    #[error("malformed record frame")]
    MalformedFrame,
    #[error("payload too large")]
    PayloadTooLarge,
    #[error("sequence number space exhausted")]
    SequenceExhausted,
    #[error("direction already closed")]
    Closed,
    #[error("direction unusable after a fatal error")]
    Dead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Open,
    Closed,
    Dead,
}

/// Key, nonce salt and sequence counter for one direction.
struct DirectionState {
    key: AeadKey,
    salt: [u8; 4],
    seq: u64,
    status: Status,
}

impl DirectionState {
    fn new(key: AeadKey, salt: [u8; 4]) -> Self {
        DirectionState {
            key,
            salt,
            seq: 0,
            status: Status::Open,
        }
    }

    fn check_usable(&self) -> Result<(), RecordError> {
        match self.status {
            Status::Open => {}
            Status::Closed => return Err(RecordError::Closed),
            Status::Dead => return Err(RecordError::Dead),
        }
        if self.seq == u64::MAX {
            return Err(RecordError::SequenceExhausted);
        }
        Ok(())
    }

    fn nonce(&self) -> [u8; NONCE_LEN] {
        let mut n = [0u8; NONCE_LEN];
        n[..4].copy_from_slice(&self.salt);
        n[4..].copy_from_slice(&self.seq.to_be_bytes());
        n
    }

    fn kill(&mut self) {
        self.key.zeroize();
        self.salt.zeroize();
        self.status = Status::Dead;
    }
}

impl Drop for DirectionState {
    fn drop(&mut self) {
        self.salt.zeroize();
    }
}

/// `magic ‖ version ‖ type ‖ seq(BE64)`
pub fn record_aad(frame_type: FrameType, seq: u64) -> [u8; 12] {
    let mut aad = [0u8; 12];
    aad[..2].copy_from_slice(&MAGIC);
    aad[2] = VERSION;
    aad[3] = frame_type as u8;
    aad[4..].copy_from_slice(&seq.to_be_bytes());
    aad
}

fn sealable(frame_type: FrameType) -> bool {
    matches!(frame_type, FrameType::Data | FrameType::Close)
}

/// Sending half of a session.
pub struct RecordSender(DirectionState);

impl RecordSender {
    pub fn new(key: AeadKey, salt: [u8; 4]) -> Self {
        RecordSender(DirectionState::new(key, salt))
    }

    pub fn sequence(&self) -> u64 {
        self.0.seq
    }

    pub fn record_seal(&mut self, frame_type: FrameType, payload: &[u8]) -> Result<Frame, RecordError> {
        let st = &mut self.0;
        st.check_usable()?;
        if !sealable(frame_type) {
            return Err(RecordError::MalformedFrame);
        }
        let aad = record_aad(frame_type, st.seq);
        let sealed = aead::seal(&st.key, &st.nonce(), &aad, payload).map_err(|_| RecordError::PayloadTooLarge)?;
        st.seq += 1;
        if frame_type == FrameType::Close {
            st.status = Status::Closed;
        }
        Ok(Frame::new(frame_type, sealed.to_bytes()))
    }

    /// Wipes the key; later calls fail with [`RecordError::Dead`].
    pub fn destroy(&mut self) {
        self.0.kill();
    }

    #[cfg(test)]
    fn set_sequence(&mut self, seq: u64) {
        self.0.seq = seq;
    }
}

/// Receiving half of a session.
pub struct RecordReceiver(DirectionState);

impl RecordReceiver {
    pub fn new(key: AeadKey, salt: [u8; 4]) -> Self {
        RecordReceiver(DirectionState::new(key, salt))
    }

    pub fn sequence(&self) -> u64 {
        self.0.seq
    }

    pub fn is_closed(&self) -> bool {
        self.0.status == Status::Closed
    }

    /// Authenticates and decrypts one record. Any failure wipes the key and
    /// leaves the receiver permanently dead; the caller must abort.
    pub fn record_open(&mut self, frame: &Frame) -> Result<(FrameType, Vec<u8>), RecordError> {
        let st = &mut self.0;
        st.check_usable()?;
        if !sealable(frame.frame_type) || frame.body.len() < TAG_LEN || frame.body.len() > MAX_PLAINTEXT + TAG_LEN {
            st.kill();
            return Err(RecordError::MalformedFrame);
        }
        let record = SealedRecord::from_bytes(&frame.body).expect("length checked");
        let aad = record_aad(frame.frame_type, st.seq);
        match aead::open(&st.key, &st.nonce(), &aad, &record) {
            Ok(payload) => {
                st.seq += 1;
                if frame.frame_type == FrameType::Close {
                    st.status = Status::Closed;
                }
                Ok((frame.frame_type, payload))
            }
            Err(AeadError::AuthFailure) | Err(AeadError::PayloadTooLarge) => {
                st.kill();
                Err(RecordError::AuthFailure)
            }
        }
    }

    #[cfg(test)]
    fn set_sequence(&mut self, seq: u64) {
        self.0.seq = seq;
    }
}
