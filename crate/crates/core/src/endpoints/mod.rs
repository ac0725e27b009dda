//! The device client, the ingestion server and the server's logs.

mod device;
mod server;
pub mod store;

use std::io;
use std::net::{Shutdown, TcpStream};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::handshake::HandshakeError;
use crate::kdf::hash;
use crate::record::{frame_read, frame_write, Frame, FrameError, FrameType, RecordError};
use crate::telemetry::{DeviceId, TelemetryError};

pub use device::{run_device, DeviceConfig, DeviceReport, Pacing};
pub use server::{spawn_server, Server, ServerConfig, ServerHandle, SessionOutcome, SessionReport};
pub use store::{SessionCtx, Store, StoreRecord};

pub const MIN_INTERVAL_MS: u64 = 100;

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("connection refused by {0}")]
    ConnectionRefused(String),
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("handshake failed: {0}")]
    Handshake(#[from] HandshakeError),
    #[error("frame error: {0}")]
    Frame(#[from] FrameError),
    #[error("record error: {0}")]
    Record(#[from] RecordError),
    #[error("telemetry error: {0}")]
    Telemetry(#[from] TelemetryError),
    #[error("unexpected {0} frame")]
    UnexpectedFrame(FrameType),
    #[error("peer aborted the session")]
    PeerAborted,
    #[error("peer went away without an authenticated close")]
    NoCloseAck,
    #[error("i/o error: {0}")]
    Io(String),
}

impl EndpointError {
    /// Short machine-readable cause, used in report lines.
    pub fn cause(&self) -> String {
        match self {
            EndpointError::ConnectionRefused(_) => "connection_refused".into(),
            EndpointError::Bind { .. } => "bind_failed".into(),
            EndpointError::Config(_) => "config".into(),
            EndpointError::Handshake(e) => e.name().into(),
            EndpointError::Frame(_) => "frame_error".into(),
            EndpointError::Record(RecordError::AuthFailure) => "AuthFailure".into(),
            EndpointError::Record(_) => "record_error".into(),
            EndpointError::Telemetry(_) => "MalformedReading".into(),
            EndpointError::UnexpectedFrame(_) => "unexpected_frame".into(),
            EndpointError::PeerAborted => "peer_aborted".into(),
            EndpointError::NoCloseAck => "no_close_ack".into(),
            EndpointError::Io(_) => "io".into(),
        }
    }
}

impl From<io::Error> for EndpointError {
    fn from(e: io::Error) -> Self {
        EndpointError::Io(e.to_string())
    }
}

/// First 8 bytes of the hash of the subject id.
pub fn device_id_for(subject: &str) -> DeviceId {
    let h = hash(subject.as_bytes());
    DeviceId(h.0[..8].try_into().unwrap())
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Sends an Abort, then half-closes and drains the socket briefly so the
/// Abort is not lost to a reset.
pub(crate) fn abort_and_close(stream: &mut TcpStream) {
    let _ = frame_write(stream, &Frame::abort());
    let _ = stream.shutdown(Shutdown::Write);
    let _ = stream.set_read_timeout(Some(Duration::from_millis(500)));
    let deadline = std::time::Instant::now() + Duration::from_secs(1);
    while std::time::Instant::now() < deadline {
        match frame_read(stream) {
            Ok(_) => continue,
            Err(_) => break,
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
}
