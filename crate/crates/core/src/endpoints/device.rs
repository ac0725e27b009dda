use std::io;
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info};

use super::{abort_and_close, device_id_for, now_ms, EndpointError, MIN_INTERVAL_MS};
use crate::credential::{Credential, Identity};
use crate::curve::CurveSuite;
use crate::handshake::Handshake;
use crate::record::{frame_read, frame_write, Frame, FrameError, FrameType, RecordReceiver, IO_TIMEOUT};
use crate::telemetry::{reading_encode, AnomalyScript, HeartRateReading, SensorParams, SensorSim};

/// How reading timestamps advance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pacing {
    /// Sleep one interval between readings and stamp them with the wall clock.
    Realtime,
    /// Send as fast as possible with timestamps `start_ms + i * interval`.
    Logical { start_ms: u64 },
}

pub struct DeviceConfig {
    pub server: String,
    pub identity: Identity,
    pub root: Credential,
    pub suite: &'static CurveSuite,
    pub interval_ms: u64,
    pub count: u64,
    pub seed: u64,
    pub sensor: SensorParams,
    pub script: AnomalyScript,
    pub pacing: Pacing,
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), EndpointError> {
        if self.interval_ms < MIN_INTERVAL_MS {
            return Err(EndpointError::Config(format!(
                "sample interval {} ms is below {MIN_INTERVAL_MS} ms",
                self.interval_ms
            )));
        }
        if self.count == 0 {
            return Err(EndpointError::Config("count must be at least 1".into()));
        }
        if self.identity.credential().suite().id() != self.suite.id() {
            return Err(EndpointError::Config(format!(
                "suite {} does not match the device credential's suite {}",
                self.suite.name(),
                self.identity.credential().suite().name()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DeviceReport {
    pub sent_count: u64,
    pub session_id: String,
    pub duration: Duration,
    /// Every reading that was sealed and written, in order.
    pub sent: Vec<HeartRateReading>,
}

enum PeerEvent {
    Close,
    Abort,
    Eof,
    Failed(EndpointError),
}

fn connect(addr: &str) -> Result<TcpStream, EndpointError> {
    match TcpStream::connect(addr) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => {
            thread::sleep(Duration::from_millis(250));
            TcpStream::connect(addr).map_err(|e| match e.kind() {
                io::ErrorKind::ConnectionRefused => EndpointError::ConnectionRefused(addr.to_string()),
                _ => e.into(),
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Reads the server's side of an established session until it ends.
fn spawn_reader(mut stream: TcpStream, mut rx: RecordReceiver, stop: Arc<AtomicBool>, events: Sender<PeerEvent>) {
    thread::spawn(move || {
        let event = loop {
            match frame_read(&mut stream) {
                Ok(f) => match f.frame_type {
                    FrameType::Abort => break PeerEvent::Abort,
                    FrameType::Close => match rx.record_open(&f) {
                        Ok(_) => break PeerEvent::Close,
                        Err(e) => break PeerEvent::Failed(e.into()),
                    },
                    other => break PeerEvent::Failed(EndpointError::UnexpectedFrame(other)),
                },
                Err(FrameError::Timeout) if !stop.load(Ordering::SeqCst) => continue,
                Err(FrameError::Closed) | Err(FrameError::Truncated) | Err(FrameError::Io(_)) => break PeerEvent::Eof,
                Err(e) => break PeerEvent::Failed(e.into()),
            }
        };
        let _ = events.send(event);
    });
}

fn event_error(ev: PeerEvent) -> EndpointError {
    match ev {
        PeerEvent::Abort => EndpointError::PeerAborted,
        PeerEvent::Close | PeerEvent::Eof => EndpointError::NoCloseAck,
        PeerEvent::Failed(e) => e,
    }
}

/// Connects, authenticates, streams `count` sealed readings and closes.
pub fn run_device(cfg: &DeviceConfig) -> Result<DeviceReport, EndpointError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut stream = connect(&cfg.server)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    let mut rng = rand::rng();

    let mut hs = Handshake::client(cfg.suite);
    let hello = hs.client_start(&mut rng)?;
    frame_write(&mut stream, &Frame::new(FrameType::ClientHello, hello))?;
    let reply = match frame_read(&mut stream)? {
        f if f.frame_type == FrameType::ServerHello => f.body,
        f if f.frame_type == FrameType::Abort => return Err(EndpointError::PeerAborted),
        f => {
            abort_and_close(&mut stream);
            return Err(EndpointError::UnexpectedFrame(f.frame_type));
        }
    };
    let (finish, keys) = match hs.client_finish(&reply, &cfg.root, &cfg.identity, &mut rng) {
        Ok(r) => r,
        Err(e) => {
            abort_and_close(&mut stream);
            return Err(e.into());
        }
    };
    frame_write(&mut stream, &Frame::new(FrameType::ClientFinish, finish))?;
    let session_id = keys.session_id.to_hex();
    let (mut tx, rx) = keys.client_directions();
    drop(keys);
    info!(
        "event=session_established server={} peer={} session={}",
        cfg.server,
        hs.peer_identity().map(|s| s.as_str()).unwrap_or("-"),
        session_id
    );

    let stop = Arc::new(AtomicBool::new(false));
    let (ev_tx, events): (Sender<PeerEvent>, Receiver<PeerEvent>) = mpsc::channel();
    spawn_reader(stream.try_clone()?, rx, Arc::clone(&stop), ev_tx);
    let finish_with = |stream: &mut TcpStream, err: EndpointError| {
        stop.store(true, Ordering::SeqCst);
        if !matches!(err, EndpointError::PeerAborted) {
            abort_and_close(stream);
        } else {
            let _ = stream.shutdown(Shutdown::Both);
        }
        Err(err)
    };

    let subject = cfg.identity.credential().subject_id().as_str().to_string();
    let mut sim = SensorSim::new(device_id_for(&subject), cfg.seed, cfg.sensor, cfg.script.clone())?;
    let mut sent = Vec::with_capacity(cfg.count.min(1 << 20) as usize);
    let clock_start = Instant::now();
    for i in 0..cfg.count {
        if let Ok(ev) = events.try_recv() {
            return finish_with(&mut stream, event_error(ev));
        }
        let now = match cfg.pacing {
            Pacing::Realtime => {
                let due = clock_start + Duration::from_millis(i * cfg.interval_ms);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
                now_ms()
            }
            Pacing::Logical { start_ms } => start_ms + i * cfg.interval_ms,
        };
        let reading = sim.sensor_next(now);
        let frame = match tx.record_seal(FrameType::Data, &reading_encode(&reading)) {
            Ok(f) => f,
            Err(e) => return finish_with(&mut stream, e.into()),
        };
        if let Err(e) = frame_write(&mut stream, &frame) {
            // A write failure usually means the server already aborted.
            let err = match events.recv_timeout(Duration::from_secs(1)) {
                Ok(ev) => event_error(ev),
                Err(_) => e.into(),
            };
            return finish_with(&mut stream, err);
        }
        debug!("event=sent index={i} ts={} bpm={}", reading.timestamp_ms, reading.bpm);
        sent.push(reading);
    }

    let close = tx.record_seal(FrameType::Close, &[])?;
    if let Err(e) = frame_write(&mut stream, &close) {
        let err = match events.recv_timeout(Duration::from_secs(1)) {
            Ok(ev) => event_error(ev),
            Err(_) => e.into(),
        };
        return finish_with(&mut stream, err);
    }
    let result = match events.recv_timeout(IO_TIMEOUT) {
        Ok(PeerEvent::Close) => Ok(()),
        Ok(ev) => Err(event_error(ev)),
        Err(RecvTimeoutError::Timeout) => Err(EndpointError::Frame(FrameError::Timeout)),
        Err(RecvTimeoutError::Disconnected) => Err(EndpointError::NoCloseAck),
    };
    if let Err(e) = result {
        return finish_with(&mut stream, e);
    }
    stop.store(true, Ordering::SeqCst);
    let _ = stream.shutdown(Shutdown::Both);
    Ok(DeviceReport {
        sent_count: sent.len() as u64,
        session_id,
        duration: started.elapsed(),
        sent,
    })
}
