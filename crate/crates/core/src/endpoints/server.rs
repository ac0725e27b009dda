use std::collections::HashMap;
use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{info, warn};

use super::store::{SessionCtx, Store};
use super::{abort_and_close, now_ms, EndpointError};
use crate::credential::{Credential, Identity};
use crate::handshake::Handshake;
use crate::record::{frame_read, frame_write, Frame, FrameError, FrameType, RecordError, IO_TIMEOUT};
use crate::telemetry::{reading_decode, AnomalyConfig, AnomalyDetector};

pub struct ServerConfig {
    pub listen: String,
    pub identity: Identity,
    pub root: Credential,
    pub store_dir: PathBuf,
    pub anomaly: AnomalyConfig,
    pub fsync: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SessionOutcome {
    /// The device sent an authenticated Close.
    Closed,
    /// The stream ended without an authenticated Close.
    SuspiciousTermination,
    RecordAuthFailure,
    HandshakeFailed(String),
    PeerAborted,
    ProtocolError(String),
    StoreError(String),
    Timeout,
    Shutdown,
}

impl SessionOutcome {
    pub fn name(&self) -> String {
        match self {
            SessionOutcome::Closed => "closed".into(),
            SessionOutcome::SuspiciousTermination => "suspicious_termination".into(),
            SessionOutcome::RecordAuthFailure => "AuthFailure".into(),
            SessionOutcome::HandshakeFailed(n) => n.clone(),
            SessionOutcome::PeerAborted => "peer_aborted".into(),
            SessionOutcome::ProtocolError(_) => "protocol_error".into(),
            SessionOutcome::StoreError(_) => "store_error".into(),
            SessionOutcome::Timeout => "timeout".into(),
            SessionOutcome::Shutdown => "shutdown".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SessionReport {
    pub peer: SocketAddr,
    pub subject_id: Option<String>,
    pub session_id: Option<String>,
    pub records: u64,
    pub alerts: u64,
    pub outcome: SessionOutcome,
}

struct Shared {
    identity: Identity,
    root: Credential,
    store: Store,
    anomaly: AnomalyConfig,
    shutdown: Arc<AtomicBool>,
    reports: Mutex<Option<Sender<SessionReport>>>,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Server {
    /// Opens the store and binds the listener.
    pub fn bind(cfg: ServerConfig) -> Result<Self, EndpointError> {
        AnomalyDetector::new(cfg.anomaly).map_err(|e| EndpointError::Config(e.to_string()))?;
        let store = Store::open(&cfg.store_dir, cfg.fsync)
            .map_err(|e| EndpointError::Config(format!("store dir {}: {e}", cfg.store_dir.display())))?;
        let listener = TcpListener::bind(&cfg.listen).map_err(|e| EndpointError::Bind {
            addr: cfg.listen.clone(),
            reason: e.to_string(),
        })?;
        listener.set_nonblocking(true)?;
        Ok(Server {
            listener,
            shared: Arc::new(Shared {
                identity: cfg.identity,
                root: cfg.root,
                store,
                anomaly: cfg.anomaly,
                shutdown: Arc::new(AtomicBool::new(false)),
                reports: Mutex::new(None),
            }),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Setting the flag makes [`Server::run`] return.
    pub fn shutdown_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shared.shutdown)
    }

    /// Every finished session is reported on the returned channel.
    pub fn session_reports(&self) -> Receiver<SessionReport> {
        let (tx, rx) = mpsc::channel();
        *self.shared.reports.lock().unwrap() = Some(tx);
        rx
    }

    /// Accepts connections until the shutdown flag is set, then closes the
    /// open sessions and flushes the logs.
    pub fn run(&self) -> Result<(), EndpointError> {
        info!("event=listening addr={}", self.local_addr()?);
        let open: Arc<Mutex<HashMap<u64, TcpStream>>> = Arc::default();
        let next_id = AtomicU64::new(0);
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !self.shared.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let id = next_id.fetch_add(1, Ordering::Relaxed);
                    if let Ok(clone) = stream.try_clone() {
                        open.lock().unwrap().insert(id, clone);
                    }
                    let shared = Arc::clone(&self.shared);
                    let open = Arc::clone(&open);
                    workers.push(thread::spawn(move || {
                        let report = handle_connection(stream, peer, &shared);
                        open.lock().unwrap().remove(&id);
                        log_report(&report);
                        if let Some(tx) = shared.reports.lock().unwrap().as_ref() {
                            let _ = tx.send(report);
                        }
                    }));
                    workers.retain(|w| !w.is_finished());
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => warn!("event=accept_failed error={e:?}"),
            }
        }
        for stream in open.lock().unwrap().values() {
            let _ = stream.shutdown(Shutdown::Both);
        }
        for w in workers {
            let _ = w.join();
        }
        self.shared.store.flush()?;
        info!("event=stopped");
        Ok(())
    }
}

fn log_report(r: &SessionReport) {
    let line = format!(
        "event=session_end peer={} subject={} session={} records={} alerts={} outcome={}",
        r.peer,
        r.subject_id.as_deref().unwrap_or("-"),
        r.session_id.as_deref().unwrap_or("-"),
        r.records,
        r.alerts,
        r.outcome.name()
    );
    match &r.outcome {
        SessionOutcome::Closed | SessionOutcome::Shutdown => info!("{line}"),
        SessionOutcome::SuspiciousTermination => warn!("{line} detail=\"no authenticated close\""),
        SessionOutcome::ProtocolError(d) | SessionOutcome::StoreError(d) => warn!("{line} detail={d:?}"),
        _ => warn!("{line}"),
    }
}

fn handle_connection(mut stream: TcpStream, peer: SocketAddr, shared: &Shared) -> SessionReport {
    let mut report = SessionReport {
        peer,
        subject_id: None,
        session_id: None,
        records: 0,
        alerts: 0,
        outcome: SessionOutcome::Closed,
    };
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(IO_TIMEOUT));
    report.outcome = serve_session(&mut stream, shared, &mut report);
    if report.outcome != SessionOutcome::Closed && shared.shutdown.load(Ordering::SeqCst) {
        report.outcome = SessionOutcome::Shutdown;
    }
    report
}

fn read_error_outcome(e: &FrameError, shared: &Shared) -> SessionOutcome {
    if shared.shutdown.load(Ordering::SeqCst) {
        return SessionOutcome::Shutdown;
    }
    match e {
        FrameError::Closed | FrameError::Truncated | FrameError::Io(_) => SessionOutcome::SuspiciousTermination,
        FrameError::Timeout => SessionOutcome::Timeout,
        other => SessionOutcome::ProtocolError(other.to_string()),
    }
}

fn handshake_frame(stream: &mut TcpStream, want: FrameType) -> Result<Vec<u8>, String> {
    match frame_read(stream) {
        Ok(f) if f.frame_type == want => Ok(f.body),
        Ok(f) if f.frame_type == FrameType::Abort => Err("PeerAborted".into()),
        Ok(f) => Err(format!("Unexpected{}", f.frame_type)),
        Err(FrameError::Timeout) => Err("Timeout".into()),
        Err(FrameError::Closed) | Err(FrameError::Truncated) | Err(FrameError::Io(_)) => Err("PeerClosed".into()),
        Err(e) => Err(format!("{e:?}")),
    }
}

fn serve_session(stream: &mut TcpStream, shared: &Shared, report: &mut SessionReport) -> SessionOutcome {
    let mut rng = rand::rng();
    let mut hs = Handshake::server();

    let hello = match handshake_frame(stream, FrameType::ClientHello) {
        Ok(b) => b,
        Err(name) => {
            abort_and_close(stream);
            return SessionOutcome::HandshakeFailed(name);
        }
    };
    let reply = match hs.server_respond(&hello, &shared.identity, &mut rng) {
        Ok(r) => r,
        Err(e) => {
            abort_and_close(stream);
            return SessionOutcome::HandshakeFailed(e.name().into());
        }
    };
    if frame_write(stream, &Frame::new(FrameType::ServerHello, reply)).is_err() {
        return SessionOutcome::HandshakeFailed("PeerClosed".into());
    }
    let finish = match handshake_frame(stream, FrameType::ClientFinish) {
        Ok(b) => b,
        Err(name) => {
            abort_and_close(stream);
            return SessionOutcome::HandshakeFailed(name);
        }
    };
    let (keys, subject) = match hs.server_complete(&finish, &shared.root) {
        Ok(k) => k,
        Err(e) => {
            abort_and_close(stream);
            return SessionOutcome::HandshakeFailed(e.name().into());
        }
    };
    let ctx = SessionCtx {
        session_id: keys.session_id.to_hex(),
        subject_id: subject.as_str().to_string(),
    };
    report.subject_id = Some(ctx.subject_id.clone());
    report.session_id = Some(ctx.session_id.clone());
    info!(
        "event=session_established peer={} subject={} session={}",
        report.peer, ctx.subject_id, ctx.session_id
    );
    let (mut tx, mut rx) = keys.server_directions();
    drop(keys);

    let mut detector = AnomalyDetector::new(shared.anomaly).expect("validated at bind");
    let mut last_ts = 0u64;
    let fatal = |stream: &mut TcpStream, tx: &mut crate::record::RecordSender, outcome| {
        tx.destroy();
        abort_and_close(stream);
        outcome
    };
    loop {
        let frame = match frame_read(stream) {
            Ok(f) => f,
            Err(e) => {
                let outcome = read_error_outcome(&e, shared);
                if !matches!(outcome, SessionOutcome::SuspiciousTermination | SessionOutcome::Shutdown) {
                    return fatal(stream, &mut tx, outcome);
                }
                tx.destroy();
                return outcome;
            }
        };
        match frame.frame_type {
            FrameType::Data | FrameType::Close => {}
            FrameType::Abort => {
                tx.destroy();
                return SessionOutcome::PeerAborted;
            }
            other => return fatal(stream, &mut tx, SessionOutcome::ProtocolError(format!("unexpected {other} frame"))),
        }
        let (kind, payload) = match rx.record_open(&frame) {
            Ok(opened) => opened,
            Err(RecordError::AuthFailure) => return fatal(stream, &mut tx, SessionOutcome::RecordAuthFailure),
            Err(e) => return fatal(stream, &mut tx, SessionOutcome::ProtocolError(e.to_string())),
        };
        if kind == FrameType::Close {
            let ack = tx.record_seal(FrameType::Close, &[]);
            if let Ok(ack) = ack {
                let _ = frame_write(stream, &ack);
            }
            let _ = stream.shutdown(Shutdown::Both);
            return SessionOutcome::Closed;
        }
        let reading = match reading_decode(&payload) {
            Ok(r) => r,
            Err(e) => return fatal(stream, &mut tx, SessionOutcome::ProtocolError(e.to_string())),
        };
        if reading.timestamp_ms < last_ts {
            return fatal(stream, &mut tx, SessionOutcome::ProtocolError("timestamp went backwards".into()));
        }
        last_ts = reading.timestamp_ms;
        if let Err(e) = shared.store.persist_reading(&ctx, &reading, now_ms()) {
            return fatal(stream, &mut tx, SessionOutcome::StoreError(e.to_string()));
        }
        report.records += 1;
        if let Some(alert) = detector.anomaly_check(&reading) {
            report.alerts += 1;
            if let Err(e) = shared.store.raise_alert(&alert) {
                warn!("event=alert_write_failed error={e:?}");
            }
        }
    }
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    reports: Receiver<SessionReport>,
    thread: Option<JoinHandle<Result<(), EndpointError>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn reports(&self) -> &Receiver<SessionReport> {
        &self.reports
    }

    /// Waits for the next finished session.
    pub fn next_report(&self, timeout: Duration) -> Option<SessionReport> {
        self.reports.recv_timeout(timeout).ok()
    }

    pub fn shutdown(mut self) -> Result<(), EndpointError> {
        self.stop()
    }

    fn stop(&mut self) -> Result<(), EndpointError> {
        self.shutdown.store(true, Ordering::SeqCst);
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(EndpointError::Io("server thread panicked".into()))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

pub fn spawn_server(cfg: ServerConfig) -> Result<ServerHandle, EndpointError> {
    let server = Server::bind(cfg)?;
    let addr = server.local_addr()?;
    let shutdown = server.shutdown_flag();
    let reports = server.session_reports();
    let thread = thread::spawn(move || server.run());
    Ok(ServerHandle {
        addr,
        shutdown,
        reports,
        thread: Some(thread),
    })
}
