//! A frame-aware man in the middle that injects one planned fault.
//!
//! The proxy parses frame headers only. It never holds session keys, so every
//! fault it can inject on an established session is limited to mutating,
//! dropping, duplicating or reordering ciphertext.
//!
//! Record frames (Data and Close) are counted per direction from zero; the
//! plan's `target_index` refers to that count.

use std::fmt;
use std::io::{self, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::aead::TAG_LEN;
use crate::credential::{credential_issue, Credential, CredentialFields, Identity, Role};
use crate::curve::keypair_gen;
use crate::handshake::{ClientHello, Handshake, ServerHello};
use crate::record::{frame_read, frame_write, Frame, FrameType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TamperMode {
    Passthrough,
    FlipCiphertextBit,
    FlipTagBit,
    ReplayFrame,
    ReorderPair,
    DropFrame,
    TruncateStream,
    ForgeHandshake,
}

impl TamperMode {
    pub const ALL: [TamperMode; 8] = [
        TamperMode::Passthrough,
        TamperMode::FlipCiphertextBit,
        TamperMode::FlipTagBit,
        TamperMode::ReplayFrame,
        TamperMode::ReorderPair,
        TamperMode::DropFrame,
        TamperMode::TruncateStream,
        TamperMode::ForgeHandshake,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TamperMode::Passthrough => "passthrough",
            TamperMode::FlipCiphertextBit => "flip_ciphertext_bit",
            TamperMode::FlipTagBit => "flip_tag_bit",
            TamperMode::ReplayFrame => "replay_frame",
            TamperMode::ReorderPair => "reorder_pair",
            TamperMode::DropFrame => "drop_frame",
            TamperMode::TruncateStream => "truncate_stream",
            TamperMode::ForgeHandshake => "forge_handshake",
        }
    }
}

impl fmt::Display for TamperMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} {value:?}")]
pub struct ParsePlanError {
    kind: &'static str,
    value: String,
}

impl FromStr for TamperMode {
    type Err = ParsePlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TamperMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or(ParsePlanError {
                kind: "tamper mode",
                value: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    C2s,
    S2c,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::C2s => "c2s",
            Direction::S2c => "s2c",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = ParsePlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "c2s" => Ok(Direction::C2s),
            "s2c" => Ok(Direction::S2c),
            _ => Err(ParsePlanError {
                kind: "direction",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TamperPlan {
    pub mode: TamperMode,
    pub target_index: u64,
    pub direction: Direction,
    pub bit_offset: u64,
}

impl TamperPlan {
    pub fn passthrough() -> Self {
        TamperPlan {
            mode: TamperMode::Passthrough,
            target_index: 0,
            direction: Direction::C2s,
            bit_offset: 0,
        }
    }

    pub fn new(mode: TamperMode, target_index: u64, direction: Direction) -> Self {
        TamperPlan {
            mode,
            target_index,
            direction,
            bit_offset: 0,
        }
    }
}

/// What the relay writes for one input frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Emit {
    Frame(Frame),
    /// Raw bytes, after which the connection is torn down.
    Truncate(Vec<u8>),
}

/// Flips bit `bit` of `bytes`, counting from the most significant bit of
/// the first byte.
fn flip_bit(bytes: &mut [u8], bit: u64) {
    let bit = bit % (bytes.len() as u64 * 8);
    bytes[(bit / 8) as usize] ^= 0x80 >> (bit % 8);
}

/// Per-direction tamper state. Holds at most one frame, for `reorder_pair`.
#[derive(Debug)]
pub struct Tamperer {
    plan: TamperPlan,
    direction: Direction,
    held: Option<Frame>,
}

impl Tamperer {
    pub fn new(plan: TamperPlan, direction: Direction) -> Self {
        Tamperer {
            plan,
            direction,
            held: None,
        }
    }

    /// `index` is the frame's position among this direction's record frames,
    /// or `None` for handshake and Abort frames. Returns the frames to emit
    /// and the name of the action taken.
    pub fn apply_tamper(&mut self, mut frame: Frame, index: Option<u64>) -> (Vec<Emit>, &'static str) {
        if let Some(held) = self.held.take() {
            return (vec![Emit::Frame(frame), Emit::Frame(held)], "swap");
        }
        let targeted = self.direction == self.plan.direction && index == Some(self.plan.target_index);
        if !targeted {
            return (vec![Emit::Frame(frame)], "forward");
        }
        let mode = self.plan.mode;
        match mode {
            TamperMode::Passthrough | TamperMode::ForgeHandshake => return (vec![Emit::Frame(frame)], "forward"),
            TamperMode::FlipCiphertextBit => {
                let ct_len = frame.body.len().saturating_sub(TAG_LEN);
                if ct_len > 0 {
                    flip_bit(&mut frame.body[..ct_len], self.plan.bit_offset);
                } else if !frame.body.is_empty() {
                    // No ciphertext in an empty record; hit the tag instead.
                    flip_bit(&mut frame.body, self.plan.bit_offset);
                }
            }
            TamperMode::FlipTagBit => {
                let ct_len = frame.body.len().saturating_sub(TAG_LEN);
                if !frame.body.is_empty() {
                    flip_bit(&mut frame.body[ct_len..], self.plan.bit_offset);
                }
            }
            TamperMode::ReplayFrame => return (vec![Emit::Frame(frame.clone()), Emit::Frame(frame)], mode.as_str()),
            TamperMode::ReorderPair => {
                self.held = Some(frame);
                return (vec![], "hold");
            }
            TamperMode::DropFrame => return (vec![], mode.as_str()),
            TamperMode::TruncateStream => {
                let mut bytes = frame.header().to_vec();
                bytes.extend_from_slice(&frame.body[..frame.body.len() / 2]);
                return (vec![Emit::Truncate(bytes)], mode.as_str());
            }
        }
        (vec![Emit::Frame(frame)], mode.as_str())
    }

    /// A frame still held when the stream ends.
    pub fn flush(&mut self) -> Option<Frame> {
        self.held.take()
    }
}

/// Collects report lines, optionally echoing them to standard output.
#[derive(Clone, Default)]
pub struct ProxyLog {
    lines: Arc<Mutex<Vec<String>>>,
    echo: bool,
}

impl ProxyLog {
    pub fn new(echo: bool) -> Self {
        ProxyLog {
            lines: Arc::default(),
            echo,
        }
    }

    fn push(&self, line: String) {
        if self.echo {
            let mut out = io::stdout().lock();
            let _ = writeln!(out, "{line}");
            let _ = out.flush();
        }
        self.lines.lock().unwrap().push(line);
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().unwrap().clone()
    }
}

pub struct ProxyConfig {
    pub listen: String,
    pub upstream: String,
    pub plan: TamperPlan,
}

pub struct Proxy {
    listener: TcpListener,
    upstream: String,
    plan: TamperPlan,
    log: ProxyLog,
    shutdown: Arc<AtomicBool>,
}

impl Proxy {
    pub fn bind(cfg: ProxyConfig, log: ProxyLog) -> io::Result<Self> {
        let listener = TcpListener::bind(&cfg.listen)?;
        listener.set_nonblocking(true)?;
        Ok(Proxy {
            listener,
            upstream: cfg.upstream,
            plan: cfg.plan,
            log,
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn shutdown_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shutdown)
    }

    /// Relays connections until the shutdown flag is set.
    pub fn proxy_run(&self) -> io::Result<()> {
        let next = AtomicU64::new(0);
        let mut conns: Vec<JoinHandle<()>> = Vec::new();
        while !self.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((client, _)) => {
                    let conn = next.fetch_add(1, Ordering::Relaxed);
                    let _ = client.set_nonblocking(false);
                    let upstream = match TcpStream::connect(&self.upstream) {
                        Ok(u) => u,
                        Err(e) => {
                            self.log.push(format!("conn={conn} event=upstream_unreachable error={:?}", e.kind()));
                            let _ = client.shutdown(Shutdown::Both);
                            continue;
                        }
                    };
                    let _ = client.set_nodelay(true);
                    let _ = upstream.set_nodelay(true);
                    let plan = self.plan;
                    let log = self.log.clone();
                    conns.push(thread::spawn(move || {
                        if let Err(e) = relay_connection(conn, client, upstream, plan, &log) {
                            log.push(format!("conn={conn} event=relay_error error={:?}", e.kind()));
                        }
                        log.push(format!("conn={conn} event=closed"));
                    }));
                    conns.retain(|c| !c.is_finished());
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        for c in conns {
            let _ = c.join();
        }
        Ok(())
    }
}

fn frame_line(conn: u64, dir: Direction, f: &Frame, index: Option<u64>, action: &str) -> String {
    let index = index.map_or("-".to_string(), |i| i.to_string());
    format!(
        "conn={conn} dir={dir} type={} len={} index={index} action={action}",
        f.frame_type,
        f.body.len()
    )
}

fn relay_connection(conn: u64, client: TcpStream, upstream: TcpStream, plan: TamperPlan, log: &ProxyLog) -> io::Result<()> {
    if plan.mode == TamperMode::ForgeHandshake {
        return forge_connection(conn, client, upstream, plan, log);
    }
    let c2s = {
        let (src, dst, log) = (client.try_clone()?, upstream.try_clone()?, log.clone());
        thread::spawn(move || relay_direction(conn, Direction::C2s, src, dst, plan, &log))
    };
    relay_direction(conn, Direction::S2c, upstream, client, plan, log);
    let _ = c2s.join();
    Ok(())
}

/// Copies frames from `src` to `dst` until either side goes away.
fn relay_direction(conn: u64, dir: Direction, mut src: TcpStream, mut dst: TcpStream, plan: TamperPlan, log: &ProxyLog) {
    let mut tamper = Tamperer::new(plan, dir);
    let mut records = 0u64;
    while let Ok(frame) = frame_read(&mut src) {
        let index = match frame.frame_type {
            FrameType::Data | FrameType::Close => {
                records += 1;
                Some(records - 1)
            }
            _ => None,
        };
        let line = frame_line(conn, dir, &frame, index, "");
        let (emits, action) = tamper.apply_tamper(frame, index);
        log.push(format!("{line}{action}"));
        for e in emits {
            match e {
                Emit::Frame(f) => {
                    if frame_write(&mut dst, &f).is_err() {
                        let _ = src.shutdown(Shutdown::Both);
                        return;
                    }
                }
                Emit::Truncate(bytes) => {
                    let _ = dst.write_all(&bytes);
                    let _ = dst.flush();
                    for s in [&src, &dst] {
                        let _ = s.shutdown(Shutdown::Both);
                    }
                    return;
                }
            }
        }
    }
    if let Some(held) = tamper.flush() {
        log.push(frame_line(conn, dir, &held, None, "release"));
        let _ = frame_write(&mut dst, &held);
    }
    let _ = dst.shutdown(Shutdown::Write);
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Answers the ClientHello with a ServerHello the proxy made itself.
///
/// The genuine ServerHello is fetched first so the forgery can copy the real
/// server's names. An even `target_index` presents a lookalike credential
/// issued by a rogue root; an odd one presents the genuine credential but
/// signs the transcript with a rogue key.
fn forge_connection(conn: u64, mut client: TcpStream, mut upstream: TcpStream, plan: TamperPlan, log: &ProxyLog) -> io::Result<()> {
    let bad = |what: &str| io::Error::new(io::ErrorKind::InvalidData, what.to_string());
    let ch = frame_read(&mut client).map_err(|_| bad("no client hello"))?;
    log.push(frame_line(conn, Direction::C2s, &ch, None, "forward"));
    let suite_id = ClientHello::parse(&ch.body).map_err(|_| bad("client hello"))?.suite_id;
    frame_write(&mut upstream, &ch).map_err(|_| bad("upstream write"))?;
    let genuine = frame_read(&mut upstream).map_err(|_| bad("no server hello"))?;
    log.push(frame_line(conn, Direction::S2c, &genuine, None, "capture"));
    let _ = upstream.shutdown(Shutdown::Both);
    let genuine_cred = ServerHello::parse(&genuine.body)
        .ok()
        .and_then(|sh| Credential::from_bytes(&sh.credential).ok())
        .filter(|c| c.suite().id() == suite_id)
        .ok_or_else(|| bad("server hello credential"))?;

    let suite = genuine_cred.suite();
    let mut rng = rand::rng();
    let (rogue_key, rogue_pub) = keypair_gen(&mut rng, suite).map_err(|_| bad("entropy"))?;
    let identity = if plan.target_index.is_multiple_of(2) {
        let (root_key, root_pub) = keypair_gen(&mut rng, suite).map_err(|_| bad("entropy"))?;
        let now = now_secs();
        let root_name = *genuine_cred.issuer_id();
        let root = credential_issue(
            &root_key,
            CredentialFields {
                subject_id: root_name,
                role: Role::Issuer,
                static_pub: root_pub,
                valid_from: now.saturating_sub(60),
                valid_to: now + 86_400,
                issuer_id: root_name,
            },
            &mut rng,
            suite,
        )
        .map_err(|_| bad("rogue root"))?;
        let cred = credential_issue(
            &root_key,
            CredentialFields {
                subject_id: *genuine_cred.subject_id(),
                role: Role::Server,
                static_pub: rogue_pub,
                valid_from: now.saturating_sub(60),
                valid_to: now + 86_400,
                issuer_id: *root.subject_id(),
            },
            &mut rng,
            suite,
        )
        .map_err(|_| bad("rogue credential"))?;
        Identity::new(cred, rogue_key).map_err(|_| bad("rogue identity"))?
    } else {
        Identity::mismatched(genuine_cred, rogue_key)
    };
    let forged = Handshake::server()
        .server_respond(&ch.body, &identity, &mut rng)
        .map_err(|_| bad("forge"))?;
    let forged = Frame::new(FrameType::ServerHello, forged);
    log.push(frame_line(conn, Direction::S2c, &forged, None, TamperMode::ForgeHandshake.as_str()));
    frame_write(&mut client, &forged).map_err(|_| bad("client write"))?;
    while let Ok(f) = frame_read(&mut client) {
        log.push(frame_line(conn, Direction::C2s, &f, None, "swallow"));
    }
    let _ = client.shutdown(Shutdown::Both);
    Ok(())
}

/// A proxy running on a background thread.
pub struct ProxyHandle {
    addr: SocketAddr,
    log: ProxyLog,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ProxyHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn lines(&self) -> Vec<String> {
        self.log.lines()
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> io::Result<()> {
        self.shutdown.store(true, Ordering::SeqCst);
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("proxy thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ProxyHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

pub fn spawn_proxy(cfg: ProxyConfig) -> io::Result<ProxyHandle> {
    let log = ProxyLog::new(false);
    let proxy = Proxy::bind(cfg, log.clone())?;
    let addr = proxy.local_addr()?;
    let shutdown = proxy.shutdown_flag();
    let thread = thread::spawn(move || proxy.proxy_run());
    Ok(ProxyHandle {
        addr,
        log,
        shutdown,
        thread: Some(thread),
    })
}
