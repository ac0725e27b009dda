//! Append-only readings and alerts logs.
//!
//! Every line is assembled in memory and written with a single `write_all`
//! while holding the file's lock, so concurrent sessions never interleave
//! bytes within a line.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::telemetry::{AlertRule, AnomalyAlert, DeviceId, HeartRateReading, SensorStatus};

pub const READINGS_LOG: &str = "readings.log";
pub const ALERTS_LOG: &str = "alerts.log";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {0} is not newline-terminated")]
    TornLine(usize),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreRecord {
    pub session_id: String,
    pub subject_id: String,
    pub device_id: DeviceId,
    pub timestamp_ms: u64,
    pub bpm: u16,
    pub status: SensorStatus,
    pub received_at_ms: u64,
}

fn field<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("bad {name} {s:?}"))
}

impl StoreRecord {
    /// `session_id TAB subject_id TAB device_id TAB timestamp_ms TAB bpm TAB
    /// status TAB received_at_ms`, without the newline.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.session_id,
            self.subject_id,
            self.device_id.to_hex(),
            self.timestamp_ms,
            self.bpm,
            self.status,
            self.received_at_ms
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(format!("expected 7 fields, found {}", f.len()));
        }
        if f[0].len() != 64 || hex::decode(f[0]).is_err() {
            return Err(format!("bad session id {:?}", f[0]));
        }
        if f[1].is_empty() {
            return Err("empty subject id".into());
        }
        Ok(StoreRecord {
            session_id: f[0].to_string(),
            subject_id: f[1].to_string(),
            device_id: DeviceId::from_hex(f[2]).ok_or_else(|| format!("bad device id {:?}", f[2]))?,
            timestamp_ms: field(f[3], "timestamp")?,
            bpm: field(f[4], "bpm")?,
            status: f[5].parse().map_err(|_| format!("bad status {:?}", f[5]))?,
            received_at_ms: field(f[6], "received_at")?,
        })
    }
}

/// `device_id TAB rule TAB window_start_ms TAB window_end_ms TAB bpm,bpm,...`
pub fn alert_to_line(a: &AnomalyAlert) -> String {
    let bpms: Vec<String> = a.observed_bpm.iter().map(|b| b.to_string()).collect();
    format!(
        "{}\t{}\t{}\t{}\t{}",
        a.device_id.to_hex(),
        a.rule,
        a.window_start_ms,
        a.window_end_ms,
        bpms.join(",")
    )
}

pub fn alert_parse_line(line: &str) -> Result<AnomalyAlert, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 5 {
        return Err(format!("expected 5 fields, found {}", f.len()));
    }
    let observed_bpm = f[4]
        .split(',')
        .map(|b| field::<u16>(b, "bpm"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnomalyAlert {
        device_id: DeviceId::from_hex(f[0]).ok_or_else(|| format!("bad device id {:?}", f[0]))?,
        rule: f[1].parse::<AlertRule>().map_err(|e| e.to_string())?,
        window_start_ms: field(f[2], "window start")?,
        window_end_ms: field(f[3], "window end")?,
        observed_bpm,
    })
}

/// Parses a whole log, insisting that every line, the last included, is
/// complete.
fn read_log<T>(path: &Path, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            return Ok(out);
        }
        line_no += 1;
        let Some(line) = buf.strip_suffix('\n') else {
            return Err(StoreError::TornLine(line_no));
        };
        out.push(parse(line).map_err(|reason| StoreError::Parse { line: line_no, reason })?);
    }
}

pub fn read_readings(path: &Path) -> Result<Vec<StoreRecord>, StoreError> {
    read_log(path, StoreRecord::parse_line)
}

pub fn read_alerts(path: &Path) -> Result<Vec<AnomalyAlert>, StoreError> {
    read_log(path, alert_parse_line)
}

/// Identifies the authenticated session a reading arrived on.
#[derive(Clone, Debug)]
pub struct SessionCtx {
    pub session_id: String,
    pub subject_id: String,
}

pub struct Store {
    dir: PathBuf,
    readings: Mutex<File>,
    alerts: Mutex<File>,
    fsync: bool,
}

fn open_append(path: &Path) -> io::Result<File> {
    OpenOptions::new().create(true).append(true).open(path)
}

fn append_line(file: &Mutex<File>, mut line: String, fsync: bool) -> io::Result<()> {
    line.push('\n');
    let mut f = file.lock().unwrap_or_else(|p| p.into_inner());
    f.write_all(line.as_bytes())?;
    if fsync {
        f.sync_data()?;
    }
    Ok(())
}

impl Store {
    pub fn open(dir: &Path, fsync: bool) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Store {
            dir: dir.to_path_buf(),
            readings: Mutex::new(open_append(&dir.join(READINGS_LOG))?),
            alerts: Mutex::new(open_append(&dir.join(ALERTS_LOG))?),
            fsync,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn readings_path(&self) -> PathBuf {
        self.dir.join(READINGS_LOG)
    }

    pub fn alerts_path(&self) -> PathBuf {
        self.dir.join(ALERTS_LOG)
    }

    /// Only ever called with a reading that passed `record_open`.
    pub fn persist_reading(
        &self,
        session: &SessionCtx,
        r: &HeartRateReading,
        received_at_ms: u64,
    ) -> io::Result<StoreRecord> {
        let rec = StoreRecord {
            session_id: session.session_id.clone(),
            subject_id: session.subject_id.clone(),
            device_id: r.device_id,
            timestamp_ms: r.timestamp_ms,
            bpm: r.bpm,
            status: r.status,
            received_at_ms,
        };
        append_line(&self.readings, rec.to_line(), self.fsync)?;
        Ok(rec)
    }

    /// Appends to the alerts log and prints one line to standard error.
    pub fn raise_alert(&self, a: &AnomalyAlert) -> io::Result<()> {
        let bpms: Vec<String> = a.observed_bpm.iter().map(|b| b.to_string()).collect();
        eprintln!(
            "ALERT {} device={} window={}..{}ms bpm=[{}]",
            a.rule,
            a.device_id,
            a.window_start_ms,
            a.window_end_ms,
            bpms.join(",")
        );
        append_line(&self.alerts, alert_to_line(a), self.fsync)
    }

    pub fn flush(&self) -> io::Result<()> {
        for f in [&self.readings, &self.alerts] {
            let mut f = f.lock().unwrap_or_else(|p| p.into_inner());
            f.flush()?;
            f.sync_all()?;
        }
        Ok(())
    }
}
