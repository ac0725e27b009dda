//! Heart-rate readings, the simulated sensor and threshold alerting.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub const READING_LEN: usize = 19;
pub const MAX_BPM: u16 = 300;
pub const SIM_MIN_BPM: u16 = 30;
pub const SIM_MAX_BPM: u16 = 220;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TelemetryError {
    #[error("malformed reading: {0}")]
    MalformedReading(&'static str),
    #[error("anomaly script line {line}: {reason}")]
    MalformedScript { line: usize, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DeviceId(pub [u8; 8]);

impl DeviceId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(DeviceId(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeviceId({})", self.to_hex())
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SensorStatus {
    Ok = 0,
    OffBody = 1,
    LowConfidence = 2,
}

impl SensorStatus {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(SensorStatus::Ok),
            1 => Some(SensorStatus::OffBody),
            2 => Some(SensorStatus::LowConfidence),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SensorStatus::Ok => "ok",
            SensorStatus::OffBody => "off_body",
            SensorStatus::LowConfidence => "low_confidence",
        }
    }
}

impl fmt::Display for SensorStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorStatus {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(SensorStatus::Ok),
            "off_body" => Ok(SensorStatus::OffBody),
            "low_confidence" => Ok(SensorStatus::LowConfidence),
            _ => Err(TelemetryError::MalformedReading("unknown status")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HeartRateReading {
    pub device_id: DeviceId,
    pub timestamp_ms: u64,
    pub bpm: u16,
    pub status: SensorStatus,
}

impl HeartRateReading {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.bpm > MAX_BPM {
            return Err(TelemetryError::MalformedReading("bpm above 300"));
        }
        if self.bpm == 0 && self.status == SensorStatus::Ok {
            return Err(TelemetryError::MalformedReading("bpm 0 with status ok"));
        }
        Ok(())
    }
}

/// `device_id(8) ‖ timestamp_ms(BE64) ‖ bpm(BE16) ‖ status(1)`
pub fn reading_encode(r: &HeartRateReading) -> [u8; READING_LEN] {
    let mut out = [0u8; READING_LEN];
    out[..8].copy_from_slice(&r.device_id.0);
    out[8..16].copy_from_slice(&r.timestamp_ms.to_be_bytes());
    out[16..18].copy_from_slice(&r.bpm.to_be_bytes());
    out[18] = r.status as u8;
    out
}

pub fn reading_decode(bytes: &[u8]) -> Result<HeartRateReading, TelemetryError> {
    if bytes.len() != READING_LEN {
        return Err(TelemetryError::MalformedReading("wrong length"));
    }
    let r = HeartRateReading {
        device_id: DeviceId(bytes[..8].try_into().unwrap()),
        timestamp_ms: u64::from_be_bytes(bytes[8..16].try_into().unwrap()),
        bpm: u16::from_be_bytes(bytes[16..18].try_into().unwrap()),
        status: SensorStatus::from_u8(bytes[18]).ok_or(TelemetryError::MalformedReading("unknown status"))?,
    };
    r.validate()?;
    Ok(r)
}

/// Forces `bpm` for reading indices `start..=end`. A bpm of 0 marks the
/// device as off the wrist.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScriptSegment {
    pub start: u64,
    pub end: u64,
    pub bpm: u16,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnomalyScript {
    pub segments: Vec<ScriptSegment>,
}

impl AnomalyScript {
    /// One `start_index end_index bpm` triple per line. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TelemetryError> {
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| TelemetryError::MalformedScript {
                line: i + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(bad("expected `start end bpm`"));
            }
            let start: u64 = fields[0].parse().map_err(|_| bad("start is not an integer"))?;
            let end: u64 = fields[1].parse().map_err(|_| bad("end is not an integer"))?;
            let bpm: u16 = fields[2].parse().map_err(|_| bad("bpm is not an integer"))?;
            if start > end {
                return Err(bad("start after end"));
            }
            if bpm > MAX_BPM {
                return Err(bad("bpm above 300"));
            }
            segments.push(ScriptSegment { start, end, bpm });
        }
        Ok(AnomalyScript { segments })
    }

    /// The last matching segment wins.
    pub fn override_for(&self, index: u64) -> Option<u16> {
        self.segments
            .iter()
            .rev()
            .find(|s| (s.start..=s.end).contains(&index))
            .map(|s| s.bpm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorParams {
    pub baseline: f64,
    pub amplitude: f64,
    pub period_ms: u64,
    pub sigma: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            baseline: 75.0,
            amplitude: 5.0,
            period_ms: 60_000,
            sigma: 3.0,
        }
    }
}

/// Deterministic heart-rate source.
pub struct SensorSim {
    device_id: DeviceId,
    params: SensorParams,
    noise: Normal<f64>,
    rng: ChaCha20Rng,
    script: AnomalyScript,
    index: u64,
}

impl SensorSim {
    pub fn new(device_id: DeviceId, seed: u64, params: SensorParams, script: AnomalyScript) -> Result<Self, TelemetryError> {
        if params.period_ms == 0 {
            return Err(TelemetryError::InvalidParameter("period must be positive".into()));
        }
        let noise = Normal::new(0.0, params.sigma)
            .map_err(|_| TelemetryError::InvalidParameter(format!("sigma {}", params.sigma)))?;
        if !params.baseline.is_finite() || !params.amplitude.is_finite() {
            return Err(TelemetryError::InvalidParameter("non-finite baseline or amplitude".into()));
        }
        Ok(SensorSim {
            device_id,
            params,
            noise,
            rng: ChaCha20Rng::seed_from_u64(seed),
            script,
            index: 0,
        })
    }

    /// Index of the next reading.
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn sensor_next(&mut self, now_ms: u64) -> HeartRateReading {
        let p = &self.params;
        let phase = (now_ms % p.period_ms) as f64 / p.period_ms as f64;
        // Always draw, so a script does not shift the noise of later readings.
        let noise = self.noise.sample(&mut self.rng);
        let raw = p.baseline + p.amplitude * (2.0 * std::f64::consts::PI * phase).sin() + noise;
        let simulated = raw.round().clamp(SIM_MIN_BPM as f64, SIM_MAX_BPM as f64) as u16;
        let (bpm, status) = match self.script.override_for(self.index) {
            Some(0) => (0, SensorStatus::OffBody),
            Some(bpm) => (bpm, SensorStatus::Ok),
            None => (simulated, SensorStatus::Ok),
        };
        self.index += 1;
        HeartRateReading {
            device_id: self.device_id,
            timestamp_ms: now_ms,
            bpm,
            status,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlertRule {
    HighHr,
    LowHr,
}

impl AlertRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlertRule::HighHr => "high_hr",
            AlertRule::LowHr => "low_hr",
        }
    }
}

impl fmt::Display for AlertRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlertRule {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high_hr" => Ok(AlertRule::HighHr),
            "low_hr" => Ok(AlertRule::LowHr),
            other => Err(TelemetryError::InvalidParameter(format!("unknown rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnomalyAlert {
    pub device_id: DeviceId,
    pub window_start_ms: u64,
    pub window_end_ms: u64,
    pub observed_bpm: Vec<u16>,
    pub rule: AlertRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnomalyConfig {
    pub low: u16,
    pub high: u16,
    pub consecutive: usize,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig {
            low: 40,
            high: 150,
            consecutive: 3,
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.consecutive == 0 {
            return Err(TelemetryError::InvalidParameter("consecutive must be at least 1".into()));
        }
        if self.low >= self.high {
            return Err(TelemetryError::InvalidParameter(format!(
                "low {} must be below high {}",
                self.low, self.high
            )));
        }
        Ok(())
    }

    fn classify(&self, bpm: u16) -> Option<AlertRule> {
        if bpm > self.high {
            Some(AlertRule::HighHr)
        } else if bpm < self.low {
            Some(AlertRule::LowHr)
        } else {
            None
        }
    }
}

/// Sliding window over the most recent `ok` readings of one device.
///
/// Each rule fires at most once between two in-range readings: a reading
/// inside `[low, high]` ends the episode and re-arms both rules.
#[derive(Clone, Debug)]
pub struct AnomalyDetector {
    cfg: AnomalyConfig,
    window: VecDeque<HeartRateReading>,
    fired_high: bool,
    fired_low: bool,
}

impl AnomalyDetector {
    pub fn new(cfg: AnomalyConfig) -> Result<Self, TelemetryError> {
        cfg.validate()?;
        Ok(AnomalyDetector {
            cfg,
            window: VecDeque::with_capacity(cfg.consecutive),
            fired_high: false,
            fired_low: false,
        })
    }

    pub fn config(&self) -> &AnomalyConfig {
        &self.cfg
    }

    pub fn anomaly_check(&mut self, r: &HeartRateReading) -> Option<AnomalyAlert> {
        if r.status != SensorStatus::Ok {
            return None;
        }
        if self.window.len() == self.cfg.consecutive {
            self.window.pop_front();
        }
        self.window.push_back(*r);
        let Some(rule) = self.cfg.classify(r.bpm) else {
            self.fired_high = false;
            self.fired_low = false;
            return None;
        };
        let fired = match rule {
            AlertRule::HighHr => &mut self.fired_high,
            AlertRule::LowHr => &mut self.fired_low,
        };
        if *fired
            || self.window.len() < self.cfg.consecutive
            || !self.window.iter().all(|w| self.cfg.classify(w.bpm) == Some(rule))
        {
            return None;
        }
        *fired = true;
        Some(AnomalyAlert {
            device_id: r.device_id,
            window_start_ms: self.window.front().unwrap().timestamp_ms,
            window_end_ms: r.timestamp_ms,
            observed_bpm: self.window.iter().map(|w| w.bpm).collect(),
            rule,
        })
    }
}
