#![allow(dead_code)]

pub mod vectors;

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vitalink::credential::{credential_issue, Credential, CredentialFields, Identity, Role, SubjectId};
use vitalink::curve::{keypair_gen, CurveSuite, Scalar};
use vitalink::endpoints::{device_id_for, DeviceConfig, Pacing, ServerConfig};
use vitalink::telemetry::{AnomalyConfig, AnomalyScript, HeartRateReading, SensorParams, SensorSim};

/// Fixed logical clock for device runs, so traces can be regenerated.
pub const START_MS: u64 = 1_760_000_000_000;
pub const INTERVAL_MS: u64 = 100;

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_secs()
}

/// A trust root and the means to issue credentials under it.
pub struct Pki {
    pub root: Credential,
    pub root_key: Scalar,
    pub suite: &'static CurveSuite,
    rng: ChaCha20Rng,
}

impl Pki {
    pub fn new(suite: &'static CurveSuite, name: &str, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (d, q) = keypair_gen(&mut rng, suite).unwrap();
        let id = SubjectId::new(name).unwrap();
        let now = now_secs();
        let root = credential_issue(
            &d,
            CredentialFields {
                subject_id: id,
                role: Role::Issuer,
                static_pub: q,
                valid_from: now - 3600,
                valid_to: now + 86_400,
                issuer_id: id,
            },
            &mut rng,
            suite,
        )
        .unwrap();
        Pki {
            root,
            root_key: d,
            suite,
            rng,
        }
    }

    pub fn identity(&mut self, name: &str, role: Role) -> Identity {
        let now = now_secs();
        self.identity_valid(name, role, now - 3600, now + 86_400)
    }

    pub fn identity_valid(&mut self, name: &str, role: Role, from: u64, to: u64) -> Identity {
        let (d, q) = keypair_gen(&mut self.rng, self.suite).unwrap();
        let cred = credential_issue(
            &self.root_key,
            CredentialFields {
                subject_id: SubjectId::new(name).unwrap(),
                role,
                static_pub: q,
                valid_from: from,
                valid_to: to,
                issuer_id: *self.root.subject_id(),
            },
            &mut self.rng,
            self.suite,
        )
        .unwrap();
        Identity::new(cred, d).unwrap()
    }
}

pub fn server_config(pki: &mut Pki, store_dir: &Path) -> ServerConfig {
    ServerConfig {
        listen: "127.0.0.1:0".into(),
        identity: pki.identity("ingest", Role::Server),
        root: pki.root.clone(),
        store_dir: store_dir.to_path_buf(),
        anomaly: AnomalyConfig::default(),
        fsync: false,
    }
}

pub fn device_config(pki: &mut Pki, name: &str, server: &str, count: u64, seed: u64) -> DeviceConfig {
    DeviceConfig {
        server: server.to_string(),
        identity: pki.identity(name, Role::Device),
        root: pki.root.clone(),
        suite: pki.suite,
        interval_ms: INTERVAL_MS,
        count,
        seed,
        sensor: SensorParams::default(),
        script: AnomalyScript::default(),
        pacing: Pacing::Logical { start_ms: START_MS },
    }
}

/// The readings a device named `name` generates with these settings.
pub fn expected_trace(name: &str, seed: u64, count: u64, script: &AnomalyScript) -> Vec<HeartRateReading> {
    let mut sim = SensorSim::new(device_id_for(name), seed, SensorParams::default(), script.clone()).unwrap();
    (0..count).map(|i| sim.sensor_next(START_MS + i * INTERVAL_MS)).collect()
}

pub fn sorted_pairs<I: IntoIterator<Item = (u64, u16)>>(it: I) -> Vec<(u64, u16)> {
    let mut v: Vec<_> = it.into_iter().collect();
    v.sort_unstable();
    v
}
