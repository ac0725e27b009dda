//! The `vitalink` command line.
//!
//! Exit codes: 0 on success, 1 on a runtime or protocol failure, 2 on a
//! usage or configuration error. Logs go to standard error as `key=value`
//! lines (level from `VITALINK_LOG`, default `info`); data goes to standard
//! output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::credential::{credential_issue, Credential, CredentialFields, Identity, Role, SubjectId};
use crate::curve::{keypair_gen, point_decode, point_encode, CurvePoint, CurveSuite, Scalar};
use crate::endpoints::{run_device, DeviceConfig, EndpointError, Pacing, Server, ServerConfig};
use crate::kdf::hash;
use crate::proxy::{Direction, Proxy, ProxyConfig, ProxyLog, TamperMode, TamperPlan};
use crate::telemetry::{AnomalyConfig, AnomalyScript, SensorParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const KEY_EXT: &str = "vlk";
pub const PUB_EXT: &str = "vlp";
pub const CRED_EXT: &str = "vlc";

#[derive(Parser, Debug)]
#[command(name = "vitalink", version, about = "Secure heart-rate telemetry: keys, credentials, server, device and tamper proxy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a key pair.
    Keygen(KeygenArgs),
    /// Issue a credential.
    Credgen(CredgenArgs),
    /// Run the ingestion server.
    Serve(ServeArgs),
    /// Run the simulated wearable.
    Device(DeviceArgs),
    /// Run the fault-injecting proxy.
    Proxy(ProxyArgs),
}

fn parse_suite(s: &str) -> Result<&'static CurveSuite, String> {
    CurveSuite::by_name(s).ok_or_else(|| format!("unknown suite {s:?} (expected p256, toy, 0x0017 or 0x7f11)"))
}

#[derive(Args, Debug)]
pub struct KeygenArgs {
    #[arg(long, value_parser = parse_suite, default_value = "p256")]
    pub suite: &'static CurveSuite,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// File stem for `<name>.vlk` and `<name>.vlp`.
    #[arg(long, default_value = "key")]
    pub name: String,
    /// Derive the key from a fixed seed instead of OS entropy.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CredgenArgs {
    #[arg(long)]
    pub issuer_key: PathBuf,
    /// Issuer credential; omit when self-signing.
    #[arg(long)]
    pub issuer_cred: Option<PathBuf>,
    #[arg(long)]
    pub subject: String,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["device", "server", "issuer"]))]
    pub role: String,
    #[arg(long = "pub")]
    pub public: PathBuf,
    #[arg(long)]
    pub valid_days: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Signing randomness seed, for reproducible files.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: String,
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub cred: PathBuf,
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub store_dir: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub hr_low: u16,
    #[arg(long, default_value_t = 150)]
    pub hr_high: u16,
    #[arg(long, default_value_t = 3)]
    pub hr_consecutive: usize,
    /// fsync the logs after every line.
    #[arg(long)]
    pub fsync: bool,
}

#[derive(Args, Debug)]
pub struct DeviceArgs {
    #[arg(long)]
    pub connect: String,
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub cred: PathBuf,
    #[arg(long)]
    pub root: PathBuf,
    /// Defaults to the credential's suite.
    #[arg(long, value_parser = parse_suite)]
    pub suite: Option<&'static CurveSuite>,
    #[arg(long, default_value_t = 1000)]
    pub interval_ms: u64,
    #[arg(long, default_value_t = 10)]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub anomaly_script: Option<PathBuf>,
    /// Do not sleep between readings; timestamps still advance by the interval.
    #[arg(long)]
    pub fast: bool,
}

#[derive(Args, Debug)]
pub struct ProxyArgs {
    #[arg(long)]
    pub listen: String,
    #[arg(long)]
    pub upstream: String,
    #[arg(long, value_parser = |s: &str| s.parse::<TamperMode>().map_err(|e| e.to_string()), default_value = "passthrough")]
    pub mode: TamperMode,
    #[arg(long, default_value_t = 0)]
    pub target_index: u64,
    #[arg(long, value_parser = |s: &str| s.parse::<Direction>().map_err(|e| e.to_string()), default_value = "c2s")]
    pub direction: Direction,
    #[arg(long, default_value_t = 0)]
    pub bit_offset: u64,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

type CliResult = Result<(), CliError>;

fn read_file(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn suite_for_len(len: usize, per_suite: impl Fn(&CurveSuite) -> usize) -> Option<&'static CurveSuite> {
    [CurveSuite::p256(), CurveSuite::toy()]
        .into_iter()
        .find(|s| per_suite(s) == len)
}

pub fn load_private_key(path: &Path) -> Result<(Scalar, &'static CurveSuite), CliError> {
    let bytes = zeroize::Zeroizing::new(read_file(path, "key")?);
    let suite = suite_for_len(bytes.len(), |s| s.scalar_len())
        .ok_or_else(|| CliError::usage(format!("{}: not a private key", path.display())))?;
    let d = Scalar::from_bytes(&bytes, suite)
        .ok_or_else(|| CliError::usage(format!("{}: scalar out of range", path.display())))?;
    Ok((d, suite))
}

pub fn load_public_key(path: &Path) -> Result<(CurvePoint, &'static CurveSuite), CliError> {
    let bytes = read_file(path, "public key")?;
    let suite = suite_for_len(bytes.len(), |s| s.point_len())
        .ok_or_else(|| CliError::usage(format!("{}: not a public key", path.display())))?;
    let q = point_decode(&bytes, suite)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok((q, suite))
}

pub fn load_credential(path: &Path) -> Result<Credential, CliError> {
    let bytes = read_file(path, "credential")?;
    Credential::from_bytes(&bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_root(path: &Path) -> Result<Credential, CliError> {
    let root = load_credential(path)?;
    if root.role() != Role::Issuer || !root.is_self_signed() {
        return Err(CliError::usage(format!(
            "{}: trust root must be a self-signed issuer credential",
            path.display()
        )));
    }
    Ok(root)
}

fn load_identity(key: &Path, cred: &Path) -> Result<Identity, CliError> {
    let cred = load_credential(cred)?;
    let (d, suite) = load_private_key(key)?;
    if suite.id() != cred.suite().id() {
        return Err(CliError::usage("key and credential use different suites"));
    }
    Identity::new(cred, d).map_err(|e| CliError::usage(e.to_string()))
}

/// First 8 bytes of the hash of the point encoding, in hex.
pub fn fingerprint(point_bytes: &[u8]) -> String {
    hex::encode(&hash(point_bytes).0[..8])
}

fn write_new(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(bytes)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

fn cmd_keygen(args: &KeygenArgs) -> CliResult {
    if args.name.is_empty() || args.name.contains(['/', '\\']) {
        return Err(CliError::usage(format!("invalid key name {:?}", args.name)));
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", args.out.display())))?;
    let mut rng = rng_for(args.seed);
    let (d, q) = keypair_gen(&mut rng, args.suite).map_err(|e| CliError::runtime(e.to_string()))?;
    let point = point_encode(&q, args.suite).expect("public keys are never the identity");
    let key_path = args.out.join(format!("{}.{KEY_EXT}", args.name));
    let pub_path = args.out.join(format!("{}.{PUB_EXT}", args.name));
    write_new(&key_path, &d.to_bytes(args.suite))?;
    write_new(&pub_path, &point)?;
    println!(
        "suite={} key={} pub={} fingerprint={}",
        args.suite.name(),
        key_path.display(),
        pub_path.display(),
        fingerprint(&point)
    );
    Ok(())
}

fn cmd_credgen(args: &CredgenArgs) -> CliResult {
    let role: Role = args.role.parse().map_err(CliError::usage)?;
    let subject = SubjectId::new(&args.subject).map_err(|e| CliError::usage(e.to_string()))?;
    if args.valid_days == 0 {
        return Err(CliError::usage("InvalidCredentialFields: --valid-days must be at least 1"));
    }
    let (issuer_key, suite) = load_private_key(&args.issuer_key)?;
    let (public, pub_suite) = load_public_key(&args.public)?;
    if pub_suite.id() != suite.id() {
        return Err(CliError::usage("issuer key and public key use different suites"));
    }
    let self_signed = suite.mul_generator(issuer_key.value()) == public;
    let issuer_id = if self_signed {
        subject
    } else {
        let path = args
            .issuer_cred
            .as_ref()
            .ok_or_else(|| CliError::usage("--issuer-cred is required unless the credential is self-signed"))?;
        let issuer = load_credential(path)?;
        if issuer.suite().id() != suite.id() || *issuer.static_pub() != suite.mul_generator(issuer_key.value()) {
            return Err(CliError::usage("--issuer-key does not match --issuer-cred"));
        }
        if issuer.role() != Role::Issuer {
            return Err(CliError::usage("the issuer credential does not have the issuer role"));
        }
        *issuer.subject_id()
    };
    let now = now_secs();
    let fields = CredentialFields {
        subject_id: subject,
        role,
        static_pub: public,
        valid_from: now,
        valid_to: now + args.valid_days * 86_400,
        issuer_id,
    };
    let mut rng = rng_for(args.seed);
    let cred = credential_issue(&issuer_key, fields, &mut rng, suite)
        .map_err(|e| CliError::usage(format!("InvalidCredentialFields: {e}")))?;
    write_new(&args.out, &cred.to_bytes())?;
    println!(
        "subject={} role={} issuer={} self_signed={} valid_to={} out={}",
        subject.as_str(),
        role,
        issuer_id.as_str(),
        self_signed,
        now + args.valid_days * 86_400,
        args.out.display()
    );
    Ok(())
}

fn install_ctrlc(flag: std::sync::Arc<std::sync::atomic::AtomicBool>) -> CliResult {
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
        .map_err(|e| CliError::runtime(format!("cannot install signal handler: {e}")))
}

fn cmd_serve(args: &ServeArgs) -> CliResult {
    let root = load_root(&args.root)?;
    let identity = load_identity(&args.key, &args.cred)?;
    if identity.credential().role() != Role::Server {
        return Err(CliError::usage("--cred is not a server credential"));
    }
    let anomaly = AnomalyConfig {
        low: args.hr_low,
        high: args.hr_high,
        consecutive: args.hr_consecutive,
    };
    anomaly.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let server = Server::bind(ServerConfig {
        listen: args.listen.clone(),
        identity,
        root,
        store_dir: args.store_dir.clone(),
        anomaly,
        fsync: args.fsync,
    })
    .map_err(|e| match e {
        EndpointError::Config(m) => CliError::usage(m),
        other => CliError::runtime(other.to_string()),
    })?;
    install_ctrlc(server.shutdown_flag())?;
    server.run().map_err(|e| CliError::runtime(e.to_string()))
}

fn cmd_device(args: &DeviceArgs) -> CliResult {
    let root = load_root(&args.root)?;
    let identity = load_identity(&args.key, &args.cred)?;
    let suite = args.suite.unwrap_or_else(|| identity.credential().suite());
    let script = match &args.anomaly_script {
        Some(p) => {
            let text = String::from_utf8(read_file(p, "anomaly script")?)
                .map_err(|_| CliError::usage(format!("{}: not UTF-8", p.display())))?;
            AnomalyScript::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => AnomalyScript::default(),
    };
    let pacing = if args.fast {
        Pacing::Logical {
            start_ms: crate::endpoints::now_ms(),
        }
    } else {
        Pacing::Realtime
    };
    let cfg = DeviceConfig {
        server: args.connect.clone(),
        identity,
        root,
        suite,
        interval_ms: args.interval_ms,
        count: args.count,
        seed: args.seed,
        sensor: SensorParams::default(),
        script,
        pacing,
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    match run_device(&cfg) {
        Ok(report) => {
            println!(
                "status=ok sent_count={} session_id={} duration_ms={}",
                report.sent_count,
                report.session_id,
                report.duration.as_millis()
            );
            Ok(())
        }
        Err(e) => {
            println!("status=failed cause={} detail={:?}", e.cause(), e.to_string());
            Err(CliError::runtime(e.to_string()))
        }
    }
}

fn cmd_proxy(args: &ProxyArgs) -> CliResult {
    let plan = TamperPlan {
        mode: args.mode,
        target_index: args.target_index,
        direction: args.direction,
        bit_offset: args.bit_offset,
    };
    let proxy = Proxy::bind(
        ProxyConfig {
            listen: args.listen.clone(),
            upstream: args.upstream.clone(),
            plan,
        },
        ProxyLog::new(true),
    )
    .map_err(|e| CliError::runtime(format!("cannot bind {}: {e}", args.listen)))?;
    let addr = proxy.local_addr().map_err(|e| CliError::runtime(e.to_string()))?;
    info!(
        "event=proxy_listening addr={addr} upstream={} mode={} target_index={} direction={}",
        args.upstream, plan.mode, plan.target_index, plan.direction
    );
    install_ctrlc(proxy.shutdown_flag())?;
    proxy.proxy_run().map_err(|e| CliError::runtime(e.to_string()))
}

pub fn execute(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Keygen(a) => cmd_keygen(a),
        Command::Credgen(a) => cmd_credgen(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Device(a) => cmd_device(a),
        Command::Proxy(a) => cmd_proxy(a),
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("VITALINK_LOG", "info");
    let _ = env_logger::Builder::from_env(env)
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} target={} {}",
                record.level().as_str().to_lowercase(),
                record.target(),
                record.args()
            )
        })
        .try_init();
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            error!("event=failed exit_code={} error={:?}", e.code, e.message);
            e.code
        }
    }
}
