//! Schnorr signatures over the protocol curve and the two-level signed
//! credentials built on them.
//!
//! A trust root is a self-signed `issuer` credential distributed to every
//! endpoint ahead of time. Device and server credentials are signed by the
//! root. There are no intermediate issuers.
//!
//! Credential wire layout (all integers big-endian):
//!
//! ```text
//! version(1) ‖ subject_id(16) ‖ role(1) ‖ static_pub(1+2L) ‖
//! valid_from(8) ‖ valid_to(8) ‖ issuer_id(16) ‖ R(1+2L) ‖ s(N)
//! ```
//!
//! where L is the suite's field length and N its scalar length. Everything
//! before `R` is the to-be-signed encoding. Every field has a fixed width
//! for a given suite, so the suite can be recovered from the total length.

use std::fmt;
use std::str::FromStr;

use rand::TryCryptoRng;
use thiserror::Error;

use crate::bigint::U256;
use crate::curve::{point_decode, point_encode, CurvePoint, CurveSuite, Scalar, SuiteId};
use crate::kdf::hash_parts;

pub const CREDENTIAL_VERSION: u8 = 1;
pub const SUBJECT_LEN: usize = 16;
/// Tolerated clock disagreement when endpoints check validity windows.
pub const CLOCK_SKEW_SECS: u64 = 300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CredentialError {
    #[error("invalid credential fields: {0}")]
    InvalidCredentialFields(String),
    #[error("malformed signature encoding")]
    MalformedSignature,
    #[error("malformed credential encoding")]
    MalformedCredential,
    #[error("signature does not verify")]
    BadSignature,
    #[error("credential expired")]
    Expired,
    #[error("credential not yet valid")]
    NotYetValid,
    #[error("credential issuer is not the trust root")]
    UnknownIssuer,
    #[error("credential role {found} where {expected} was required")]
    RoleMismatch { expected: Role, found: Role },
    #[error("private key does not match credential public key")]
    KeyMismatch,
    #[error("entropy source failed")]
    EntropyFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Device = 0,
    Server = 1,
    Issuer = 2,
}

impl Role {
    pub fn from_u8(v: u8) -> Option<Role> {
        match v {
            0 => Some(Role::Device),
            1 => Some(Role::Server),
            2 => Some(Role::Issuer),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Device => "device",
            Role::Server => "server",
            Role::Issuer => "issuer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "device" => Ok(Role::Device),
            "server" => Ok(Role::Server),
            "issuer" => Ok(Role::Issuer),
            other => Err(format!("unknown role {other:?} (expected device, server or issuer)")),
        }
    }
}

/// Up to 16 bytes of UTF-8, zero-padded. Tabs, newlines and other control
/// characters are refused so the id can sit in a log column unescaped.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubjectId([u8; SUBJECT_LEN]);

impl SubjectId {
    pub fn new(name: &str) -> Result<Self, CredentialError> {
        let invalid = |why: &str| CredentialError::InvalidCredentialFields(format!("subject {name:?}: {why}"));
        if name.is_empty() {
            return Err(invalid("empty"));
        }
        if name.len() > SUBJECT_LEN {
            return Err(invalid("longer than 16 bytes"));
        }
        if name.chars().any(|c| c.is_control() || c.is_whitespace()) {
            return Err(invalid("contains whitespace or control characters"));
        }
        let mut buf = [0u8; SUBJECT_LEN];
        buf[..name.len()].copy_from_slice(name.as_bytes());
        Ok(SubjectId(buf))
    }

    fn from_wire(bytes: &[u8]) -> Result<Self, CredentialError> {
        let end = bytes.iter().position(|&b| b == 0).unwrap_or(SUBJECT_LEN);
        if bytes[end..].iter().any(|&b| b != 0) {
            return Err(CredentialError::MalformedCredential);
        }
        let name = std::str::from_utf8(&bytes[..end]).map_err(|_| CredentialError::MalformedCredential)?;
        SubjectId::new(name).map_err(|_| CredentialError::MalformedCredential)
    }

    pub fn as_bytes(&self) -> &[u8; SUBJECT_LEN] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        let end = self.0.iter().position(|&b| b == 0).unwrap_or(SUBJECT_LEN);
        std::str::from_utf8(&self.0[..end]).expect("validated on construction")
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubjectId({:?})", self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchnorrSig {
    r: CurvePoint,
    s: U256,
}

impl SchnorrSig {
    pub fn commitment(&self) -> &CurvePoint {
        &self.r
    }

    pub fn response(&self) -> &U256 {
        &self.s
    }

    /// Builds a signature from raw parts without validation.
    pub fn from_parts(r: CurvePoint, s: U256) -> Self {
        SchnorrSig { r, s }
    }

    pub fn encoded_len(suite: &CurveSuite) -> usize {
        suite.point_len() + suite.scalar_len()
    }

    /// `R ‖ s`.
    pub fn to_bytes(&self, suite: &CurveSuite) -> Vec<u8> {
        let mut out = point_encode(&self.r, suite).expect("R is never the identity");
        out.extend_from_slice(&self.s.to_be_vec(suite.scalar_len()));
        out
    }

    pub fn from_bytes(bytes: &[u8], suite: &CurveSuite) -> Result<Self, CredentialError> {
        if bytes.len() != Self::encoded_len(suite) {
            return Err(CredentialError::MalformedSignature);
        }
        let (r_bytes, s_bytes) = bytes.split_at(suite.point_len());
        let r = point_decode(r_bytes, suite).map_err(|_| CredentialError::MalformedSignature)?;
        let s = U256::from_be_slice(s_bytes).ok_or(CredentialError::MalformedSignature)?;
        if s >= *suite.order() {
            return Err(CredentialError::MalformedSignature);
        }
        Ok(SchnorrSig { r, s })
    }
}

/// e = H(R ‖ Q ‖ msg) mod n
fn challenge(r: &CurvePoint, q: &CurvePoint, msg: &[u8], suite: &CurveSuite) -> Option<U256> {
    let r_enc = point_encode(r, suite).ok()?;
    let q_enc = point_encode(q, suite).ok()?;
    let digest = hash_parts(&[&r_enc, &q_enc, msg]);
    Some(suite.order_modulus().reduce_be_bytes(digest.as_bytes()))
}

pub fn schnorr_sign<R: TryCryptoRng + ?Sized>(
    d: &Scalar,
    msg: &[u8],
    rng: &mut R,
    suite: &CurveSuite,
) -> Result<SchnorrSig, CredentialError> {
    let k = Scalar::random(rng, suite).map_err(|_| CredentialError::EntropyFailure)?;
    let r = suite.mul_generator(k.value());
    let q = suite.mul_generator(d.value());
    let e = challenge(&r, &q, msg, suite).expect("R and Q are non-identity");
    let n = suite.order_modulus();
    let s = n.add(k.value(), &n.mul(&e, d.value()));
    Ok(SchnorrSig { r, s })
}

/// Checks `s·G == R + e·Q`.
pub fn schnorr_verify(q: &CurvePoint, msg: &[u8], sig: &SchnorrSig, suite: &CurveSuite) -> bool {
    if !suite.is_on_curve(q) || !suite.is_on_curve(&sig.r) || sig.s >= *suite.order() {
        return false;
    }
    let Some(e) = challenge(&sig.r, q, msg, suite) else {
        return false;
    };
    let lhs = suite.mul_generator(&sig.s);
    let rhs = suite.add(&sig.r, &suite.mul(&e, q));
    lhs == rhs
}

/// Everything in a credential except the issuer's signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CredentialFields {
    pub subject_id: SubjectId,
    pub role: Role,
    pub static_pub: CurvePoint,
    pub valid_from: u64,
    pub valid_to: u64,
    pub issuer_id: SubjectId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Credential {
    suite: SuiteId,
    version: u8,
    fields: CredentialFields,
    signature: SchnorrSig,
}

impl Credential {
    pub fn suite(&self) -> &'static CurveSuite {
        CurveSuite::by_id(self.suite).expect("credentials only exist for known suites")
    }

    pub fn version(&self) -> u8 {
        self.version
    }

    pub fn fields(&self) -> &CredentialFields {
        &self.fields
    }

    pub fn subject_id(&self) -> &SubjectId {
        &self.fields.subject_id
    }

    pub fn issuer_id(&self) -> &SubjectId {
        &self.fields.issuer_id
    }

    pub fn role(&self) -> Role {
        self.fields.role
    }

    pub fn static_pub(&self) -> &CurvePoint {
        &self.fields.static_pub
    }

    pub fn signature(&self) -> &SchnorrSig {
        &self.signature
    }

    pub fn is_self_signed(&self) -> bool {
        self.fields.subject_id == self.fields.issuer_id
    }

    pub fn encoded_len(suite: &CurveSuite) -> usize {
        Self::tbs_len(suite) + SchnorrSig::encoded_len(suite)
    }

    fn tbs_len(suite: &CurveSuite) -> usize {
        1 + SUBJECT_LEN + 1 + suite.point_len() + 8 + 8 + SUBJECT_LEN
    }

    /// Canonical to-be-signed bytes.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        tbs_encode(self.version, &self.fields, self.suite())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.tbs_bytes();
        out.extend_from_slice(&self.signature.to_bytes(self.suite()));
        out
    }

    /// Parses a credential, identifying the suite by the encoded length.
    /// The signature is not checked here; see [`credential_verify`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CredentialError> {
        let suite = [CurveSuite::p256(), CurveSuite::toy()]
            .into_iter()
            .find(|s| Self::encoded_len(s) == bytes.len())
            .ok_or(CredentialError::MalformedCredential)?;
        let pl = suite.point_len();
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &bytes[at..at + n];
            at += n;
            s
        };
        let version = take(1)[0];
        if version != CREDENTIAL_VERSION {
            return Err(CredentialError::MalformedCredential);
        }
        let subject_id = SubjectId::from_wire(take(SUBJECT_LEN))?;
        let role = Role::from_u8(take(1)[0]).ok_or(CredentialError::MalformedCredential)?;
        let static_pub = point_decode(take(pl), suite).map_err(|_| CredentialError::MalformedCredential)?;
        let valid_from = u64::from_be_bytes(take(8).try_into().unwrap());
        let valid_to = u64::from_be_bytes(take(8).try_into().unwrap());
        let issuer_id = SubjectId::from_wire(take(SUBJECT_LEN))?;
        let signature = SchnorrSig::from_bytes(take(SchnorrSig::encoded_len(suite)), suite)?;
        if valid_from >= valid_to {
            return Err(CredentialError::MalformedCredential);
        }
        Ok(Credential {
            suite: suite.id(),
            version,
            fields: CredentialFields {
                subject_id,
                role,
                static_pub,
                valid_from,
                valid_to,
                issuer_id,
            },
            signature,
        })
    }

    /// Replaces the signature. Only useful for building negative tests.
    pub fn with_signature(mut self, signature: SchnorrSig) -> Self {
        self.signature = signature;
        self
    }
}

fn tbs_encode(version: u8, f: &CredentialFields, suite: &CurveSuite) -> Vec<u8> {
    let mut out = Vec::with_capacity(Credential::tbs_len(suite));
    out.push(version);
    out.extend_from_slice(f.subject_id.as_bytes());
    out.push(f.role as u8);
    out.extend_from_slice(&point_encode(&f.static_pub, suite).expect("validated non-identity"));
    out.extend_from_slice(&f.valid_from.to_be_bytes());
    out.extend_from_slice(&f.valid_to.to_be_bytes());
    out.extend_from_slice(f.issuer_id.as_bytes());
    out
}

/// Signs `fields` with the issuer's private key.
pub fn credential_issue<R: TryCryptoRng + ?Sized>(
    issuer_priv: &Scalar,
    fields: CredentialFields,
    rng: &mut R,
    suite: &CurveSuite,
) -> Result<Credential, CredentialError> {
    if fields.valid_from >= fields.valid_to {
        return Err(CredentialError::InvalidCredentialFields(format!(
            "valid_from {} is not before valid_to {}",
            fields.valid_from, fields.valid_to
        )));
    }
    if !suite.is_on_curve(&fields.static_pub) {
        return Err(CredentialError::InvalidCredentialFields(
            "static public key is not a valid curve point".into(),
        ));
    }
    if fields.subject_id == fields.issuer_id && suite.mul_generator(issuer_priv.value()) != fields.static_pub {
        return Err(CredentialError::InvalidCredentialFields(
            "self-signed credential must carry the issuer's own public key".into(),
        ));
    }
    let tbs = tbs_encode(CREDENTIAL_VERSION, &fields, suite);
    let signature = schnorr_sign(issuer_priv, &tbs, rng, suite)?;
    Ok(Credential {
        suite: suite.id(),
        version: CREDENTIAL_VERSION,
        fields,
        signature,
    })
}

/// Strict verification: the validity window must contain `now` exactly.
pub fn credential_verify(
    cred: &Credential,
    trust_root: &Credential,
    now: u64,
    expected_role: Role,
) -> Result<(), CredentialError> {
    credential_verify_with_skew(cred, trust_root, now, expected_role, 0)
}

/// Verification with `skew` seconds of slack on both window edges.
pub fn credential_verify_with_skew(
    cred: &Credential,
    trust_root: &Credential,
    now: u64,
    expected_role: Role,
    skew: u64,
) -> Result<(), CredentialError> {
    let root_ok = trust_root.role() == Role::Issuer
        && trust_root.is_self_signed()
        && schnorr_verify(
            trust_root.static_pub(),
            &trust_root.tbs_bytes(),
            &trust_root.signature,
            trust_root.suite(),
        );
    if !root_ok || cred.suite != trust_root.suite || cred.issuer_id() != trust_root.subject_id() {
        return Err(CredentialError::UnknownIssuer);
    }
    if !schnorr_verify(trust_root.static_pub(), &cred.tbs_bytes(), &cred.signature, cred.suite()) {
        return Err(CredentialError::BadSignature);
    }
    if now.saturating_add(skew) < cred.fields.valid_from {
        return Err(CredentialError::NotYetValid);
    }
    if now.saturating_sub(skew) > cred.fields.valid_to {
        return Err(CredentialError::Expired);
    }
    if cred.role() != expected_role {
        return Err(CredentialError::RoleMismatch {
            expected: expected_role,
            found: cred.role(),
        });
    }
    Ok(())
}

/// A credential together with the private key for its `static_pub`.
#[derive(Clone)]
pub struct Identity {
    credential: Credential,
    private_key: Scalar,
}

impl Identity {
    pub fn new(credential: Credential, private_key: Scalar) -> Result<Self, CredentialError> {
        let suite = credential.suite();
        if suite.mul_generator(private_key.value()) != *credential.static_pub() {
            return Err(CredentialError::KeyMismatch);
        }
        Ok(Identity {
            credential,
            private_key,
        })
    }

    /// Pairs a credential with a key that does not match it. Only the
    /// adversary proxy wants this.
    pub(crate) fn mismatched(credential: Credential, private_key: Scalar) -> Self {
        Identity {
            credential,
            private_key,
        }
    }

    pub fn credential(&self) -> &Credential {
        &self.credential
    }

    pub fn private_key(&self) -> &Scalar {
        &self.private_key
    }
}

impl fmt::Debug for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Identity")
            .field("subject", self.credential.subject_id())
            .field("role", &self.credential.role())
            .finish_non_exhaustive()
    }
}
