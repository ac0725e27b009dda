//! Three-message mutually authenticated key exchange.
//!
//! ```text
//! client                                            server
//!   ClientHello  { suite_id, client_random, eph_pub }   ->
//!             <-  ServerHello { server_random, eph_pub, credential, sig, fin_mac }
//!   ClientFinish { credential, sig, fin_mac }            ->
//! ```
//!
//! Each side signs the transcript up to and including its own credential,
//! then MACs the same transcript under its finished key. Session keys come
//! from HKDF over the ephemeral ECDH secret, salted with both randoms and
//! bound to the transcript through the expand labels. The suite id travels
//! inside the signed transcript, so it cannot be silently downgraded.
//!
//! Integers are big-endian. Variable-length fields carry a 16-bit length
//! prefix; randoms and MACs are fixed at 32 bytes.

use std::fmt;
use std::time::Duration;

use rand::TryCryptoRng;
use subtle::ConstantTimeEq;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::aead::{AeadKey, KEY_LEN};
use crate::credential::{
    credential_verify_with_skew, schnorr_sign, schnorr_verify, Credential, CredentialError, Identity, Role,
    SchnorrSig, SubjectId, CLOCK_SKEW_SECS,
};
use crate::curve::{keypair_gen, point_decode, point_encode, shared_secret, CurveSuite, Scalar, SuiteId};
use crate::kdf::{hash, hash_parts, hkdf_expand, hkdf_extract, hmac, labels, Digest, DIGEST_LEN};
use crate::record::{RecordReceiver, RecordSender};

pub const RANDOM_LEN: usize = 32;
pub const SALT_LEN: usize = 4;
pub const FIN_KEY_LEN: usize = 32;
/// Longest a party waits for the next handshake message.
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

const SERVER_SIG_LABEL: &[u8] = b"vl srv";
const CLIENT_SIG_LABEL: &[u8] = b"vl cli";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HandshakeError {
    #[error("unsupported suite 0x{0:04x}")]
    UnsupportedSuite(u16),
    #[error("malformed ephemeral public key")]
    MalformedPoint,
    #[error("malformed handshake message")]
    MalformedMessage,
    #[error("server credential rejected: {0}")]
    BadServerCredential(CredentialError),
    #[error("client credential rejected: {0}")]
    BadClientCredential(CredentialError),
    #[error("transcript signature does not verify")]
    BadTranscriptSignature,
    #[error("finished MAC mismatch")]
    BadFinishedMac,
    #[error("derived directional keys collide")]
    KeyCollision,
    #[error("entropy source failed")]
    EntropyFailure,
    #[error("handshake step called in phase {0:?}")]
    OutOfOrder(Phase),
}

impl HandshakeError {
    /// Short stable name for logs.
    pub fn name(&self) -> &'static str {
        match self {
            HandshakeError::UnsupportedSuite(_) => "UnsupportedSuite",
            HandshakeError::MalformedPoint => "MalformedPoint",
            HandshakeError::MalformedMessage => "MalformedMessage",
            HandshakeError::BadServerCredential(_) => "BadServerCredential",
            HandshakeError::BadClientCredential(_) => "BadClientCredential",
            HandshakeError::BadTranscriptSignature => "BadTranscriptSignature",
            HandshakeError::BadFinishedMac => "BadFinishedMac",
            HandshakeError::KeyCollision => "KeyCollision",
            HandshakeError::EntropyFailure => "EntropyFailure",
            HandshakeError::OutOfOrder(_) => "OutOfOrder",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Start,
    AwaitServerHello,
    AwaitClientFinish,
    Established,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HandshakeRole {
    Client,
    Server,
}

/// Directional traffic keys and finished-MAC keys for one session.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct SessionKeys {
    pub c2s_key: AeadKey,
    pub s2c_key: AeadKey,
    pub c2s_salt: [u8; SALT_LEN],
    pub s2c_salt: [u8; SALT_LEN],
    pub client_fin_key: [u8; FIN_KEY_LEN],
    pub server_fin_key: [u8; FIN_KEY_LEN],
    pub session_id: Digest,
}

impl fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionKeys")
            .field("session_id", &self.session_id)
            .finish_non_exhaustive()
    }
}

impl SessionKeys {
    /// Sending and receiving record state for the client side.
    pub fn client_directions(&self) -> (RecordSender, RecordReceiver) {
        (
            RecordSender::new(self.c2s_key.clone(), self.c2s_salt),
            RecordReceiver::new(self.s2c_key.clone(), self.s2c_salt),
        )
    }

    /// Sending and receiving record state for the server side.
    pub fn server_directions(&self) -> (RecordSender, RecordReceiver) {
        (
            RecordSender::new(self.s2c_key.clone(), self.s2c_salt),
            RecordReceiver::new(self.c2s_key.clone(), self.c2s_salt),
        )
    }
}

/// HKDF key schedule: `prk = extract(client_random ‖ server_random, shared)`,
/// each field `expand(prk, label ‖ transcript_hash, len)`.
pub fn derive_session_keys(
    shared: &[u8],
    client_random: &[u8; RANDOM_LEN],
    server_random: &[u8; RANDOM_LEN],
    transcript_hash: &Digest,
) -> Result<SessionKeys, HandshakeError> {
    let mut salt = [0u8; 2 * RANDOM_LEN];
    salt[..RANDOM_LEN].copy_from_slice(client_random);
    salt[RANDOM_LEN..].copy_from_slice(server_random);
    let prk = hkdf_extract(&salt, shared);
    let expand = |label: &[u8], len: usize| {
        let mut info = label.to_vec();
        info.extend_from_slice(transcript_hash.as_bytes());
        hkdf_expand(&prk, &info, len).expect("fixed lengths are in range")
    };
    let keys = SessionKeys {
        c2s_key: AeadKey::from_slice(&expand(labels::C2S_KEY, KEY_LEN)).unwrap(),
        s2c_key: AeadKey::from_slice(&expand(labels::S2C_KEY, KEY_LEN)).unwrap(),
        c2s_salt: expand(labels::C2S_SALT, SALT_LEN)[..].try_into().unwrap(),
        s2c_salt: expand(labels::S2C_SALT, SALT_LEN)[..].try_into().unwrap(),
        client_fin_key: expand(labels::CLIENT_FIN, FIN_KEY_LEN)[..].try_into().unwrap(),
        server_fin_key: expand(labels::SERVER_FIN, FIN_KEY_LEN)[..].try_into().unwrap(),
        session_id: *transcript_hash,
    };
    if keys.c2s_key == keys.s2c_key {
        return Err(HandshakeError::KeyCollision);
    }
    Ok(keys)
}

// ---- message codecs ----

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HandshakeError> {
        if self.buf.len() < n {
            return Err(HandshakeError::MalformedMessage);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], HandshakeError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn vec16(&mut self) -> Result<Vec<u8>, HandshakeError> {
        let len = u16::from_be_bytes(self.array()?) as usize;
        Ok(self.take(len)?.to_vec())
    }

    fn finish(self) -> Result<(), HandshakeError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(HandshakeError::MalformedMessage)
        }
    }
}

fn put_vec16(out: &mut Vec<u8>, v: &[u8]) {
    let len = u16::try_from(v.len()).expect("handshake fields fit in 16 bits");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(v);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientHello {
    pub suite_id: SuiteId,
    pub client_random: [u8; RANDOM_LEN],
    pub eph_pub: Vec<u8>,
}

impl ClientHello {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.suite_id.0.to_be_bytes());
        out.extend_from_slice(&self.client_random);
        put_vec16(&mut out, &self.eph_pub);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, HandshakeError> {
        let mut c = Cursor { buf: bytes };
        let suite_id = SuiteId(u16::from_be_bytes(c.array()?));
        let client_random = c.array()?;
        let eph_pub = c.vec16()?;
        c.finish()?;
        Ok(ClientHello {
            suite_id,
            client_random,
            eph_pub,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerHello {
    pub server_random: [u8; RANDOM_LEN],
    pub eph_pub: Vec<u8>,
    pub credential: Vec<u8>,
    pub signature: Vec<u8>,
    pub fin_mac: [u8; DIGEST_LEN],
}

impl ServerHello {
    /// The leading fields covered by the server's signature and MAC.
    pub fn signed_part(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.server_random);
        put_vec16(&mut out, &self.eph_pub);
        put_vec16(&mut out, &self.credential);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.signed_part();
        put_vec16(&mut out, &self.signature);
        out.extend_from_slice(&self.fin_mac);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, HandshakeError> {
        let mut c = Cursor { buf: bytes };
        let server_random = c.array()?;
        let eph_pub = c.vec16()?;
        let credential = c.vec16()?;
        let signature = c.vec16()?;
        let fin_mac = c.array()?;
        c.finish()?;
        Ok(ServerHello {
            server_random,
            eph_pub,
            credential,
            signature,
            fin_mac,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientFinish {
    pub credential: Vec<u8>,
    pub signature: Vec<u8>,
    pub fin_mac: [u8; DIGEST_LEN],
}

impl ClientFinish {
    pub fn signed_part(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec16(&mut out, &self.credential);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.signed_part();
        put_vec16(&mut out, &self.signature);
        out.extend_from_slice(&self.fin_mac);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, HandshakeError> {
        let mut c = Cursor { buf: bytes };
        let credential = c.vec16()?;
        let signature = c.vec16()?;
        let fin_mac = c.array()?;
        c.finish()?;
        Ok(ClientFinish {
            credential,
            signature,
            fin_mac,
        })
    }
}

/// Digest a party signs: `H(label ‖ transcript)`.
pub fn signed_digest(label: &[u8], transcript: &[u8]) -> Digest {
    hash_parts(&[label, transcript])
}

pub fn server_signed_digest(transcript: &[u8]) -> Digest {
    signed_digest(SERVER_SIG_LABEL, transcript)
}

pub fn client_signed_digest(transcript: &[u8]) -> Digest {
    signed_digest(CLIENT_SIG_LABEL, transcript)
}

// ---- state machine ----

/// Per-connection handshake state.
pub struct Handshake {
    role: HandshakeRole,
    phase: Phase,
    suite: Option<&'static CurveSuite>,
    eph_priv: Option<Scalar>,
    transcript: Vec<u8>,
    client_random: [u8; RANDOM_LEN],
    pending: Option<SessionKeys>,
    peer_identity: Option<SubjectId>,
}

impl fmt::Debug for Handshake {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Handshake")
            .field("role", &self.role)
            .field("phase", &self.phase)
            .field("transcript_len", &self.transcript.len())
            .field("peer_identity", &self.peer_identity)
            .finish_non_exhaustive()
    }
}

fn random_bytes<R: TryCryptoRng + ?Sized>(rng: &mut R) -> Result<[u8; RANDOM_LEN], HandshakeError> {
    let mut out = [0u8; RANDOM_LEN];
    rng.try_fill_bytes(&mut out)
        .map_err(|_| HandshakeError::EntropyFailure)?;
    Ok(out)
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Handshake {
    pub fn client(suite: &'static CurveSuite) -> Self {
        Self::new(HandshakeRole::Client, Some(suite))
    }

    /// The server's suite is fixed by its identity in `server_respond`.
    pub fn server() -> Self {
        Self::new(HandshakeRole::Server, None)
    }

    fn new(role: HandshakeRole, suite: Option<&'static CurveSuite>) -> Self {
        Handshake {
            role,
            phase: Phase::Start,
            suite,
            eph_priv: None,
            transcript: Vec::new(),
            client_random: [0; RANDOM_LEN],
            pending: None,
            peer_identity: None,
        }
    }

    pub fn role(&self) -> HandshakeRole {
        self.role
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn transcript(&self) -> &[u8] {
        &self.transcript
    }

    pub fn peer_identity(&self) -> Option<&SubjectId> {
        self.peer_identity.as_ref()
    }

    pub fn has_ephemeral_key(&self) -> bool {
        self.eph_priv.is_some()
    }

    fn expect(&mut self, role: HandshakeRole, phase: Phase) -> Result<(), HandshakeError> {
        if self.role == role && self.phase == phase {
            Ok(())
        } else {
            let actual = self.phase;
            self.wipe(Phase::Failed);
            Err(HandshakeError::OutOfOrder(actual))
        }
    }

    fn wipe(&mut self, phase: Phase) {
        self.phase = phase;
        self.eph_priv = None;
        self.pending = None;
    }

    fn fail<T>(&mut self, err: HandshakeError) -> Result<T, HandshakeError> {
        self.wipe(Phase::Failed);
        Err(err)
    }

    fn guard<T>(&mut self, r: Result<T, HandshakeError>) -> Result<T, HandshakeError> {
        r.or_else(|e| self.fail(e))
    }

    /// Emits the ClientHello body.
    pub fn client_start<R: TryCryptoRng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<u8>, HandshakeError> {
        self.expect(HandshakeRole::Client, Phase::Start)?;
        let suite = self.suite.expect("client has a suite");
        let r = (|| {
            let client_random = random_bytes(rng)?;
            let (eph, eph_pub) = keypair_gen(rng, suite).map_err(|_| HandshakeError::EntropyFailure)?;
            let hello = ClientHello {
                suite_id: suite.id(),
                client_random,
                eph_pub: point_encode(&eph_pub, suite).expect("non-identity"),
            };
            Ok((hello, eph))
        })();
        let (hello, eph) = self.guard(r)?;
        let body = hello.to_bytes();
        self.client_random = hello.client_random;
        self.eph_priv = Some(eph);
        self.transcript.extend_from_slice(&body);
        self.phase = Phase::AwaitServerHello;
        Ok(body)
    }

    /// Consumes a ClientHello and emits the ServerHello body.
    pub fn server_respond<R: TryCryptoRng + ?Sized>(
        &mut self,
        client_hello: &[u8],
        identity: &Identity,
        rng: &mut R,
    ) -> Result<Vec<u8>, HandshakeError> {
        self.expect(HandshakeRole::Server, Phase::Start)?;
        let r = self.server_respond_inner(client_hello, identity, rng);
        let (body, keys) = self.guard(r)?;
        self.pending = Some(keys);
        self.phase = Phase::AwaitClientFinish;
        Ok(body)
    }

    fn server_respond_inner<R: TryCryptoRng + ?Sized>(
        &mut self,
        client_hello: &[u8],
        identity: &Identity,
        rng: &mut R,
    ) -> Result<(Vec<u8>, SessionKeys), HandshakeError> {
        let hello = ClientHello::parse(client_hello)?;
        let suite = identity.credential().suite();
        if CurveSuite::by_id(hello.suite_id).is_none() || hello.suite_id != suite.id() {
            return Err(HandshakeError::UnsupportedSuite(hello.suite_id.0));
        }
        self.suite = Some(suite);
        let client_eph = point_decode(&hello.eph_pub, suite).map_err(|_| HandshakeError::MalformedPoint)?;
        self.transcript.extend_from_slice(client_hello);

        let server_random = random_bytes(rng)?;
        let (eph, eph_pub) = keypair_gen(rng, suite).map_err(|_| HandshakeError::EntropyFailure)?;
        let shared = shared_secret(&eph, &client_eph, suite).map_err(|_| HandshakeError::MalformedPoint)?;
        drop(eph);

        let mut reply = ServerHello {
            server_random,
            eph_pub: point_encode(&eph_pub, suite).expect("non-identity"),
            credential: identity.credential().to_bytes(),
            signature: Vec::new(),
            fin_mac: [0; DIGEST_LEN],
        };
        let mut signed = self.transcript.clone();
        signed.extend_from_slice(&reply.signed_part());
        let th = hash(&signed);
        let keys = derive_session_keys(&shared, &hello.client_random, &server_random, &th)?;
        let sig = schnorr_sign(
            identity.private_key(),
            server_signed_digest(&signed).as_bytes(),
            rng,
            suite,
        )
        .map_err(|_| HandshakeError::EntropyFailure)?;
        reply.signature = sig.to_bytes(suite);
        reply.fin_mac = hmac(&keys.server_fin_key, th.as_bytes()).0;

        let body = reply.to_bytes();
        self.transcript.extend_from_slice(&body);
        Ok((body, keys))
    }

    /// Consumes the ServerHello, authenticates the server and emits the
    /// ClientFinish body together with the session keys.
    pub fn client_finish<R: TryCryptoRng + ?Sized>(
        &mut self,
        server_hello: &[u8],
        trust_root: &Credential,
        identity: &Identity,
        rng: &mut R,
    ) -> Result<(Vec<u8>, SessionKeys), HandshakeError> {
        self.client_finish_at(server_hello, trust_root, identity, now_unix(), rng)
    }

    /// [`Self::client_finish`] with an explicit clock.
    pub fn client_finish_at<R: TryCryptoRng + ?Sized>(
        &mut self,
        server_hello: &[u8],
        trust_root: &Credential,
        identity: &Identity,
        now: u64,
        rng: &mut R,
    ) -> Result<(Vec<u8>, SessionKeys), HandshakeError> {
        self.expect(HandshakeRole::Client, Phase::AwaitServerHello)?;
        let r = self.client_finish_inner(server_hello, trust_root, identity, now, rng);
        let (body, keys, peer) = self.guard(r)?;
        self.peer_identity = Some(peer);
        self.wipe(Phase::Established);
        Ok((body, keys))
    }

    fn client_finish_inner<R: TryCryptoRng + ?Sized>(
        &mut self,
        server_hello: &[u8],
        trust_root: &Credential,
        identity: &Identity,
        now: u64,
        rng: &mut R,
    ) -> Result<(Vec<u8>, SessionKeys, SubjectId), HandshakeError> {
        let suite = self.suite.expect("client has a suite");
        let hello = ServerHello::parse(server_hello)?;
        let server_eph = point_decode(&hello.eph_pub, suite).map_err(|_| HandshakeError::MalformedPoint)?;
        let eph = self.eph_priv.take().expect("set by client_start");
        let shared = shared_secret(&eph, &server_eph, suite).map_err(|_| HandshakeError::MalformedPoint)?;
        drop(eph);

        let mut signed = self.transcript.clone();
        signed.extend_from_slice(&hello.signed_part());
        let th = hash(&signed);
        let mut keys = derive_session_keys(&shared, &self.client_random, &hello.server_random, &th)?;

        let expected_mac = hmac(&keys.server_fin_key, th.as_bytes());
        if !bool::from(expected_mac.0.ct_eq(&hello.fin_mac)) {
            return Err(HandshakeError::BadFinishedMac);
        }
        let server_cred = Credential::from_bytes(&hello.credential).map_err(HandshakeError::BadServerCredential)?;
        if server_cred.suite().id() != suite.id() {
            return Err(HandshakeError::BadServerCredential(CredentialError::MalformedCredential));
        }
        credential_verify_with_skew(&server_cred, trust_root, now, Role::Server, CLOCK_SKEW_SECS)
            .map_err(HandshakeError::BadServerCredential)?;
        let sig = SchnorrSig::from_bytes(&hello.signature, suite).map_err(|_| HandshakeError::BadTranscriptSignature)?;
        if !schnorr_verify(
            server_cred.static_pub(),
            server_signed_digest(&signed).as_bytes(),
            &sig,
            suite,
        ) {
            return Err(HandshakeError::BadTranscriptSignature);
        }

        self.transcript.extend_from_slice(server_hello);
        let mut finish = ClientFinish {
            credential: identity.credential().to_bytes(),
            signature: Vec::new(),
            fin_mac: [0; DIGEST_LEN],
        };
        let mut signed = self.transcript.clone();
        signed.extend_from_slice(&finish.signed_part());
        let sig = schnorr_sign(
            identity.private_key(),
            client_signed_digest(&signed).as_bytes(),
            rng,
            suite,
        )
        .map_err(|_| HandshakeError::EntropyFailure)?;
        finish.signature = sig.to_bytes(suite);
        finish.fin_mac = hmac(&keys.client_fin_key, hash(&signed).as_bytes()).0;

        let body = finish.to_bytes();
        self.transcript.extend_from_slice(&body);
        keys.session_id = hash(&self.transcript);
        Ok((body, keys, *server_cred.subject_id()))
    }

    /// Consumes the ClientFinish and authenticates the client. Returns the
    /// session keys and the client's subject id.
    pub fn server_complete(
        &mut self,
        client_finish: &[u8],
        trust_root: &Credential,
    ) -> Result<(SessionKeys, SubjectId), HandshakeError> {
        self.server_complete_at(client_finish, trust_root, now_unix())
    }

    pub fn server_complete_at(
        &mut self,
        client_finish: &[u8],
        trust_root: &Credential,
        now: u64,
    ) -> Result<(SessionKeys, SubjectId), HandshakeError> {
        self.expect(HandshakeRole::Server, Phase::AwaitClientFinish)?;
        let r = self.server_complete_inner(client_finish, trust_root, now);
        let (keys, peer) = self.guard(r)?;
        self.peer_identity = Some(peer);
        self.wipe(Phase::Established);
        Ok((keys, peer))
    }

    fn server_complete_inner(
        &mut self,
        client_finish: &[u8],
        trust_root: &Credential,
        now: u64,
    ) -> Result<(SessionKeys, SubjectId), HandshakeError> {
        let suite = self.suite.expect("fixed in server_respond");
        let finish = ClientFinish::parse(client_finish)?;
        let mut keys = self.pending.take().expect("set by server_respond");

        let mut signed = self.transcript.clone();
        signed.extend_from_slice(&finish.signed_part());
        let expected_mac = hmac(&keys.client_fin_key, hash(&signed).as_bytes());
        if !bool::from(expected_mac.0.ct_eq(&finish.fin_mac)) {
            return Err(HandshakeError::BadFinishedMac);
        }
        let client_cred = Credential::from_bytes(&finish.credential).map_err(HandshakeError::BadClientCredential)?;
        if client_cred.suite().id() != suite.id() {
            return Err(HandshakeError::BadClientCredential(CredentialError::MalformedCredential));
        }
        credential_verify_with_skew(&client_cred, trust_root, now, Role::Device, CLOCK_SKEW_SECS)
            .map_err(HandshakeError::BadClientCredential)?;
        let sig = SchnorrSig::from_bytes(&finish.signature, suite).map_err(|_| HandshakeError::BadTranscriptSignature)?;
        if !schnorr_verify(
            client_cred.static_pub(),
            client_signed_digest(&signed).as_bytes(),
            &sig,
            suite,
        ) {
            return Err(HandshakeError::BadTranscriptSignature);
        }
        self.transcript.extend_from_slice(client_finish);
        keys.session_id = hash(&self.transcript);
        Ok((keys, *client_cred.subject_id()))
    }
}
