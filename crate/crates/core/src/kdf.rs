//! SHA-256, HMAC-SHA-256 and HKDF.

use std::fmt;

use sha2::{Digest as _, Sha256};
use thiserror::Error;
use zeroize::{Zeroize, Zeroizing};

pub const DIGEST_LEN: usize = 32;
const BLOCK_LEN: usize = 64;

/// Key-schedule labels. Frozen: both endpoints must agree on them.
pub mod labels {
    pub const C2S_KEY: &[u8] = b"vl c2s key";
    pub const S2C_KEY: &[u8] = b"vl s2c key";
    pub const C2S_SALT: &[u8] = b"vl c2s salt";
    pub const S2C_SALT: &[u8] = b"vl s2c salt";
    pub const CLIENT_FIN: &[u8] = b"vl c fin";
    pub const SERVER_FIN: &[u8] = b"vl s fin";
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum KdfError {
    #[error("requested output length {0} is outside 1..=8160")]
    InvalidLength(usize),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Zeroize)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

pub fn hash(msg: &[u8]) -> Digest {
    Digest(Sha256::digest(msg).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

pub fn hmac(key: &[u8], msg: &[u8]) -> Digest {
    hmac_parts(key, &[msg])
}

pub fn hmac_parts(key: &[u8], parts: &[&[u8]]) -> Digest {
    let mut block = Zeroizing::new([0u8; BLOCK_LEN]);
    if key.len() > BLOCK_LEN {
        block[..DIGEST_LEN].copy_from_slice(&hash(key).0);
    } else {
        block[..key.len()].copy_from_slice(key);
    }
    let mut ipad = Zeroizing::new([0x36u8; BLOCK_LEN]);
    let mut opad = Zeroizing::new([0x5cu8; BLOCK_LEN]);
    for i in 0..BLOCK_LEN {
        ipad[i] ^= block[i];
        opad[i] ^= block[i];
    }
    let mut inner = Sha256::new();
    inner.update(&ipad[..]);
    for p in parts {
        inner.update(p);
    }
    let inner: [u8; DIGEST_LEN] = inner.finalize().into();
    let mut outer = Sha256::new();
    outer.update(&opad[..]);
    outer.update(inner);
    Digest(outer.finalize().into())
}

/// `HMAC(salt, ikm)`; an empty salt means 32 zero bytes.
pub fn hkdf_extract(salt: &[u8], ikm: &[u8]) -> Digest {
    if salt.is_empty() {
        hmac(&[0u8; DIGEST_LEN], ikm)
    } else {
        hmac(salt, ikm)
    }
}

pub fn hkdf_expand(prk: &Digest, info: &[u8], out_len: usize) -> Result<Zeroizing<Vec<u8>>, KdfError> {
    if out_len == 0 || out_len > 255 * DIGEST_LEN {
        return Err(KdfError::InvalidLength(out_len));
    }
    let mut out = Zeroizing::new(Vec::with_capacity(out_len));
    let mut prev: Option<Digest> = None;
    let mut counter = 1u8;
    while out.len() < out_len {
        let t = match &prev {
            None => hmac_parts(&prk.0, &[info, &[counter]]),
            Some(p) => hmac_parts(&prk.0, &[&p.0, info, &[counter]]),
        };
        let take = (out_len - out.len()).min(DIGEST_LEN);
        out.extend_from_slice(&t.0[..take]);
        prev = Some(t);
        counter = counter.wrapping_add(1);
    }
    if let Some(mut p) = prev {
        p.zeroize();
    }
    Ok(out)
}
