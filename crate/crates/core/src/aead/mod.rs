//! AES-128-GCM authenticated encryption.
//!
//! Sealing runs AES in counter mode and authenticates `aad ‖ ciphertext`
//! with GHASH. Opening decrypts, recomputes the tag and compares it in
//! constant time; on a mismatch the decrypted buffer is wiped and only
//! [`AeadError::AuthFailure`] comes back.

pub mod aes;
pub mod ghash;

use std::fmt;

use subtle::ConstantTimeEq;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop, Zeroizing};

pub use aes::Aes128;
pub use ghash::gf128_mul;
use ghash::Ghash;

pub const KEY_LEN: usize = 16;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
/// Per-call plaintext cap.
pub const MAX_PLAINTEXT: usize = 64 * 1024;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AeadError {
    #[error("authentication failed")]
    AuthFailure,
    #[error("payload exceeds {MAX_PLAINTEXT} bytes")]
    PayloadTooLarge,
}

#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct AeadKey([u8; KEY_LEN]);

impl AeadKey {
    pub fn new(bytes: [u8; KEY_LEN]) -> Self {
        AeadKey(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        Some(AeadKey(bytes.try_into().ok()?))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for AeadKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AeadKey(..)")
    }
}

/// Ciphertext plus its tag. On the wire: `ciphertext ‖ tag`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedRecord {
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl SealedRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.ciphertext.len() + TAG_LEN);
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Splits `ciphertext ‖ tag`; `None` if shorter than a tag.
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let split = bytes.len().checked_sub(TAG_LEN)?;
        Some(SealedRecord {
            ciphertext: bytes[..split].to_vec(),
            tag: bytes[split..].try_into().unwrap(),
        })
    }
}

pub fn block_encrypt(key: &AeadKey, block: &[u8; 16]) -> [u8; 16] {
    Aes128::new(key.as_bytes()).encrypt_block(block)
}

struct Gcm {
    cipher: Aes128,
    h: [u8; 16],
}

impl Gcm {
    fn new(key: &AeadKey) -> Self {
        let cipher = Aes128::new(key.as_bytes());
        let h = cipher.encrypt_block(&[0u8; 16]);
        Gcm { cipher, h }
    }

    fn counter_block(nonce: &[u8; NONCE_LEN], counter: u32) -> [u8; 16] {
        let mut block = [0u8; 16];
        block[..NONCE_LEN].copy_from_slice(nonce);
        block[NONCE_LEN..].copy_from_slice(&counter.to_be_bytes());
        block
    }

    /// XORs the keystream starting at counter 2 (J0 + 1) into `data`.
    fn apply_keystream(&self, nonce: &[u8; NONCE_LEN], data: &mut [u8]) {
        for (i, chunk) in data.chunks_mut(16).enumerate() {
            let mut ks = self
                .cipher
                .encrypt_block(&Self::counter_block(nonce, 2u32.wrapping_add(i as u32)));
            for (b, k) in chunk.iter_mut().zip(ks.iter()) {
                *b ^= k;
            }
            ks.zeroize();
        }
    }

    fn tag(&self, nonce: &[u8; NONCE_LEN], aad: &[u8], ciphertext: &[u8]) -> [u8; TAG_LEN] {
        let mut g = Ghash::new(&self.h);
        g.update_padded(aad);
        g.update_padded(ciphertext);
        let s = g.finalize(aad.len(), ciphertext.len());
        let ek_j0 = self.cipher.encrypt_block(&Self::counter_block(nonce, 1));
        let mut tag = [0u8; TAG_LEN];
        for i in 0..TAG_LEN {
            tag[i] = s[i] ^ ek_j0[i];
        }
        tag
    }
}

impl Drop for Gcm {
    fn drop(&mut self) {
        self.h.zeroize();
    }
}

pub fn seal(
    key: &AeadKey,
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    plaintext: &[u8],
) -> Result<SealedRecord, AeadError> {
    if plaintext.len() > MAX_PLAINTEXT {
        return Err(AeadError::PayloadTooLarge);
    }
    let gcm = Gcm::new(key);
    let mut ciphertext = plaintext.to_vec();
    gcm.apply_keystream(nonce, &mut ciphertext);
    let tag = gcm.tag(nonce, aad, &ciphertext);
    Ok(SealedRecord { ciphertext, tag })
}

pub fn open(
    key: &AeadKey,
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    record: &SealedRecord,
) -> Result<Vec<u8>, AeadError> {
    if record.ciphertext.len() > MAX_PLAINTEXT {
        return Err(AeadError::PayloadTooLarge);
    }
    let gcm = Gcm::new(key);
    let mut plaintext = Zeroizing::new(record.ciphertext.clone());
    gcm.apply_keystream(nonce, &mut plaintext);
    let expected = gcm.tag(nonce, aad, &record.ciphertext);
    if bool::from(expected.ct_eq(&record.tag)) {
        Ok(std::mem::take(&mut *plaintext))
    } else {
        plaintext.zeroize();
        Err(AeadError::AuthFailure)
    }
}
