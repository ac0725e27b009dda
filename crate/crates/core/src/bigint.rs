//! Fixed-width 256-bit integers and Montgomery arithmetic modulo an odd
//! modulus below 2^256.
//!
//! Limbs are little-endian `u64`s. Nothing here is constant time.

use std::cmp::Ordering;
use std::fmt;

use zeroize::Zeroize;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Zeroize)]
pub struct U256(pub(crate) [u64; 4]);

#[inline]
fn adc(a: u64, b: u64, carry: u64) -> (u64, u64) {
    let t = a as u128 + b as u128 + carry as u128;
    (t as u64, (t >> 64) as u64)
}

#[inline]
fn sbb(a: u64, b: u64, borrow: u64) -> (u64, u64) {
    let t = (a as u128).wrapping_sub(b as u128 + borrow as u128);
    (t as u64, (t >> 127) as u64)
}

/// a + b * c + carry
#[inline]
fn mac(a: u64, b: u64, c: u64, carry: u64) -> (u64, u64) {
    let t = a as u128 + (b as u128) * (c as u128) + carry as u128;
    (t as u64, (t >> 64) as u64)
}

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);

    pub const fn from_u64(v: u64) -> Self {
        U256([v, 0, 0, 0])
    }

    /// Big-endian bytes, at most 32 of them; shorter inputs are left-padded.
    pub fn from_be_slice(bytes: &[u8]) -> Option<Self> {
        if bytes.len() > 32 {
            return None;
        }
        let mut buf = [0u8; 32];
        buf[32 - bytes.len()..].copy_from_slice(bytes);
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let start = 32 - 8 * (i + 1);
            *limb = u64::from_be_bytes(buf[start..start + 8].try_into().unwrap());
        }
        Some(U256(limbs))
    }

    /// Parses a big-endian hex constant. Panics on malformed input, so only
    /// use it for literals.
    pub(crate) fn from_hex(s: &str) -> Self {
        let bytes = hex::decode(s).expect("valid hex literal");
        Self::from_be_slice(&bytes).expect("at most 256 bits")
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, limb) in self.0.iter().enumerate() {
            let start = 32 - 8 * (i + 1);
            out[start..start + 8].copy_from_slice(&limb.to_be_bytes());
        }
        out
    }

    /// Big-endian encoding truncated to the low `len` bytes. The caller
    /// guarantees the value fits.
    pub fn to_be_vec(&self, len: usize) -> Vec<u8> {
        let full = self.to_be_bytes();
        debug_assert!(full[..32 - len].iter().all(|&b| b == 0));
        full[32 - len..].to_vec()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Position of the highest set bit plus one; zero for zero.
    pub fn bits(&self) -> usize {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i + (64 - self.0[i].leading_zeros() as usize);
            }
        }
        0
    }

    pub fn low_u64(&self) -> u64 {
        self.0[0]
    }

    pub fn overflowing_add(&self, rhs: &Self) -> (Self, bool) {
        let mut out = [0u64; 4];
        let mut carry = 0;
        for i in 0..4 {
            let (v, c) = adc(self.0[i], rhs.0[i], carry);
            out[i] = v;
            carry = c;
        }
        (U256(out), carry != 0)
    }

    pub fn overflowing_sub(&self, rhs: &Self) -> (Self, bool) {
        let mut out = [0u64; 4];
        let mut borrow = 0;
        for i in 0..4 {
            let (v, b) = sbb(self.0[i], rhs.0[i], borrow);
            out[i] = v;
            borrow = b;
        }
        (U256(out), borrow != 0)
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.to_be_bytes()))
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An odd modulus `m > 1` with precomputed Montgomery constants
/// (R = 2^256).
///
/// Values handed to the `add`/`sub`/`neg` helpers must already be reduced.
/// Values handed to `mont_mul` must be reduced and are interpreted in
/// Montgomery form by the caller's convention.
#[derive(Clone, Debug)]
pub struct Modulus {
    m: U256,
    /// -m^{-1} mod 2^64
    m_inv: u64,
    /// R^2 mod m
    r2: U256,
    /// R mod m, i.e. one in Montgomery form
    r1: U256,
}

impl Modulus {
    pub fn new(m: U256) -> Self {
        assert!(m.0[0] & 1 == 1 && m > U256::ONE, "modulus must be odd and > 1");
        let m0 = m.0[0];
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(m0.wrapping_mul(inv)));
        }
        let mut md = Modulus {
            m,
            m_inv: inv.wrapping_neg(),
            r2: U256::ZERO,
            r1: U256::ZERO,
        };
        // 2^256 mod m and 2^512 mod m by repeated doubling of one.
        let mut acc = U256::ONE;
        for i in 1..=512 {
            acc = md.add(&acc, &acc);
            if i == 256 {
                md.r1 = acc;
            }
        }
        md.r2 = acc;
        md
    }

    pub fn value(&self) -> &U256 {
        &self.m
    }

    pub fn bits(&self) -> usize {
        self.m.bits()
    }

    pub fn add(&self, a: &U256, b: &U256) -> U256 {
        let (s, carry) = a.overflowing_add(b);
        if carry || s >= self.m {
            s.overflowing_sub(&self.m).0
        } else {
            s
        }
    }

    pub fn sub(&self, a: &U256, b: &U256) -> U256 {
        let (d, borrow) = a.overflowing_sub(b);
        if borrow {
            d.overflowing_add(&self.m).0
        } else {
            d
        }
    }

    pub fn neg(&self, a: &U256) -> U256 {
        if a.is_zero() {
            U256::ZERO
        } else {
            self.m.overflowing_sub(a).0
        }
    }

    /// a * b * R^{-1} mod m (CIOS).
    pub fn mont_mul(&self, a: &U256, b: &U256) -> U256 {
        let n = &self.m.0;
        let mut t = [0u64; 6];
        for i in 0..4 {
            let mut c = 0;
            for j in 0..4 {
                let (lo, hi) = mac(t[j], a.0[j], b.0[i], c);
                t[j] = lo;
                c = hi;
            }
            let (s, c2) = adc(t[4], c, 0);
            t[4] = s;
            t[5] = c2;

            let q = t[0].wrapping_mul(self.m_inv);
            let (_, mut c) = mac(t[0], q, n[0], 0);
            for j in 1..4 {
                let (lo, hi) = mac(t[j], q, n[j], c);
                t[j - 1] = lo;
                c = hi;
            }
            let (s, c2) = adc(t[4], c, 0);
            t[3] = s;
            t[4] = t[5] + c2;
            t[5] = 0;
        }
        let r = U256([t[0], t[1], t[2], t[3]]);
        if t[4] != 0 || r >= self.m {
            r.overflowing_sub(&self.m).0
        } else {
            r
        }
    }

    pub fn to_mont(&self, a: &U256) -> U256 {
        self.mont_mul(a, &self.r2)
    }

    pub fn from_mont(&self, a: &U256) -> U256 {
        self.mont_mul(a, &U256::ONE)
    }

    pub fn mont_one(&self) -> U256 {
        self.r1
    }

    /// Plain modular product of two reduced values.
    pub fn mul(&self, a: &U256, b: &U256) -> U256 {
        self.mont_mul(&self.mont_mul(a, b), &self.r2)
    }

    /// base^exp with `base` in Montgomery form; result in Montgomery form.
    pub fn mont_pow(&self, base: &U256, exp: &U256) -> U256 {
        let mut acc = self.r1;
        for i in (0..exp.bits()).rev() {
            acc = self.mont_mul(&acc, &acc);
            if exp.bit(i) {
                acc = self.mont_mul(&acc, base);
            }
        }
        acc
    }

    /// Inverse of a nonzero Montgomery-form value by Fermat's little
    /// theorem. Only meaningful for prime moduli.
    pub fn mont_inv(&self, a: &U256) -> U256 {
        let exp = self.m.overflowing_sub(&U256::from_u64(2)).0;
        self.mont_pow(a, &exp)
    }

    /// Reduces an arbitrary-length big-endian byte string modulo m.
    pub fn reduce_be_bytes(&self, bytes: &[u8]) -> U256 {
        let mut acc = U256::ZERO;
        for byte in bytes {
            for shift in (0..8).rev() {
                acc = self.add(&acc, &acc);
                if (byte >> shift) & 1 == 1 {
                    acc = self.add(&acc, &U256::ONE);
                }
            }
        }
        acc
    }

    /// Reduces a value that is already below 2^256.
    pub fn reduce(&self, a: &U256) -> U256 {
        if *a < self.m {
            *a
        } else {
            self.reduce_be_bytes(&a.to_be_bytes())
        }
    }
}
