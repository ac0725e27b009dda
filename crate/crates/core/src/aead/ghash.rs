//! GHASH over GF(2^128).
//!
//! GCM numbers bits from the left: bit 0 of a block is the most significant
//! bit of byte 0, and bit i is the coefficient of x^i. Loading a block as a
//! big-endian `u128` therefore puts the x^0 coefficient in the top bit, and
//! "multiply by x" becomes a right shift. The reduction polynomial
//! x^128 + x^7 + x^2 + x + 1 folds back in as `0xE1 << 120`.
//!
//! Worked example: the multiplicative identity (the polynomial 1) is the
//! block `80 00 .. 00`, not `00 .. 01`. The block `00 .. 01` is x^127.

const R: u128 = 0xE1 << 120;

/// Product of two field elements in GCM bit order.
pub fn gf128_mul(x: &[u8; 16], y: &[u8; 16]) -> [u8; 16] {
    mul(u128::from_be_bytes(*x), u128::from_be_bytes(*y)).to_be_bytes()
}

fn mul(x: u128, y: u128) -> u128 {
    let mut z = 0u128;
    let mut v = y;
    for i in 0..128 {
        if (x >> (127 - i)) & 1 == 1 {
            z ^= v;
        }
        v = if v & 1 == 1 { (v >> 1) ^ R } else { v >> 1 };
    }
    z
}

/// Incremental GHASH keyed by H.
pub struct Ghash {
    h: u128,
    y: u128,
}

impl Ghash {
    pub fn new(h: &[u8; 16]) -> Self {
        Ghash {
            h: u128::from_be_bytes(*h),
            y: 0,
        }
    }

    /// Absorbs `data` as blocks, zero-padding the final partial block.
    pub fn update_padded(&mut self, data: &[u8]) {
        for chunk in data.chunks(16) {
            let mut block = [0u8; 16];
            block[..chunk.len()].copy_from_slice(chunk);
            self.y = mul(self.y ^ u128::from_be_bytes(block), self.h);
        }
    }

    /// Absorbs the length block and returns the hash.
    pub fn finalize(mut self, aad_len: usize, ct_len: usize) -> [u8; 16] {
        let lens = ((aad_len as u128 * 8) << 64) | (ct_len as u128 * 8);
        self.y = mul(self.y ^ lens, self.h);
        self.y.to_be_bytes()
    }
}
