//! Short-Weierstrass curve groups used for key agreement and signatures.
//!
//! Two suites are built in: the NIST P-256 curve, and a toy curve over F_17
//! small enough that every point can be enumerated in tests.
//!
//! Scalar multiplication is a plain double-and-add ladder over Jacobian
//! coordinates. It is not constant time.

use std::fmt;
use std::sync::OnceLock;

use rand::TryCryptoRng;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop, Zeroizing};

use crate::bigint::{Modulus, U256};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurveError {
    #[error("peer public key is not a valid curve point")]
    InvalidPeerKey,
    #[error("malformed point encoding")]
    MalformedPoint,
    #[error("the identity point has no encoding")]
    IdentityEncoding,
    #[error("entropy source failed")]
    EntropyFailure,
}

/// Wire identifier of a curve suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SuiteId(pub u16);

impl SuiteId {
    pub const P256: SuiteId = SuiteId(0x0017);
    pub const TOY: SuiteId = SuiteId(0x7f11);
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04x}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AffinePoint {
    x: U256,
    y: U256,
}

impl AffinePoint {
    pub fn x(&self) -> &U256 {
        &self.x
    }

    pub fn y(&self) -> &U256 {
        &self.y
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Identity,
    Affine(AffinePoint),
}

impl CurvePoint {
    /// Builds a point without checking the curve equation. Anything built
    /// this way is re-validated before it is used with a private key.
    pub fn affine_unchecked(x: U256, y: U256) -> Self {
        CurvePoint::Affine(AffinePoint { x, y })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CurvePoint::Identity)
    }

    pub fn coordinates(&self) -> Option<(&U256, &U256)> {
        match self {
            CurvePoint::Identity => None,
            CurvePoint::Affine(p) => Some((&p.x, &p.y)),
        }
    }
}

impl fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvePoint::Identity => write!(f, "Identity"),
            CurvePoint::Affine(p) => write!(f, "({:?}, {:?})", p.x, p.y),
        }
    }
}

/// A private scalar in `[1, n-1]`. Wiped on drop.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct Scalar(U256);

impl Scalar {
    pub fn new(value: U256, suite: &CurveSuite) -> Option<Self> {
        (!value.is_zero() && value < *suite.order()).then_some(Scalar(value))
    }

    pub fn value(&self) -> &U256 {
        &self.0
    }

    /// Uniform in `[1, n-1]` by rejection sampling.
    pub fn random<R: TryCryptoRng + ?Sized>(
        rng: &mut R,
        suite: &CurveSuite,
    ) -> Result<Self, CurveError> {
        suite.random_nonzero_scalar(rng).map(Scalar)
    }

    pub fn to_bytes(&self, suite: &CurveSuite) -> Zeroizing<Vec<u8>> {
        Zeroizing::new(self.0.to_be_vec(suite.scalar_len()))
    }

    pub fn from_bytes(bytes: &[u8], suite: &CurveSuite) -> Option<Self> {
        if bytes.len() != suite.scalar_len() {
            return None;
        }
        Self::new(U256::from_be_slice(bytes)?, suite)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

/// Jacobian point with coordinates in Montgomery form; Z = 0 is identity.
#[derive(Clone, Copy)]
struct Jacobian {
    x: U256,
    y: U256,
    z: U256,
}

/// Curve domain parameters: y^2 = x^3 + a*x + b over F_p, generator G of
/// prime order n.
pub struct CurveSuite {
    id: SuiteId,
    name: &'static str,
    field: Modulus,
    a: U256,
    b: U256,
    a_mont: U256,
    g: CurvePoint,
    order: Modulus,
    field_len: usize,
    scalar_len: usize,
}

impl fmt::Debug for CurveSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurveSuite")
            .field("id", &self.id)
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CurveSuite {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl CurveSuite {
    /// NIST P-256 (secp256r1).
    pub fn p256() -> &'static CurveSuite {
        static SUITE: OnceLock<CurveSuite> = OnceLock::new();
        SUITE.get_or_init(|| {
            let p = U256::from_hex("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff");
            let a = p.overflowing_sub(&U256::from_u64(3)).0;
            let b = U256::from_hex("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b");
            let gx = U256::from_hex("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296");
            let gy = U256::from_hex("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5");
            let n = U256::from_hex("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551");
            CurveSuite::build(SuiteId::P256, "p256", p, a, b, (gx, gy), Some(n))
        })
    }

    /// y^2 = x^3 + 2x + 2 over F_17 with generator (5, 1). The group order
    /// is found by walking multiples of G until the identity comes back.
    pub fn toy() -> &'static CurveSuite {
        static SUITE: OnceLock<CurveSuite> = OnceLock::new();
        SUITE.get_or_init(|| {
            CurveSuite::build(
                SuiteId::TOY,
                "toy",
                U256::from_u64(17),
                U256::from_u64(2),
                U256::from_u64(2),
                (U256::from_u64(5), U256::from_u64(1)),
                None,
            )
        })
    }

    pub fn by_id(id: SuiteId) -> Option<&'static CurveSuite> {
        match id {
            SuiteId::P256 => Some(Self::p256()),
            SuiteId::TOY => Some(Self::toy()),
            _ => None,
        }
    }

    pub fn by_name(name: &str) -> Option<&'static CurveSuite> {
        match name {
            "p256" | "P-256" | "secp256r1" => Some(Self::p256()),
            "toy" => Some(Self::toy()),
            _ => {
                let hex = name.strip_prefix("0x")?;
                let id = u16::from_str_radix(hex, 16).ok()?;
                Self::by_id(SuiteId(id))
            }
        }
    }

    fn build(
        id: SuiteId,
        name: &'static str,
        p: U256,
        a: U256,
        b: U256,
        g: (U256, U256),
        n: Option<U256>,
    ) -> Self {
        let field = Modulus::new(p);
        let a_mont = field.to_mont(&a);
        let mut suite = CurveSuite {
            id,
            name,
            field,
            a,
            b,
            a_mont,
            g: CurvePoint::affine_unchecked(g.0, g.1),
            // Placeholder until the order is known; 3 is any odd modulus.
            order: Modulus::new(U256::from_u64(3)),
            field_len: p.bits().div_ceil(8),
            scalar_len: 0,
        };
        assert!(suite.is_on_curve(&suite.g), "generator must lie on the curve");
        let n = n.unwrap_or_else(|| suite.enumerate_generator_order());
        suite.order = Modulus::new(n);
        suite.scalar_len = n.bits().div_ceil(8);
        suite
    }

    fn enumerate_generator_order(&self) -> U256 {
        let mut k = 1u64;
        let mut acc = self.g;
        while !acc.is_identity() {
            acc = self.add(&acc, &self.g);
            k += 1;
        }
        U256::from_u64(k)
    }

    pub fn id(&self) -> SuiteId {
        self.id
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn prime(&self) -> &U256 {
        self.field.value()
    }

    pub fn a(&self) -> &U256 {
        &self.a
    }

    pub fn b(&self) -> &U256 {
        &self.b
    }

    pub fn generator(&self) -> &CurvePoint {
        &self.g
    }

    pub fn order(&self) -> &U256 {
        self.order.value()
    }

    pub(crate) fn order_modulus(&self) -> &Modulus {
        &self.order
    }

    pub fn field_len(&self) -> usize {
        self.field_len
    }

    pub fn scalar_len(&self) -> usize {
        self.scalar_len
    }

    /// Length of an uncompressed point encoding.
    pub fn point_len(&self) -> usize {
        1 + 2 * self.field_len
    }

    pub fn is_on_curve(&self, p: &CurvePoint) -> bool {
        let Some((x, y)) = p.coordinates() else {
            return false;
        };
        let f = &self.field;
        if x >= f.value() || y >= f.value() {
            return false;
        }
        let lhs = f.mul(y, y);
        let x3 = f.mul(&f.mul(x, x), x);
        let rhs = f.add(&f.add(&x3, &f.mul(&self.a, x)), &self.b);
        lhs == rhs
    }

    pub fn negate(&self, p: &CurvePoint) -> CurvePoint {
        match p {
            CurvePoint::Identity => CurvePoint::Identity,
            CurvePoint::Affine(a) => CurvePoint::affine_unchecked(a.x, self.field.neg(&a.y)),
        }
    }

    /// Textbook affine group law.
    pub fn add(&self, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
        let (p, q) = match (p, q) {
            (CurvePoint::Identity, _) => return *q,
            (_, CurvePoint::Identity) => return *p,
            (CurvePoint::Affine(p), CurvePoint::Affine(q)) => (p, q),
        };
        let f = &self.field;
        let lambda = if p.x == q.x {
            if f.add(&p.y, &q.y).is_zero() {
                return CurvePoint::Identity;
            }
            // tangent: (3x^2 + a) / 2y
            let x2 = f.mul(&p.x, &p.x);
            let num = f.add(&f.add(&f.add(&x2, &x2), &x2), &self.a);
            let den = f.add(&p.y, &p.y);
            f.mul(&num, &self.field_inv(&den))
        } else {
            let num = f.sub(&q.y, &p.y);
            let den = f.sub(&q.x, &p.x);
            f.mul(&num, &self.field_inv(&den))
        };
        let x3 = f.sub(&f.sub(&f.mul(&lambda, &lambda), &p.x), &q.x);
        let y3 = f.sub(&f.mul(&lambda, &f.sub(&p.x, &x3)), &p.y);
        CurvePoint::affine_unchecked(x3, y3)
    }

    fn field_inv(&self, a: &U256) -> U256 {
        let f = &self.field;
        f.from_mont(&f.mont_inv(&f.to_mont(a)))
    }

    /// k·P for any integer k below 2^256 (k = 0 or k = n give Identity).
    pub fn mul(&self, k: &U256, p: &CurvePoint) -> CurvePoint {
        let base = self.to_jacobian(p);
        let mut acc = Jacobian {
            x: U256::ZERO,
            y: U256::ZERO,
            z: U256::ZERO,
        };
        for i in (0..k.bits()).rev() {
            acc = self.jac_double(&acc);
            if k.bit(i) {
                acc = self.jac_add(&acc, &base);
            }
        }
        self.to_affine(&acc)
    }

    pub fn mul_generator(&self, k: &U256) -> CurvePoint {
        self.mul(k, &self.g)
    }

    fn to_jacobian(&self, p: &CurvePoint) -> Jacobian {
        match p {
            CurvePoint::Identity => Jacobian {
                x: U256::ZERO,
                y: U256::ZERO,
                z: U256::ZERO,
            },
            CurvePoint::Affine(a) => Jacobian {
                x: self.field.to_mont(&a.x),
                y: self.field.to_mont(&a.y),
                z: self.field.mont_one(),
            },
        }
    }

    fn to_affine(&self, p: &Jacobian) -> CurvePoint {
        if p.z.is_zero() {
            return CurvePoint::Identity;
        }
        let f = &self.field;
        let zinv = f.mont_inv(&p.z);
        let zinv2 = f.mont_mul(&zinv, &zinv);
        let zinv3 = f.mont_mul(&zinv2, &zinv);
        let x = f.from_mont(&f.mont_mul(&p.x, &zinv2));
        let y = f.from_mont(&f.mont_mul(&p.y, &zinv3));
        CurvePoint::affine_unchecked(x, y)
    }

    fn jac_double(&self, p: &Jacobian) -> Jacobian {
        if p.z.is_zero() || p.y.is_zero() {
            return Jacobian {
                x: U256::ZERO,
                y: U256::ZERO,
                z: U256::ZERO,
            };
        }
        let f = &self.field;
        let mul = |a: &U256, b: &U256| f.mont_mul(a, b);
        let add = |a: &U256, b: &U256| f.add(a, b);
        let xx = mul(&p.x, &p.x);
        let yy = mul(&p.y, &p.y);
        let yyyy = mul(&yy, &yy);
        let zz = mul(&p.z, &p.z);
        // S = 4·X·Y^2
        let xyy = mul(&p.x, &yy);
        let s = add(&add(&xyy, &xyy), &add(&xyy, &xyy));
        // M = 3·X^2 + a·Z^4
        let m = add(&add(&add(&xx, &xx), &xx), &mul(&self.a_mont, &mul(&zz, &zz)));
        let x3 = f.sub(&mul(&m, &m), &add(&s, &s));
        let y8 = {
            let t = add(&yyyy, &yyyy);
            let t = add(&t, &t);
            add(&t, &t)
        };
        let y3 = f.sub(&mul(&m, &f.sub(&s, &x3)), &y8);
        let yz = mul(&p.y, &p.z);
        let z3 = add(&yz, &yz);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn jac_add(&self, p: &Jacobian, q: &Jacobian) -> Jacobian {
        if p.z.is_zero() {
            return *q;
        }
        if q.z.is_zero() {
            return *p;
        }
        let f = &self.field;
        let mul = |a: &U256, b: &U256| f.mont_mul(a, b);
        let z1z1 = mul(&p.z, &p.z);
        let z2z2 = mul(&q.z, &q.z);
        let u1 = mul(&p.x, &z2z2);
        let u2 = mul(&q.x, &z1z1);
        let s1 = mul(&p.y, &mul(&q.z, &z2z2));
        let s2 = mul(&q.y, &mul(&p.z, &z1z1));
        if u1 == u2 {
            return if s1 == s2 {
                self.jac_double(p)
            } else {
                Jacobian {
                    x: U256::ZERO,
                    y: U256::ZERO,
                    z: U256::ZERO,
                }
            };
        }
        let h = f.sub(&u2, &u1);
        let r = f.sub(&s2, &s1);
        let hh = mul(&h, &h);
        let hhh = mul(&hh, &h);
        let u1hh = mul(&u1, &hh);
        let x3 = f.sub(&f.sub(&mul(&r, &r), &hhh), &f.add(&u1hh, &u1hh));
        let y3 = f.sub(&mul(&r, &f.sub(&u1hh, &x3)), &mul(&s1, &hhh));
        let z3 = mul(&h, &mul(&p.z, &q.z));
        Jacobian { x: x3, y: y3, z: z3 }
    }

    pub(crate) fn random_nonzero_scalar<R: TryCryptoRng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<U256, CurveError> {
        const MAX_ATTEMPTS: usize = 256;
        let bits = self.order().bits();
        let mut buf = Zeroizing::new(vec![0u8; self.scalar_len]);
        let excess = self.scalar_len * 8 - bits;
        for _ in 0..MAX_ATTEMPTS {
            rng.try_fill_bytes(&mut buf)
                .map_err(|_| CurveError::EntropyFailure)?;
            buf[0] &= 0xff >> excess;
            let mut v = U256::from_be_slice(&buf).expect("scalar_len <= 32");
            if !v.is_zero() && v < *self.order() {
                return Ok(v);
            }
            v.zeroize();
        }
        Err(CurveError::EntropyFailure)
    }
}

/// k·P for a private scalar.
pub fn scalar_mul(k: &Scalar, p: &CurvePoint, suite: &CurveSuite) -> CurvePoint {
    suite.mul(k.value(), p)
}

pub fn point_add(p: &CurvePoint, q: &CurvePoint, suite: &CurveSuite) -> CurvePoint {
    suite.add(p, q)
}

/// Fresh keypair `(d, d·G)`.
pub fn keypair_gen<R: TryCryptoRng + ?Sized>(
    rng: &mut R,
    suite: &CurveSuite,
) -> Result<(Scalar, CurvePoint), CurveError> {
    let d = Scalar::random(rng, suite)?;
    let q = suite.mul_generator(d.value());
    Ok((d, q))
}

/// x-coordinate of `d_local · q_remote`, big-endian and `field_len` bytes.
pub fn shared_secret(
    d_local: &Scalar,
    q_remote: &CurvePoint,
    suite: &CurveSuite,
) -> Result<Zeroizing<Vec<u8>>, CurveError> {
    if !suite.is_on_curve(q_remote) {
        return Err(CurveError::InvalidPeerKey);
    }
    match suite.mul(d_local.value(), q_remote) {
        CurvePoint::Identity => Err(CurveError::InvalidPeerKey),
        CurvePoint::Affine(s) => Ok(Zeroizing::new(s.x.to_be_vec(suite.field_len))),
    }
}

/// Uncompressed SEC1-style encoding: `0x04 ‖ x ‖ y`.
pub fn point_encode(p: &CurvePoint, suite: &CurveSuite) -> Result<Vec<u8>, CurveError> {
    let (x, y) = p.coordinates().ok_or(CurveError::IdentityEncoding)?;
    let mut out = Vec::with_capacity(suite.point_len());
    out.push(0x04);
    out.extend_from_slice(&x.to_be_vec(suite.field_len));
    out.extend_from_slice(&y.to_be_vec(suite.field_len));
    Ok(out)
}

pub fn point_decode(bytes: &[u8], suite: &CurveSuite) -> Result<CurvePoint, CurveError> {
    if bytes.len() != suite.point_len() || bytes[0] != 0x04 {
        return Err(CurveError::MalformedPoint);
    }
    let fl = suite.field_len;
    let x = U256::from_be_slice(&bytes[1..1 + fl]).ok_or(CurveError::MalformedPoint)?;
    let y = U256::from_be_slice(&bytes[1 + fl..]).ok_or(CurveError::MalformedPoint)?;
    let p = CurvePoint::affine_unchecked(x, y);
    if suite.is_on_curve(&p) {
        Ok(p)
    } else {
        Err(CurveError::MalformedPoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn point(x: &str, y: &str) -> CurvePoint {
        CurvePoint::affine_unchecked(U256::from_hex(x), U256::from_hex(y))
    }

    #[test]
    fn suites_are_consistent() {
        for suite in [CurveSuite::p256(), CurveSuite::toy()] {
            assert!(suite.is_on_curve(suite.generator()));
            assert!(suite.mul_generator(suite.order()).is_identity());
            assert_eq!(suite.field_len(), suite.prime().bits().div_ceil(8));
        }
        assert_eq!(CurveSuite::p256().field_len(), 32);
        assert_eq!(CurveSuite::toy().field_len(), 1);
    }

    #[test]
    fn identity_and_inverse() {
        for suite in [CurveSuite::p256(), CurveSuite::toy()] {
            let g = *suite.generator();
            assert_eq!(point_add(&g, &CurvePoint::Identity, suite), g);
            assert_eq!(point_add(&CurvePoint::Identity, &g, suite), g);
            assert!(point_add(&g, &suite.negate(&g), suite).is_identity());
            let one = Scalar::new(U256::ONE, suite).unwrap();
            assert_eq!(scalar_mul(&one, &g, suite), g);
        }
    }

    // Multiples of G computed with OpenSSL.
    #[test]
    fn p256_known_multiples() {
        let suite = CurveSuite::p256();
        let two_g = point(
            "7cf27b188d034f7e8a52380304b51ac3c08969e277f21b35a60b48fc47669978",
            "07775510db8ed040293d9ac69f7430dbba7dade63ce982299e04b79d227873d1",
        );
        let three_g = point(
            "5ecbe4d1a6330a44c8f7ef951d4bf165e6c6b721efada985fb41661bc6e7fd6c",
            "8734640c4998ff7e374b06ce1a64a2ecd82ab036384fb83d9a79b127a27d5032",
        );
        let g = *suite.generator();
        assert_eq!(suite.mul_generator(&U256::from_u64(2)), two_g);
        assert_eq!(point_add(&g, &g, suite), two_g);
        assert_eq!(suite.mul_generator(&U256::from_u64(3)), three_g);
        assert_eq!(point_add(&two_g, &g, suite), three_g);

        let d = U256::from_hex("c51e4753afdec1e6b6c6a5b992f43f8dd0c7a8933072708b6522468b2ffb06fd");
        assert_eq!(
            suite.mul_generator(&d),
            point(
                "942c9f408ead9d82d34a1b9a6a827ebe3e2ddf782b448d23be1b6143988ccef4",
                "8c9eaf6c0d14d992fc63bad3e2496be2eee61cb5b97f65f428ca94a5d0ee19a1",
            )
        );
        let n_minus_1 = suite.order().overflowing_sub(&U256::ONE).0;
        assert_eq!(suite.mul_generator(&n_minus_1), suite.negate(&g));
    }

    #[test]
    fn p256_ecdh_known_answer() {
        let suite = CurveSuite::p256();
        let da = Scalar::new(
            U256::from_hex("c51e4753afdec1e6b6c6a5b992f43f8dd0c7a8933072708b6522468b2ffb06fd"),
            suite,
        )
        .unwrap();
        let qb = point(
            "ead218590119e8876b29146ff89ca61770c4edbbf97d38ce385ed281d8a6b230",
            "28af61281fd35e2fa7002523acc85a429cb06ee6648325389f59edfce1405141",
        );
        let s = shared_secret(&da, &qb, suite).unwrap();
        assert_eq!(
            hex::encode(&*s),
            "0c128d4bde9701982aaa165f927d74b158f46835d9d5d133e3717df4a2468fa7"
        );
    }

    /// k·(5,1) on y² = x³ + 2x + 2 mod 17, by repeated affine addition in i64.
    fn toy_multiple(k: u32) -> (i64, i64) {
        let m = |v: i64| v.rem_euclid(17);
        let inv = |v: i64| (1..17).find(|i| m(v * i) == 1).unwrap();
        let (mut x, mut y) = (5i64, 1i64);
        for _ in 1..k {
            let l = if (x, y) == (5, 1) {
                m((3 * x * x + 2) * inv(m(2 * y)))
            } else {
                m((y - 1) * inv(m(x - 5)))
            };
            let x3 = m(l * l - x - 5);
            (x, y) = (x3, m(l * (x - x3) - y));
        }
        (x, y)
    }

    #[test]
    fn toy_ecdh_fixed_scalars() {
        let suite = CurveSuite::toy();
        let da = Scalar::new(U256::from_u64(2), suite).unwrap();
        let db = Scalar::new(U256::from_u64(3), suite).unwrap();
        let qa = suite.mul_generator(da.value());
        let qb = suite.mul_generator(db.value());
        let ab = shared_secret(&da, &qb, suite).unwrap();
        let ba = shared_secret(&db, &qa, suite).unwrap();
        let (x6, _) = toy_multiple(6);
        assert_eq!(x6, 16);
        assert_eq!(&*ab, &[x6 as u8]);
        assert_eq!(&*ba, &[x6 as u8]);
    }

    #[test]
    fn rejects_off_curve_and_identity_peers() {
        let suite = CurveSuite::p256();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (d, _) = keypair_gen(&mut rng, suite).unwrap();
        let bogus = CurvePoint::affine_unchecked(U256::ZERO, U256::ZERO);
        assert_eq!(shared_secret(&d, &bogus, suite), Err(CurveError::InvalidPeerKey));
        assert_eq!(
            shared_secret(&d, &CurvePoint::Identity, suite),
            Err(CurveError::InvalidPeerKey)
        );
    }

    #[test]
    fn point_decode_rejects_malformed() {
        let suite = CurveSuite::p256();
        let mut enc = point_encode(suite.generator(), suite).unwrap();
        assert_eq!(point_decode(&enc, suite).unwrap(), *suite.generator());
        assert_eq!(point_decode(&enc[..64], suite), Err(CurveError::MalformedPoint));
        enc[0] = 0x02;
        assert_eq!(point_decode(&enc, suite), Err(CurveError::MalformedPoint));
        enc[0] = 0x04;
        enc[64] ^= 1;
        assert_eq!(point_decode(&enc, suite), Err(CurveError::MalformedPoint));
        assert_eq!(
            point_encode(&CurvePoint::Identity, suite),
            Err(CurveError::IdentityEncoding)
        );
    }

    #[test]
    fn keypairs_are_distinct_and_valid() {
        let suite = CurveSuite::p256();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let (d, q) = keypair_gen(&mut rng, suite).unwrap();
            assert!(suite.is_on_curve(&q));
            assert!(seen.insert(*d.value()));
        }
    }

    #[test]
    fn stuck_entropy_source_fails() {
        struct Zeros;
        impl rand::RngCore for Zeros {
            fn next_u32(&mut self) -> u32 {
                0
            }
            fn next_u64(&mut self) -> u64 {
                0
            }
            fn fill_bytes(&mut self, dst: &mut [u8]) {
                dst.fill(0)
            }
        }
        impl rand::CryptoRng for Zeros {}
        assert_eq!(
            keypair_gen(&mut Zeros, CurveSuite::p256()).unwrap_err(),
            CurveError::EntropyFailure
        );
    }

    #[test]
    fn suite_lookup() {
        assert_eq!(CurveSuite::by_name("p256").unwrap().id(), SuiteId::P256);
        assert_eq!(CurveSuite::by_name("0x7f11").unwrap().id(), SuiteId::TOY);
        assert!(CurveSuite::by_name("0xffff").is_none());
        assert!(CurveSuite::by_id(SuiteId(0xffff)).is_none());
    }
}
