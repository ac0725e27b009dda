//! Secure heart-rate telemetry from a wearable edge device to an ingestion
//! server.
//!
//! The stack, bottom up:
//!
//! - [`curve`]: elliptic-curve groups (P-256 and a toy curve) and ECDH.
//! - [`aead`]: AES-128-GCM authenticated encryption.
//! - [`kdf`]: SHA-256, HMAC and HKDF.
//! - [`credential`]: Schnorr signatures and two-level signed credentials.
//! - [`handshake`]: three-message mutually authenticated key exchange.
//! - [`record`]: framing and sealed records with implicit sequence numbers.
//! - [`telemetry`]: readings, the sensor simulator and anomaly detection.
//! - [`endpoints`]: the device client, the ingestion server and its logs.
//! - [`proxy`]: a fault-injecting man-in-the-middle for testing.
//! - [`cli`]: the `vitalink` command line.

pub mod aead;
pub mod bigint;
pub mod cli;
pub mod credential;
pub mod curve;
pub mod endpoints;
pub mod handshake;
pub mod kdf;
pub mod proxy;
pub mod record;
pub mod telemetry;
