//! Canonical serialization of everything that determines a step propagator.

use sha2::{Digest, Sha256};

use crate::model::{ModelParams, Truncation, COUPLING_CONVENTION};
use crate::Scalar;

const TAG: &[u8; 8] = b"SBFPRNT1";

/// Byte string identifying `(params, truncation, dt, order)` under the current
/// coupling convention. Floats enter as IEEE-754 bit patterns, so two inputs
/// serialize equally iff they are bitwise identical.
pub fn canonical_bytes<T: Scalar>(
    params: &ModelParams<T>,
    truncation: Truncation,
    dt: T,
    order: usize,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(96);
    out.extend_from_slice(TAG);
    out.extend_from_slice(&COUPLING_CONVENTION.to_le_bytes());
    out.push(std::mem::size_of::<T>() as u8);
    for v in [
        params.omega_f,
        params.omega_0,
        params.g_minus,
        params.g_plus,
        params.beta,
        params.gamma,
        dt,
    ] {
        out.extend_from_slice(&v.as_f64().to_bits().to_le_bytes());
    }
    out.extend_from_slice(&(truncation.max_fock as u64).to_le_bytes());
    out.extend_from_slice(&(order as u64).to_le_bytes());
    out
}

/// 64-bit digest of [`canonical_bytes`].
pub fn fingerprint<T: Scalar>(
    params: &ModelParams<T>,
    truncation: Truncation,
    dt: T,
    order: usize,
) -> u64 {
    digest64(&canonical_bytes(params, truncation, dt, order))
}

/// First eight bytes of SHA-256, little-endian.
pub fn digest64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&d[..8]);
    u64::from_le_bytes(head)
}
