//! Binary limb-matrix format.
//!
//! 32-byte little-endian header: `N: u64`, `limbs: u64`, `rep: u32`,
//! `order: u32`, `kind: u32`, `reserved: u32`. The body is the limb matrix in
//! row-major order, one little-endian `u64` per value. Moduli are not stored;
//! the reader supplies the basis.

use super::{LimbMatrix, Order, Rep};
use crate::error::{Error, Result};
use crate::rns::PrimeModulus;

pub const HEADER_BYTES: usize = 32;

pub fn write_dump(x: &LimbMatrix, kind: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * x.n() * x.limbs());
    out.extend_from_slice(&(x.n() as u64).to_le_bytes());
    out.extend_from_slice(&(x.limbs() as u64).to_le_bytes());
    out.extend_from_slice(&(x.rep as u32).to_le_bytes());
    out.extend_from_slice(&(x.order as u32).to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for row in &x.rows {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn u64_at(b: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

/// Parses a dump, returning the matrix and its kind tag.
pub fn read_dump(bytes: &[u8], basis: &[PrimeModulus]) -> Result<(LimbMatrix, u32)> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Malformed("truncated header".into()));
    }
    let n = u64_at(bytes, 0) as usize;
    let limbs = u64_at(bytes, 8) as usize;
    let rep = match u32_at(bytes, 16) {
        0 => Rep::Coeff,
        1 => Rep::Eval,
        v => return Err(Error::Malformed(format!("unknown representation tag {v}"))),
    };
    let order = match u32_at(bytes, 20) {
        0 => Order::Natural,
        1 => Order::BitReversed,
        v => return Err(Error::Malformed(format!("unknown order tag {v}"))),
    };
    let kind = u32_at(bytes, 24);
    if limbs != basis.len() {
        return Err(Error::BasisMismatch(format!("dump has {limbs} limbs, basis has {}", basis.len())));
    }
    let expected = n
        .checked_mul(limbs)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER_BYTES))
        .ok_or_else(|| Error::Malformed("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Malformed(format!("expected {expected} bytes, got {}", bytes.len())));
    }
    let rows = (0..limbs)
        .map(|l| (0..n).map(|k| u64_at(bytes, HEADER_BYTES + 8 * (l * n + k))).collect())
        .collect();
    let mut m = LimbMatrix::from_rows(basis, rows, rep)?;
    m.order = order;
    Ok((m, kind))
}
