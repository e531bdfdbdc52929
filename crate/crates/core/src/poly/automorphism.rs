//! Galois automorphisms acting on evaluation vectors.
//!
//! Evaluation index `i` holds `a(ψ^(2i+1))`. Rotation `r` moves the value at
//! odd exponent `e` to exponent `e·g mod 2N` with `g = 5^r`, so the index map
//! is `i -> ((2i+1)·g mod 2N - 1) / 2`. As a ring map this is
//! `X -> X^(g^-1)`, which rotates the slot vector left by `r`. The map is
//! affine modulo `N`, which is what lets a stride-`N/p` chunk land in a
//! single destination chunk.

use super::{LimbMatrix, Order, Rep};
use crate::error::{Error, Result};

/// `5^r mod 2N`, with `r` taken modulo the slot count `N/2`.
pub fn galois_element(r: i64, n: usize) -> Result<u64> {
    if !n.is_power_of_two() || n < 4 {
        return Err(Error::InvalidRotation { r, n });
    }
    let two_n = 2 * n as u64;
    let slots = (n / 2) as i64;
    let mut e = r.rem_euclid(slots) as u64;
    let mut base = 5u64;
    let mut g = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            g = g * base % two_n;
        }
        base = base * base % two_n;
        e >>= 1;
    }
    Ok(g)
}

/// Destination index of every evaluation index under rotation `r`.
pub fn automorphism_map(r: i64, n: usize) -> Result<Vec<usize>> {
    let g = galois_element(r, n)?;
    let two_n = 2 * n as u64;
    Ok((0..n as u64)
        .map(|i| (((2 * i + 1) * g % two_n - 1) / 2) as usize)
        .collect())
}

/// Permutes natural-order evaluations: `out[map[i]] = in[i]`.
pub fn apply_automorphism(x: &LimbMatrix, r: i64) -> Result<LimbMatrix> {
    x.require(Rep::Eval)?;
    let map = automorphism_map(r, x.n())?;
    let src = x.to_order(Order::Natural);
    let mut out = src.clone();
    for (o, s) in out.rows.iter_mut().zip(&src.rows) {
        for (i, &d) in map.iter().enumerate() {
            o[d] = s[i];
        }
    }
    Ok(out)
}

/// `X -> X^g` applied directly to coefficients, the oracle for the
/// evaluation-domain permutation.
pub fn automorphism_coeff(x: &LimbMatrix, g: u64) -> Result<LimbMatrix> {
    x.require(Rep::Coeff)?;
    let n = x.n();
    let src = x.to_order(Order::Natural);
    let mut out = src.clone();
    for ((o, s), m) in out.rows.iter_mut().zip(&src.rows).zip(&x.basis) {
        for (k, &c) in s.iter().enumerate() {
            let e = (k as u64 * g) % (2 * n as u64);
            if e < n as u64 {
                o[e as usize] = c;
            } else {
                o[e as usize - n] = m.neg(c);
            }
        }
    }
    Ok(out)
}
