//! Canonical-embedding encode/decode.
//!
//! Slot `j` is the evaluation at `ζ^(5^(-j) mod 2N)` with `ζ = exp(iπ/N)`;
//! the conjugate slot sits at the negated exponent. With this ordering the
//! automorphism `X -> X^(5^r)` rotates the slot vector left by `r`.
//! Both directions are direct O(N²) sums, which is plenty at desk scale.

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};

use super::{LimbMatrix, Rep};
use crate::error::{Error, Result};
use crate::rns::{basis_product, crt_reconstruct, PrimeModulus, RnsInt};

/// Odd exponent `5^(-j) mod 2N` of slot `j`.
pub fn slot_exponents(n: usize) -> Vec<usize> {
    let two_n = 2 * n;
    // 5^(N/2 - 1) is the inverse of 5 modulo 2N
    let mut inv5 = 1usize;
    for _ in 0..(n / 2 - 1) {
        inv5 = inv5 * 5 % two_n;
    }
    let mut e = 1usize;
    (0..n / 2)
        .map(|_| {
            let cur = e;
            e = e * inv5 % two_n;
            cur
        })
        .collect()
}

fn roots(n: usize) -> Vec<Complex64> {
    (0..2 * n)
        .map(|t| Complex64::from_polar(1.0, std::f64::consts::PI * t as f64 / n as f64))
        .collect()
}

/// Real coefficients of the polynomial whose slots are `values` (zero-padded
/// to `N/2` slots), before scaling.
pub fn embed_inverse(values: &[Complex64], n: usize) -> Result<Vec<f64>> {
    if !n.is_power_of_two() || n < 4 {
        return Err(Error::NotPowerOfTwo(n));
    }
    if values.len() > n / 2 {
        return Err(Error::InvalidParameter(format!(
            "{} values exceed the {} slots of degree {n}",
            values.len(),
            n / 2
        )));
    }
    let exps = slot_exponents(n);
    let z = roots(n);
    let two_n = 2 * n;
    Ok((0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (v, &e) in values.iter().zip(&exps) {
                acc += v * z[(two_n - e * k % two_n) % two_n];
            }
            2.0 * acc.re / n as f64
        })
        .collect())
}

/// Slots of a real coefficient vector.
pub fn embed(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let exps = slot_exponents(n);
    let z = roots(n);
    exps.iter()
        .map(|&e| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| z[e * k % (2 * n)] * c)
                .sum()
        })
        .collect()
}

/// Encodes `values` at scale `2^scale_bits` into `basis`, coefficient domain.
pub fn encode(
    values: &[Complex64],
    scale_bits: u32,
    n: usize,
    basis: &[PrimeModulus],
) -> Result<LimbMatrix> {
    let scale = (scale_bits as f64).exp2();
    let real = embed_inverse(values, n)?;
    let half_q = basis_product(&basis.iter().map(|m| m.value).collect::<Vec<_>>()) >> 1u32;
    let mut coeffs = Vec::with_capacity(n);
    for c in real {
        let v = (c * scale).round();
        if !v.is_finite() || v.abs() >= 1.6e38 {
            return Err(Error::CoefficientOverflow { level: basis.len().saturating_sub(1) });
        }
        let v = v as i128;
        if BigUint::from(v.unsigned_abs()) >= half_q {
            return Err(Error::CoefficientOverflow { level: basis.len().saturating_sub(1) });
        }
        coeffs.push(v);
    }
    Ok(LimbMatrix::from_signed(basis, &coeffs))
}

/// Centered integer lift of every coefficient.
pub fn centered_lift(x: &LimbMatrix) -> Result<Vec<BigInt>> {
    let c = if x.rep == Rep::Eval { x.to_coeff()? } else { x.to_order(super::Order::Natural) };
    let moduli = c.moduli();
    let q = BigInt::from(basis_product(&moduli));
    let half = &q >> 1u32;
    Ok((0..c.n())
        .map(|k| {
            let r = RnsInt { residues: c.rows.iter().map(|row| row[k]).collect() };
            let v = BigInt::from(crt_reconstruct(&r, &moduli));
            if v > half {
                v - &q
            } else {
                v
            }
        })
        .collect())
}

fn big_to_f64(v: &BigInt) -> f64 {
    v.to_f64().unwrap_or(if v.is_negative() { f64::MIN } else { f64::MAX })
}

/// Decodes all `N/2` slots at scale `2^scale_bits`.
pub fn decode(x: &LimbMatrix, scale_bits: f64) -> Result<Vec<Complex64>> {
    let scale = scale_bits.exp2();
    let coeffs: Vec<f64> = centered_lift(x)?.iter().map(|v| big_to_f64(v) / scale).collect();
    Ok(embed(&coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::apply_automorphism;
    use crate::rns::find_ntt_primes;

    fn basis(n: usize) -> Vec<PrimeModulus> {
        find_ntt_primes(40, n, 2, &[])
            .unwrap()
            .into_iter()
            .map(|q| PrimeModulus::new(q, n).unwrap())
            .collect()
    }

    fn sample(len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos() * 0.5))
            .collect()
    }

    #[test]
    fn exponents_are_distinct_and_cover_half() {
        let e = slot_exponents(16);
        assert_eq!(e[0], 1);
        assert_eq!(e[1] * 5 % 32, 1);
        let mut all: Vec<usize> = e.iter().flat_map(|&x| [x, 32 - x]).collect();
        all.sort();
        assert_eq!(all, (0..16).map(|i| 2 * i + 1).collect::<Vec<_>>());
    }

    #[test]
    fn roundtrip() {
        let n = 32;
        let b = basis(n);
        let z = sample(n / 2);
        let pt = encode(&z, 30, n, &b).unwrap();
        let back = decode(&pt, 30.0).unwrap();
        for (a, w) in z.iter().zip(&back) {
            assert!((a - w).norm() < 1e-6);
        }
    }

    #[test]
    fn automorphism_rotates_left() {
        let n = 32;
        let b = basis(n);
        let z = sample(n / 2);
        let pt = encode(&z, 30, n, &b).unwrap().to_eval().unwrap();
        for r in [1i64, 3] {
            let rot = decode(&apply_automorphism(&pt, r).unwrap(), 30.0).unwrap();
            for j in 0..n / 2 {
                assert!((rot[j] - z[(j + r as usize) % (n / 2)]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let n = 16;
        let b = basis(n);
        let z = vec![Complex64::new(1e6, 0.0); 8];
        assert!(matches!(encode(&z, 75, n, &b), Err(Error::CoefficientOverflow { .. })));
    }
}
