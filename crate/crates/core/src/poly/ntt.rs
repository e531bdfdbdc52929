//! Reference negacyclic NTT over `Z_q[X]/(X^N + 1)`.
//!
//! Forward transform is decimation-in-time Cooley-Tukey: it consumes
//! coefficients in bit-reversed order and produces evaluations in natural
//! order, `out[i] = a(ψ^(2i+1))` for the primitive `2N`-th root `ψ`. The
//! inverse is the mirrored decimation-in-frequency Gentleman-Sande transform
//! (natural evaluations in, bit-reversed coefficients out). The negacyclic
//! twist is merged into the twiddles: the butterfly at sub-transform size `M`
//! and offset `i` uses `ψ^((N/M)(2i+1))`.

use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::rns::PrimeModulus;

pub fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

pub fn bit_reverse_permute<T: Copy>(v: &mut [T]) {
    let n = v.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = bit_reverse(i, bits);
        if i < j {
            v.swap(i, j);
        }
    }
}

/// Exponent of `ψ` used by the butterfly at offset `i` in a sub-transform of
/// size `m` (ring degree `n`).
#[inline]
pub fn twiddle_exponent(n: usize, m: usize, i: usize) -> usize {
    (n / m) * (2 * i + 1)
}

/// `ψ^e` for `e < n`, forward direction; `ψ^(-e)` for the inverse.
pub struct TwiddleTable {
    pub forward: Vec<u64>,
    pub inverse: Vec<u64>,
}

impl TwiddleTable {
    pub fn new(m: &PrimeModulus, n: usize) -> Self {
        let psi = m.root_for(n);
        let psi_inv = m.inv(psi).expect("root is a unit");
        let powers = |base: u64| {
            let mut v = Vec::with_capacity(n);
            let mut acc = 1u64;
            for _ in 0..n {
                v.push(acc);
                acc = m.mul(acc, base);
            }
            v
        };
        TwiddleTable {
            forward: powers(psi),
            inverse: powers(psi_inv),
        }
    }
}

fn check_len(n: usize, m: &PrimeModulus) -> Result<()> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::NotPowerOfTwo(n));
    }
    if n > m.n_max {
        return Err(Error::InvalidParameter(format!(
            "ring degree {n} exceeds the modulus' maximum {}",
            m.n_max
        )));
    }
    Ok(())
}

/// In-place forward NTT: bit-reversed coefficients → natural evaluations.
pub fn ntt_dit_inplace(a: &mut [u64], m: &PrimeModulus) -> Result<()> {
    let n = a.len();
    check_len(n, m)?;
    let tw = TwiddleTable::new(m, n);
    let mut size = 2;
    while size <= n {
        let h = size / 2;
        for start in (0..n).step_by(size) {
            for i in 0..h {
                let w = tw.forward[twiddle_exponent(n, size, i)];
                let u = a[start + i];
                let v = m.mul(a[start + i + h], w);
                a[start + i] = m.add(u, v);
                a[start + i + h] = m.sub(u, v);
            }
        }
        size *= 2;
    }
    counters::record(Kernel::Ntt, (n / 2 * n.trailing_zeros() as usize) as u64);
    Ok(())
}

/// In-place inverse NTT: natural evaluations → bit-reversed coefficients.
pub fn intt_dif_inplace(a: &mut [u64], m: &PrimeModulus) -> Result<()> {
    let n = a.len();
    check_len(n, m)?;
    let tw = TwiddleTable::new(m, n);
    let mut size = n;
    while size >= 2 {
        let h = size / 2;
        for start in (0..n).step_by(size) {
            for i in 0..h {
                let w = tw.inverse[twiddle_exponent(n, size, i)];
                let u = a[start + i];
                let v = a[start + i + h];
                a[start + i] = m.add(u, v);
                a[start + i + h] = m.mul(m.sub(u, v), w);
            }
        }
        size /= 2;
    }
    let n_inv = m.inv(n as u64 % m.value)?;
    for x in a.iter_mut() {
        *x = m.mul(*x, n_inv);
    }
    counters::record(
        Kernel::Intt,
        (n / 2 * n.trailing_zeros() as usize + n) as u64,
    );
    Ok(())
}

/// Natural-order coefficients → natural-order evaluations.
pub fn ntt_reference(coeffs: &[u64], m: &PrimeModulus) -> Result<Vec<u64>> {
    let mut a = coeffs.to_vec();
    bit_reverse_permute(&mut a);
    ntt_dit_inplace(&mut a, m)?;
    Ok(a)
}

/// Natural-order evaluations → natural-order coefficients.
pub fn intt_reference(evals: &[u64], m: &PrimeModulus) -> Result<Vec<u64>> {
    let mut a = evals.to_vec();
    intt_dif_inplace(&mut a, m)?;
    bit_reverse_permute(&mut a);
    Ok(a)
}

/// O(N²) negacyclic product, the oracle for the convolution property.
pub fn schoolbook_negacyclic(a: &[u64], b: &[u64], m: &PrimeModulus) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            let p = m.mul(a[i], b[j]);
            let k = i + j;
            if k < n {
                out[k] = m.add(out[k], p);
            } else {
                out[k - n] = m.sub(out[k - n], p);
            }
        }
    }
    out
}
