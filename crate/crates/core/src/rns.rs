//! Word-sized prime moduli, RNS residue vectors and the modulus chain.
//!
//! Every prime is NTT-friendly for the chain's maximum ring degree, i.e.
//! `q ≡ 1 (mod 2·n_max)`, and carries a primitive `2·n_max`-th root of unity.
//! Multiplication uses Barrett reduction with a per-prime constant; the
//! big-integer CRT helpers at the bottom are the oracle every RNS kernel is
//! checked against.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on modulus width, matching the 40-bit datapath.
pub const MAX_MODULUS_BITS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimeModulus {
    pub value: u64,
    /// Primitive `2·n_max`-th root of unity.
    pub ntt_root: u64,
    pub bit_width: u32,
    pub n_max: usize,
    barrett_mu: u64,
}

impl PrimeModulus {
    /// Wraps a prime that is already known to be NTT-friendly for `n_max`.
    pub fn new(value: u64, n_max: usize) -> Result<Self> {
        if !n_max.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n_max));
        }
        let bit_width = 64 - value.leading_zeros();
        if bit_width > MAX_MODULUS_BITS {
            return Err(Error::BitWidthTooLarge(bit_width));
        }
        if !is_prime(value) || (value - 1) % (2 * n_max as u64) != 0 {
            return Err(Error::InvalidParameter(format!(
                "{value} is not a prime congruent to 1 mod {}",
                2 * n_max
            )));
        }
        let barrett_mu = ((1u128 << (2 * bit_width)) / value as u128) as u64;
        let mut m = PrimeModulus {
            value,
            ntt_root: 0,
            bit_width,
            n_max,
            barrett_mu,
        };
        m.ntt_root = m.find_primitive_root(2 * n_max as u64);
        Ok(m)
    }

    fn find_primitive_root(&self, order: u64) -> u64 {
        let exp = (self.value - 1) / order;
        let half = order / 2;
        (2..self.value)
            .map(|x| self.pow(x, exp))
            .find(|&g| self.pow(g, half) == self.value - 1)
            .expect("prime congruent to 1 mod order always has a primitive root")
    }

    /// Primitive `2n`-th root of unity for a ring degree `n ≤ n_max`.
    pub fn root_for(&self, n: usize) -> u64 {
        debug_assert!(n.is_power_of_two() && n <= self.n_max);
        self.pow(self.ntt_root, (self.n_max / n) as u64)
    }

    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        // x < q^2 < 2^(2k); quotient estimate is off by at most 2.
        let k = self.bit_width;
        let q = self.value as u128;
        let est = ((x >> (k - 1)) * self.barrett_mu as u128) >> (k + 1);
        let mut r = x - est * q;
        while r >= q {
            r -= q;
        }
        r as u64
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.value
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base %= self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = a % self.value;
        if a == 0 {
            return Err(Error::NotInvertible {
                value: a,
                modulus: self.value,
            });
        }
        Ok(self.pow(a, self.value - 2))
    }

    /// Maps a signed integer into `[0, q)`.
    pub fn from_signed(&self, x: i128) -> u64 {
        x.rem_euclid(self.value as i128) as u64
    }

    /// Centered representative in `(-q/2, q/2]`.
    pub fn centered(&self, x: u64) -> i64 {
        if x > self.value / 2 {
            x as i64 - self.value as i64
        } else {
            x as i64
        }
    }
}

pub fn mod_mul(a: u64, b: u64, m: &PrimeModulus) -> u64 {
    m.mul(a, b)
}

pub fn mod_add(a: u64, b: u64, m: &PrimeModulus) -> u64 {
    m.add(a, b)
}

pub fn mod_sub(a: u64, b: u64, m: &PrimeModulus) -> u64 {
    m.sub(a, b)
}

pub fn mod_inv(a: u64, m: &PrimeModulus) -> Result<u64> {
    m.inv(a)
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u64(acc, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the fixed witness set is exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &WITNESSES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Searches downward from `2^bits` for `count` primes `≡ 1 (mod 2·n)` with
/// exactly `bits` bits, skipping any already in `used`.
pub fn find_ntt_primes(bits: u32, n: usize, count: usize, used: &[u64]) -> Result<Vec<u64>> {
    if bits > MAX_MODULUS_BITS {
        return Err(Error::BitWidthTooLarge(bits));
    }
    let step = 2 * n as u64;
    let hi = 1u64 << bits;
    let lo = 1u64 << (bits - 1);
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    // Largest candidate c = k·step + 1 < 2^bits.
    let mut c = ((hi - 2) / step) * step + 1;
    while c >= lo && c > 1 {
        if is_prime(c) && !used.contains(&c) && !out.contains(&c) {
            out.push(c);
            if out.len() == count {
                return Ok(out);
            }
        }
        if c < step {
            break;
        }
        c -= step;
    }
    Err(Error::NotEnoughPrimes {
        bits,
        n,
        needed: count,
        found: out.len(),
    })
}

/// Inputs to [`generate_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n_max: usize,
    /// Widths of the prime(s) making up `q_0`; more than one entry splits the
    /// base modulus across several limbs.
    pub q0_bits: Vec<u32>,
    pub qi_bits: u32,
    /// Number of scaling primes above the base.
    pub level_count: usize,
    pub alpha: usize,
    pub p_bits: u32,
    pub scale_bits: u32,
    pub log_qp_cap: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusChain {
    pub n_max: usize,
    pub q_limbs: Vec<PrimeModulus>,
    pub p_limbs: Vec<PrimeModulus>,
    pub alpha: usize,
    pub dnum_max: usize,
    pub scale_bits: u32,
}

impl ModulusChain {
    /// Highest level `L`; a ciphertext at level `ℓ` has `ℓ + 1` q-limbs.
    pub fn max_level(&self) -> usize {
        self.q_limbs.len() - 1
    }

    pub fn dnum(&self, level: usize) -> usize {
        (level + 1).div_ceil(self.alpha)
    }

    pub fn q_basis(&self, level: usize) -> &[PrimeModulus] {
        &self.q_limbs[..=level]
    }

    /// `q_0 … q_ℓ` followed by every `p_i`.
    pub fn qp_basis(&self, level: usize) -> Vec<PrimeModulus> {
        let mut b = self.q_limbs[..=level].to_vec();
        b.extend_from_slice(&self.p_limbs);
        b
    }

    pub fn log_qp(&self) -> u32 {
        let bits: f64 = self
            .q_limbs
            .iter()
            .chain(self.p_limbs.iter())
            .map(|m| (m.value as f64).log2())
            .sum();
        bits.ceil() as u32
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// Builds a deterministic NTT-friendly chain. Primes of each width are taken
/// in descending order and are pairwise distinct across `q` and `p`.
pub fn generate_chain(params: &ChainParams) -> Result<ModulusChain> {
    let n = params.n_max;
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    if params.alpha == 0 || params.q0_bits.is_empty() {
        return Err(Error::InvalidParameter(
            "alpha and q0 widths must be non-empty".into(),
        ));
    }
    let mut widths = params.q0_bits.clone();
    widths.extend([params.qi_bits, params.p_bits]);
    if let Some(&w) = widths.iter().find(|&&w| w > MAX_MODULUS_BITS) {
        return Err(Error::BitWidthTooLarge(w));
    }

    let mut used: Vec<u64> = Vec::new();
    let take = |bits: u32, count: usize, used: &mut Vec<u64>| -> Result<Vec<u64>> {
        let primes = find_ntt_primes(bits, n, count, used)?;
        used.extend_from_slice(&primes);
        Ok(primes)
    };

    let mut q_values = Vec::new();
    for &b in &params.q0_bits {
        q_values.extend(take(b, 1, &mut used)?);
    }
    q_values.extend(take(params.qi_bits, params.level_count, &mut used)?);
    let p_values = take(params.p_bits, params.alpha, &mut used)?;

    let to_mod = |v: &u64| PrimeModulus::new(*v, n);
    let q_limbs = q_values.iter().map(to_mod).collect::<Result<Vec<_>>>()?;
    let p_limbs = p_values.iter().map(to_mod).collect::<Result<Vec<_>>>()?;
    let chain = ModulusChain {
        n_max: n,
        dnum_max: q_limbs.len().div_ceil(params.alpha),
        q_limbs,
        p_limbs,
        alpha: params.alpha,
        scale_bits: params.scale_bits,
    };
    if let Some(cap) = params.log_qp_cap {
        let actual = chain.log_qp();
        if actual > cap {
            return Err(Error::LogQpCap { actual, cap });
        }
    }
    Ok(chain)
}

/// An integer held as one residue per basis modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsInt {
    pub residues: Vec<u64>,
}

pub fn basis_product(basis: &[u64]) -> BigUint {
    basis
        .iter()
        .fold(BigUint::one(), |acc, &q| acc * BigUint::from(q))
}

/// Unique integer in `[0, Π q)` with the given residues.
pub fn crt_reconstruct(x: &RnsInt, basis: &[u64]) -> BigUint {
    assert_eq!(x.residues.len(), basis.len(), "residue count must match basis");
    let big_q = basis_product(basis);
    let mut acc = BigUint::zero();
    for (&r, &q) in x.residues.iter().zip(basis) {
        let q_hat = &big_q / q;
        let q_hat_mod = (&q_hat % q).to_u64().unwrap();
        let inv = pow_mod_u64(q_hat_mod, q - 2, q);
        let t = mul_mod_u64(r % q, inv, q);
        acc += q_hat * t;
    }
    acc % big_q
}

pub fn crt_decompose(x: &BigUint, basis: &[u64]) -> RnsInt {
    RnsInt {
        residues: basis.iter().map(|&q| (x % q).to_u64().unwrap()).collect(),
    }
}
