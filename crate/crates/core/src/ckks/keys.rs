//! Secret and switching keys (noise-free).

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::poly::{apply_automorphism, LimbMatrix, Rep};
use crate::rns::{ModulusChain, PrimeModulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KeyKind {
    Relin,
    Rot(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    /// Ternary coefficients.
    pub coeffs: Vec<i8>,
    /// Evaluation form over the full `Q·P` basis.
    pub eval: LimbMatrix,
}

impl SecretKey {
    /// Evaluation form over `q_0..q_ℓ`.
    pub fn at_level(&self, level: usize) -> LimbMatrix {
        self.eval.prefix(level + 1)
    }

    pub fn hamming_weight(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchingKey {
    pub kind: KeyKind,
    /// Regenerates every `a_d`.
    pub seed: u64,
    pub b: Vec<LimbMatrix>,
    pub a: Vec<LimbMatrix>,
}

/// Uniform polynomial in evaluation form; stream `stream` of the seed.
pub fn uniform_poly(basis: &[PrimeModulus], n: usize, seed: u64, stream: u64) -> LimbMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let rows = basis
        .iter()
        .map(|m| (0..n).map(|_| rng.gen_range(0..m.value)).collect())
        .collect();
    LimbMatrix {
        basis: basis.to_vec(),
        rows,
        rep: Rep::Eval,
        order: crate::poly::Order::Natural,
    }
}

/// The `a_d` half of a key, regenerated from its seed.
pub fn key_a_parts(chain: &ModulusChain, n: usize, seed: u64) -> Vec<LimbMatrix> {
    let basis = chain.qp_basis(chain.max_level());
    (0..chain.dnum_max)
        .map(|d| uniform_poly(&basis, n, seed, d as u64))
        .collect()
}

/// Ternary secret with exactly `h` nonzero coefficients.
pub fn gen_secret(chain: &ModulusChain, n: usize, h: usize, rng: &mut impl Rng) -> Result<SecretKey> {
    if h > n {
        return Err(Error::InvalidParameter(format!("Hamming weight {h} exceeds degree {n}")));
    }
    let mut coeffs = vec![0i8; n];
    for i in sample(rng, n, h) {
        coeffs[i] = if rng.gen::<bool>() { 1 } else { -1 };
    }
    let basis = chain.qp_basis(chain.max_level());
    let wide: Vec<i128> = coeffs.iter().map(|&c| c as i128).collect();
    let eval = LimbMatrix::from_signed(&basis, &wide).to_eval()?;
    Ok(SecretKey { coeffs, eval })
}

/// Key taking ciphertexts under `s_from` to ciphertexts under `sk`:
/// `b_d = -a_d·s + P·γ_d·s_from (mod QP)` with `γ_d` the CRT idempotent of
/// digit `d`.
pub fn gen_switching_key(
    chain: &ModulusChain,
    sk: &SecretKey,
    s_from: &LimbMatrix,
    kind: KeyKind,
    seed: u64,
) -> Result<SwitchingKey> {
    let n = sk.eval.n();
    let a = key_a_parts(chain, n, seed);
    let q_count = chain.q_limbs.len();
    let mut b = Vec::with_capacity(a.len());
    for (d, ad) in a.iter().enumerate() {
        let digit = d * chain.alpha..((d + 1) * chain.alpha).min(q_count);
        let mut bd = ad.hadamard(&sk.eval)?.neg();
        for (i, (row, m)) in bd.rows.iter_mut().zip(&sk.eval.basis).enumerate() {
            if !digit.contains(&i) {
                continue;
            }
            let p_mod = chain.p_limbs.iter().fold(1u64, |acc, p| m.mul(acc, p.value % m.value));
            for (v, &s) in row.iter_mut().zip(&s_from.rows[i]) {
                *v = m.add(*v, m.mul(p_mod, s));
            }
        }
        b.push(bd);
    }
    Ok(SwitchingKey { kind, seed, b, a })
}

#[derive(Debug, Clone)]
pub struct KeySet {
    pub secret: SecretKey,
    pub relin: SwitchingKey,
    pub rotations: BTreeMap<i64, SwitchingKey>,
}

impl KeySet {
    pub fn rotation(&self, r: i64) -> Result<&SwitchingKey> {
        self.rotations.get(&r).ok_or(Error::MissingRotationKey(r))
    }
}

/// Secret, relinearization key and one rotation key per requested step.
/// Everything is derived from `seed`.
pub fn keygen(chain: &ModulusChain, n: usize, h: usize, seed: u64, rotations: &[i64]) -> Result<KeySet> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let secret = gen_secret(chain, n, h, &mut rng)?;
    let s2 = secret.eval.hadamard(&secret.eval)?;
    let relin = gen_switching_key(chain, &secret, &s2, KeyKind::Relin, rng.next_u64())?;
    let mut rot = BTreeMap::new();
    for &r in rotations {
        let s_rot = apply_automorphism(&secret.eval, r)?;
        rot.insert(r, gen_switching_key(chain, &secret, &s_rot, KeyKind::Rot(r), rng.next_u64())?);
    }
    Ok(KeySet {
        secret,
        relin,
        rotations: rot,
    })
}
