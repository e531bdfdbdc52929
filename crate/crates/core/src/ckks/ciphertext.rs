//! Ciphertexts and homomorphic operations.

use num_complex::Complex64;

use crate::ckks::keys::{uniform_poly, KeySet, SecretKey, SwitchingKey};
use crate::ckks::keyswitch::{
    fused_moddown_rescale, key_mult, key_switch, lift_to_qp, mod_down, mod_up_all, rescale_poly,
};
use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::poly::{apply_automorphism, decode, encode, LimbMatrix, Rep};
use crate::rns::ModulusChain;

/// `(c0, c1)` with `c0 + c1·s ≈ Δ·m`, evaluation form over `q_0..q_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub c0: LimbMatrix,
    pub c1: LimbMatrix,
    /// `log2 Δ`.
    pub log_scale: f64,
}

const SCALE_EPS: f64 = 1e-9;

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.c0.limbs() - 1
    }

    pub fn n(&self) -> usize {
        self.c0.n()
    }

    fn same_shape(&self, other_level: usize, other_scale: f64) -> Result<()> {
        if self.level() != other_level {
            return Err(Error::LevelMismatch(format!("levels {} and {other_level}", self.level())));
        }
        if (self.log_scale - other_scale).abs() > SCALE_EPS {
            return Err(Error::LevelMismatch(format!(
                "scales 2^{} and 2^{other_scale}",
                self.log_scale
            )));
        }
        Ok(())
    }

    /// Drops top limbs without scaling.
    pub fn drop_to_level(&self, level: usize) -> Result<Ciphertext> {
        if level > self.level() {
            return Err(Error::LevelMismatch(format!("cannot raise level {} to {level}", self.level())));
        }
        Ok(Ciphertext {
            c0: self.c0.prefix(level + 1),
            c1: self.c1.prefix(level + 1),
            log_scale: self.log_scale,
        })
    }
}

/// Encodes and encrypts at the top of `q_0..q_ℓ`.
pub fn encrypt(
    values: &[Complex64],
    level: usize,
    chain: &ModulusChain,
    sk: &SecretKey,
    seed: u64,
) -> Result<Ciphertext> {
    let n = sk.eval.n();
    let basis = chain.q_basis(level);
    let m = encode(values, chain.scale_bits, n, basis)?.to_eval()?;
    encrypt_plaintext(&m, chain.scale_bits as f64, sk, seed)
}

pub fn encrypt_plaintext(m: &LimbMatrix, log_scale: f64, sk: &SecretKey, seed: u64) -> Result<Ciphertext> {
    m.require(Rep::Eval)?;
    let a = uniform_poly(&m.basis, m.n(), seed, u64::MAX);
    let s = sk.at_level(m.limbs() - 1);
    let c0 = m.sub(&a.hadamard(&s)?)?;
    Ok(Ciphertext { c0, c1: a, log_scale })
}

pub fn decrypt(ct: &Ciphertext, sk: &SecretKey) -> Result<LimbMatrix> {
    let s = sk.at_level(ct.level());
    ct.c0.add(&ct.c1.hadamard(&s)?)
}

pub fn decrypt_decode(ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<Complex64>> {
    decode(&decrypt(ct, sk)?, ct.log_scale)
}

pub fn h_add(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    a.same_shape(b.level(), b.log_scale)?;
    Ok(Ciphertext {
        c0: a.c0.add(&b.c0)?,
        c1: a.c1.add(&b.c1)?,
        log_scale: a.log_scale,
    })
}

pub fn h_sub(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    a.same_shape(b.level(), b.log_scale)?;
    Ok(Ciphertext {
        c0: a.c0.sub(&b.c0)?,
        c1: a.c1.sub(&b.c1)?,
        log_scale: a.log_scale,
    })
}

pub fn h_neg(a: &Ciphertext) -> Ciphertext {
    Ciphertext {
        c0: a.c0.neg(),
        c1: a.c1.neg(),
        log_scale: a.log_scale,
    }
}

pub fn p_add(a: &Ciphertext, pt: &LimbMatrix, pt_log_scale: f64) -> Result<Ciphertext> {
    a.same_shape(pt.limbs() - 1, pt_log_scale)?;
    Ok(Ciphertext {
        c0: a.c0.add(pt)?,
        c1: a.c1.clone(),
        log_scale: a.log_scale,
    })
}

/// Plaintext product without rescaling; the scales add.
pub fn p_mult(a: &Ciphertext, pt: &LimbMatrix, pt_log_scale: f64) -> Result<Ciphertext> {
    if pt.limbs() != a.c0.limbs() {
        return Err(Error::LevelMismatch("plaintext and ciphertext bases differ".into()));
    }
    let out = Ciphertext {
        c0: a.c0.hadamard(pt)?,
        c1: a.c1.hadamard(pt)?,
        log_scale: a.log_scale + pt_log_scale,
    };
    counters::record(Kernel::DiagMult, (2 * pt.limbs() * pt.n()) as u64);
    Ok(out)
}

/// Exact division by the top prime; `Δ' = Δ / q_ℓ`.
pub fn rescale(a: &Ciphertext) -> Result<Ciphertext> {
    let q_top = a.c0.basis[a.level()].value as f64;
    Ok(Ciphertext {
        c0: rescale_poly(&a.c0)?,
        c1: rescale_poly(&a.c1)?,
        log_scale: a.log_scale - q_top.log2(),
    })
}

/// Slot rotation left by `r`: permute both parts, then key-switch `c1`
/// from `φ_r(s)` back to `s`.
pub fn h_rot(a: &Ciphertext, r: i64, key: &SwitchingKey, chain: &ModulusChain) -> Result<Ciphertext> {
    let c0 = apply_automorphism(&a.c0, r)?;
    let c1 = apply_automorphism(&a.c1, r)?;
    let (k0, k1) = key_switch(&c1, key, chain)?;
    Ok(Ciphertext {
        c0: c0.add(&k0)?,
        c1: k1,
        log_scale: a.log_scale,
    })
}

/// Rotation via the key set; step 0 is the identity and needs no key.
pub fn h_rot_keys(a: &Ciphertext, r: i64, keys: &KeySet, chain: &ModulusChain) -> Result<Ciphertext> {
    if r.rem_euclid(a.n() as i64 / 2) == 0 {
        return Ok(a.clone());
    }
    h_rot(a, r, keys.rotation(r)?, chain)
}

fn tensor(a: &Ciphertext, b: &Ciphertext) -> Result<(LimbMatrix, LimbMatrix, LimbMatrix)> {
    if a.level() != b.level() {
        return Err(Error::LevelMismatch(format!("levels {} and {}", a.level(), b.level())));
    }
    let d0 = a.c0.hadamard(&b.c0)?;
    let d1 = a.c0.hadamard(&b.c1)?.add(&a.c1.hadamard(&b.c0)?)?;
    let d2 = a.c1.hadamard(&b.c1)?;
    counters::record(Kernel::Tensor, (4 * a.c0.limbs() * a.n()) as u64);
    Ok((d0, d1, d2))
}

/// Tensor, relinearize, rescale. With `fused`, ModDown and Rescale run as a
/// single exact division by `P·q_ℓ`.
pub fn h_mult(a: &Ciphertext, b: &Ciphertext, relin: &SwitchingKey, chain: &ModulusChain, fused: bool) -> Result<Ciphertext> {
    let (d0, d1, d2) = tensor(a, b)?;
    let level = a.level();
    if level == 0 {
        return Err(Error::LevelMismatch("no level left to rescale into".into()));
    }
    let q_top = a.c0.basis[level].value as f64;
    let log_scale = a.log_scale + b.log_scale - q_top.log2();
    let ups = mod_up_all(&d2, chain)?;
    let (h0, h1) = key_mult(&ups, relin, level, chain)?;
    let (c0, c1) = if fused {
        let t0 = lift_to_qp(&d0, chain)?.add(&h0)?;
        let t1 = lift_to_qp(&d1, chain)?.add(&h1)?;
        (fused_moddown_rescale(&t0, chain)?, fused_moddown_rescale(&t1, chain)?)
    } else {
        let c0 = d0.add(&mod_down(&h0, chain)?)?;
        let c1 = d1.add(&mod_down(&h1, chain)?)?;
        (rescale_poly(&c0)?, rescale_poly(&c1)?)
    };
    Ok(Ciphertext { c0, c1, log_scale })
}
