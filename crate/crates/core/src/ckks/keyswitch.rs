//! Decompose, ModUp, KeyMult, ModDown, Rescale.
//!
//! Polynomials at level `ℓ` over `Q·P` list the `q_0..q_ℓ` limbs first and
//! the `α` special limbs after them.

use crate::ckks::bconv::{bconv_exact, bconv_reference, switch_modulus, BaseTable};
use crate::ckks::keys::SwitchingKey;
use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::poly::{LimbMatrix, Rep};
use crate::rns::ModulusChain;

/// Splits a polynomial over `q_0..q_ℓ` into digits of `alpha` limbs; the last
/// digit may be shorter.
pub fn decompose(c: &LimbMatrix, alpha: usize) -> Vec<LimbMatrix> {
    let limbs = c.limbs();
    (0..limbs.div_ceil(alpha))
        .map(|d| c.select(&(d * alpha..((d + 1) * alpha).min(limbs)).collect::<Vec<_>>()))
        .collect()
}

fn level_of(x: &LimbMatrix) -> Result<usize> {
    x.limbs()
        .checked_sub(1)
        .ok_or_else(|| Error::LevelMismatch("polynomial has no limbs".into()))
}

/// Raises digit `d` of a level-`level` polynomial to the full `Q·P` basis.
/// The digit's own limbs are copied; every other limb comes from a fast
/// basis conversion.
pub fn mod_up(digit: &LimbMatrix, d: usize, level: usize, chain: &ModulusChain) -> Result<LimbMatrix> {
    digit.require(Rep::Eval)?;
    let alpha = chain.alpha;
    let start = d * alpha;
    let own: Vec<usize> = (start..(start + digit.limbs()).min(level + 1)).collect();
    if own.len() != digit.limbs() || own.is_empty() {
        return Err(Error::BasisMismatch(format!("digit {d} does not fit level {level}")));
    }
    let qp = chain.qp_basis(level);
    if own.iter().any(|&i| qp[i].value != digit.basis[i - start].value) {
        return Err(Error::BasisMismatch(format!("digit {d} limbs differ from the chain")));
    }
    let others: Vec<usize> = (0..qp.len()).filter(|i| !own.contains(i)).collect();
    let target: Vec<_> = others.iter().map(|&i| qp[i]).collect();
    let table = BaseTable::new(&digit.basis, &target)?;
    let converted = bconv_reference(&digit.to_coeff()?, &table)?.to_eval()?;
    let digit = digit.to_order(converted.order);
    let mut rows = vec![Vec::new(); qp.len()];
    for (k, &i) in own.iter().enumerate() {
        rows[i] = digit.rows[k].clone();
    }
    for (k, &i) in others.iter().enumerate() {
        rows[i] = converted.rows[k].clone();
    }
    Ok(LimbMatrix {
        basis: qp,
        rows,
        rep: Rep::Eval,
        order: converted.order,
    })
}

/// Limb positions of the level-`level` slice inside a full-chain `Q·P` key.
pub fn key_slice(level: usize, chain: &ModulusChain) -> Vec<usize> {
    let full_q = chain.q_limbs.len();
    (0..=level).chain(full_q..full_q + chain.p_limbs.len()).collect()
}

/// `(Σ_d D_d ⊙ b_d, Σ_d D_d ⊙ a_d)` over `Q·P`.
pub fn key_mult(
    digits: &[LimbMatrix],
    key: &SwitchingKey,
    level: usize,
    chain: &ModulusChain,
) -> Result<(LimbMatrix, LimbMatrix)> {
    let dnum = chain.dnum(level);
    if digits.len() != dnum {
        return Err(Error::InvalidParameter(format!(
            "{} digits supplied, level {level} needs {dnum}",
            digits.len()
        )));
    }
    let slice = key_slice(level, chain);
    let n = digits[0].n();
    let mut acc0 = LimbMatrix::zero(&digits[0].basis, n, Rep::Eval);
    let mut acc1 = acc0.clone();
    for (d, digit) in digits.iter().enumerate() {
        let b = key.b[d].select(&slice);
        let a = key.a[d].select(&slice);
        acc0 = acc0.add(&digit.hadamard(&b)?)?;
        acc1 = acc1.add(&digit.hadamard(&a)?)?;
    }
    counters::record(Kernel::KeyMult, (2 * dnum * slice.len() * n) as u64);
    Ok((acc0, acc1))
}

/// Exact `floor(x / Π tail)` reduced onto the remaining limbs.
fn floor_divide(x: &LimbMatrix, tail: &[usize]) -> Result<LimbMatrix> {
    x.require(Rep::Eval)?;
    let keep: Vec<usize> = (0..x.limbs()).filter(|i| !tail.contains(i)).collect();
    if keep.is_empty() || tail.is_empty() {
        return Err(Error::LevelMismatch("nothing to divide or nothing left".into()));
    }
    let low = x.select(&tail.to_vec()).to_coeff()?;
    let high = x.select(&keep);
    let conv = if tail.len() == 1 {
        // a single residue is already the exact value
        let mut c = LimbMatrix::zero(&high.basis, x.n(), Rep::Coeff);
        for (row, m) in c.rows.iter_mut().zip(&high.basis) {
            for (v, &s) in row.iter_mut().zip(&low.rows[0]) {
                *v = switch_modulus(s, m);
            }
        }
        c
    } else {
        let table = BaseTable::new(&low.basis, &high.basis)?;
        bconv_exact(&low, &table)?
    };
    let conv = conv.to_eval()?;
    let inv: Vec<u64> = high
        .basis
        .iter()
        .map(|m| {
            let prod = low.basis.iter().fold(1u64, |acc, t| m.mul(acc, t.value % m.value));
            m.inv(prod)
        })
        .collect::<Result<_>>()?;
    high.sub(&conv)?.scale_limbs(&inv)
}

/// `floor(x / P)` over `q_0..q_ℓ` for `x` over `Q·P`.
pub fn mod_down(x: &LimbMatrix, chain: &ModulusChain) -> Result<LimbMatrix> {
    let alpha = chain.p_limbs.len();
    let limbs = x.limbs();
    if limbs <= alpha {
        return Err(Error::BasisMismatch("input lacks Q limbs".into()));
    }
    let tail: Vec<usize> = (limbs - alpha..limbs).collect();
    floor_divide(x, &tail)
}

/// Drops `q_ℓ` with exact division, for a polynomial over `q_0..q_ℓ`.
pub fn rescale_poly(x: &LimbMatrix) -> Result<LimbMatrix> {
    let level = level_of(x)?;
    if level == 0 {
        return Err(Error::LevelMismatch("cannot rescale at level 0".into()));
    }
    floor_divide(x, &[level])
}

/// One exact division by `P·q_ℓ`, equal to `rescale_poly(mod_down(x))`.
pub fn fused_moddown_rescale(x: &LimbMatrix, chain: &ModulusChain) -> Result<LimbMatrix> {
    let alpha = chain.p_limbs.len();
    let limbs = x.limbs();
    if limbs < alpha + 2 {
        return Err(Error::LevelMismatch("cannot rescale at level 0".into()));
    }
    let top = limbs - alpha - 1;
    let tail: Vec<usize> = std::iter::once(top).chain(top + 1..limbs).collect();
    floor_divide(x, &tail)
}

/// `P·x` placed on the `Q·P` basis (zero on the special limbs).
pub fn lift_to_qp(x: &LimbMatrix, chain: &ModulusChain) -> Result<LimbMatrix> {
    let level = level_of(x)?;
    let scalars: Vec<u64> = x
        .basis
        .iter()
        .map(|m| chain.p_limbs.iter().fold(1u64, |acc, p| m.mul(acc, p.value % m.value)))
        .collect();
    let scaled = x.scale_limbs(&scalars)?;
    let zeros = LimbMatrix::zero(&chain.p_limbs, x.n(), x.rep);
    let out = scaled.concat(&zeros)?;
    debug_assert_eq!(out.limbs(), level + 1 + chain.p_limbs.len());
    Ok(out)
}

/// Raises every digit of `c` to `Q·P`.
pub fn mod_up_all(c: &LimbMatrix, chain: &ModulusChain) -> Result<Vec<LimbMatrix>> {
    let level = level_of(c)?;
    decompose(c, chain.alpha)
        .iter()
        .enumerate()
        .map(|(d, digit)| mod_up(digit, d, level, chain))
        .collect()
}

/// Full key switch of `c`: the returned pair decrypts to `c·s_from`
/// under the key's target secret.
pub fn key_switch(c: &LimbMatrix, key: &SwitchingKey, chain: &ModulusChain) -> Result<(LimbMatrix, LimbMatrix)> {
    let level = level_of(c)?;
    let ups = mod_up_all(c, chain)?;
    let (h0, h1) = key_mult(&ups, key, level, chain)?;
    Ok((mod_down(&h0, chain)?, mod_down(&h1, chain)?))
}
