//! Byte encodings of ciphertexts and switching keys, built from limb dumps.
//!
//! Ciphertext: `log_scale: f64`, then the dumps of `c0` and `c1`.
//! Switching key: `seed: u64`, `step: i64`, `dnum: u64`, then one dump per
//! `b_d`. The `a_d` halves are not stored; they are regenerated from the seed.

use crate::ckks::ciphertext::Ciphertext;
use crate::ckks::keys::{key_a_parts, KeyKind, SwitchingKey};
use crate::error::{Error, Result};
use crate::poly::dump::{read_dump, write_dump, HEADER_BYTES};
use crate::rns::{ModulusChain, PrimeModulus};

pub const KIND_CT0: u32 = 1;
pub const KIND_CT1: u32 = 2;
pub const KIND_KEY_RELIN: u32 = 0x10;
pub const KIND_KEY_ROT: u32 = 0x11;

fn take<'a>(bytes: &mut &'a [u8], len: usize) -> Result<&'a [u8]> {
    if bytes.len() < len {
        return Err(Error::Malformed("unexpected end of data".into()));
    }
    let (head, rest) = bytes.split_at(len);
    *bytes = rest;
    Ok(head)
}

fn take_word(bytes: &mut &[u8]) -> Result<[u8; 8]> {
    Ok(take(bytes, 8)?.try_into().unwrap())
}

/// Splits off one dump, using its header to find its length.
fn take_dump<'a>(bytes: &mut &'a [u8]) -> Result<&'a [u8]> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Malformed("truncated dump header".into()));
    }
    let n = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let limbs = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let len = n
        .checked_mul(limbs)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER_BYTES))
        .ok_or_else(|| Error::Malformed("dump size overflows".into()))?;
    take(bytes, len)
}

fn expect_kind(found: u32, want: u32) -> Result<()> {
    if found != want {
        return Err(Error::Malformed(format!("kind tag {found:#x}, expected {want:#x}")));
    }
    Ok(())
}

pub fn ciphertext_to_bytes(ct: &Ciphertext) -> Vec<u8> {
    let mut out = ct.log_scale.to_le_bytes().to_vec();
    out.extend(write_dump(&ct.c0, KIND_CT0));
    out.extend(write_dump(&ct.c1, KIND_CT1));
    out
}

pub fn ciphertext_from_bytes(mut bytes: &[u8], basis: &[PrimeModulus]) -> Result<Ciphertext> {
    let log_scale = f64::from_le_bytes(take_word(&mut bytes)?);
    let (c0, k0) = read_dump(take_dump(&mut bytes)?, basis)?;
    expect_kind(k0, KIND_CT0)?;
    let (c1, k1) = read_dump(take_dump(&mut bytes)?, basis)?;
    expect_kind(k1, KIND_CT1)?;
    if !bytes.is_empty() {
        return Err(Error::Malformed("trailing bytes after ciphertext".into()));
    }
    Ok(Ciphertext { c0, c1, log_scale })
}

pub fn key_to_bytes(key: &SwitchingKey) -> Vec<u8> {
    let (tag, step) = match key.kind {
        KeyKind::Relin => (KIND_KEY_RELIN, 0),
        KeyKind::Rot(r) => (KIND_KEY_ROT, r),
    };
    let mut out = key.seed.to_le_bytes().to_vec();
    out.extend(step.to_le_bytes());
    out.extend((key.b.len() as u64).to_le_bytes());
    for b in &key.b {
        out.extend(write_dump(b, tag));
    }
    out
}

pub fn key_from_bytes(mut bytes: &[u8], chain: &ModulusChain) -> Result<SwitchingKey> {
    let seed = u64::from_le_bytes(take_word(&mut bytes)?);
    let step = i64::from_le_bytes(take_word(&mut bytes)?);
    let dnum = u64::from_le_bytes(take_word(&mut bytes)?) as usize;
    if dnum != chain.dnum_max {
        return Err(Error::Malformed(format!("key has {dnum} digits, chain needs {}", chain.dnum_max)));
    }
    let basis = chain.qp_basis(chain.max_level());
    let mut b = Vec::with_capacity(dnum);
    let mut tag = None;
    for _ in 0..dnum {
        let (m, k) = read_dump(take_dump(&mut bytes)?, &basis)?;
        if *tag.get_or_insert(k) != k {
            return Err(Error::Malformed("inconsistent kind tags".into()));
        }
        b.push(m);
    }
    if !bytes.is_empty() {
        return Err(Error::Malformed("trailing bytes after key".into()));
    }
    let kind = match tag {
        Some(KIND_KEY_RELIN) => KeyKind::Relin,
        Some(KIND_KEY_ROT) => KeyKind::Rot(step),
        other => return Err(Error::Malformed(format!("unknown key tag {other:?}"))),
    };
    let n = b[0].n();
    Ok(SwitchingKey {
        kind,
        seed,
        a: key_a_parts(chain, n, seed),
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckks::{encrypt, keygen};
    use crate::rns::{generate_chain, ChainParams};
    use num_complex::Complex64;

    #[test]
    fn roundtrips() {
        let chain = generate_chain(&ChainParams {
            n_max: 16,
            q0_bits: vec![40],
            qi_bits: 32,
            level_count: 3,
            alpha: 2,
            p_bits: 40,
            scale_bits: 32,
            log_qp_cap: None,
        })
        .unwrap();
        let keys = keygen(&chain, 16, 4, 5, &[3]).unwrap();
        let ct = encrypt(&[Complex64::new(0.25, -0.5)], 2, &chain, &keys.secret, 4).unwrap();
        let bytes = ciphertext_to_bytes(&ct);
        assert_eq!(ciphertext_from_bytes(&bytes, chain.q_basis(2)).unwrap(), ct);
        assert!(ciphertext_from_bytes(&bytes[..bytes.len() - 1], chain.q_basis(2)).is_err());

        for key in [&keys.relin, keys.rotation(3).unwrap()] {
            let bytes = key_to_bytes(key);
            assert_eq!(&key_from_bytes(&bytes, &chain).unwrap(), key);
        }
        // only the b halves travel
        let full = chain.qp_basis(chain.max_level()).len() * 16 * 8;
        assert_eq!(key_to_bytes(&keys.relin).len(), 24 + chain.dnum_max * (32 + full));
    }
}
