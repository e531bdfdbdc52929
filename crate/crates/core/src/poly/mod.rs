//! RNS polynomials stored as a limb matrix (one row per prime).

pub mod automorphism;
pub mod dump;
pub mod encoding;
pub mod ntt;
pub mod stream;

use serde::{Deserialize, Serialize};

use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::rns::PrimeModulus;

pub use automorphism::{apply_automorphism, automorphism_map, galois_element};
pub use encoding::{decode, encode};
pub use ntt::{bit_reverse, bit_reverse_permute, intt_reference, ntt_reference};
pub use stream::{from_interleaved, to_interleaved, InterleavedStream, StreamChunk};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rep {
    Coeff,
    Eval,
}

impl Rep {
    pub fn name(self) -> &'static str {
        match self {
            Rep::Coeff => "Coeff",
            Rep::Eval => "Eval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Natural,
    BitReversed,
}

/// `rows[i][k]` is coefficient (or evaluation) `k` modulo `basis[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LimbMatrix {
    pub basis: Vec<PrimeModulus>,
    pub rows: Vec<Vec<u64>>,
    pub rep: Rep,
    pub order: Order,
}

impl LimbMatrix {
    pub fn zero(basis: &[PrimeModulus], n: usize, rep: Rep) -> Self {
        LimbMatrix {
            basis: basis.to_vec(),
            rows: vec![vec![0; n]; basis.len()],
            rep,
            order: Order::Natural,
        }
    }

    pub fn from_rows(basis: &[PrimeModulus], rows: Vec<Vec<u64>>, rep: Rep) -> Result<Self> {
        if rows.len() != basis.len() {
            return Err(Error::BasisMismatch(format!(
                "{} rows for {} moduli",
                rows.len(),
                basis.len()
            )));
        }
        let n = rows.first().map_or(0, |r| r.len());
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        for (row, m) in rows.iter().zip(basis) {
            if row.len() != n {
                return Err(Error::Malformed("ragged limb matrix".into()));
            }
            if row.iter().any(|&v| v >= m.value) {
                return Err(Error::Malformed(format!("residue not reduced mod {}", m.value)));
            }
        }
        Ok(LimbMatrix {
            basis: basis.to_vec(),
            rows,
            rep,
            order: Order::Natural,
        })
    }

    /// Coefficient-domain polynomial from signed integer coefficients.
    pub fn from_signed(basis: &[PrimeModulus], coeffs: &[i128]) -> Self {
        let rows = basis
            .iter()
            .map(|m| coeffs.iter().map(|&c| m.from_signed(c)).collect())
            .collect();
        LimbMatrix {
            basis: basis.to_vec(),
            rows,
            rep: Rep::Coeff,
            order: Order::Natural,
        }
    }

    pub fn n(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn limbs(&self) -> usize {
        self.rows.len()
    }

    pub fn moduli(&self) -> Vec<u64> {
        self.basis.iter().map(|m| m.value).collect()
    }

    pub fn require(&self, rep: Rep) -> Result<()> {
        if self.rep != rep {
            return Err(Error::RepMismatch {
                expected: rep.name(),
                found: self.rep.name(),
            });
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.moduli() != other.moduli() || self.n() != other.n() {
            return Err(Error::BasisMismatch("operands live in different bases".into()));
        }
        other.require(self.rep)
    }

    /// Reorders storage; free of multiplications.
    pub fn to_order(&self, order: Order) -> Self {
        let mut out = self.clone();
        if order != self.order {
            out.rows.iter_mut().for_each(|r| bit_reverse_permute(r));
            out.order = order;
        }
        out
    }

    /// Forward NTT on every limb. Result is `Eval`, natural order.
    pub fn to_eval(&self) -> Result<Self> {
        self.require(Rep::Coeff)?;
        let mut out = self.to_order(Order::BitReversed);
        for (row, m) in out.rows.iter_mut().zip(&self.basis) {
            ntt::ntt_dit_inplace(row, m)?;
        }
        out.rep = Rep::Eval;
        out.order = Order::Natural;
        Ok(out)
    }

    /// Inverse NTT on every limb. Result is `Coeff`, natural order.
    pub fn to_coeff(&self) -> Result<Self> {
        self.require(Rep::Eval)?;
        let mut out = self.to_order(Order::Natural);
        for (row, m) in out.rows.iter_mut().zip(&self.basis) {
            ntt::intt_dif_inplace(row, m)?;
            bit_reverse_permute(row);
        }
        out.rep = Rep::Coeff;
        out.order = Order::Natural;
        Ok(out)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&PrimeModulus, u64, u64) -> u64) -> Result<Self> {
        self.check_compatible(other)?;
        let other = other.to_order(self.order);
        let mut out = self.clone();
        for ((row, o), m) in out.rows.iter_mut().zip(&other.rows).zip(&self.basis) {
            for (a, &b) in row.iter_mut().zip(o) {
                *a = f(m, *a, b);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |m, a, b| m.add(a, b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |m, a, b| m.sub(a, b))
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for (row, m) in out.rows.iter_mut().zip(&self.basis) {
            row.iter_mut().for_each(|a| *a = m.neg(*a));
        }
        out
    }

    /// Pointwise product in the evaluation domain. Counts nothing; callers
    /// attribute the multiplications to the kernel they implement.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.require(Rep::Eval)?;
        self.zip_with(other, |m, a, b| m.mul(a, b))
    }

    /// Multiplies limb `i` by `scalars[i]`, recorded as [`Kernel::Scale`].
    pub fn scale_limbs(&self, scalars: &[u64]) -> Result<Self> {
        if scalars.len() != self.limbs() {
            return Err(Error::BasisMismatch("one scalar per limb required".into()));
        }
        let mut out = self.clone();
        for ((row, m), &s) in out.rows.iter_mut().zip(&self.basis).zip(scalars) {
            row.iter_mut().for_each(|a| *a = m.mul(*a, s));
        }
        counters::record(Kernel::Scale, (self.limbs() * self.n()) as u64);
        Ok(out)
    }

    /// Keeps the limbs at the given positions.
    pub fn select(&self, idx: &[usize]) -> Self {
        LimbMatrix {
            basis: idx.iter().map(|&i| self.basis[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            rep: self.rep,
            order: self.order,
        }
    }

    pub fn prefix(&self, count: usize) -> Self {
        self.select(&(0..count).collect::<Vec<_>>())
    }

    /// Stacks `other`'s limbs below this matrix's.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::BasisMismatch("ring degrees differ".into()));
        }
        other.require(self.rep)?;
        let other = other.to_order(self.order);
        let mut out = self.clone();
        out.basis.extend_from_slice(&other.basis);
        out.rows.extend(other.rows);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rns::find_ntt_primes;

    fn basis() -> Vec<PrimeModulus> {
        find_ntt_primes(30, 16, 2, &[])
            .unwrap()
            .into_iter()
            .map(|q| PrimeModulus::new(q, 16).unwrap())
            .collect()
    }

    #[test]
    fn eval_roundtrip_and_product() {
        let b = basis();
        let a = LimbMatrix::from_signed(&b, &(0..16).map(|i| i as i128 - 5).collect::<Vec<_>>());
        let x = LimbMatrix::from_signed(&b, &[0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let prod = a.to_eval().unwrap().hadamard(&x.to_eval().unwrap()).unwrap();
        let back = prod.to_coeff().unwrap();
        // multiplying by X shifts up and negates the wrapped coefficient
        let mut expect = vec![-(15i128 - 5)];
        expect.extend((0..15).map(|i| i as i128 - 5));
        assert_eq!(back, LimbMatrix::from_signed(&b, &expect));
        assert_eq!(a.to_eval().unwrap().to_coeff().unwrap(), a);
    }

    #[test]
    fn rep_mismatch_is_rejected() {
        let b = basis();
        let a = LimbMatrix::zero(&b, 16, Rep::Coeff);
        assert!(matches!(a.to_coeff(), Err(Error::RepMismatch { .. })));
        assert!(matches!(a.hadamard(&a), Err(Error::RepMismatch { .. })));
        let e = LimbMatrix::zero(&b, 16, Rep::Eval);
        assert!(a.add(&e).is_err());
    }

    #[test]
    fn order_is_an_involution() {
        let b = basis();
        let a = LimbMatrix::from_signed(&b, &(0..16).map(|i| i as i128).collect::<Vec<_>>());
        let r = a.to_order(Order::BitReversed);
        assert_eq!(r.rows[0][1], 8);
        assert_eq!(r.to_order(Order::Natural), a);
    }
}
