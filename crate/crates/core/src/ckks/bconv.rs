//! RNS basis conversion.
//!
//! For source basis `{q_i}` with product `Q` and `Q̂_i = Q/q_i`, the fast
//! conversion of `x` is `Σ_i [x_i·Q̂_i^-1]_{q_i} · Q̂_i mod q'_j`. It equals
//! `v + u·Q` for the CRT value `v` and some `0 ≤ u < α`. The exact variant
//! computes `u` and subtracts `u·Q`, giving `v mod q'_j`.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::poly::{LimbMatrix, Order, Rep};
use crate::rns::{basis_product, PrimeModulus};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseTable {
    pub from: Vec<PrimeModulus>,
    pub to: Vec<PrimeModulus>,
    /// `Q̂_i^-1 mod q_i`.
    pub prescale: Vec<u64>,
    /// `weights[i][j] = Q̂_i mod q'_j`.
    pub weights: Vec<Vec<u64>>,
    /// `Q mod q'_j`, used by the exact correction.
    pub q_mod_to: Vec<u64>,
}

impl BaseTable {
    pub fn new(from: &[PrimeModulus], to: &[PrimeModulus]) -> Result<Self> {
        if from.is_empty() {
            return Err(Error::BasisMismatch("empty source basis".into()));
        }
        let from_vals: Vec<u64> = from.iter().map(|m| m.value).collect();
        if to.iter().any(|m| from_vals.contains(&m.value)) {
            return Err(Error::BasisMismatch("source and target bases overlap".into()));
        }
        let q = basis_product(&from_vals);
        let mut prescale = Vec::with_capacity(from.len());
        let mut weights = Vec::with_capacity(from.len());
        for m in from {
            let q_hat = &q / m.value;
            let r = (&q_hat % m.value).to_u64().unwrap();
            prescale.push(m.inv(r)?);
            weights.push(
                to.iter()
                    .map(|t| (&q_hat % t.value).to_u64().unwrap())
                    .collect(),
            );
        }
        let q_mod_to = to.iter().map(|t| (&q % t.value).to_u64().unwrap()).collect();
        Ok(BaseTable {
            from: from.to_vec(),
            to: to.to_vec(),
            prescale,
            weights,
            q_mod_to,
        })
    }

    pub fn alpha(&self) -> usize {
        self.from.len()
    }

    pub fn beta(&self) -> usize {
        self.to.len()
    }

    fn check_input(&self, x: &LimbMatrix) -> Result<()> {
        x.require(Rep::Coeff)?;
        if x.moduli() != self.from.iter().map(|m| m.value).collect::<Vec<_>>() {
            return Err(Error::BasisMismatch("input basis differs from the table's source".into()));
        }
        Ok(())
    }
}

/// Reduces a residue of a (possibly larger) modulus into `m`'s range. Moduli
/// on a chain are within a factor of two of each other, so this is at most a
/// couple of subtractions; the general fallback keeps it total.
#[inline]
pub fn switch_modulus(v: u64, m: &PrimeModulus) -> u64 {
    if v < m.value {
        v
    } else if v < 2 * m.value {
        v - m.value
    } else {
        v % m.value
    }
}

/// Per-coefficient prescaled residues `t_i = [x_i·Q̂_i^-1]_{q_i}`.
fn prescaled(x: &LimbMatrix, table: &BaseTable) -> Vec<Vec<u64>> {
    x.rows
        .iter()
        .zip(&table.from)
        .zip(&table.prescale)
        .map(|((row, m), &s)| row.iter().map(|&v| m.mul(v, s)).collect())
        .collect()
}

fn accumulate(t: &[Vec<u64>], table: &BaseTable, n: usize) -> Vec<Vec<u64>> {
    table
        .to
        .iter()
        .enumerate()
        .map(|(j, mj)| {
            (0..n)
                .map(|k| {
                    t.iter().enumerate().fold(0u64, |acc, (i, ti)| {
                        mj.add(acc, mj.mul(switch_modulus(ti[k], mj), table.weights[i][j]))
                    })
                })
                .collect()
        })
        .collect()
}

/// Fast basis conversion, with the `u·Q` slack.
pub fn bconv_reference(x: &LimbMatrix, table: &BaseTable) -> Result<LimbMatrix> {
    table.check_input(x)?;
    let n = x.n();
    let x = x.to_order(Order::Natural);
    let t = prescaled(&x, table);
    let rows = accumulate(&t, table, n);
    let (a, b) = (table.alpha() as u64, table.beta() as u64);
    counters::record(Kernel::Bconv, n as u64 * a + n as u64 * a * b);
    Ok(LimbMatrix {
        basis: table.to.clone(),
        rows,
        rep: Rep::Coeff,
        order: Order::Natural,
    })
}

/// `floor(Σ_i t_i / q_i)`, i.e. the slack `u` of the fast conversion.
pub fn slack(t: &[u64], from: &[PrimeModulus]) -> u64 {
    const FRAC: u32 = 80;
    let mut acc: u128 = 0;
    for (&ti, m) in t.iter().zip(from) {
        acc += ((ti as u128) << FRAC) / m.value as u128;
    }
    let u = (acc >> FRAC) as u64;
    let frac = acc & ((1u128 << FRAC) - 1);
    // each term is truncated by less than one ulp
    let margin = t.len() as u128 + 1;
    if frac + margin < (1u128 << FRAC) {
        return u;
    }
    let q = basis_product(&from.iter().map(|m| m.value).collect::<Vec<_>>());
    let s: BigUint = t
        .iter()
        .zip(from)
        .map(|(&ti, m)| BigUint::from(ti) * (&q / m.value))
        .sum();
    (s / q).to_u64().unwrap()
}

/// Exact conversion: output is the CRT value `v ∈ [0, Q)` reduced mod each
/// target prime. Costs `N·β` extra multiplications for the correction.
pub fn bconv_exact(x: &LimbMatrix, table: &BaseTable) -> Result<LimbMatrix> {
    table.check_input(x)?;
    let n = x.n();
    let x = x.to_order(Order::Natural);
    let t = prescaled(&x, table);
    let mut rows = accumulate(&t, table, n);
    let mut col = vec![0u64; table.alpha()];
    for k in 0..n {
        for (c, ti) in col.iter_mut().zip(&t) {
            *c = ti[k];
        }
        let u = slack(&col, &table.from);
        for (j, mj) in table.to.iter().enumerate() {
            let corr = mj.mul(switch_modulus(u, mj), table.q_mod_to[j]);
            rows[j][k] = mj.sub(rows[j][k], corr);
        }
    }
    let (a, b) = (table.alpha() as u64, table.beta() as u64);
    counters::record(Kernel::Bconv, n as u64 * (a + a * b + b));
    Ok(LimbMatrix {
        basis: table.to.clone(),
        rows,
        rep: Rep::Coeff,
        order: Order::Natural,
    })
}

/// INTT on every source limb, basis conversion, NTT on every target limb.
pub fn mod_change(x: &LimbMatrix, table: &BaseTable, exact: bool) -> Result<LimbMatrix> {
    x.require(Rep::Eval)?;
    let coeff = x.to_coeff()?;
    let conv = if exact {
        bconv_exact(&coeff, table)?
    } else {
        bconv_reference(&coeff, table)?
    };
    conv.to_eval()
}
