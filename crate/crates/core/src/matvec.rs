//! Encrypted matrix-vector products: the diagonal method and baby-step
//! giant-step (BSGS) with no, single or double hoisting.
//!
//! A `w × w` matrix acts on a vector stored with period `w` across all
//! `N/2` slots, so a slot rotation by `k` realizes a cyclic shift mod `w`.
//! Output slot `i < w` then holds `Σ_k diag_k[i] · v[(i + k) mod w]`.
//!
//! Diagonals are encoded once on `q_0` with centered coefficients and
//! extended to any other basis by [`of_limb_extend`].

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ckks::{
    h_add, key_mult, mod_down, mod_up_all, p_mult, rescale, Ciphertext, KeySet, SwitchingKey,
};
use crate::ckks::keyswitch::lift_to_qp;
use crate::counters::{self, MultCounts};
use crate::error::{Error, Result};
use crate::poly::{apply_automorphism, encode, LimbMatrix, Rep};
use crate::rns::{ModulusChain, PrimeModulus};

/// `log2` of the scale diagonals are encoded at.
pub const DIAG_SCALE_BITS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalizedMatrix {
    pub width: usize,
    /// Nonzero diagonals only.
    pub diagonals: BTreeMap<usize, Vec<f64>>,
}

impl DiagonalizedMatrix {
    pub fn nonzero_count(&self) -> usize {
        self.diagonals.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let w = self.width;
        let mut m = vec![vec![0.0; w]; w];
        for (&k, d) in &self.diagonals {
            for i in 0..w {
                m[i][(i + k) % w] = d[i];
            }
        }
        m
    }

    /// Dense CSV, one matrix row per line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Malformed(e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Malformed(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        extract_diagonals(&rows)
    }

    /// `{"width": w, "diagonals": {"k": [..], ..}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: DiagonalizedMatrix = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        for (&k, d) in &m.diagonals {
            if k >= m.width || d.len() != m.width {
                return Err(Error::Malformed(format!("diagonal {k} does not fit width {}", m.width)));
            }
        }
        Ok(DiagonalizedMatrix {
            width: m.width,
            diagonals: m.diagonals.into_iter().filter(|(_, d)| d.iter().any(|&v| v != 0.0)).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Generalized diagonals `diag_k[i] = M[i][(i + k) mod w]`.
pub fn extract_diagonals(m: &[Vec<f64>]) -> Result<DiagonalizedMatrix> {
    let w = m.len();
    if w == 0 || m.iter().any(|r| r.len() != w) {
        return Err(Error::InvalidParameter("matrix must be square and nonempty".into()));
    }
    let diagonals = (0..w)
        .map(|k| (k, (0..w).map(|i| m[i][(i + k) % w]).collect::<Vec<f64>>()))
        .filter(|(_, d)| d.iter().any(|&v| v != 0.0))
        .collect();
    Ok(DiagonalizedMatrix { width: w, diagonals })
}

pub fn cleartext_matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `v` repeated to fill `slots` slots.
pub fn replicate(v: &[f64], slots: usize) -> Vec<Complex64> {
    (0..slots).map(|j| Complex64::new(v[j % v.len()], 0.0)).collect()
}

/// Cleartext left rotation by `r` of a length-`w` vector.
pub fn rotate(v: &[f64], r: i64) -> Vec<f64> {
    let w = v.len() as i64;
    (0..w).map(|i| v[(i + r).rem_euclid(w) as usize]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HoistingMode {
    NonHoisted,
    SingleHoisted,
    DoubleHoisted,
}

impl HoistingMode {
    pub const ALL: [HoistingMode; 3] = [
        HoistingMode::NonHoisted,
        HoistingMode::SingleHoisted,
        HoistingMode::DoubleHoisted,
    ];

    pub fn short(self) -> &'static str {
        match self {
            HoistingMode::NonHoisted => "NH",
            HoistingMode::SingleHoisted => "SH",
            HoistingMode::DoubleHoisted => "DH",
        }
    }
}

impl std::str::FromStr for HoistingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NH" | "NONHOISTED" => Ok(HoistingMode::NonHoisted),
            "SH" | "SINGLEHOISTED" => Ok(HoistingMode::SingleHoisted),
            "DH" | "DOUBLEHOISTED" => Ok(HoistingMode::DoubleHoisted),
            _ => Err(Error::Config(format!("unknown hoisting mode {s:?}"))),
        }
    }
}

/// Diagonal `n1·j + i` is handled by baby step `i` inside giant step `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BsgsPlan {
    pub n1: usize,
    pub n2: usize,
}

impl BsgsPlan {
    pub fn new(n1: usize, n2: usize, m: &DiagonalizedMatrix) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParameter("n1 and n2 must be positive".into()));
        }
        if let Some((&k, _)) = m.diagonals.iter().next_back() {
            if k >= n1 * n2 {
                return Err(Error::InvalidParameter(format!("diagonal {k} lies outside {n1}×{n2}")));
            }
        }
        Ok(BsgsPlan { n1, n2 })
    }

    /// Smallest `n2` covering every nonzero diagonal for the given `n1`.
    pub fn with_baby_steps(n1: usize, m: &DiagonalizedMatrix) -> Result<Self> {
        let span = m.diagonals.keys().next_back().map_or(1, |&k| k + 1);
        Self::new(n1, span.div_ceil(n1.max(1)).max(1), m)
    }

    pub fn baby_steps(&self) -> Vec<i64> {
        (1..self.n1 as i64).collect()
    }

    pub fn giant_steps(&self) -> Vec<i64> {
        (1..self.n2 as i64).map(|j| j * self.n1 as i64).collect()
    }

    pub fn rotation_steps(&self) -> Vec<i64> {
        let mut s = self.baby_steps();
        s.extend(self.giant_steps());
        s.sort_unstable();
        s.dedup();
        s
    }

    /// `Rot_{-n1·j}(diag_{n1·j + i})`, or `None` for a zero diagonal.
    pub fn stored_diagonal(&self, m: &DiagonalizedMatrix, j: usize, i: usize) -> Option<Vec<f64>> {
        m.diagonals
            .get(&(self.n1 * j + i))
            .map(|d| rotate(d, -((self.n1 * j) as i64)))
    }
}

/// Event counts of one matrix-vector product.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatvecStats {
    /// Rotation slots including the trivial rotation by 0.
    pub rotation_slots: usize,
    pub nontrivial_rotations: usize,
    /// KeyMult invocations.
    pub key_switches: usize,
    /// Decompose + ModUp of one polynomial.
    pub decompositions: usize,
    /// ModDown of one polynomial.
    pub mod_downs: usize,
    pub diag_products: usize,
    pub mults: MultCounts,
}

/// Encodes a length-`w` diagonal, repeated over all slots, on `q_0` alone.
pub fn encode_diagonal_q0(values: &[f64], n: usize, q0: &PrimeModulus) -> Result<LimbMatrix> {
    encode(&replicate(values, n / 2), DIAG_SCALE_BITS, n, std::slice::from_ref(q0))
}

/// Rebuilds a diagonal on `basis` (Eval, natural order) from its `q_0`
/// coefficient limb, reading every residue as a centered integer.
pub fn of_limb_extend(diag_q0: &LimbMatrix, basis: &[PrimeModulus]) -> Result<LimbMatrix> {
    diag_q0.require(Rep::Coeff)?;
    if diag_q0.limbs() != 1 {
        return Err(Error::InvalidParameter("expected a single q0 limb".into()));
    }
    let q0 = diag_q0.basis[0];
    let bound = basis.iter().map(|m| m.value).chain([q0.value]).min().unwrap_or(0) / 2;
    let coeffs = diag_q0.to_order(crate::poly::Order::Natural).rows[0]
        .iter()
        .map(|&v| {
            let c = q0.centered(v) as i128;
            if c.unsigned_abs() >= bound as u128 {
                Err(Error::OfLimbBound { value: c, bound })
            } else {
                Ok(c)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LimbMatrix::from_signed(basis, &coeffs).to_eval()
}

fn check_input(ct: &Ciphertext, m: &DiagonalizedMatrix) -> Result<()> {
    let slots = ct.n() / 2;
    if m.width == 0 || slots % m.width != 0 {
        return Err(Error::InvalidParameter(format!("width {} does not divide {slots} slots", m.width)));
    }
    if ct.level() == 0 {
        return Err(Error::LevelMismatch("matrix product needs a level to rescale into".into()));
    }
    ct.c0.require(Rep::Eval)
}

struct Encoder<'a> {
    chain: &'a ModulusChain,
    n: usize,
    cache: BTreeMap<(usize, usize, usize), LimbMatrix>,
}

impl Encoder<'_> {
    fn diag(&mut self, key: (usize, usize), values: &[f64], basis: &[PrimeModulus]) -> Result<LimbMatrix> {
        let k = (key.0, key.1, basis.len());
        if let Some(d) = self.cache.get(&k) {
            return Ok(d.clone());
        }
        let q0 = encode_diagonal_q0(values, self.n, &self.chain.q_limbs[0])?;
        let d = of_limb_extend(&q0, basis)?;
        self.cache.insert(k, d.clone());
        Ok(d)
    }
}

fn accumulate(acc: &mut Option<Ciphertext>, term: Ciphertext) -> Result<()> {
    *acc = Some(match acc.take() {
        None => term,
        Some(a) => h_add(&a, &term)?,
    });
    Ok(())
}

fn zero_like(ct: &Ciphertext) -> Ciphertext {
    let z = LimbMatrix::zero(&ct.c0.basis, ct.n(), Rep::Eval);
    Ciphertext {
        c0: z.clone(),
        c1: z,
        log_scale: ct.log_scale + DIAG_SCALE_BITS as f64,
    }
}

fn full_rotation(ct: &Ciphertext, r: i64, keys: &KeySet, chain: &ModulusChain, st: &mut MatvecStats) -> Result<Ciphertext> {
    st.rotation_slots += 1;
    if r.rem_euclid(ct.n() as i64 / 2) == 0 {
        return Ok(ct.clone());
    }
    let key = keys.rotation(r)?;
    st.nontrivial_rotations += 1;
    st.key_switches += 1;
    st.decompositions += 1;
    st.mod_downs += 2;
    let c1 = apply_automorphism(&ct.c1, r)?;
    let ups = mod_up_all(&c1, chain)?;
    let (h0, h1) = key_mult(&ups, key, ct.level(), chain)?;
    Ok(Ciphertext {
        c0: apply_automorphism(&ct.c0, r)?.add(&mod_down(&h0, chain)?)?,
        c1: mod_down(&h1, chain)?,
        log_scale: ct.log_scale,
    })
}

/// Rotations sharing one ModUp of `c1`. With `keep_qp` the results stay on
/// `Q·P` as `(P·φ(c0) + h0, h1)`.
fn hoisted_rotations(
    ct: &Ciphertext,
    steps: &[i64],
    keys: &KeySet,
    chain: &ModulusChain,
    keep_qp: bool,
    st: &mut MatvecStats,
) -> Result<Vec<Ciphertext>> {
    let level = ct.level();
    let keys_for: Vec<Option<&SwitchingKey>> = steps
        .iter()
        .map(|&r| {
            if r.rem_euclid(ct.n() as i64 / 2) == 0 {
                Ok(None)
            } else {
                keys.rotation(r).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let ups = if keys_for.iter().any(Option::is_some) {
        st.decompositions += 1;
        Some(mod_up_all(&ct.c1, chain)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(steps.len());
    for (&r, key) in steps.iter().zip(keys_for) {
        st.rotation_slots += 1;
        let Some(key) = key else {
            out.push(if keep_qp {
                Ciphertext {
                    c0: lift_to_qp(&ct.c0, chain)?,
                    c1: lift_to_qp(&ct.c1, chain)?,
                    log_scale: ct.log_scale,
                }
            } else {
                ct.clone()
            });
            continue;
        };
        st.nontrivial_rotations += 1;
        st.key_switches += 1;
        let digits = ups
            .as_ref()
            .expect("decomposed above")
            .iter()
            .map(|d| apply_automorphism(d, r))
            .collect::<Result<Vec<_>>>()?;
        let (h0, h1) = key_mult(&digits, key, level, chain)?;
        let c0 = apply_automorphism(&ct.c0, r)?;
        out.push(if keep_qp {
            Ciphertext {
                c0: lift_to_qp(&c0, chain)?.add(&h0)?,
                c1: h1,
                log_scale: ct.log_scale,
            }
        } else {
            st.mod_downs += 2;
            Ciphertext {
                c0: c0.add(&mod_down(&h0, chain)?)?,
                c1: mod_down(&h1, chain)?,
                log_scale: ct.log_scale,
            }
        });
    }
    Ok(out)
}

/// `Σ_k diag_k ⊙ Rot_k(ct)`, rescaled once.
pub fn matvec_diagonal(
    ct: &Ciphertext,
    m: &DiagonalizedMatrix,
    keys: &KeySet,
    chain: &ModulusChain,
) -> Result<(Ciphertext, MatvecStats)> {
    check_input(ct, m)?;
    let mut st = MatvecStats::default();
    let (out, mults) = counters::measure(|| -> Result<Ciphertext> {
        let mut enc = Encoder { chain, n: ct.n(), cache: BTreeMap::new() };
        let mut acc = None;
        for (&k, d) in &m.diagonals {
            let rotated = full_rotation(ct, k as i64, keys, chain, &mut st)?;
            let pt = enc.diag((k, 0), d, &ct.c0.basis)?;
            st.diag_products += 1;
            accumulate(&mut acc, p_mult(&rotated, &pt, DIAG_SCALE_BITS as f64)?)?;
        }
        rescale(&acc.unwrap_or_else(|| zero_like(ct)))
    });
    st.mults = mults;
    Ok((out?, st))
}

/// BSGS product. Double hoisting with a single baby step falls back to
/// single hoisting.
pub fn matvec_bsgs(
    ct: &Ciphertext,
    m: &DiagonalizedMatrix,
    plan: &BsgsPlan,
    mode: HoistingMode,
    keys: &KeySet,
    chain: &ModulusChain,
) -> Result<(Ciphertext, MatvecStats)> {
    check_input(ct, m)?;
    BsgsPlan::new(plan.n1, plan.n2, m)?;
    let mut st = MatvecStats::default();
    let (out, mults) = counters::measure(|| match mode {
        HoistingMode::DoubleHoisted if plan.n1 > 1 => bsgs_double(ct, m, plan, keys, chain, &mut st),
        HoistingMode::NonHoisted => bsgs_single(ct, m, plan, keys, chain, false, &mut st),
        _ => bsgs_single(ct, m, plan, keys, chain, true, &mut st),
    });
    st.mults = mults;
    Ok((out?, st))
}

fn bsgs_single(
    ct: &Ciphertext,
    m: &DiagonalizedMatrix,
    plan: &BsgsPlan,
    keys: &KeySet,
    chain: &ModulusChain,
    hoist: bool,
    st: &mut MatvecStats,
) -> Result<Ciphertext> {
    let steps: Vec<i64> = (0..plan.n1 as i64).collect();
    let baby = if hoist {
        hoisted_rotations(ct, &steps, keys, chain, false, st)?
    } else {
        steps
            .iter()
            .map(|&r| full_rotation(ct, r, keys, chain, st))
            .collect::<Result<Vec<_>>>()?
    };
    let mut enc = Encoder { chain, n: ct.n(), cache: BTreeMap::new() };
    let mut acc = None;
    for j in 0..plan.n2 {
        let mut inner = None;
        for (i, b) in baby.iter().enumerate() {
            if let Some(d) = plan.stored_diagonal(m, j, i) {
                let pt = enc.diag((j, i), &d, &ct.c0.basis)?;
                st.diag_products += 1;
                accumulate(&mut inner, p_mult(b, &pt, DIAG_SCALE_BITS as f64)?)?;
            }
        }
        if let Some(inner) = inner {
            accumulate(&mut acc, full_rotation(&inner, (plan.n1 * j) as i64, keys, chain, st)?)?;
        } else {
            // an empty giant step still occupies its rotation slot
            st.rotation_slots += 1;
        }
    }
    rescale(&acc.unwrap_or_else(|| zero_like(ct)))
}

fn bsgs_double(
    ct: &Ciphertext,
    m: &DiagonalizedMatrix,
    plan: &BsgsPlan,
    keys: &KeySet,
    chain: &ModulusChain,
    st: &mut MatvecStats,
) -> Result<Ciphertext> {
    let level = ct.level();
    let steps: Vec<i64> = (0..plan.n1 as i64).collect();
    let baby = hoisted_rotations(ct, &steps, keys, chain, true, st)?;
    let qp = chain.qp_basis(level);
    let mut enc = Encoder { chain, n: ct.n(), cache: BTreeMap::new() };
    let mut acc: Option<Ciphertext> = None;
    for j in 0..plan.n2 {
        let mut inner = None;
        for (i, b) in baby.iter().enumerate() {
            if let Some(d) = plan.stored_diagonal(m, j, i) {
                let pt = enc.diag((j, i), &d, &qp)?;
                st.diag_products += 1;
                accumulate(&mut inner, p_mult(b, &pt, DIAG_SCALE_BITS as f64)?)?;
            }
        }
        st.rotation_slots += 1;
        let Some(inner) = inner else { continue };
        if j == 0 {
            accumulate(&mut acc, inner)?;
            continue;
        }
        let r = (plan.n1 * j) as i64;
        let key = keys.rotation(r)?;
        st.nontrivial_rotations += 1;
        st.key_switches += 1;
        st.mod_downs += 1;
        st.decompositions += 1;
        let c1 = apply_automorphism(&mod_down(&inner.c1, chain)?, r)?;
        let (h0, h1) = key_mult(&mod_up_all(&c1, chain)?, key, level, chain)?;
        accumulate(
            &mut acc,
            Ciphertext {
                c0: apply_automorphism(&inner.c0, r)?.add(&h0)?,
                c1: h1,
                log_scale: inner.log_scale,
            },
        )?;
    }
    let out = match acc {
        None => zero_like(ct),
        Some(a) => {
            st.mod_downs += 2;
            Ciphertext {
                c0: mod_down(&a.c0, chain)?,
                c1: mod_down(&a.c1, chain)?,
                log_scale: a.log_scale,
            }
        }
    };
    rescale(&out)
}
