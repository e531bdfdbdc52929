//! Closed-form operation counts, DRAM traffic, roofline coordinates,
//! storage figures and the amortized per-slot metrics.
//!
//! Every count mirrors what the functional kernels record, so at desk scale
//! the two agree exactly. At full scale `twiddle_gen` additionally charges
//! one OF-Twiddle multiplication per butterfly.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::counters::{Kernel, MultCounts};
use crate::error::{Error, Result};
use crate::hw::mdc::{mdc_buffer_bytes, twiddle_storage};
use crate::matvec::{BsgsPlan, HoistingMode};
use crate::params::ChainShape;

/// Bytes per stored 40-bit word.
pub const WORD_BYTES: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub shape: ChainShape,
    pub twiddle_gen: bool,
}

fn one(k: Kernel, v: u64) -> MultCounts {
    MultCounts::default().with(k, v)
}

impl Counter {
    pub fn new(shape: ChainShape) -> Self {
        Counter { shape, twiddle_gen: false }
    }

    pub fn with_twiddle_gen(self, on: bool) -> Self {
        Counter { twiddle_gen: on, ..self }
    }

    fn n(&self) -> u64 {
        self.shape.n
    }

    fn butterflies(&self, limbs: u64) -> u64 {
        let n = self.n();
        let b = limbs * (n / 2) * n.trailing_zeros() as u64;
        if self.twiddle_gen {
            2 * b
        } else {
            b
        }
    }

    pub fn ntt(&self, limbs: u64) -> MultCounts {
        one(Kernel::Ntt, self.butterflies(limbs))
    }

    pub fn intt(&self, limbs: u64) -> MultCounts {
        one(Kernel::Intt, self.butterflies(limbs) + limbs * self.n())
    }

    pub fn bconv_fast(&self, alpha: u64, beta: u64) -> MultCounts {
        one(Kernel::Bconv, self.n() * (alpha + alpha * beta))
    }

    pub fn bconv_exact(&self, alpha: u64, beta: u64) -> MultCounts {
        one(Kernel::Bconv, self.n() * (alpha + alpha * beta + beta))
    }

    pub fn scale(&self, limbs: u64) -> MultCounts {
        one(Kernel::Scale, limbs * self.n())
    }

    pub fn digit_sizes(&self, level: u64) -> Vec<u64> {
        let a = self.shape.alpha;
        (0..self.shape.dnum(level)).map(|d| a.min(level + 1 - d * a)).collect()
    }

    /// ModUp of one digit of `a` limbs to `ℓ + 1 + k` limbs.
    pub fn mod_up_digit(&self, level: u64, a: u64) -> MultCounts {
        let beta = level + 1 + self.shape.k - a;
        self.intt(a) + self.bconv_fast(a, beta) + self.ntt(beta)
    }

    /// Decompose and ModUp of one polynomial.
    pub fn mod_up(&self, level: u64) -> MultCounts {
        self.digit_sizes(level)
            .into_iter()
            .fold(MultCounts::default(), |acc, a| acc + self.mod_up_digit(level, a))
    }

    /// Exact division of `keep + tail` limbs by the product of `tail`.
    fn floor_divide(&self, keep: u64, tail: u64) -> MultCounts {
        let conv = if tail > 1 { self.bconv_exact(tail, keep) } else { MultCounts::default() };
        self.intt(tail) + conv + self.ntt(keep) + self.scale(keep)
    }

    pub fn mod_down(&self, level: u64) -> MultCounts {
        self.floor_divide(level + 1, self.shape.k)
    }

    pub fn rescale(&self, level: u64) -> MultCounts {
        self.floor_divide(level, 1)
    }

    pub fn fused_moddown_rescale(&self, level: u64) -> MultCounts {
        self.floor_divide(level, self.shape.k + 1)
    }

    pub fn key_mult(&self, level: u64) -> MultCounts {
        one(Kernel::KeyMult, 2 * self.shape.dnum(level) * (level + 1 + self.shape.k) * self.n())
    }

    pub fn key_switch(&self, level: u64) -> MultCounts {
        self.mod_up(level) + self.key_mult(level) + self.mod_down(level).scaled(2)
    }

    pub fn diag_mult(&self, limbs: u64) -> MultCounts {
        one(Kernel::DiagMult, 2 * limbs * self.n())
    }

    /// Regenerating a diagonal on `limbs` limbs from its `q_0` limb.
    pub fn of_limb(&self, limbs: u64) -> MultCounts {
        self.ntt(limbs)
    }

    pub fn lift(&self, level: u64) -> MultCounts {
        self.scale(level + 1)
    }

    pub fn h_mult(&self, level: u64, fused: bool) -> MultCounts {
        let tensor = one(Kernel::Tensor, 4 * (level + 1) * self.n());
        let relin = self.mod_up(level) + self.key_mult(level);
        let tail = if fused {
            self.lift(level).scaled(2) + self.fused_moddown_rescale(level).scaled(2)
        } else {
            self.mod_down(level).scaled(2) + self.rescale(level).scaled(2)
        };
        tensor + relin + tail
    }

    pub fn matvec_diagonal(&self, level: u64, diags: &BTreeSet<usize>) -> MultCounts {
        let limbs = level + 1;
        let per_diag = self.of_limb(limbs) + self.diag_mult(limbs);
        let rotations = diags.iter().filter(|&&k| k != 0).count() as u64;
        per_diag.scaled(diags.len() as u64) + self.key_switch(level).scaled(rotations) + self.rescale(level).scaled(2)
    }

    /// Counts of a BSGS product, assuming every rotation step is
    /// nontrivial modulo the slot count.
    pub fn matvec_bsgs(&self, level: u64, plan: &BsgsPlan, diags: &BTreeSet<usize>, mode: HoistingMode) -> MultCounts {
        let (n1, n2) = (plan.n1 as u64, plan.n2 as u64);
        let limbs = level + 1;
        let qp = limbs + self.shape.k;
        let present = |j: u64, i: u64| diags.contains(&((n1 * j + i) as usize));
        let used = (0..n2).flat_map(|j| (0..n1).map(move |i| (j, i))).filter(|&(j, i)| present(j, i)).count() as u64;
        let giants = (1..n2).filter(|&j| (0..n1).any(|i| present(j, i))).count() as u64;
        let final_rescale = self.rescale(level).scaled(2);
        let babies = n1 - 1;
        let double = mode == HoistingMode::DoubleHoisted && n1 > 1;
        if !double {
            let baby = match mode {
                HoistingMode::NonHoisted => self.key_switch(level).scaled(babies),
                _ if babies == 0 => MultCounts::default(),
                _ => self.mod_up(level) + (self.key_mult(level) + self.mod_down(level).scaled(2)).scaled(babies),
            };
            let diag = (self.of_limb(limbs) + self.diag_mult(limbs)).scaled(used);
            return baby + diag + self.key_switch(level).scaled(giants) + final_rescale;
        }
        let baby = self.mod_up(level) + self.key_mult(level).scaled(babies) + self.lift(level).scaled(2 + babies);
        let diag = (self.of_limb(qp) + self.diag_mult(qp)).scaled(used);
        let giant = (self.mod_down(level) + self.mod_up(level) + self.key_mult(level)).scaled(giants);
        let any = used > 0;
        let tail = if any { self.mod_down(level).scaled(2) } else { MultCounts::default() };
        baby + diag + giant + tail + final_rescale
    }
}

/// Bytes of one switching key at `level` as streamed from DRAM: only the
/// `b` halves travel, the `a` halves are regenerated on chip.
pub fn key_bytes(shape: &ChainShape, level: u64) -> u64 {
    shape.dnum(level) * 2 * (level + 1 + shape.k) * shape.n * WORD_BYTES / 2
}

/// DRAM bytes by class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramBytes {
    pub keys: u64,
    pub diagonals: u64,
    pub ct_io: u64,
}

impl DramBytes {
    pub fn total(&self) -> u64 {
        self.keys + self.diagonals + self.ct_io
    }
}

impl std::ops::Add for DramBytes {
    type Output = DramBytes;
    fn add(self, o: DramBytes) -> DramBytes {
        DramBytes {
            keys: self.keys + o.keys,
            diagonals: self.diagonals + o.diagonals,
            ct_io: self.ct_io + o.ct_io,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub mults: MultCounts,
    pub dram: DramBytes,
}

impl OpCounts {
    /// Modular multiplications per byte of DRAM traffic.
    pub fn intensity(&self) -> f64 {
        if self.dram.total() == 0 {
            f64::INFINITY
        } else {
            self.mults.total() as f64 / self.dram.total() as f64
        }
    }
}

impl std::ops::Add for OpCounts {
    type Output = OpCounts;
    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            mults: self.mults + o.mults,
            dram: self.dram + o.dram,
        }
    }
}

/// DRAM traffic of a BSGS product: one key per nontrivial rotation, one
/// `q_0` limb per diagonal, the input and output ciphertexts.
pub fn matvec_dram(shape: &ChainShape, level: u64, plan: &BsgsPlan, diags: &BTreeSet<usize>) -> DramBytes {
    let (n1, n2) = (plan.n1, plan.n2);
    let giants = (1..n2).filter(|&j| (0..n1).any(|i| diags.contains(&(n1 * j + i)))).count() as u64;
    let rotations = (n1 as u64 - 1) + giants;
    DramBytes {
        keys: rotations * key_bytes(shape, level),
        diagonals: diags.len() as u64 * shape.n * WORD_BYTES,
        ct_io: 2 * (2 * level + 1) * shape.n * WORD_BYTES,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RooflinePoint {
    pub intensity: f64,
    pub achieved: f64,
    pub peak: f64,
    pub bw_bound: f64,
    pub utilization: f64,
}

/// Roofline coordinates of a run of `cycles` cycles.
pub fn roofline(counts: &OpCounts, multipliers: u64, clock_hz: f64, bandwidth: f64, cycles: u64) -> Result<RooflinePoint> {
    if cycles == 0 || counts.mults.total() == 0 {
        return Err(Error::InvalidParameter("roofline needs work and time".into()));
    }
    let seconds = cycles as f64 / clock_hz;
    let peak = multipliers as f64 * clock_hz;
    let intensity = counts.intensity();
    let bw_bound = intensity * bandwidth;
    let achieved = counts.mults.total() as f64 / seconds;
    let point = RooflinePoint {
        intensity,
        achieved,
        peak,
        bw_bound,
        utilization: achieved / peak,
    };
    // a schedule can never beat either roof; small slack covers rounding
    let roof = peak.min(bw_bound) * (1.0 + 1e-9);
    if achieved > roof {
        return Err(Error::InvalidParameter(format!(
            "achieved {achieved:.3e} exceeds the roof {roof:.3e}"
        )));
    }
    Ok(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageReport {
    pub twiddle_full_bytes: f64,
    pub twiddle_decomposed_bytes: f64,
    pub mdc_buffer_bytes_per_instance: f64,
    pub mdc_buffer_bytes: f64,
}

pub fn storage_report(
    n: usize,
    p: usize,
    moduli: usize,
    interleave_factor: usize,
    word_bits: u32,
    sharing_groups: usize,
    instances: usize,
) -> StorageReport {
    let tw = twiddle_storage(n, moduli, word_bits, sharing_groups);
    let per = mdc_buffer_bytes(n, p, interleave_factor, word_bits);
    StorageReport {
        twiddle_full_bytes: tw.full_bytes,
        twiddle_decomposed_bytes: tw.decomposed_bytes,
        mdc_buffer_bytes_per_instance: per,
        mdc_buffer_bytes: per * instances as f64,
    }
}

/// Exact decimal literal as a rational, e.g. `"2.70"`.
pub fn decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::Malformed(format!("not a decimal number: {s:?}"));
    let s = s.trim();
    let (neg, body) = s.strip_prefix('-').map_or((false, s), |r| (true, r));
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = BigInt::from(10u32).pow(frac.len() as u32);
    let v = BigRational::new(num, den);
    Ok(if neg { -v } else { v })
}

/// `(T_boot + Σ_ℓ T(ℓ)) / (L − L_boot) · 2/N`, with `per_level[ℓ]` for
/// `ℓ = 0 ..= L − L_boot`. All quantities share one time unit.
pub fn amortized_per_slot(
    t_boot: &BigRational,
    per_level: &[BigRational],
    levels_after_boot: usize,
    n: u64,
) -> Result<BigRational> {
    if levels_after_boot == 0 || n == 0 {
        return Err(Error::InvalidParameter("need at least one level and a ring degree".into()));
    }
    if per_level.len() != levels_after_boot + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} per-level latencies for levels 0..={levels_after_boot}",
            per_level.len()
        )));
    }
    let sum = per_level.iter().fold(BigRational::zero(), |acc, t| acc + t);
    Ok((t_boot + sum) / BigRational::from_integer(BigInt::from(levels_after_boot)) * BigRational::new(2.into(), n.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmortizedMetrics {
    pub mult_per_slot: f64,
    pub matvec_per_slot: f64,
}

/// Both per-slot metrics from one bootstrap latency and two per-level
/// latency series.
pub fn amortized_metrics(
    t_boot: &BigRational,
    mult_per_level: &[BigRational],
    matvec_per_level: &[BigRational],
    levels_after_boot: usize,
    n: u64,
) -> Result<AmortizedMetrics> {
    let f = |v: BigRational| v.to_f64().unwrap_or(f64::NAN);
    Ok(AmortizedMetrics {
        mult_per_slot: f(amortized_per_slot(t_boot, mult_per_level, levels_after_boot, n)?),
        matvec_per_slot: f(amortized_per_slot(t_boot, matvec_per_level, levels_after_boot, n)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckks::{
        fused_moddown_rescale, h_mult, key_mult, key_switch, keygen, lift_to_qp, mod_down, mod_up, mod_up_all,
        rescale_poly, encrypt, bconv_exact, bconv_reference, BaseTable,
    };
    use crate::counters::measure;
    use crate::matvec::{extract_diagonals, matvec_bsgs, matvec_diagonal, replicate};
    use crate::poly::{LimbMatrix, Rep};
    use crate::rns::{generate_chain, ChainParams, ModulusChain};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize, levels: usize, alpha: usize) -> ModulusChain {
        generate_chain(&ChainParams {
            n_max: n,
            q0_bits: vec![40],
            qi_bits: 32,
            level_count: levels,
            alpha,
            p_bits: 40,
            scale_bits: 32,
            log_qp_cap: None,
        })
        .unwrap()
    }

    fn shape(c: &ModulusChain) -> Counter {
        Counter::new(ChainShape {
            n: c.n_max as u64,
            q_limbs: c.q_limbs.len() as u64,
            alpha: c.alpha as u64,
            k: c.p_limbs.len() as u64,
        })
    }

    fn random(basis: &[crate::rns::PrimeModulus], n: usize, rng: &mut ChaCha8Rng) -> LimbMatrix {
        let rows = basis.iter().map(|m| (0..n).map(|_| rng.gen_range(0..m.value)).collect()).collect();
        LimbMatrix::from_rows(basis, rows, Rep::Eval).unwrap()
    }

    #[test]
    fn ntt_formula() {
        let c = Counter::new(ChainShape { n: 16, q_limbs: 1, alpha: 1, k: 1 });
        assert_eq!(c.ntt(1).total(), 32);
        assert_eq!(c.with_twiddle_gen(true).ntt(1).total(), 64);
        assert_eq!(c.intt(2).total(), 2 * (32 + 16));
    }

    #[test]
    fn kernels_match_instrumented_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, alpha) in [(16usize, 2usize), (64, 3), (256, 1)] {
            let c = chain(n, 5, alpha);
            let m = shape(&c);
            for level in [0usize, 2, 5] {
                let l = level as u64;
                let x = random(c.q_basis(level), n, &mut rng);
                let (ups, got) = measure(|| mod_up_all(&x, &c).unwrap());
                assert_eq!(got, m.mod_up(l), "modup n={n} level={level}");
                let d0 = crate::ckks::decompose(&x, alpha)[0].clone();
                let (_, got) = measure(|| mod_up(&d0, 0, level, &c).unwrap());
                assert_eq!(got, m.mod_up_digit(l, d0.limbs() as u64));

                let y = random(&c.qp_basis(level), n, &mut rng);
                let (_, got) = measure(|| mod_down(&y, &c).unwrap());
                assert_eq!(got, m.mod_down(l), "moddown n={n} level={level}");
                if level > 0 {
                    let (_, got) = measure(|| rescale_poly(&x).unwrap());
                    assert_eq!(got, m.rescale(l));
                    let (_, got) = measure(|| fused_moddown_rescale(&y, &c).unwrap());
                    assert_eq!(got, m.fused_moddown_rescale(l));
                }
                let (_, got) = measure(|| lift_to_qp(&x, &c).unwrap());
                assert_eq!(got, m.lift(l));

                let keys = keygen(&c, n, 4, 2, &[]).unwrap();
                let (_, got) = measure(|| key_mult(&ups, &keys.relin, level, &c).unwrap());
                assert_eq!(got, m.key_mult(l));
                let (_, got) = measure(|| key_switch(&x, &keys.relin, &c).unwrap());
                assert_eq!(got, m.key_switch(l));
            }
        }
    }

    #[test]
    fn bconv_and_ntt_match_instrumented_runs() {
        let c = chain(64, 8, 2);
        let m = shape(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let from = &c.q_limbs[..3];
        let to = &c.q_limbs[3..8];
        let table = BaseTable::new(from, to).unwrap();
        let x = random(from, 64, &mut rng).to_coeff().unwrap();
        assert_eq!(measure(|| bconv_reference(&x, &table).unwrap()).1, m.bconv_fast(3, 5));
        assert_eq!(measure(|| bconv_exact(&x, &table).unwrap()).1, m.bconv_exact(3, 5));
        assert_eq!(measure(|| x.to_eval().unwrap()).1, m.ntt(3));
        let e = random(from, 64, &mut rng);
        assert_eq!(measure(|| e.to_coeff().unwrap()).1, m.intt(3));
    }

    #[test]
    fn multiplication_matches_instrumented_run() {
        let c = chain(32, 4, 2);
        let m = shape(&c);
        let keys = keygen(&c, 32, 4, 3, &[]).unwrap();
        let z = vec![Complex64::new(0.5, 0.0); 16];
        let a = encrypt(&z, 4, &c, &keys.secret, 1).unwrap();
        for fused in [false, true] {
            let (_, got) = measure(|| h_mult(&a, &a, &keys.relin, &c, fused).unwrap());
            assert_eq!(got, m.h_mult(4, fused));
        }
    }

    #[test]
    fn matvec_counts_match_instrumented_runs() {
        let n = 32;
        let c = chain(n, 3, 2);
        let m = shape(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let keys = keygen(&c, n, 4, 5, &(1..16).collect::<Vec<_>>()).unwrap();
        let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ct = encrypt(&replicate(&v, 16), 3, &c, &keys.secret, 6).unwrap();
        for density in [0.3, 1.0] {
            let mat: Vec<Vec<f64>> = (0..16)
                .map(|_| (0..16).map(|_| if rng.gen_bool(density) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect())
                .collect();
            let d = extract_diagonals(&mat).unwrap();
            let set: BTreeSet<usize> = d.diagonals.keys().copied().collect();
            let (_, st) = matvec_diagonal(&ct, &d, &keys, &c).unwrap();
            assert_eq!(st.mults, m.matvec_diagonal(3, &set));
            for (n1, n2) in [(4, 4), (2, 8), (16, 1), (1, 16)] {
                let plan = BsgsPlan::new(n1, n2, &d).unwrap();
                for mode in HoistingMode::ALL {
                    let (_, st) = matvec_bsgs(&ct, &d, &plan, mode, &keys, &c).unwrap();
                    assert_eq!(st.mults, m.matvec_bsgs(3, &plan, &set, mode), "{mode:?} {n1}x{n2}");
                }
            }
        }
    }

    #[test]
    fn roofline_bounds() {
        let counts = OpCounts {
            mults: MultCounts::default().with(Kernel::Ntt, 1_000_000),
            dram: DramBytes { keys: 1000, diagonals: 0, ct_io: 0 },
        };
        // compute bound: intensity 1000 mults/byte, tiny peak
        let p = roofline(&counts, 10, 1e9, 1e12, 100_000).unwrap();
        assert!(p.utilization > 0.99 && p.utilization <= 1.0 + 1e-9);
        // bandwidth bound: 1000 bytes at 1 byte/ns take 1000 cycles
        let p = roofline(&counts, 1 << 20, 1e9, 1e9, 1000).unwrap();
        assert!((p.achieved - p.bw_bound).abs() / p.bw_bound < 1e-9);
        assert!(roofline(&counts, 1 << 20, 1e9, 1e9, 999).is_err());
    }

    #[test]
    fn storage_figures() {
        let r = storage_report(1 << 16, 512, 42, 42, 40, 2, 2);
        assert!((r.mdc_buffer_bytes_per_instance - 13.65e6).abs() < 0.01e6);
        assert!((r.mdc_buffer_bytes / 26e6 - 1.0).abs() < 0.1);
        assert!((r.twiddle_full_bytes / 13e6 - 1.0).abs() < 0.1);
        assert!((r.twiddle_decomposed_bytes / 0.20e6 - 1.0).abs() < 0.1);
        assert_eq!(storage_report(1 << 16, 512, 0, 0, 40, 2, 2).mdc_buffer_bytes, 0.0);
    }

    #[test]
    fn eq1_arithmetic() {
        let r = |s: &str| decimal(s).unwrap();
        assert_eq!(amortized_per_slot(&r("0"), &[r("1"), r("0")], 1, 2).unwrap(), r("1"));
        // (3 + 1 + 2 + 3) / 2 · 2/8 = 1.125
        let v = amortized_per_slot(&r("3"), &[r("1"), r("2"), r("3")], 2, 8).unwrap();
        assert_eq!(v, r("1.125"));
        assert!(amortized_per_slot(&r("1"), &[r("1")], 2, 8).is_err());
        assert_eq!(r("-0.05"), BigRational::new((-1).into(), 20.into()));
        assert!(decimal("1.2.3").is_err());
    }
}
