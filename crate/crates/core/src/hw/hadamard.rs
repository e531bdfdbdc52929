//! Pointwise-arithmetic unit: `p` one-dimensional systolic columns of height
//! `dnum`. Row `d` holds digit `d` and its key pair; partial sums move down
//! one row per cycle. Every cell has four multipliers, two for the key pair
//! and two for the diagonal products of a ciphertext.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ckks::keyswitch::key_slice;
use crate::ckks::{Ciphertext, SwitchingKey};
use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::poly::{from_interleaved, to_interleaved, InterleavedStream, LimbMatrix, Rep, StreamChunk};
use crate::rns::{ModulusChain, PrimeModulus};

pub const KEYMULT_MULTS: usize = 2;
pub const DIAG_MULTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HadamardConfig {
    pub lanes: usize,
    pub height: usize,
    pub mults_per_cell: usize,
    pub trace: bool,
}

impl HadamardConfig {
    pub fn new(lanes: usize, height: usize) -> Self {
        HadamardConfig {
            lanes,
            height,
            mults_per_cell: 4,
            trace: false,
        }
    }

    /// Extra cycles when a KeyMult and a diagonal product overlap for
    /// `overlap` cycles. Zero whenever the per-cell budget covers both.
    pub fn concurrent_stall(&self, overlap: u64) -> u64 {
        if KEYMULT_MULTS + DIAG_MULTS <= self.mults_per_cell {
            0
        } else {
            overlap
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HadamardOp {
    KeyMult,
    DiagMult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HadamardEvent {
    pub cycle: u64,
    pub row: usize,
    pub chunk: usize,
    pub op: HadamardOp,
}

#[derive(Debug, Clone)]
pub struct KeyMultRun {
    pub c0: InterleavedStream,
    pub c1: InterleavedStream,
    pub cycle_count: u64,
    pub events: Vec<HadamardEvent>,
}

fn mul_chunk(x: &[u64], y: &[u64], m: &PrimeModulus) -> Vec<u64> {
    x.iter().zip(y).map(|(&a, &b)| m.mul(a, b)).collect()
}

fn add_into(acc: &mut [u64], x: &[u64], m: &PrimeModulus) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a = m.add(*a, b);
    }
}

/// Streams digit `d` through row `d`; chunk `t` of the stream enters the
/// top at cycle `t` and leaves the bottom at `t + height`.
pub fn run_keymult(
    cfg: &HadamardConfig,
    digits: &[InterleavedStream],
    key: &SwitchingKey,
    level: usize,
    chain: &ModulusChain,
) -> Result<KeyMultRun> {
    if digits.is_empty() {
        return Err(Error::InvalidParameter("no digits".into()));
    }
    if digits.len() > cfg.height {
        return Err(Error::InvalidParameter(format!(
            "{} digits exceed column height {}",
            digits.len(),
            cfg.height
        )));
    }
    if digits.len() != chain.dnum(level) || digits.len() > key.b.len() {
        return Err(Error::InvalidParameter(format!("level {level} needs {} digits", chain.dnum(level))));
    }
    let first = &digits[0];
    for d in digits {
        if d.rep != Rep::Eval {
            return Err(Error::RepMismatch {
                expected: Rep::Eval.name(),
                found: d.rep.name(),
            });
        }
        if d.p != cfg.lanes || d.n != first.n || d.order != first.order || d.chunks.len() != first.chunks.len() {
            return Err(Error::Config("digit streams differ in shape".into()));
        }
    }
    let slice = key_slice(level, chain);
    let n = first.n;
    let stream_of = |m: &LimbMatrix| to_interleaved(&m.select(&slice).to_order(first.order), cfg.lanes);
    let keys: Vec<(InterleavedStream, InterleavedStream)> = (0..digits.len())
        .map(|d| Ok((stream_of(&key.b[d])?, stream_of(&key.a[d])?)))
        .collect::<Result<_>>()?;

    let mut events = Vec::new();
    let mut out0 = Vec::with_capacity(first.chunks.len());
    let mut out1 = Vec::with_capacity(first.chunks.len());
    for (t, chunk) in first.chunks.iter().enumerate() {
        let m = &first.basis[chunk.limb_index];
        let mut acc0 = vec![0u64; cfg.lanes];
        let mut acc1 = vec![0u64; cfg.lanes];
        for (d, digit) in digits.iter().enumerate() {
            let c = &digit.chunks[t];
            if (c.limb_index, c.chunk_index) != (chunk.limb_index, chunk.chunk_index) {
                return Err(Error::Config("digit streams are not aligned".into()));
            }
            add_into(&mut acc0, &mul_chunk(&c.values, &keys[d].0.chunks[t].values, m), m);
            add_into(&mut acc1, &mul_chunk(&c.values, &keys[d].1.chunks[t].values, m), m);
            if cfg.trace {
                events.push(HadamardEvent {
                    cycle: (t + d) as u64,
                    row: d,
                    chunk: t,
                    op: HadamardOp::KeyMult,
                });
            }
        }
        let pos = (chunk.limb_index, chunk.chunk_index);
        out0.push(StreamChunk {
            limb_index: pos.0,
            chunk_index: pos.1,
            values: acc0,
        });
        out1.push(StreamChunk {
            limb_index: pos.0,
            chunk_index: pos.1,
            values: acc1,
        });
    }
    counters::record(Kernel::KeyMult, (2 * digits.len() * slice.len() * n) as u64);
    Ok(KeyMultRun {
        c0: InterleavedStream { chunks: out0, ..first.clone() },
        c1: InterleavedStream { chunks: out1, ..first.clone() },
        cycle_count: (first.chunks.len() + cfg.height) as u64,
        events,
    })
}

/// Diagonal products accumulated in place, keyed by accumulator id.
#[derive(Debug, Clone)]
pub struct HadamardUnit {
    pub cfg: HadamardConfig,
    pub accumulators: BTreeMap<usize, Ciphertext>,
    pub events: Vec<HadamardEvent>,
    pub cycle: u64,
}

impl HadamardUnit {
    pub fn new(cfg: HadamardConfig) -> Self {
        HadamardUnit {
            cfg,
            accumulators: BTreeMap::new(),
            events: Vec::new(),
            cycle: 0,
        }
    }

    /// `acc[id] += ct ⊙ diag`, one chunk of both polynomials per cycle.
    /// Returns the cycles spent.
    pub fn run_diag_mult_acc(&mut self, ct: &Ciphertext, diag: &LimbMatrix, diag_log_scale: f64, id: usize) -> Result<u64> {
        diag.require(Rep::Eval)?;
        ct.c0.require(Rep::Eval)?;
        if diag.limbs() != ct.c0.limbs() || diag.n() != ct.n() {
            return Err(Error::LevelMismatch("diagonal and ciphertext bases differ".into()));
        }
        let log_scale = ct.log_scale + diag_log_scale;
        if let Some(acc) = self.accumulators.get(&id) {
            if acc.c0.limbs() != ct.c0.limbs() || (acc.log_scale - log_scale).abs() > 1e-9 {
                return Err(Error::LevelMismatch(format!("accumulator {id} holds a different level or scale")));
            }
        }
        let p = self.cfg.lanes;
        let d = to_interleaved(&diag.to_order(ct.c0.order), p)?;
        let x0 = to_interleaved(&ct.c0, p)?;
        let x1 = to_interleaved(&ct.c1, p)?;
        let (mut a0, mut a1) = match self.accumulators.get(&id) {
            Some(acc) => (to_interleaved(&acc.c0, p)?, to_interleaved(&acc.c1, p)?),
            None => {
                let z = LimbMatrix::zero(&ct.c0.basis, ct.n(), Rep::Eval).to_order(ct.c0.order);
                (to_interleaved(&z, p)?, to_interleaved(&z, p)?)
            }
        };
        for t in 0..d.chunks.len() {
            let m = &d.basis[d.chunks[t].limb_index];
            let w = &d.chunks[t].values;
            add_into(&mut a0.chunks[t].values, &mul_chunk(&x0.chunks[t].values, w, m), m);
            add_into(&mut a1.chunks[t].values, &mul_chunk(&x1.chunks[t].values, w, m), m);
            if self.cfg.trace {
                self.events.push(HadamardEvent {
                    cycle: self.cycle + t as u64,
                    row: 0,
                    chunk: t,
                    op: HadamardOp::DiagMult,
                });
            }
        }
        counters::record(Kernel::DiagMult, (2 * diag.limbs() * diag.n()) as u64);
        self.accumulators.insert(
            id,
            Ciphertext {
                c0: from_interleaved(&a0)?,
                c1: from_interleaved(&a1)?,
                log_scale,
            },
        );
        let cycles = d.chunks.len() as u64;
        self.cycle += cycles;
        Ok(cycles)
    }

    pub fn take(&mut self, id: usize) -> Option<Ciphertext> {
        self.accumulators.remove(&id)
    }
}

pub fn write_trace_csv(events: &[HadamardEvent], mut out: impl Write) -> Result<()> {
    writeln!(out, "cycle,row,chunk,op")?;
    for e in events {
        writeln!(out, "{},{},{},{:?}", e.cycle, e.row, e.chunk, e.op)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckks::{decompose, encrypt, h_add, key_mult, keygen, mod_up, p_mult};
    use crate::poly::encoding::encode;
    use crate::rns::{generate_chain, ChainParams};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(alpha: usize) -> ModulusChain {
        generate_chain(&ChainParams {
            n_max: 32,
            q0_bits: vec![40],
            qi_bits: 32,
            level_count: 5,
            alpha,
            p_bits: 40,
            scale_bits: 32,
            log_qp_cap: None,
        })
        .unwrap()
    }

    fn digits(c: &ModulusChain, level: usize, seed: u64) -> Vec<LimbMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = c.q_basis(level);
        let rows = basis.iter().map(|m| (0..32).map(|_| rng.gen_range(0..m.value)).collect()).collect();
        let x = LimbMatrix::from_rows(basis, rows, Rep::Eval).unwrap();
        decompose(&x, c.alpha)
            .iter()
            .enumerate()
            .map(|(d, dg)| mod_up(dg, d, level, c).unwrap())
            .collect()
    }

    fn streams(ds: &[LimbMatrix], p: usize) -> Vec<InterleavedStream> {
        ds.iter().map(|d| to_interleaved(d, p).unwrap()).collect()
    }

    #[test]
    fn keymult_matches_reference() {
        let c = chain(2);
        let keys = keygen(&c, 32, 8, 4, &[]).unwrap();
        let ds = digits(&c, 5, 1);
        assert_eq!(ds.len(), 3);
        let cfg = HadamardConfig::new(8, c.dnum_max);
        let run = run_keymult(&cfg, &streams(&ds, 8), &keys.relin, 5, &c).unwrap();
        let (h0, h1) = key_mult(&ds, &keys.relin, 5, &c).unwrap();
        assert_eq!(from_interleaved(&run.c0).unwrap(), h0);
        assert_eq!(from_interleaved(&run.c1).unwrap(), h1);
        assert_eq!(run.cycle_count, (ds[0].limbs() * 4 + 3) as u64);
    }

    #[test]
    fn single_digit_and_zero_key() {
        let c = chain(6);
        let keys = keygen(&c, 32, 8, 4, &[]).unwrap();
        let ds = digits(&c, 5, 2);
        assert_eq!(ds.len(), 1);
        let cfg = HadamardConfig::new(4, 1);
        let mut key = keys.relin.clone();
        for m in key.b.iter_mut().chain(key.a.iter_mut()) {
            *m = LimbMatrix::zero(&m.basis, 32, Rep::Eval);
        }
        let run = run_keymult(&cfg, &streams(&ds, 4), &key, 5, &c).unwrap();
        assert!(from_interleaved(&run.c0).unwrap().rows.iter().flatten().all(|&v| v == 0));
        let run = run_keymult(&cfg, &streams(&ds, 4), &keys.relin, 5, &c).unwrap();
        let want = ds[0].hadamard(&keys.relin.b[0].select(&key_slice(5, &c))).unwrap();
        assert_eq!(from_interleaved(&run.c0).unwrap(), want);
    }

    #[test]
    fn too_many_digits() {
        let c = chain(2);
        let keys = keygen(&c, 32, 8, 4, &[]).unwrap();
        let ds = digits(&c, 5, 3);
        let cfg = HadamardConfig::new(8, 2);
        assert!(run_keymult(&cfg, &streams(&ds, 8), &keys.relin, 5, &c).is_err());
    }

    #[test]
    fn diagonal_accumulation_matches_fold() {
        let c = chain(2);
        let keys = keygen(&c, 32, 8, 4, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<Complex64> = (0..16).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
        let ct = encrypt(&z, 4, &c, &keys.secret, 6).unwrap();
        let mut unit = HadamardUnit::new(HadamardConfig::new(8, 3));
        let mut want: Option<Ciphertext> = None;
        for k in 0..3 {
            let w: Vec<Complex64> = (0..16).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
            let diag = encode(&w, 24, 32, c.q_basis(4)).unwrap().to_eval().unwrap();
            let cycles = unit.run_diag_mult_acc(&ct, &diag, 24.0, 7).unwrap();
            assert_eq!(cycles, (5 * 32 / 8) as u64);
            let prod = p_mult(&ct, &diag, 24.0).unwrap();
            want = Some(match want {
                None => prod,
                Some(acc) => h_add(&acc, &prod).unwrap(),
            });
            if k == 0 {
                assert_eq!(unit.accumulators.get(&7), want.as_ref());
            }
        }
        assert_eq!(unit.take(7), want);
    }

    #[test]
    fn ones_diagonal_adds_ciphertext() {
        let c = chain(2);
        let keys = keygen(&c, 32, 8, 4, &[]).unwrap();
        let z = vec![Complex64::new(0.5, 0.25); 16];
        let ct = encrypt(&z, 2, &c, &keys.secret, 8).unwrap();
        let ones = LimbMatrix::from_signed(c.q_basis(2), &{
            let mut v = vec![0i128; 32];
            v[0] = 1;
            v
        })
        .to_eval()
        .unwrap();
        let mut unit = HadamardUnit::new(HadamardConfig::new(8, 3));
        unit.run_diag_mult_acc(&ct, &ones, 0.0, 0).unwrap();
        assert_eq!(unit.accumulators[&0], ct);
    }

    #[test]
    fn four_multipliers_cover_both_tasks() {
        assert_eq!(HadamardConfig::new(512, 3).concurrent_stall(1000), 0);
        let mut tight = HadamardConfig::new(512, 3);
        tight.mults_per_cell = 2;
        assert_eq!(tight.concurrent_stall(1000), 1000);
    }
}
