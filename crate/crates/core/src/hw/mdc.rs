//! Multi-delay-commutator I/NTT pipeline.
//!
//! The unit consumes one stride-`N/p` chunk per cycle. A radix-2 stage with
//! butterfly distance `h ≥ N/p` pairs lanes inside a chunk and needs no
//! storage. A stage with `h < N/p` pairs chunk `o` with chunk `o ^ h` of the
//! same limb, which arrives `h·m` cycles later under `m`-way limb
//! interleaving, so its delay lines hold `h·m` chunks. Summed over stages that
//! is `(N - p)·m` values and a fill latency of `(N - p)/p · m` cycles.
//!
//! The forward direction takes bit-reversed coefficients to natural-order
//! evaluations; the inverse takes natural evaluations to bit-reversed
//! coefficients. Values match [`crate::poly::ntt`] exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::poly::{InterleavedStream, Order, Rep};
use crate::rns::PrimeModulus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Fwd,
    Inv,
    Bidirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdcConfig {
    pub p: usize,
    /// `log2` of the largest supported ring degree.
    pub s: u32,
    pub interleave_factor: usize,
    pub butterfly_pipeline_depth: u64,
    pub direction: Direction,
    pub trace: bool,
}

impl MdcConfig {
    pub fn new(p: usize, s: u32, interleave_factor: usize) -> Self {
        MdcConfig {
            p,
            s,
            interleave_factor,
            butterfly_pipeline_depth: 2,
            direction: Direction::Bidirectional,
            trace: false,
        }
    }

    /// Delay-line slots per direction for ring degree `n`.
    pub fn buffer_slots(&self, n: usize) -> usize {
        (n - self.p) * self.interleave_factor
    }

    /// Cycles before the first output chunk for `m` limbs of degree `n`.
    pub fn fill_latency(&self, n: usize, m: usize) -> u64 {
        ((n - self.p) / self.p * m) as u64 + n.trailing_zeros() as u64 * self.butterfly_pipeline_depth
    }

    pub fn cycle_count(&self, n: usize, m: usize) -> u64 {
        self.fill_latency(n, m) + (m * n / self.p) as u64
    }
}

/// Stages skipped when running degree `n_actual` on hardware built for `2^s`.
pub fn skip_stages(n_actual: usize, s: u32) -> Result<u32> {
    if !n_actual.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n_actual));
    }
    let log = n_actual.trailing_zeros();
    s.checked_sub(log)
        .ok_or_else(|| Error::Config(format!("degree {n_actual} exceeds 2^{s}")))
}

/// Two `~√N`-entry tables reconstructing every `ψ^k`, `0 ≤ k < N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwiddleTables {
    pub modulus: PrimeModulus,
    pub coarse: Vec<u64>,
    pub fine: Vec<u64>,
}

impl TwiddleTables {
    /// Tables for powers of `base`, which must have order dividing `2n`.
    pub fn from_base(m: &PrimeModulus, n: usize, base: u64) -> Self {
        let fine_len = 1usize << (n.trailing_zeros() / 2);
        let coarse_len = n / fine_len;
        let fine: Vec<u64> = std::iter::successors(Some(1u64), |&x| Some(m.mul(x, base)))
            .take(fine_len)
            .collect();
        let step = m.pow(base, fine_len as u64);
        let coarse = std::iter::successors(Some(1u64), |&x| Some(m.mul(x, step)))
            .take(coarse_len)
            .collect();
        TwiddleTables {
            modulus: *m,
            coarse,
            fine,
        }
    }

    pub fn forward(m: &PrimeModulus, n: usize) -> Self {
        Self::from_base(m, n, m.root_for(n))
    }

    pub fn inverse(m: &PrimeModulus, n: usize) -> Self {
        Self::from_base(m, n, m.inv(m.root_for(n)).expect("root is a unit"))
    }

    /// One multiplication per reconstructed twiddle.
    pub fn lookup(&self, k: usize) -> u64 {
        let f = self.fine.len();
        self.modulus.mul(self.coarse[k / f], self.fine[k % f])
    }
}

/// Full-table and decomposed twiddle storage in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwiddleStorage {
    pub full_bytes: f64,
    pub decomposed_bytes: f64,
}

pub fn twiddle_storage(n: usize, moduli: usize, word_bits: u32, sharing_groups: usize) -> TwiddleStorage {
    let word = word_bits as f64 / 8.0;
    let root = (n as f64).sqrt();
    TwiddleStorage {
        full_bytes: n as f64 * moduli as f64 * word,
        decomposed_bytes: 2.0 * root * moduli as f64 * word * sharing_groups as f64,
    }
}

/// Delay-line storage of one MDC instance in bytes.
pub fn mdc_buffer_bytes(n: usize, p: usize, interleave_factor: usize, word_bits: u32) -> f64 {
    ((n - p) * interleave_factor) as f64 * word_bits as f64 / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MdcOp {
    Butterfly,
    TwiddleGen,
    Commute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdcEvent {
    pub cycle: u64,
    pub stage: u32,
    pub lane: u32,
    pub op: MdcOp,
}

#[derive(Debug, Clone)]
pub struct MdcRun {
    pub output: InterleavedStream,
    pub cycle_count: u64,
    pub fill_latency: u64,
    /// Cycle at which each output chunk leaves, in stream order.
    pub output_cycles: Vec<u64>,
    /// Peak number of values held in delay lines.
    pub peak_buffer_values: usize,
    /// OF-Twiddle reconstructions, kept apart from the kernel counters.
    pub twiddle_mults: u64,
    pub events: Vec<MdcEvent>,
}

impl MdcRun {
    /// Average cycles between completed limbs once the pipeline is full.
    pub fn cycles_per_limb(&self) -> f64 {
        let span = self.output_cycles.last().unwrap() - self.output_cycles[0] + 1;
        span as f64 / self.output.limbs() as f64
    }
}

struct Stage {
    h: usize,
    delay: u64,
}

fn validate(cfg: &MdcConfig, s: &InterleavedStream, rep: Rep, order: Order) -> Result<()> {
    if cfg.p < 2 || !cfg.p.is_power_of_two() {
        return Err(Error::Config(format!("lane width {} must be a power of two ≥ 2", cfg.p)));
    }
    if s.p != cfg.p {
        return Err(Error::Config(format!("stream has {} lanes, unit has {}", s.p, cfg.p)));
    }
    skip_stages(s.n, cfg.s)?;
    if s.limbs() > cfg.interleave_factor {
        return Err(Error::Config(format!(
            "{} limbs in flight exceed the interleave factor {}",
            s.limbs(),
            cfg.interleave_factor
        )));
    }
    if !s.is_well_formed() {
        return Err(Error::Malformed("stream violates the interleaving schedule".into()));
    }
    if s.rep != rep {
        return Err(Error::RepMismatch {
            expected: rep.name(),
            found: s.rep.name(),
        });
    }
    if s.order != order {
        return Err(Error::Config(format!("stream order {:?}, unit expects {order:?}", s.order)));
    }
    Ok(())
}

fn run(cfg: &MdcConfig, input: &InterleavedStream, inverse: bool) -> Result<MdcRun> {
    let (rep, order) = if inverse {
        (Rep::Eval, Order::Natural)
    } else {
        (Rep::Coeff, Order::BitReversed)
    };
    validate(cfg, input, rep, order)?;
    let n = input.n;
    let p = cfg.p;
    let m = input.limbs();
    let per = n / p;
    let logn = n.trailing_zeros();
    let depth = cfg.butterfly_pipeline_depth;

    let mut hs: Vec<usize> = (0..logn).map(|k| 1usize << k).collect();
    if inverse {
        hs.reverse();
    }
    let stages: Vec<Stage> = hs
        .iter()
        .map(|&h| Stage {
            h,
            delay: if h < per { (h * m) as u64 } else { 0 },
        })
        .collect();

    let tables: Vec<TwiddleTables> = input
        .basis
        .iter()
        .map(|q| {
            if inverse {
                TwiddleTables::inverse(q, n)
            } else {
                TwiddleTables::forward(q, n)
            }
        })
        .collect();

    // data[t] holds stream position t; position t is limb t % m, chunk t / m
    let mut data: Vec<Vec<u64>> = input.chunks.iter().map(|c| c.values.clone()).collect();
    let mut events = Vec::new();
    let mut twiddle_mults = 0u64;
    let mut arrival = 0u64;
    let mut delta = vec![0i64; 0];
    let total_chunks = data.len();

    for (k, st) in stages.iter().enumerate() {
        let h = st.h;
        let size = 2 * h;
        let mut next = data.clone();
        for t in 0..total_chunks {
            let limb = t % m;
            let chunk = t / m;
            let q = &input.basis[limb];
            for lane in 0..p {
                let x = chunk + lane * per;
                if x % size >= h {
                    continue;
                }
                let (pt, pl) = if h < per {
                    ((chunk + h) * m + limb, lane)
                } else {
                    (t, lane + h / per)
                };
                let tw = tables[limb].lookup((n / size) * (2 * (x % h) + 1));
                twiddle_mults += 1;
                let (u, v) = (data[t][lane], data[pt][pl]);
                let (a, b) = if inverse {
                    (q.add(u, v), q.mul(q.sub(u, v), tw))
                } else {
                    let w = q.mul(v, tw);
                    (q.add(u, w), q.sub(u, w))
                };
                next[t][lane] = a;
                next[pt][pl] = b;
            }
            if cfg.trace {
                let cycle = arrival + t as u64;
                for cell in 0..(p / 2) as u32 {
                    events.push(MdcEvent { cycle, stage: k as u32, lane: cell, op: MdcOp::TwiddleGen });
                    events.push(MdcEvent { cycle, stage: k as u32, lane: cell, op: MdcOp::Butterfly });
                }
                if st.delay > 0 {
                    events.push(MdcEvent { cycle, stage: k as u32, lane: 0, op: MdcOp::Commute });
                }
            }
        }
        data = next;
        // record delay-line occupancy intervals for this stage
        if st.delay > 0 {
            let horizon = arrival as usize + total_chunks + st.delay as usize + 1;
            if delta.len() < horizon + 1 {
                delta.resize(horizon + 1, 0);
            }
            for t in 0..total_chunks {
                let enter = arrival as usize + t;
                delta[enter] += p as i64;
                delta[enter + st.delay as usize] -= p as i64;
            }
        }
        arrival += st.delay + depth;
    }

    if inverse {
        for (t, vals) in data.iter_mut().enumerate() {
            let q = &input.basis[t % m];
            let n_inv = q.inv(n as u64 % q.value)?;
            vals.iter_mut().for_each(|v| *v = q.mul(*v, n_inv));
        }
    }
    let butterflies = (n / 2 * logn as usize) as u64;
    for _ in 0..m {
        if inverse {
            counters::record(Kernel::Intt, butterflies + n as u64);
        } else {
            counters::record(Kernel::Ntt, butterflies);
        }
    }

    let mut peak = 0i64;
    let mut level = 0i64;
    for d in &delta {
        level += d;
        peak = peak.max(level);
    }

    let fill = arrival;
    let output_cycles: Vec<u64> = (0..total_chunks as u64).map(|t| fill + t).collect();
    let mut output = input.clone();
    for (c, vals) in output.chunks.iter_mut().zip(data) {
        c.values = vals;
    }
    if inverse {
        output.rep = Rep::Coeff;
        output.order = Order::BitReversed;
    } else {
        output.rep = Rep::Eval;
        output.order = Order::Natural;
    }
    Ok(MdcRun {
        output,
        cycle_count: fill + total_chunks as u64,
        fill_latency: fill,
        output_cycles,
        peak_buffer_values: peak as usize,
        twiddle_mults,
        events,
    })
}

/// Inverse NTT of every interleaved limb: natural evaluations in,
/// bit-reversed coefficients out.
pub fn run_intt(cfg: &MdcConfig, input: &InterleavedStream) -> Result<MdcRun> {
    if cfg.direction == Direction::Fwd {
        return Err(Error::Config("unit is configured forward-only".into()));
    }
    run(cfg, input, true)
}

/// Forward NTT: bit-reversed coefficients in, natural evaluations out.
pub fn run_ntt(cfg: &MdcConfig, input: &InterleavedStream) -> Result<MdcRun> {
    if cfg.direction == Direction::Inv {
        return Err(Error::Config("unit is configured inverse-only".into()));
    }
    run(cfg, input, false)
}

/// Both directions at once; each is charged independently, so the pair
/// finishes in the longer of the two runs.
pub fn run_bidirectional(
    cfg: &MdcConfig,
    fwd_input: &InterleavedStream,
    inv_input: &InterleavedStream,
) -> Result<(MdcRun, MdcRun, u64)> {
    if cfg.direction != Direction::Bidirectional {
        return Err(Error::Config("unit is not bidirectional".into()));
    }
    let f = run(cfg, fwd_input, false)?;
    let i = run(cfg, inv_input, true)?;
    let cycles = f.cycle_count.max(i.cycle_count);
    Ok((f, i, cycles))
}

pub fn write_trace_csv(events: &[MdcEvent], mut w: impl Write) -> Result<()> {
    writeln!(w, "cycle,stage,lane,op")?;
    for e in events {
        writeln!(w, "{},{},{},{:?}", e.cycle, e.stage, e.lane, e.op)?;
    }
    Ok(())
}
