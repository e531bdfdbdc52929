//! Input-stationary systolic array for basis conversion.
//!
//! Geometry: `height` rows (one per source limb), `width = p` lanes. Block
//! `b` is the `α × p` slab made of chunk `b` of every source limb. Its
//! prescaled coefficients sit in the cells while `β` weight waves stream in
//! from the left (wave `j` carries `Q̂_i mod q'_j` and `q'_j`) and psums flow
//! down to the bottom row. Each cell keeps a current and a preload register.
//!
//! Timing, with block period `P = max(α, β)` and load offset `L = α - 1`:
//! - chunk `(b, i)` enters lane `k` of the top at `b·P + i + k` and shifts
//!   down one row per cycle, reaching row `i` at `b·P + 2i + k`;
//! - block `b` becomes current at cell `(i, k)` at `S = b·P + L + i + k`;
//! - wave `j` reaches cell `(i, k)` at `b·P + L + j + i + k`;
//! - the bottom row emits lane `k` of output chunk `(b, j)` after the SMAC
//!   pipeline, and the unskew buffers align every lane to
//!   `b·P + L + j + height + width - 2 + depth`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ckks::bconv::BaseTable;
use crate::counters::{self, Kernel};
use crate::error::{Error, Result};
use crate::poly::{InterleavedStream, Rep, StreamChunk};
use crate::rns::PrimeModulus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BconvArrayConfig {
    pub height: usize,
    pub width: usize,
    pub smac_pipeline_depth: u64,
    pub trace: bool,
    /// Test hook: delays the weight feed of one row by the given cycles.
    pub weight_skew_error: Option<(usize, i64)>,
}

impl BconvArrayConfig {
    pub fn new(height: usize, width: usize) -> Self {
        BconvArrayConfig {
            height,
            width,
            smac_pipeline_depth: 2,
            trace: false,
            weight_skew_error: None,
        }
    }

    /// Skew plus unskew traversal of the array.
    pub fn skew_fill(&self) -> u64 {
        (self.height + self.width - 2) as u64
    }

    /// Cycles for a conversion of `alpha → beta` limbs of degree `n`.
    pub fn cycle_count(&self, n: usize, alpha: usize, beta: usize) -> u64 {
        let blocks = n.div_ceil(self.width) as u64;
        (alpha as u64 - 1) + self.skew_fill() + blocks * alpha.max(beta) as u64 - (alpha.max(beta) - beta) as u64
            + self.smac_pipeline_depth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BconvOp {
    Preload,
    Swap,
    Mac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BconvEvent {
    pub cycle: u64,
    pub row: u32,
    pub lane: u32,
    pub op: BconvOp,
}

#[derive(Debug, Clone)]
pub struct BconvRun {
    pub output: InterleavedStream,
    pub cycle_count: u64,
    /// Cycle at which each output chunk leaves the unskew buffers.
    pub output_cycles: Vec<u64>,
    /// Cycle at which each input chunk is consumed.
    pub input_cycles: Vec<u64>,
    pub events: Vec<BconvEvent>,
}

/// One weight row of the feed: `(w[i][j] for every row i, q'_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightWave {
    pub weights: Vec<u64>,
    pub modulus: PrimeModulus,
}

/// The left-edge feed in wave order; rows past `α` carry zero weights.
pub fn stream_weights(table: &BaseTable, height: usize) -> Vec<WeightWave> {
    (0..table.beta())
        .map(|j| WeightWave {
            weights: (0..height)
                .map(|i| if i < table.alpha() { table.weights[i][j] } else { 0 })
                .collect(),
            modulus: table.to[j],
        })
        .collect()
}

/// Cell-level modulus switch; valid only for `q < 2q'`.
fn switch_modulus_cell(x: u64, to: &PrimeModulus) -> u64 {
    if x >= to.value {
        x - to.value
    } else {
        x
    }
}

pub fn run_bconv(cfg: &BconvArrayConfig, input: &InterleavedStream, table: &BaseTable) -> Result<BconvRun> {
    let alpha = table.alpha();
    let beta = table.beta();
    if alpha > cfg.height {
        return Err(Error::Config(format!("{alpha} source limbs exceed array height {}", cfg.height)));
    }
    if input.p != cfg.width {
        return Err(Error::Config(format!("stream has {} lanes, array is {} wide", input.p, cfg.width)));
    }
    if input.rep != Rep::Coeff {
        return Err(Error::RepMismatch {
            expected: "Coeff",
            found: input.rep.name(),
        });
    }
    if input.basis.iter().map(|m| m.value).ne(table.from.iter().map(|m| m.value)) {
        return Err(Error::BasisMismatch("stream basis differs from the table's source".into()));
    }
    if !input.is_well_formed() {
        return Err(Error::Malformed("stream violates the interleaving schedule".into()));
    }
    for q in &table.from {
        for t in &table.to {
            if q.value >= 2 * t.value {
                return Err(Error::Config(format!(
                    "modulus switch from {} to {} needs more than one subtraction",
                    q.value, t.value
                )));
            }
        }
    }

    let n = input.n;
    let w = cfg.width;
    let h = cfg.height;
    let blocks = n / w;
    let period = alpha.max(beta) as i64;
    let load = alpha as i64 - 1;
    let depth = cfg.smac_pipeline_depth as i64;
    let waves = stream_weights(table, h);

    // row-0 prescale as each chunk passes the first row
    let stationary: Vec<Vec<u64>> = input
        .chunks
        .iter()
        .map(|c| {
            let m = &table.from[c.limb_index];
            let s = table.prescale[c.limb_index];
            c.values.iter().map(|&v| m.mul(v, s)).collect()
        })
        .collect();
    let resident = |b: i64, i: usize, k: usize| -> Option<&[u64]> {
        if b < 0 || b as usize >= blocks || i >= alpha {
            return None;
        }
        Some(&stationary[b as usize * alpha + i][k..k + 1])
    };
    let swap_time = |b: i64, i: usize, k: usize| b * period + load + (i + k) as i64;

    let mut events = Vec::new();
    let mut chunks = Vec::with_capacity(blocks * beta);
    let mut output_cycles = Vec::with_capacity(blocks * beta);
    for b in 0..blocks as i64 {
        for (j, wave) in waves.iter().enumerate() {
            let qj = &wave.modulus;
            let mut values = vec![0u64; w];
            for (k, out) in values.iter_mut().enumerate() {
                let mut psum = 0u64;
                for i in 0..h {
                    let mut t = b * period + load + (j + i + k) as i64;
                    if let Some((row, delta)) = cfg.weight_skew_error {
                        if row == i {
                            t += delta;
                        }
                    }
                    // block current at this cell when the wave arrives
                    let cur = (t - load - (i + k) as i64).div_euclid(period);
                    let x = resident(cur, i, k).map_or(0, |v| v[0]);
                    psum = qj.add(psum, qj.mul(wave.weights[i], switch_modulus_cell(x, qj)));
                    if cfg.trace && i < alpha {
                        events.push(BconvEvent { cycle: t as u64, row: i as u32, lane: k as u32, op: BconvOp::Mac });
                    }
                }
                *out = psum;
            }
            chunks.push(StreamChunk {
                limb_index: j,
                chunk_index: b as usize,
                values,
            });
            output_cycles.push((b * period + load + j as i64 + (h + w) as i64 - 2 + depth) as u64);
        }
    }
    let input_cycles: Vec<u64> = (0..blocks * alpha)
        .map(|t| ((t / alpha) as i64 * period + (t % alpha) as i64) as u64)
        .collect();
    if cfg.trace {
        for b in 0..blocks as i64 {
            for i in 0..alpha {
                for k in 0..w {
                    let arrive = b * period + 2 * i as i64 + k as i64;
                    events.push(BconvEvent { cycle: arrive as u64, row: i as u32, lane: k as u32, op: BconvOp::Preload });
                    events.push(BconvEvent {
                        cycle: swap_time(b, i, k) as u64,
                        row: i as u32,
                        lane: k as u32,
                        op: BconvOp::Swap,
                    });
                }
            }
        }
        events.sort_by_key(|e| (e.cycle, e.row, e.lane));
    }

    counters::record(Kernel::Bconv, (n * alpha + n * alpha * beta) as u64);
    let cycle_count = output_cycles.last().map_or(0, |&c| c + 1);
    Ok(BconvRun {
        output: InterleavedStream {
            n,
            p: w,
            basis: table.to.clone(),
            rep: Rep::Coeff,
            order: input.order,
            chunks,
        },
        cycle_count,
        output_cycles,
        input_cycles,
        events,
    })
}

pub fn write_trace_csv(events: &[BconvEvent], mut out: impl Write) -> Result<()> {
    writeln!(out, "cycle,stage,lane,op")?;
    for e in events {
        writeln!(out, "{},{},{},{:?}", e.cycle, e.row, e.lane, e.op)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckks::bconv_reference;
    use crate::poly::{from_interleaved, to_interleaved, LimbMatrix, Order};
    use crate::rns::find_ntt_primes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, alpha: usize, beta: usize, seed: u64) -> (LimbMatrix, BaseTable) {
        let primes = find_ntt_primes(40, n, alpha + beta, &[]).unwrap();
        let basis: Vec<PrimeModulus> = primes.iter().map(|&q| PrimeModulus::new(q, n).unwrap()).collect();
        let table = BaseTable::new(&basis[..alpha], &basis[alpha..]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = basis[..alpha]
            .iter()
            .map(|m| (0..n).map(|_| rng.gen_range(0..m.value)).collect())
            .collect();
        let x = LimbMatrix::from_rows(&basis[..alpha], rows, Rep::Coeff).unwrap().to_order(Order::BitReversed);
        (x, table)
    }

    #[test]
    fn matches_reference_across_shapes() {
        for (n, p, alpha, beta, height) in [(16, 4, 4, 4, 4), (64, 8, 3, 7, 16), (64, 16, 16, 16, 16), (16, 4, 5, 2, 16)] {
            let (x, table) = setup(n, alpha, beta, (n + alpha * beta) as u64);
            let cfg = BconvArrayConfig::new(height, p);
            let run = run_bconv(&cfg, &to_interleaved(&x, p).unwrap(), &table).unwrap();
            assert!(run.output.is_well_formed());
            let want = bconv_reference(&x, &table).unwrap().to_order(Order::BitReversed);
            assert_eq!(from_interleaved(&run.output).unwrap(), want);
            assert_eq!(run.cycle_count, cfg.cycle_count(n, alpha, beta));
        }
    }

    #[test]
    fn zero_and_passthrough() {
        let (x, table) = setup(16, 2, 3, 1);
        let zero = LimbMatrix::zero(&x.basis, 16, Rep::Coeff);
        let cfg = BconvArrayConfig::new(4, 4);
        let run = run_bconv(&cfg, &to_interleaved(&zero, 4).unwrap(), &table).unwrap();
        assert!(run.output.chunks.iter().all(|c| c.values.iter().all(|&v| v == 0)));

        let (x, table) = setup(16, 1, 1, 2);
        let run = run_bconv(&cfg, &to_interleaved(&x, 4).unwrap(), &table).unwrap();
        let m = table.to[0];
        let out = from_interleaved(&run.output).unwrap();
        for (a, b) in x.rows[0].iter().zip(&out.rows[0]) {
            assert_eq!(*b, a % m.value);
        }
    }

    #[test]
    fn steady_state_has_no_bubbles() {
        let (x, table) = setup(64, 4, 4, 3);
        let cfg = BconvArrayConfig::new(16, 8);
        let run = run_bconv(&cfg, &to_interleaved(&x, 8).unwrap(), &table).unwrap();
        assert!(run.input_cycles.windows(2).all(|w| w[1] == w[0] + 1));
        assert!(run.output_cycles.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn preload_lands_between_swaps() {
        let (x, table) = setup(64, 4, 6, 4);
        let mut cfg = BconvArrayConfig::new(8, 8);
        cfg.trace = true;
        let run = run_bconv(&cfg, &to_interleaved(&x, 8).unwrap(), &table).unwrap();
        let mut swaps = std::collections::HashMap::<(u32, u32), Vec<u64>>::new();
        let mut loads = std::collections::HashMap::<(u32, u32), Vec<u64>>::new();
        for e in &run.events {
            match e.op {
                BconvOp::Swap => swaps.entry((e.row, e.lane)).or_default().push(e.cycle),
                BconvOp::Preload => loads.entry((e.row, e.lane)).or_default().push(e.cycle),
                BconvOp::Mac => {}
            }
        }
        for (cell, s) in &swaps {
            let l = &loads[cell];
            for b in 0..s.len() {
                assert!(l[b] <= s[b]);
                if b > 0 {
                    assert!(l[b] >= s[b - 1]);
                }
            }
        }
    }

    #[test]
    fn skewed_weights_corrupt_psums() {
        let (x, table) = setup(16, 4, 4, 5);
        let mut cfg = BconvArrayConfig::new(4, 4);
        cfg.weight_skew_error = Some((1, 1));
        let run = run_bconv(&cfg, &to_interleaved(&x, 4).unwrap(), &table).unwrap();
        let want = bconv_reference(&x, &table).unwrap().to_order(Order::BitReversed);
        assert_ne!(from_interleaved(&run.output).unwrap(), want);
    }

    #[test]
    fn weight_feed_shape() {
        let (_, table) = setup(16, 2, 1, 6);
        let feed = stream_weights(&table, 4);
        assert_eq!(feed.len(), 1);
        assert_eq!(feed[0].weights[2..], [0, 0]);
    }

    #[test]
    fn rejects_bad_configs() {
        let (x, table) = setup(16, 4, 2, 7);
        let s = to_interleaved(&x, 4).unwrap();
        assert!(run_bconv(&BconvArrayConfig::new(3, 4), &s, &table).is_err());
        assert!(run_bconv(&BconvArrayConfig::new(4, 8), &s, &table).is_err());
        let small = vec![PrimeModulus::new(97, 8).unwrap()];
        let big = vec![PrimeModulus::new(257, 8).unwrap()];
        let t = BaseTable::new(&big, &small).unwrap();
        let y = LimbMatrix::zero(&big, 16, Rep::Coeff);
        assert!(run_bconv(&BconvArrayConfig::new(4, 4), &to_interleaved(&y, 4).unwrap(), &t).is_err());
    }
}
