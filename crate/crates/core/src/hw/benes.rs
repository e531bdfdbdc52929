//! Beneš permutation network and the streamed automorphism unit.
//!
//! A `p`-input Beneš network is an input column of `p/2` switches, two
//! `p/2`-input subnetworks (upper wires to the first, lower to the second),
//! and an output column. Flattened, it has `2·log2(p) - 1` stages of `p/2`
//! switches; stage `d` holds the input columns of the depth-`d` subnetworks
//! and stage `2·log2(p) - 2 - d` their output columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{automorphism_map, InterleavedStream, Order, Rep, StreamChunk};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenesRouting {
    pub p: usize,
    /// `stages[s][w]` is true when switch `w` of stage `s` is crossed.
    pub stages: Vec<Vec<bool>>,
}

impl BenesRouting {
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn is_identity_setting(&self) -> bool {
        self.stages.iter().all(|s| s.iter().all(|&c| !c))
    }

    /// Sends `input[i]` through the switches; the result satisfies
    /// `out[perm[i]] = input[i]` for the routed permutation.
    pub fn apply<T: Copy>(&self, input: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.p);
        let mut data = input.to_vec();
        if self.p > 1 {
            simulate(&self.stages, 0, 0, &mut data);
        }
        data
    }
}

pub fn network_depth(p: usize) -> usize {
    2 * p.trailing_zeros() as usize - 1
}

fn simulate<T: Copy>(stages: &[Vec<bool>], d: usize, base: usize, data: &mut [T]) {
    let n = data.len();
    let last = stages.len() - 1;
    if n == 2 {
        if stages[d][base / 2] {
            data.swap(0, 1);
        }
        return;
    }
    let half = n / 2;
    let mut upper = Vec::with_capacity(half);
    let mut lower = Vec::with_capacity(half);
    for t in 0..half {
        let (a, b) = (data[2 * t], data[2 * t + 1]);
        if stages[d][base / 2 + t] {
            upper.push(b);
            lower.push(a);
        } else {
            upper.push(a);
            lower.push(b);
        }
    }
    simulate(stages, d + 1, base, &mut upper);
    simulate(stages, d + 1, base + half, &mut lower);
    for u in 0..half {
        let (a, b) = if stages[last - d][base / 2 + u] {
            (lower[u], upper[u])
        } else {
            (upper[u], lower[u])
        };
        data[2 * u] = a;
        data[2 * u + 1] = b;
    }
}

fn route(stages: &mut [Vec<bool>], d: usize, base: usize, perm: &[usize]) {
    let n = perm.len();
    let last = stages.len() - 1;
    if n == 2 {
        stages[d][base / 2] = perm[0] == 1;
        return;
    }
    let mut inv = vec![0usize; n];
    for (i, &o) in perm.iter().enumerate() {
        inv[o] = i;
    }
    // looping algorithm: 0 = upper subnetwork, 1 = lower
    let mut side = vec![u8::MAX; n];
    for start in 0..n {
        if side[start] != u8::MAX {
            continue;
        }
        let mut cur = start;
        loop {
            side[cur] = 0;
            let partner_in = inv[perm[cur] ^ 1];
            side[partner_in] = 1;
            let next = partner_in ^ 1;
            if side[next] != u8::MAX {
                break;
            }
            cur = next;
        }
    }
    let half = n / 2;
    let mut up = vec![0usize; half];
    let mut low = vec![0usize; half];
    for t in 0..half {
        stages[d][base / 2 + t] = side[2 * t] == 1;
    }
    for (i, &o) in perm.iter().enumerate() {
        if side[i] == 0 {
            up[i / 2] = o / 2;
        } else {
            low[i / 2] = o / 2;
        }
    }
    for u in 0..half {
        stages[last - d][base / 2 + u] = side[inv[2 * u]] == 1;
    }
    route(stages, d + 1, base, &up);
    route(stages, d + 1, base + half, &low);
}

/// Switch settings realizing `perm` (input `i` goes to output `perm[i]`).
pub fn route_benes(perm: &[usize]) -> Result<BenesRouting> {
    let p = perm.len();
    if !p.is_power_of_two() || p < 2 {
        return Err(Error::Config(format!("network width {p} must be a power of two ≥ 2")));
    }
    let mut seen = vec![false; p];
    for &o in perm {
        if o >= p || std::mem::replace(&mut seen[o], true) {
            return Err(Error::NotAPermutation);
        }
    }
    let mut stages = vec![vec![false; p / 2]; network_depth(p)];
    route(&mut stages, 0, 0, perm);
    Ok(BenesRouting { p, stages })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomorphismPlan {
    pub r: i64,
    pub n: usize,
    pub p: usize,
    pub routings: Vec<BenesRouting>,
    /// Output chunk written by each input chunk.
    pub dest_chunk: Vec<usize>,
}

pub fn plan_automorphism(r: i64, n: usize, p: usize) -> Result<AutomorphismPlan> {
    if p < 2 || p > n || n % p != 0 {
        return Err(Error::Config(format!("{p} lanes cannot stream degree {n}")));
    }
    let map = automorphism_map(r, n)?;
    let per = n / p;
    let mut routings = Vec::with_capacity(per);
    let mut dest_chunk = Vec::with_capacity(per);
    for o in 0..per {
        let dests: Vec<usize> = (0..p).map(|k| map[o + k * per]).collect();
        let target = dests[0] % per;
        if dests.iter().any(|&x| x % per != target) {
            return Err(Error::InvalidRotation { r, n });
        }
        routings.push(route_benes(&dests.iter().map(|&x| x / per).collect::<Vec<_>>())?);
        dest_chunk.push(target);
    }
    Ok(AutomorphismPlan {
        r,
        n,
        p,
        routings,
        dest_chunk,
    })
}

#[derive(Debug, Clone)]
pub struct AutomorphismRun {
    pub output: InterleavedStream,
    pub cycle_count: u64,
}

/// Streams every chunk through its routing and writes it to the output
/// buffer at its destination chunk; the buffer is read back in order.
pub fn run_automorphism(input: &InterleavedStream, plan: &AutomorphismPlan) -> Result<AutomorphismRun> {
    if input.rep != Rep::Eval || input.order != Order::Natural {
        return Err(Error::Config("automorphism unit needs natural-order evaluations".into()));
    }
    if input.n != plan.n || input.p != plan.p || !input.is_well_formed() {
        return Err(Error::Config("stream shape differs from the plan".into()));
    }
    let m = input.limbs();
    let per = plan.n / plan.p;
    let mut buffer: Vec<Option<Vec<u64>>> = vec![None; m * per];
    for c in &input.chunks {
        let routed = plan.routings[c.chunk_index].apply(&c.values);
        buffer[plan.dest_chunk[c.chunk_index] * m + c.limb_index] = Some(routed);
    }
    let chunks = buffer
        .into_iter()
        .enumerate()
        .map(|(t, v)| StreamChunk {
            limb_index: t % m,
            chunk_index: t / m,
            values: v.expect("destination map is a bijection"),
        })
        .collect();
    Ok(AutomorphismRun {
        output: InterleavedStream { chunks, ..input.clone() },
        cycle_count: (m * per + network_depth(plan.p)) as u64,
    })
}
