//! Limb-interleaved chunk streams.
//!
//! A limb of `N` values is cut into `N/p` chunks of `p` values. Chunk `o`
//! holds the storage positions `o, o + N/p, o + 2N/p, ...`, so each chunk is
//! evenly spaced. Chunks of `m` limbs are interleaved: stream position `t`
//! carries limb `t mod m`, chunk `t / m`.

use serde::{Deserialize, Serialize};

use super::{LimbMatrix, Order, Rep};
use crate::error::{Error, Result};
use crate::rns::PrimeModulus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamChunk {
    pub limb_index: usize,
    pub chunk_index: usize,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleavedStream {
    pub n: usize,
    pub p: usize,
    pub basis: Vec<PrimeModulus>,
    pub rep: Rep,
    pub order: Order,
    pub chunks: Vec<StreamChunk>,
}

impl InterleavedStream {
    pub fn limbs(&self) -> usize {
        self.basis.len()
    }

    pub fn chunks_per_limb(&self) -> usize {
        self.n / self.p
    }

    /// Storage position of lane `k` in chunk `o`.
    pub fn position(&self, chunk: usize, lane: usize) -> usize {
        chunk + lane * self.chunks_per_limb()
    }

    /// Checks the interleaving invariant at every stream position.
    pub fn is_well_formed(&self) -> bool {
        let m = self.limbs();
        m > 0
            && self.chunks.len() == m * self.chunks_per_limb()
            && self.chunks.iter().enumerate().all(|(t, c)| {
                c.limb_index == t % m && c.chunk_index == t / m && c.values.len() == self.p
            })
    }
}

fn check_lanes(n: usize, p: usize) -> Result<()> {
    if !p.is_power_of_two() || p == 0 || p > n || n % p != 0 {
        return Err(Error::Config(format!("{p} lanes cannot stream a degree-{n} limb")));
    }
    Ok(())
}

pub fn to_interleaved(x: &LimbMatrix, p: usize) -> Result<InterleavedStream> {
    let n = x.n();
    check_lanes(n, p)?;
    let per = n / p;
    let m = x.limbs();
    let mut chunks = Vec::with_capacity(m * per);
    for o in 0..per {
        for (l, row) in x.rows.iter().enumerate() {
            chunks.push(StreamChunk {
                limb_index: l,
                chunk_index: o,
                values: (0..p).map(|k| row[o + k * per]).collect(),
            });
        }
    }
    Ok(InterleavedStream {
        n,
        p,
        basis: x.basis.clone(),
        rep: x.rep,
        order: x.order,
        chunks,
    })
}

/// Inverse of [`to_interleaved`]. Chunks may arrive in any order as long as
/// every (limb, chunk) pair appears exactly once.
pub fn from_interleaved(s: &InterleavedStream) -> Result<LimbMatrix> {
    check_lanes(s.n, s.p)?;
    let per = s.chunks_per_limb();
    let mut rows = vec![vec![0u64; s.n]; s.limbs()];
    let mut seen = vec![false; s.limbs() * per];
    for c in &s.chunks {
        if c.limb_index >= s.limbs() || c.chunk_index >= per || c.values.len() != s.p {
            return Err(Error::Malformed("chunk out of range".into()));
        }
        let slot = c.limb_index * per + c.chunk_index;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::Malformed("duplicate chunk in stream".into()));
        }
        for (k, &v) in c.values.iter().enumerate() {
            rows[c.limb_index][c.chunk_index + k * per] = v;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Malformed("stream is missing chunks".into()));
    }
    Ok(LimbMatrix {
        basis: s.basis.clone(),
        rows,
        rep: s.rep,
        order: s.order,
    })
}
