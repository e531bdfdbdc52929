//! Thread-local modular-multiplication counters.
//!
//! Functional kernels call [`record`] with the number of modular
//! multiplications they perform. Tests snapshot the counters around a call
//! and compare against the closed forms in [`crate::perf`].

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    Ntt,
    Intt,
    Bconv,
    KeyMult,
    DiagMult,
    /// Multiplication of a whole limb by a scalar constant (P, P^-1, q_l^-1).
    Scale,
    /// Ciphertext-ciphertext tensoring in HMult.
    Tensor,
}

impl Kernel {
    pub const ALL: [Kernel; 7] = [
        Kernel::Ntt,
        Kernel::Intt,
        Kernel::Bconv,
        Kernel::KeyMult,
        Kernel::DiagMult,
        Kernel::Scale,
        Kernel::Tensor,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Ntt => "ntt",
            Kernel::Intt => "intt",
            Kernel::Bconv => "bconv",
            Kernel::KeyMult => "keymult",
            Kernel::DiagMult => "diagmult",
            Kernel::Scale => "scale",
            Kernel::Tensor => "tensor",
        }
    }
}

/// Modular multiplications per kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultCounts {
    pub by_kernel: [u64; 7],
}

impl MultCounts {
    pub fn get(&self, k: Kernel) -> u64 {
        self.by_kernel[k.index()]
    }

    pub fn add(&mut self, k: Kernel, n: u64) {
        self.by_kernel[k.index()] += n;
    }

    pub fn with(mut self, k: Kernel, n: u64) -> Self {
        self.add(k, n);
        self
    }

    pub fn total(&self) -> u64 {
        self.by_kernel.iter().sum()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        let mut out = *self;
        out.by_kernel.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

impl std::ops::Add for MultCounts {
    type Output = MultCounts;
    fn add(mut self, rhs: MultCounts) -> MultCounts {
        self += rhs;
        self
    }
}

impl std::ops::AddAssign for MultCounts {
    fn add_assign(&mut self, rhs: MultCounts) {
        for (a, b) in self.by_kernel.iter_mut().zip(rhs.by_kernel) {
            *a += b;
        }
    }
}

impl std::ops::Sub for MultCounts {
    type Output = MultCounts;
    fn sub(mut self, rhs: MultCounts) -> MultCounts {
        for (a, b) in self.by_kernel.iter_mut().zip(rhs.by_kernel) {
            *a -= b;
        }
        self
    }
}

impl std::iter::Sum for MultCounts {
    fn sum<I: Iterator<Item = MultCounts>>(iter: I) -> Self {
        iter.fold(MultCounts::default(), |a, b| a + b)
    }
}

thread_local! {
    static COUNTS: RefCell<MultCounts> = RefCell::new(MultCounts::default());
}

pub fn record(k: Kernel, n: u64) {
    COUNTS.with(|c| c.borrow_mut().add(k, n));
}

pub fn snapshot() -> MultCounts {
    COUNTS.with(|c| *c.borrow())
}

pub fn reset() {
    COUNTS.with(|c| *c.borrow_mut() = MultCounts::default());
}

/// Runs `f` and returns its result with the multiplications it performed.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, MultCounts) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}
