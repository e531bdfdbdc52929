//! Functional and cycle-level models of a streaming CKKS accelerator for
//! encrypted matrix-vector products.

pub mod ckks;
pub mod counters;
pub mod error;
pub mod gsc;
pub mod hw;
pub mod matvec;
pub mod params;
pub mod perf;
pub mod poly;
pub mod rns;
pub mod workload;

pub use error::{Error, Result};
