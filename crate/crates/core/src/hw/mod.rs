//! Cycle-level models of the accelerator's functional units.

pub mod mdc;
pub mod bconv_array;
pub mod benes;
pub mod hadamard;
