//! Bundled parameter sets.
//!
//! Sets III and IV come with a bootstrapping extension: `boot_levels` more
//! scaling primes on top of the residual chain and a larger digit size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rns::ChainParams;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub name: String,
    pub log_n: u32,
    pub log_slots: u32,
    pub l_eff: usize,
    pub alpha: usize,
    /// Digit count as tabulated; the chain itself derives `⌈limbs/α⌉`.
    pub dnum: usize,
    pub q0_bits: Vec<u32>,
    pub qi_bits: u32,
    pub p_bits: u32,
    pub h: usize,
    pub boot_levels: usize,
    pub boot_alpha: usize,
    pub log_qp_cap: Option<u32>,
}

/// Limb-count view of a chain, enough for every closed-form count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainShape {
    pub n: u64,
    /// q limbs at the top level.
    pub q_limbs: u64,
    /// Digit size.
    pub alpha: u64,
    /// Number of special primes.
    pub k: u64,
}

impl ChainShape {
    pub fn max_level(&self) -> u64 {
        self.q_limbs - 1
    }

    pub fn dnum(&self, level: u64) -> u64 {
        (level + 1).div_ceil(self.alpha)
    }

    pub fn with_n(self, n: u64) -> Self {
        ChainShape { n, ..self }
    }
}

impl ParameterSet {
    pub fn n(&self) -> usize {
        1 << self.log_n
    }

    /// q limbs of the residual chain.
    pub fn residual_limbs(&self) -> usize {
        self.q0_bits.len() + self.l_eff
    }

    pub fn has_boot(&self) -> bool {
        self.boot_levels > 0
    }

    pub fn residual_shape(&self) -> ChainShape {
        ChainShape {
            n: self.n() as u64,
            q_limbs: self.residual_limbs() as u64,
            alpha: self.alpha as u64,
            k: self.alpha as u64,
        }
    }

    /// Residual chain extended by the bootstrapping levels.
    pub fn boot_shape(&self) -> Result<ChainShape> {
        if !self.has_boot() {
            return Err(Error::Config(format!("set {} has no bootstrapping levels", self.name)));
        }
        Ok(ChainShape {
            n: self.n() as u64,
            q_limbs: (self.residual_limbs() + self.boot_levels) as u64,
            alpha: self.boot_alpha as u64,
            k: self.boot_alpha as u64,
        })
    }

    /// Shape used at `level`: the residual chain below its top, the
    /// bootstrapping chain above.
    pub fn shape_for_level(&self, level: usize) -> Result<ChainShape> {
        if level < self.residual_limbs() {
            Ok(self.residual_shape())
        } else {
            let s = self.boot_shape()?;
            if level as u64 > s.max_level() {
                return Err(Error::InvalidParameter(format!("level {level} above set {}", self.name)));
            }
            Ok(s)
        }
    }

    /// Chain parameters for the residual chain, optionally at a smaller
    /// ring degree for functional runs.
    pub fn chain_params(&self, n_override: Option<usize>) -> ChainParams {
        ChainParams {
            n_max: n_override.unwrap_or(self.n()),
            q0_bits: self.q0_bits.clone(),
            qi_bits: self.qi_bits,
            level_count: self.l_eff,
            alpha: self.alpha,
            p_bits: self.p_bits,
            scale_bits: self.qi_bits,
            log_qp_cap: self.log_qp_cap,
        }
    }

    pub fn log_qp(&self, shape: &ChainShape) -> u64 {
        let q0: u64 = self.q0_bits.iter().map(|&b| b as u64).sum();
        q0 + (shape.q_limbs - self.q0_bits.len() as u64) * self.qi_bits as u64 + shape.k * self.p_bits as u64
    }
}

pub const PRESET_NAMES: [&str; 4] = ["I", "II", "III", "IV"];

pub fn preset(name: &str) -> Result<ParameterSet> {
    let small = |name: &str, l_eff, alpha, dnum| ParameterSet {
        name: name.into(),
        log_n: 14,
        log_slots: 13,
        l_eff,
        alpha,
        dnum,
        q0_bits: vec![40],
        qi_bits: 32,
        p_bits: 40,
        h: 192,
        boot_levels: 0,
        boot_alpha: 0,
        log_qp_cap: None,
    };
    let large = |name: &str, l_eff| ParameterSet {
        name: name.into(),
        log_n: 16,
        log_slots: 15,
        l_eff,
        alpha: 5,
        dnum: 2,
        q0_bits: vec![24, 24],
        qi_bits: 36,
        p_bits: 40,
        h: 1024,
        boot_levels: 15,
        boot_alpha: 14,
        log_qp_cap: Some(1630),
    };
    match name.trim_start_matches("set").trim_start_matches("Set").trim().to_ascii_uppercase().as_str() {
        "I" | "1" => Ok(small("I", 5, 2, 3)),
        "II" | "2" => Ok(small("II", 7, 4, 2)),
        "III" | "3" => Ok(large("III", 8)),
        "IV" | "4" => Ok(large("IV", 9)),
        _ => Err(Error::Config(format!("unknown parameter set {name:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rns::generate_chain;

    #[test]
    fn tabulated_digit_counts() {
        for name in ["I", "II", "III"] {
            let s = preset(name).unwrap();
            assert_eq!(s.residual_shape().dnum(s.residual_shape().max_level()), s.dnum as u64, "{name}");
        }
        // eleven limbs in five-limb digits need three
        let iv = preset("IV").unwrap();
        assert_eq!(iv.residual_shape().dnum(10), 3);
        let boot = preset("III").unwrap().boot_shape().unwrap();
        assert_eq!(boot.q_limbs, 25);
        assert_eq!(boot.dnum(boot.max_level()), 2);
        assert!(preset("III").unwrap().log_qp(&boot) <= 1630);
        assert!(preset("I").unwrap().boot_shape().is_err());
    }

    #[test]
    fn desk_scale_chains_build() {
        for name in PRESET_NAMES {
            let s = preset(name).unwrap();
            let c = generate_chain(&s.chain_params(Some(64))).unwrap();
            assert_eq!(c.q_limbs.len(), s.residual_limbs());
            assert_eq!(c.p_limbs.len(), s.alpha);
        }
        assert_eq!(preset("set III").unwrap().name, "III");
        assert!(preset("V").is_err());
    }
}
