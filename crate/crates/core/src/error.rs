use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("not enough NTT-friendly primes of {bits} bits for ring degree {n} (needed {needed}, found {found})")]
    NotEnoughPrimes {
        bits: u32,
        n: usize,
        needed: usize,
        found: usize,
    },
    #[error("bit width {0} exceeds the 40-bit modulus cap")]
    BitWidthTooLarge(u32),
    #[error("ring degree {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("log2(QP) = {actual} exceeds the configured cap of {cap} bits")]
    LogQpCap { actual: u32, cap: u32 },
    #[error("{value} has no inverse modulo {modulus}")]
    NotInvertible { value: u64, modulus: u64 },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("representation mismatch: expected {expected}, found {found}")]
    RepMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("encoded coefficient magnitude exceeds the modulus budget at level {level}")]
    CoefficientOverflow { level: usize },
    #[error("diagonal coefficient {value} violates the single-limb bound {bound}")]
    OfLimbBound { value: i128, bound: u64 },
    #[error("level or scale mismatch: {0}")]
    LevelMismatch(String),
    #[error("missing rotation key for step {0}")]
    MissingRotationKey(i64),
    #[error("automorphism step {r} is invalid for ring degree {n}")]
    InvalidRotation { r: i64, n: usize },
    #[error("input is not a permutation")]
    NotAPermutation,
    #[error("hardware configuration violated: {0}")]
    Config(String),
    #[error("on-chip storage overflow: need {needed} bytes, have {available}; largest fitting giant-step count is {fitting_n2}")]
    SramOverflow {
        needed: u64,
        available: u64,
        fitting_n2: usize,
    },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
