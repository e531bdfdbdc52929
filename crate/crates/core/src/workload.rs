//! Workload descriptors and the analytical and functional runners.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ckks::{decrypt_decode, encrypt, keygen};
use crate::counters::MultCounts;
use crate::error::{Error, Result};
use crate::gsc::{modchange_timing, schedule_keyswitch, schedule_matvec, ChipConfig};
use crate::matvec::{cleartext_matvec, matvec_bsgs, replicate, BsgsPlan, DiagonalizedMatrix, HoistingMode};
use crate::params::{preset, ChainShape, ParameterSet};
use crate::perf::{key_bytes, matvec_dram, roofline, Counter, DramBytes, OpCounts, RooflinePoint, WORD_BYTES};
use crate::rns::generate_chain;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest ring degree accepted for functional runs.
pub const FUNCTIONAL_N_MAX: usize = 1 << 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatvecOp {
    /// Number of nonzero diagonals.
    pub d: usize,
    pub level: u64,
    pub mode: String,
    pub n1: usize,
    pub n2: usize,
    /// Vector width for functional runs; defaults to the next power of
    /// two covering `n1·n2`.
    #[serde(default)]
    pub width: Option<usize>,
    /// Fraction of the `d` diagonals kept, chosen from the seed.
    #[serde(default)]
    pub density: Option<f64>,
}

impl MatvecOp {
    pub fn hoisting(&self) -> Result<HoistingMode> {
        self.mode.parse()
    }

    pub fn plan(&self) -> BsgsPlan {
        BsgsPlan { n1: self.n1, n2: self.n2 }
    }

    pub fn width(&self) -> usize {
        self.width.unwrap_or_else(|| (self.n1 * self.n2).next_power_of_two())
    }

    /// Diagonal indices used by both runners.
    pub fn diagonals(&self, seed: u64) -> BTreeSet<usize> {
        let density = self.density.unwrap_or(1.0);
        if density >= 1.0 {
            return (0..self.d).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.d as u64);
        (0..self.d).filter(|_| rng.gen_bool(density.clamp(0.0, 1.0))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    Matvec(MatvecOp),
    Keyswitch { level: u64 },
    Hmult { level: u64 },
    Hadd { level: u64 },
    BootMarker { t_boot_s: f64 },
}

impl Op {
    pub fn level(&self) -> Option<u64> {
        match self {
            Op::Matvec(m) => Some(m.level),
            Op::Keyswitch { level } | Op::Hmult { level } | Op::Hadd { level } => Some(*level),
            Op::BootMarker { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::Matvec(_) => "matvec",
            Op::Keyswitch { .. } => "keyswitch",
            Op::Hmult { .. } => "hmult",
            Op::Hadd { .. } => "hadd",
            Op::BootMarker { .. } => "boot_marker",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub schema: u32,
    pub name: String,
    pub parameter_set: String,
    #[serde(default, with = "serde_yaml::with::singleton_map_recursive")]
    pub ops: Vec<Op>,
    /// Bandwidths in bytes per second; empty means the chip's own.
    #[serde(default)]
    pub bandwidths: Vec<f64>,
    #[serde(default = "one")]
    pub repetitions: u64,
}

fn one() -> u64 {
    1
}

impl WorkloadSpec {
    pub fn from_yaml(text: &str) -> Result<Self> {
        let spec: WorkloadSpec = serde_yaml::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("workload serializes")
    }

    pub fn params(&self) -> Result<ParameterSet> {
        preset(&self.parameter_set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Malformed(format!("unsupported schema {}", self.schema)));
        }
        let params = self.params()?;
        let mut last: Option<u64> = None;
        for (i, op) in self.ops.iter().enumerate() {
            match op {
                Op::BootMarker { t_boot_s } => {
                    if !(*t_boot_s >= 0.0) {
                        return Err(Error::Malformed(format!("op {i}: negative bootstrap time")));
                    }
                    last = None;
                    continue;
                }
                Op::Matvec(m) => {
                    m.hoisting()?;
                    if m.n1 == 0 || m.n2 == 0 || m.d > m.n1 * m.n2 {
                        return Err(Error::Malformed(format!("op {i}: {} diagonals do not fit {}×{}", m.d, m.n1, m.n2)));
                    }
                    if m.width() < m.d {
                        return Err(Error::Malformed(format!("op {i}: width below the diagonal count")));
                    }
                }
                _ => {}
            }
            let level = op.level().expect("non-marker ops carry a level");
            params.shape_for_level(level as usize)?;
            if last.is_some_and(|l| level > l) {
                return Err(Error::Malformed(format!("op {i}: level rises without a bootstrap")));
            }
            last = Some(level);
        }
        if self.bandwidths.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::Malformed("bandwidths must be positive".into()));
        }
        Ok(())
    }
}

/// Chip description file: the default chip with any field overridden.
pub fn chip_from_yaml(text: &str) -> Result<ChipConfig> {
    let value: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let mut map = match value {
        serde_yaml::Value::Mapping(m) => m,
        serde_yaml::Value::Null => Default::default(),
        _ => return Err(Error::Malformed("chip file must be a mapping".into())),
    };
    match map.remove("schema").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        _ => return Err(Error::Malformed("chip file needs `schema: 1`".into())),
    }
    let explicit_inventory = map.contains_key("inventory");
    let mut base = serde_yaml::to_value(ChipConfig::default()).expect("chip serializes");
    if let serde_yaml::Value::Mapping(b) = &mut base {
        for (k, v) in map {
            if !b.contains_key(&k) {
                return Err(Error::Malformed(format!("unknown chip field {k:?}")));
            }
            b.insert(k, v);
        }
    }
    let mut chip: ChipConfig = serde_yaml::from_value(base).map_err(|e| Error::Malformed(e.to_string()))?;
    if !explicit_inventory {
        chip.inventory = crate::gsc::MultiplierInventory::for_geometry(&chip);
    }
    chip.sram_allocation()?;
    Ok(chip)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpReport {
    pub index: usize,
    pub op: String,
    pub level: Option<u64>,
    pub cycles: u64,
    pub wall_s: f64,
    pub stall_cycles: u64,
    pub counts: OpCounts,
    pub roofline: Option<RooflinePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub workload: String,
    pub bandwidth: f64,
    pub repetitions: u64,
    pub ops: Vec<OpReport>,
    /// Sum over the ops, times the repetition count.
    pub total: OpReport,
}

impl RunReport {
    pub const CSV_HEADER: &'static str =
        "workload,bandwidth,index,op,level,cycles,wall_s,stall_cycles,mults,dram_bytes,intensity,utilization";

    pub fn csv_rows(&self) -> Vec<String> {
        self.ops
            .iter()
            .chain(std::iter::once(&self.total))
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{:e},{},{},{},{},{}",
                    self.workload,
                    self.bandwidth,
                    if r.op == "total" { "total".to_string() } else { r.index.to_string() },
                    r.op,
                    r.level.map_or(String::new(), |l| l.to_string()),
                    r.cycles,
                    r.wall_s,
                    r.stall_cycles,
                    r.counts.mults.total(),
                    r.counts.dram.total(),
                    r.roofline.map_or(String::new(), |p| format!("{:.6}", p.intensity)),
                    r.roofline.map_or(String::new(), |p| format!("{:.6}", p.utilization)),
                )
            })
            .collect()
    }

    pub fn stall_fraction(&self) -> f64 {
        if self.total.cycles == 0 {
            0.0
        } else {
            self.total.stall_cycles as f64 / self.total.cycles as f64
        }
    }
}

/// `scheduled` already includes `stall` cycles.
fn finish(index: usize, op: &Op, scheduled: u64, stall: u64, counts: OpCounts, chip: &ChipConfig) -> Result<OpReport> {
    // DRAM can never move more than the bandwidth allows
    let dram = chip.load_cycles(counts.dram.total());
    let cycles = scheduled.max(dram);
    let stall_cycles = stall + (cycles - scheduled);
    point(index, op.name(), op.level(), cycles, stall_cycles, counts, chip)
}

fn point(
    index: usize,
    op: &str,
    level: Option<u64>,
    cycles: u64,
    stall_cycles: u64,
    counts: OpCounts,
    chip: &ChipConfig,
) -> Result<OpReport> {
    let roof = if cycles > 0 && counts.mults.total() > 0 {
        Some(roofline(&counts, chip.inventory.total(), chip.clock_hz, chip.dram_bw_bytes_per_s, cycles)?)
    } else {
        None
    };
    Ok(OpReport {
        index,
        op: op.into(),
        level,
        cycles,
        wall_s: cycles as f64 / chip.clock_hz,
        stall_cycles,
        counts,
        roofline: roof,
    })
}

fn ct_bytes(shape: &ChainShape, limbs: u64) -> u64 {
    2 * limbs * shape.n * WORD_BYTES
}

fn analyze_op(index: usize, op: &Op, params: &ParameterSet, chip: &ChipConfig, seed: u64) -> Result<OpReport> {
    let level = match op {
        Op::BootMarker { t_boot_s } => {
            let cycles = (t_boot_s * chip.clock_hz).round() as u64;
            return point(index, op.name(), None, cycles, 0, OpCounts::default(), chip);
        }
        _ => op.level().expect("level"),
    };
    let shape = params.shape_for_level(level as usize)?;
    let n = shape.n as usize;
    let per = shape.n / chip.p as u64;
    let limbs = level + 1;
    let counter = Counter::new(shape).with_twiddle_gen(true);
    let ks = || schedule_keyswitch(&shape, level, chip);
    let rescale = |polys: usize| {
        let t = modchange_timing(chip, n, 1, level as usize);
        t.fill + polys as u64 * t.steady
    };
    match op {
        Op::Matvec(m) => {
            let plan = m.plan();
            let diags = m.diagonals(seed);
            let mode = m.hoisting()?;
            if mode == HoistingMode::DoubleHoisted {
                let tl = schedule_matvec(&plan, level, &diags, &shape, chip)?;
                let counts = OpCounts { mults: tl.mults, dram: tl.dram };
                return finish(index, op, tl.total_cycles, tl.stall_cycles + tl.key_wait_cycles, counts, chip);
            }
            // without the GSC dataflow every key switch runs through the
            // ModChange pipeline and OF-Limb gets a single direction
            let ks = ks()?.total_cycles;
            let giants = (1..plan.n2).filter(|&j| (0..plan.n1).any(|i| diags.contains(&(plan.n1 * j + i)))).count() as u64;
            let babies = plan.n1 as u64 - 1;
            let baby = match mode {
                HoistingMode::NonHoisted => babies * ks,
                _ if babies == 0 => 0,
                _ => {
                    let up = schedule_keyswitch(&shape, level, chip)?;
                    let modup = up.phases[0].end_cycle;
                    modup + babies * (ks - modup)
                }
            };
            let diag = diags.len() as u64 * limbs * per;
            let compute = baby + giants * ks + diag + rescale(2);
            let counts = OpCounts {
                mults: counter.matvec_bsgs(level, &plan, &diags, mode),
                dram: matvec_dram(&shape, level, &plan, &diags),
            };
            finish(index, op, compute, 0, counts, chip)
        }
        Op::Keyswitch { .. } => {
            let tl = ks()?;
            let counts = OpCounts {
                mults: tl.mults,
                dram: DramBytes { keys: tl.dram.keys, diagonals: 0, ct_io: ct_bytes(&shape, 2 * limbs) },
            };
            finish(index, op, tl.total_cycles, 0, counts, chip)
        }
        Op::Hmult { .. } => {
            let compute = 2 * limbs * per + ks()?.total_cycles + rescale(2);
            let counts = OpCounts {
                mults: counter.h_mult(level, true),
                dram: DramBytes { keys: key_bytes(&shape, level), diagonals: 0, ct_io: ct_bytes(&shape, 3 * limbs - 1) },
            };
            finish(index, op, compute, 0, counts, chip)
        }
        Op::Hadd { .. } => {
            let counts = OpCounts {
                mults: MultCounts::default(),
                dram: DramBytes { keys: 0, diagonals: 0, ct_io: ct_bytes(&shape, 3 * limbs) },
            };
            finish(index, op, 2 * limbs * per, 0, counts, chip)
        }
        Op::BootMarker { .. } => unreachable!(),
    }
}

/// Analytical run at one bandwidth.
pub fn perf_run(spec: &WorkloadSpec, chip: &ChipConfig, seed: u64) -> Result<RunReport> {
    spec.validate()?;
    let params = spec.params()?;
    if params.log_n > chip.log_n {
        return Err(Error::Config(format!("chip supports degrees up to 2^{}", chip.log_n)));
    }
    let ops = spec
        .ops
        .iter()
        .enumerate()
        .map(|(i, op)| analyze_op(i, op, &params, chip, seed))
        .collect::<Result<Vec<_>>>()?;
    let reps = spec.repetitions;
    let mut counts = OpCounts::default();
    let (mut cycles, mut stalls) = (0, 0);
    for r in &ops {
        counts = counts + r.counts;
        cycles += r.cycles;
        stalls += r.stall_cycles;
    }
    let counts = OpCounts {
        mults: counts.mults.scaled(reps),
        dram: DramBytes {
            keys: counts.dram.keys * reps,
            diagonals: counts.dram.diagonals * reps,
            ct_io: counts.dram.ct_io * reps,
        },
    };
    let total = point(ops.len(), "total", None, cycles * reps, stalls * reps, counts, chip)?;
    Ok(RunReport {
        workload: spec.name.clone(),
        bandwidth: chip.dram_bw_bytes_per_s,
        repetitions: reps,
        ops,
        total,
    })
}

/// One report per listed bandwidth.
pub fn perf_runs(spec: &WorkloadSpec, chip: &ChipConfig, seed: u64) -> Result<Vec<RunReport>> {
    if spec.bandwidths.is_empty() {
        return Ok(vec![perf_run(spec, chip, seed)?]);
    }
    spec.bandwidths
        .iter()
        .map(|&bw| perf_run(spec, &ChipConfig { dram_bw_bytes_per_s: bw, ..chip.clone() }, seed))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalOp {
    pub index: usize,
    pub op: String,
    pub passed: bool,
    pub max_error: f64,
    pub rotations: usize,
    pub key_switches: usize,
    pub mults: MultCounts,
    /// Closed-form count of the same operation.
    pub model_mults: MultCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub workload: String,
    pub n: usize,
    pub ops: Vec<FunctionalOp>,
    /// Sum of the decrypted result slots, for run-to-run comparison.
    pub checksum: f64,
}

impl FunctionalReport {
    pub fn passed(&self) -> bool {
        self.ops.iter().all(|o| o.passed)
    }
}

pub const FUNCTIONAL_TOLERANCE: f64 = 1e-3;

/// Runs every matvec of the workload on encrypted data at ring degree `n`
/// and checks it against the cleartext product. Other ops only advance.
pub fn simulate(spec: &WorkloadSpec, n: usize, seed: u64) -> Result<FunctionalReport> {
    spec.validate()?;
    if n > FUNCTIONAL_N_MAX {
        return Err(Error::InvalidParameter(format!("functional runs are limited to N ≤ {FUNCTIONAL_N_MAX}")));
    }
    let params = spec.params()?;
    let chain = generate_chain(&params.chain_params(Some(n)))?;
    let shape = ChainShape {
        n: n as u64,
        q_limbs: chain.q_limbs.len() as u64,
        alpha: chain.alpha as u64,
        k: chain.p_limbs.len() as u64,
    };
    let mut steps = BTreeSet::new();
    for op in &spec.ops {
        if let Op::Matvec(m) = op {
            if m.level as usize > chain.max_level() {
                return Err(Error::InvalidParameter(format!("level {} above the functional chain", m.level)));
            }
            steps.extend(m.plan().rotation_steps());
        }
    }
    let steps: Vec<i64> = steps.into_iter().collect();
    let keys = keygen(&chain, n, params.h.min(n / 2), seed, &steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FunctionalReport {
        workload: spec.name.clone(),
        n,
        ops: Vec::new(),
        checksum: 0.0,
    };
    for (index, op) in spec.ops.iter().enumerate() {
        let Op::Matvec(mv) = op else { continue };
        let w = mv.width();
        let diags = mv.diagonals(seed);
        let matrix = DiagonalizedMatrix {
            width: w,
            diagonals: diags.iter().map(|&k| (k, (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect::<BTreeMap<_, _>>(),
        };
        let v: Vec<f64> = (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ct = encrypt(&replicate(&v, n / 2), mv.level as usize, &chain, &keys.secret, rng.gen())?;
        let mode = mv.hoisting()?;
        let (out, stats) = matvec_bsgs(&ct, &matrix, &mv.plan(), mode, &keys, &chain)?;
        let got: Vec<Complex64> = decrypt_decode(&out, &keys.secret)?;
        let want = cleartext_matvec(&matrix.to_dense(), &v);
        let max_error = want.iter().enumerate().map(|(i, w)| (got[i].re - w).abs()).fold(0.0, f64::max);
        report.checksum += got.iter().map(|c| c.re).sum::<f64>();
        report.ops.push(FunctionalOp {
            index,
            op: op.name().into(),
            passed: max_error < FUNCTIONAL_TOLERANCE,
            max_error,
            rotations: stats.rotation_slots,
            key_switches: stats.key_switches,
            mults: stats.mults,
            model_mults: Counter::new(shape).matvec_bsgs(mv.level, &mv.plan(), &diags, mode),
        });
    }
    Ok(report)
}

/// Bundled workload files by name.
pub fn bundled(name: &str) -> Result<WorkloadSpec> {
    let text = match name {
        "bsgs_small" => include_str!("../workloads/bsgs_small.yaml"),
        "bootstrap" => include_str!("../workloads/bootstrap.yaml"),
        "set_iv_matvec" => include_str!("../workloads/set_iv_matvec.yaml"),
        _ => return Err(Error::Config(format!("no bundled workload {name:?}"))),
    };
    WorkloadSpec::from_yaml(text)
}

pub const BUNDLED: [&str; 3] = ["bsgs_small", "bootstrap", "set_iv_matvec"];

pub const BUNDLED_CHIP: &str = include_str!("../workloads/chip.yaml");
