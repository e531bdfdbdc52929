//! Giant-step centric scheduling of double-hoisted BSGS products.
//!
//! The baby-step loop keeps the hoisted decomposition and one accumulator
//! per giant step on chip. Each iteration generates the `n2` diagonals of
//! one baby step with OF-Limb while the next rotation key streams in.
//! Giant rotations and the final ModDown run afterwards on the ModChange
//! pipeline.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ckks::{Ciphertext, KeySet};
use crate::counters::MultCounts;
use crate::error::{Error, Result};
use crate::hw::bconv_array::BconvArrayConfig;
use crate::hw::benes::network_depth;
use crate::hw::mdc::MdcConfig;
use crate::matvec::{matvec_bsgs, BsgsPlan, DiagonalizedMatrix, HoistingMode, MatvecStats};
use crate::params::ChainShape;
use crate::perf::{key_bytes, storage_report, Counter, DramBytes, WORD_BYTES};
use crate::rns::ModulusChain;

/// Modular multipliers per unit class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplierInventory {
    pub mdc: u64,
    pub bconv: u64,
    pub hadamard: u64,
}

impl MultiplierInventory {
    /// Two multipliers per butterfly cell on every twiddled stage, one row
    /// of pre-scaling multipliers above the BConv array, four per
    /// Hadamard cell.
    pub fn for_geometry(chip: &ChipConfig) -> Self {
        let p = chip.p as u64;
        MultiplierInventory {
            mdc: chip.mdc_instances as u64 * (chip.log_n as u64 - 1) * p,
            bconv: (chip.bconv.height as u64 + 1) * chip.bconv.width as u64,
            hadamard: chip.hadamard_units as u64 * p * chip.hadamard_height as u64 * 4,
        }
    }

    pub fn total(&self) -> u64 {
        self.mdc + self.bconv + self.hadamard
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipConfig {
    pub clock_hz: f64,
    pub p: usize,
    /// `log2` of the largest ring degree.
    pub log_n: u32,
    pub mdc_instances: usize,
    /// Whether the INTT instance may be reversed for OF-Limb.
    pub bidirectional: bool,
    pub interleave_factor: usize,
    pub twiddle_groups: usize,
    pub bconv: BconvArrayConfig,
    pub hadamard_units: usize,
    pub hadamard_height: usize,
    pub sram_bytes: f64,
    pub dram_bw_bytes_per_s: f64,
    pub word_bits: u32,
    /// Charge the MDC delay lines against `sram_bytes`.
    pub mdc_buffers_in_sram: bool,
    /// Diagonal `q_0` limbs share DRAM bandwidth with key loads.
    pub diagonals_share_bandwidth: bool,
    pub inventory: MultiplierInventory,
}

impl Default for ChipConfig {
    fn default() -> Self {
        let mut c = ChipConfig {
            clock_hz: 1e9,
            p: 512,
            log_n: 16,
            mdc_instances: 2,
            bidirectional: true,
            interleave_factor: 42,
            twiddle_groups: 2,
            bconv: BconvArrayConfig::new(16, 512),
            hadamard_units: 2,
            hadamard_height: 2,
            sram_bytes: 210e6,
            dram_bw_bytes_per_s: 1e12,
            word_bits: 40,
            mdc_buffers_in_sram: false,
            diagonals_share_bandwidth: true,
            inventory: MultiplierInventory {
                mdc: 0,
                bconv: 0,
                hadamard: 0,
            },
        };
        c.inventory = MultiplierInventory::for_geometry(&c);
        c
    }
}

/// SRAM split between the fixed structures and the ciphertext cache.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SramAllocation {
    pub twiddles: f64,
    pub mdc_buffers: f64,
    pub cache: f64,
}

impl ChipConfig {
    pub fn n(&self) -> usize {
        1 << self.log_n
    }

    /// Same chip with bandwidth and lane count scaled by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        let mut c = self.clone();
        c.p *= factor;
        c.dram_bw_bytes_per_s *= factor as f64;
        c.bconv.width *= factor;
        c.inventory = MultiplierInventory::for_geometry(&c);
        c
    }

    pub fn mdc(&self) -> MdcConfig {
        MdcConfig::new(self.p, self.log_n, self.interleave_factor)
    }

    pub fn sram_allocation(&self) -> Result<SramAllocation> {
        let s = storage_report(
            self.n(),
            self.p,
            self.interleave_factor,
            self.interleave_factor,
            self.word_bits,
            self.twiddle_groups,
            self.mdc_instances,
        );
        let mdc = if self.mdc_buffers_in_sram { s.mdc_buffer_bytes } else { 0.0 };
        let cache = self.sram_bytes - s.twiddle_decomposed_bytes - mdc;
        if cache < 0.0 {
            return Err(Error::Config("fixed SRAM structures exceed the SRAM size".into()));
        }
        Ok(SramAllocation {
            twiddles: s.twiddle_decomposed_bytes,
            mdc_buffers: s.mdc_buffer_bytes,
            cache,
        })
    }

    /// DRAM transfer time in cycles.
    pub fn load_cycles(&self, bytes: u64) -> u64 {
        if bytes == 0 || self.dram_bw_bytes_per_s.is_infinite() {
            return 0;
        }
        (bytes as f64 / self.dram_bw_bytes_per_s * self.clock_hz).ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Unit {
    ModChangeIntt,
    ModChangeBconv,
    ModChangeNtt,
    HadamardKeyMult,
    HadamardDiag,
    Benes,
    Dram,
}

const MODCHANGE: [Unit; 3] = [Unit::ModChangeIntt, Unit::ModChangeBconv, Unit::ModChangeNtt];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    ModUp,
    KeyMult,
    ModDown,
    Rescale,
    BabyStep,
    Stall,
    Drain,
    GiantStep,
    KeyWait,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: String,
    pub kind: PhaseKind,
    pub start_cycle: u64,
    pub end_cycle: u64,
    pub units: Vec<Unit>,
    /// Bytes whose transfer is issued in this phase.
    pub dram_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheObject {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSnapshot {
    pub cycle: u64,
    pub objects: Vec<CacheObject>,
}

impl CacheSnapshot {
    pub fn total(&self) -> u64 {
        self.objects.iter().map(|o| o.bytes).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheLedger {
    pub capacity: u64,
    pub snapshots: Vec<CacheSnapshot>,
}

impl CacheLedger {
    pub fn peak(&self) -> u64 {
        self.snapshots.iter().map(CacheSnapshot::total).max().unwrap_or(0)
    }

    fn record(&mut self, cycle: u64, objects: &[(&str, u64)]) -> Result<()> {
        let snap = CacheSnapshot {
            cycle,
            objects: objects
                .iter()
                .filter(|o| o.1 > 0)
                .map(|&(name, bytes)| CacheObject { name: name.into(), bytes })
                .collect(),
        };
        if snap.total() > self.capacity {
            return Err(Error::Config(format!("cache holds {} bytes at cycle {cycle}", snap.total())));
        }
        self.snapshots.push(snap);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTimeline {
    pub phases: Vec<PhaseRecord>,
    /// Baby-loop cycles spent waiting for a key beyond OF-Limb generation.
    pub stall_cycles: u64,
    /// Key waits outside the baby-step loop.
    pub key_wait_cycles: u64,
    pub total_cycles: u64,
    pub directions: u32,
    pub dram: DramBytes,
    pub mults: MultCounts,
    pub cache: Option<CacheLedger>,
}

impl ScheduleTimeline {
    fn new(directions: u32) -> Self {
        ScheduleTimeline {
            phases: Vec::new(),
            stall_cycles: 0,
            key_wait_cycles: 0,
            total_cycles: 0,
            directions,
            dram: DramBytes::default(),
            mults: MultCounts::default(),
            cache: None,
        }
    }

    fn push(&mut self, phase: impl Into<String>, kind: PhaseKind, start: u64, len: u64, units: &[Unit], dram: u64) -> u64 {
        let end = start + len;
        if len > 0 {
            self.phases.push(PhaseRecord {
                phase: phase.into(),
                kind,
                start_cycle: start,
                end_cycle: end,
                units: units.to_vec(),
                dram_bytes: dram,
            });
        }
        self.total_cycles = self.total_cycles.max(end);
        end
    }

    pub fn stall_fraction(&self) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            self.stall_cycles as f64 / self.total_cycles as f64
        }
    }

    pub fn latency_s(&self, chip: &ChipConfig) -> f64 {
        self.total_cycles as f64 / chip.clock_hz
    }

    /// Fraction of the multiplier inventory busy over the whole run.
    pub fn utilization(&self, chip: &ChipConfig) -> f64 {
        if self.total_cycles == 0 {
            return 0.0;
        }
        self.mults.total() as f64 / (chip.inventory.total() as f64 * self.total_cycles as f64)
    }

    pub fn cycles_of(&self, kind: PhaseKind) -> u64 {
        self.phases.iter().filter(|p| p.kind == kind).map(|p| p.end_cycle - p.start_cycle).sum()
    }

    /// Checks that no unit is bound to two overlapping phases and that the
    /// phases cover `[0, total_cycles)` without gaps.
    pub fn validate(&self) -> Result<()> {
        let mut by_unit: std::collections::BTreeMap<Unit, Vec<(u64, u64)>> = Default::default();
        for p in &self.phases {
            for &u in &p.units {
                by_unit.entry(u).or_default().push((p.start_cycle, p.end_cycle));
            }
        }
        for (u, mut iv) in by_unit {
            iv.sort_unstable();
            if iv.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(Error::Config(format!("{u:?} is double-booked")));
            }
        }
        let mut iv: Vec<(u64, u64)> = self.phases.iter().map(|p| (p.start_cycle, p.end_cycle)).collect();
        iv.sort_unstable();
        let mut covered = 0;
        for (s, e) in iv {
            if s > covered {
                return Err(Error::Config(format!("timeline gap at cycle {covered}")));
            }
            covered = covered.max(e);
        }
        if covered != self.total_cycles {
            return Err(Error::Config("phases do not reach the end of the timeline".into()));
        }
        Ok(())
    }

    /// Phase records as a JSON array.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.phases).expect("phase records serialize")
    }

    pub const CSV_HEADER: &'static str = "config,cycles,stalls,dram_bytes,mults";

    pub fn summary_csv_row(&self, config: &str) -> String {
        format!(
            "{config},{},{},{},{}",
            self.total_cycles,
            self.stall_cycles,
            self.dram.total(),
            self.mults.total()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionGrant {
    pub directions: u32,
    pub hazard: Option<String>,
}

/// OF-Limb may borrow the ModChange INTT instance as a second forward
/// NTT only while no ModChange needs it.
pub fn schedule_bidirectional_oflimb(active: bool, modchange_busy: bool) -> DirectionGrant {
    match (active, modchange_busy) {
        (false, _) => DirectionGrant {
            directions: 1,
            hazard: None,
        },
        (true, false) => DirectionGrant {
            directions: 2,
            hazard: None,
        },
        (true, true) => DirectionGrant {
            directions: 1,
            hazard: Some("ModChange holds the INTT instance; OF-Limb stays unidirectional".into()),
        },
    }
}

/// Cycles of one ModChange pass `a → b` limbs, split into pipeline fill
/// and steady streaming at one limb per `N/p` cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModChangeTiming {
    pub fill: u64,
    pub steady: u64,
}

impl ModChangeTiming {
    pub fn total(&self) -> u64 {
        self.fill + self.steady
    }
}

pub fn modchange_timing(chip: &ChipConfig, n: usize, a: usize, b: usize) -> ModChangeTiming {
    let mdc = chip.mdc();
    let per = (n / chip.p) as u64;
    let steady = a.max(b) as u64 * per;
    let bconv_overhead = chip.bconv.cycle_count(n, a, b) - steady;
    ModChangeTiming {
        fill: mdc.fill_latency(n, a) + bconv_overhead + mdc.fill_latency(n, b),
        steady,
    }
}

/// Back-to-back passes share one pipeline fill.
fn pipelined(chip: &ChipConfig, n: usize, passes: &[(usize, usize)]) -> u64 {
    let t: Vec<ModChangeTiming> = passes.iter().map(|&(a, b)| modchange_timing(chip, n, a, b)).collect();
    t.iter().map(|x| x.fill).max().unwrap_or(0) + t.iter().map(|x| x.steady).sum::<u64>()
}

fn modup_passes(shape: &ChainShape, level: u64) -> Vec<(usize, usize)> {
    let qp = (level + 1 + shape.k) as usize;
    Counter::new(*shape)
        .digit_sizes(level)
        .into_iter()
        .map(|a| (a as usize, qp - a as usize))
        .collect()
}

fn moddown_passes(shape: &ChainShape, level: u64, polys: usize) -> Vec<(usize, usize)> {
    vec![(shape.k as usize, level as usize + 1); polys]
}

fn check_shape(shape: &ChainShape, level: u64, chip: &ChipConfig) -> Result<usize> {
    let n = shape.n as usize;
    if level > shape.max_level() {
        return Err(Error::InvalidParameter(format!("level {level} above the chain")));
    }
    if !n.is_power_of_two() || n < chip.p || n > chip.n() {
        return Err(Error::Config(format!("degree {n} does not fit {} lanes up to 2^{}", chip.p, chip.log_n)));
    }
    Ok(n)
}

/// One standalone key switch through the ModChange macro-pipeline.
pub fn schedule_keyswitch(shape: &ChainShape, level: u64, chip: &ChipConfig) -> Result<ScheduleTimeline> {
    let n = check_shape(shape, level, chip)?;
    let mut tl = ScheduleTimeline::new(1);
    let per = (n / chip.p) as u64;
    let modup = pipelined(chip, n, &modup_passes(shape, level));
    let up_end = tl.push("modup", PhaseKind::ModUp, 0, modup, &MODCHANGE, key_bytes(shape, level));
    // the KeyMult consumes ModUp output as it leaves the NTT
    let first_out = modup - modup_passes(shape, level).iter().map(|&(a, b)| a.max(b) as u64 * per).sum::<u64>();
    let km_end = up_end + chip.hadamard_height as u64;
    tl.push("keymult", PhaseKind::KeyMult, first_out, km_end - first_out, &[Unit::HadamardKeyMult], 0);
    let down = pipelined(chip, n, &moddown_passes(shape, level, 2));
    tl.push("moddown", PhaseKind::ModDown, km_end, down, &MODCHANGE, 0);
    tl.mults = Counter::new(*shape).with_twiddle_gen(true).key_switch(level);
    tl.dram.keys = key_bytes(shape, level);
    Ok(tl)
}

/// Words resident during the baby-step loop for `n2` giant steps.
pub fn cache_footprint(shape: &ChainShape, level: u64, n1: usize, n2: usize) -> Vec<(&'static str, u64)> {
    let w = shape.n * WORD_BYTES;
    let limbs = level + 1;
    let qp = limbs + shape.k;
    let hoisted = n1 > 1;
    let acc_limbs = if hoisted { qp } else { limbs };
    let key = key_bytes(shape, level);
    vec![
        ("input_c0", limbs * w),
        ("hoisted_decompose", if hoisted { shape.dnum(level) * qp * w } else { 0 }),
        ("accumulators", n2 as u64 * 2 * acc_limbs * w),
        ("current_swk", key),
        ("next_swk", key),
        ("diagonal_staging", 2 * n2 as u64 * w),
        ("baby_ciphertext", 2 * acc_limbs * w),
    ]
}

fn footprint_total(shape: &ChainShape, level: u64, n1: usize, n2: usize) -> u64 {
    cache_footprint(shape, level, n1, n2).iter().map(|o| o.1).sum()
}

/// Giant-step centric schedule of a double-hoisted product.
pub fn schedule_matvec(
    plan: &BsgsPlan,
    level: u64,
    diags: &BTreeSet<usize>,
    shape: &ChainShape,
    chip: &ChipConfig,
) -> Result<ScheduleTimeline> {
    let n = check_shape(shape, level, chip)?;
    if let Some(&k) = diags.iter().next_back() {
        if k >= plan.n1 * plan.n2 {
            return Err(Error::InvalidParameter(format!("diagonal {k} lies outside {}×{}", plan.n1, plan.n2)));
        }
    }
    let available = chip.sram_allocation()?.cache as u64;
    let needed = footprint_total(shape, level, plan.n1, plan.n2);
    if needed > available {
        let fitting_n2 = (1..plan.n2)
            .rev()
            .find(|&m| footprint_total(shape, level, plan.n1, m) <= available)
            .unwrap_or(0);
        return Err(Error::SramOverflow {
            needed,
            available,
            fitting_n2,
        });
    }

    let (n1, n2) = (plan.n1, plan.n2);
    let hoisted = n1 > 1;
    let per = (n / chip.p) as u64;
    let limbs = level + 1;
    let diag_limbs = if hoisted { limbs + shape.k } else { limbs };
    let key = key_bytes(shape, level);
    let diag_bytes = shape.n * WORD_BYTES;
    let present = |j: usize, i: usize| diags.contains(&(n1 * j + i));
    let count_i = |i: usize| (0..n2).filter(|&j| present(j, i)).count() as u64;
    let giants: Vec<usize> = (1..n2).filter(|&j| (0..n1).any(|i| present(j, i))).collect();

    let grant = schedule_bidirectional_oflimb(true, false);
    let dirs = if chip.bidirectional { grant.directions } else { 1 };
    let mut tl = ScheduleTimeline::new(dirs);
    let mut ledger = CacheLedger {
        capacity: available,
        snapshots: Vec::new(),
    };
    let fp = cache_footprint(shape, level, n1, n2);
    let staged = |i: usize| if chip.diagonals_share_bandwidth { count_i(i) * diag_bytes } else { 0 };
    let drain = chip.hadamard_height as u64 + network_depth(chip.p) as u64;
    let prep = if hoisted { 2 * diag_limbs * per } else { 0 };

    // prologue: hoisted ModUp of c1, first key and diagonals in flight
    let mut t = 0;
    let mut load_ready;
    let first_load = if hoisted { key } else { 0 } + staged(0);
    if hoisted {
        let up = pipelined(chip, n, &modup_passes(shape, level));
        t = tl.push("hoisted modup", PhaseKind::ModUp, 0, up, &MODCHANGE, 0);
    }
    ledger.record(0, &fp[..2])?;
    load_ready = chip.load_cycles(first_load);
    if first_load > 0 {
        tl.phases.push(PhaseRecord {
            phase: "initial load".into(),
            kind: PhaseKind::KeyWait,
            start_cycle: 0,
            end_cycle: 0,
            units: vec![Unit::Dram],
            dram_bytes: first_load,
        });
    }
    if load_ready > t {
        tl.key_wait_cycles += load_ready - t;
        t = tl.push("initial key wait", PhaseKind::KeyWait, t, load_ready - t, &[Unit::Dram], 0);
    }
    ledger.record(t, &fp)?;

    for i in 0..n1 {
        let next_key = if i + 1 < n1 {
            key
        } else if !giants.is_empty() {
            key
        } else {
            0
        };
        let load = next_key + if i + 1 < n1 { staged(i + 1) } else { 0 };
        let t_load = chip.load_cycles(load);
        let t_ofgen = (count_i(i) * diag_limbs * per).div_ceil(dirs as u64);
        let start = t;
        let units: &[Unit] = if dirs == 2 {
            &[Unit::ModChangeIntt, Unit::ModChangeNtt, Unit::HadamardKeyMult, Unit::HadamardDiag, Unit::Benes, Unit::Dram]
        } else {
            &[Unit::ModChangeNtt, Unit::HadamardKeyMult, Unit::HadamardDiag, Unit::Benes, Unit::Dram]
        };
        t = tl.push(format!("baby {i}"), PhaseKind::BabyStep, t, t_ofgen, units, load);
        let stall = t_load.saturating_sub(t_ofgen);
        tl.stall_cycles += stall;
        t = tl.push(format!("baby {i} stall"), PhaseKind::Stall, t, stall, &[Unit::Dram], 0);
        let exposed_prep = if i + 1 < n1 { prep.saturating_sub(t_load.max(t_ofgen)) } else { 0 };
        t = tl.push(format!("baby {i} drain"), PhaseKind::Drain, t, exposed_prep + drain, &[Unit::HadamardKeyMult, Unit::HadamardDiag, Unit::Benes], 0);
        load_ready = start + t_load;
        ledger.record(t, &fp)?;
    }

    // giant steps on the ModChange pipeline
    let giant_len = if hoisted {
        pipelined(chip, n, &moddown_passes(shape, level, 1)) + pipelined(chip, n, &modup_passes(shape, level))
    } else {
        pipelined(chip, n, &modup_passes(shape, level)) + pipelined(chip, n, &moddown_passes(shape, level, 2))
    } + chip.hadamard_height as u64
        + network_depth(chip.p) as u64;
    let after_loop: Vec<(&str, u64)> = fp.iter().filter(|o| o.0 != "hoisted_decompose" && o.0 != "baby_ciphertext").cloned().collect();
    ledger.record(t, &after_loop)?;
    for (g, &j) in giants.iter().enumerate() {
        if load_ready > t {
            tl.key_wait_cycles += load_ready - t;
            t = tl.push(format!("giant {j} key wait"), PhaseKind::KeyWait, t, load_ready - t, &[Unit::Dram], 0);
        }
        let next = if g + 1 < giants.len() { key } else { 0 };
        let start = t;
        t = tl.push(
            format!("giant {j}"),
            PhaseKind::GiantStep,
            t,
            giant_len,
            &[Unit::ModChangeIntt, Unit::ModChangeBconv, Unit::ModChangeNtt, Unit::HadamardKeyMult, Unit::Benes, Unit::Dram],
            next,
        );
        load_ready = start + chip.load_cycles(next);
    }
    if hoisted && !diags.is_empty() {
        let down = pipelined(chip, n, &moddown_passes(shape, level, 2));
        t = tl.push("final moddown", PhaseKind::ModDown, t, down, &MODCHANGE, 0);
    }
    let rescale = pipelined(chip, n, &vec![(1, level as usize); 2]);
    t = tl.push("rescale", PhaseKind::Rescale, t, rescale, &MODCHANGE, 0);
    ledger.record(t, &fp[..1])?;

    tl.total_cycles = t;
    tl.dram = crate::perf::matvec_dram(shape, level, plan, diags);
    tl.mults = Counter::new(*shape).with_twiddle_gen(true).matvec_bsgs(level, plan, diags, HoistingMode::DoubleHoisted);
    tl.cache = Some(ledger);
    Ok(tl)
}

/// Runs the product functionally and schedules it on the chip.
pub fn execute_matvec(
    ct: &Ciphertext,
    m: &DiagonalizedMatrix,
    plan: &BsgsPlan,
    keys: &KeySet,
    chain: &ModulusChain,
    chip: &ChipConfig,
) -> Result<(Ciphertext, MatvecStats, ScheduleTimeline)> {
    let level = ct.level() as u64;
    let shape = ChainShape {
        n: ct.c0.n() as u64,
        q_limbs: chain.q_limbs.len() as u64,
        alpha: chain.alpha as u64,
        k: chain.p_limbs.len() as u64,
    };
    let diags: BTreeSet<usize> = m.diagonals.keys().copied().collect();
    let timeline = schedule_matvec(plan, level, &diags, &shape, chip)?;
    let (out, stats) = matvec_bsgs(ct, m, plan, HoistingMode::DoubleHoisted, keys, chain)?;
    Ok((out, stats, timeline))
}

pub fn dense_diagonals(d: usize) -> BTreeSet<usize> {
    (0..d).collect()
}
