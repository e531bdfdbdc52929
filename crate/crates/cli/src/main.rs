use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use osiris_core::gsc::{schedule_matvec, ChipConfig, ScheduleTimeline};
use osiris_core::perf::storage_report;
use osiris_core::workload::{bundled, chip_from_yaml, perf_run, perf_runs, simulate, Op, RunReport, WorkloadSpec, BUNDLED};

#[derive(Parser)]
#[command(name = "osiris", about = "Functional and performance model of a streaming CKKS accelerator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Vary {
    BsgsRatio,
    Bandwidth,
    P,
}

#[derive(clap::Args)]
struct Common {
    /// Workload file, or the name of a bundled workload.
    #[arg(long)]
    workload: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every matrix product on encrypted data and check the result.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Ring degree of the functional run.
        #[arg(long = "n-override", default_value_t = 64)]
        n: usize,
    },
    /// Analytical cycles, stalls and counts at full scale.
    Perf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        chip: Option<PathBuf>,
        /// Write the schedule of every double-hoisted product as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// One CSV row per point of a parameter sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        chip: Option<PathBuf>,
        #[arg(long, value_enum)]
        vary: Vary,
        /// Bandwidths in bytes/s or lane counts; defaults depend on `--vary`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// With `--vary p`, scale the bandwidth along with the lanes.
        #[arg(long)]
        scale_bandwidth: bool,
    },
    /// Twiddle and delay-line storage.
    Storage {
        #[arg(long, default_value_t = 1 << 16)]
        n: usize,
        #[arg(long, default_value_t = 512)]
        p: usize,
        #[arg(long, default_value_t = 42)]
        moduli: usize,
        #[arg(long, default_value_t = 42)]
        interleave: usize,
        #[arg(long, default_value_t = 40)]
        word_bits: u32,
        #[arg(long, default_value_t = 2)]
        groups: usize,
        #[arg(long, default_value_t = 2)]
        instances: usize,
    },
    Version,
}

fn load_workload(arg: &str) -> Result<WorkloadSpec> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return Ok(WorkloadSpec::from_yaml(&text)?);
    }
    let name = arg.strip_prefix("bundled:").unwrap_or(arg);
    if BUNDLED.contains(&name) {
        return Ok(bundled(name)?);
    }
    bail!("no workload file {arg:?} and no bundled workload of that name")
}

fn load_chip(path: Option<&Path>) -> Result<ChipConfig> {
    match path {
        None => Ok(ChipConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(chip_from_yaml(&text)?)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn reports_text(reports: &[RunReport], format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
        Format::Csv => {
            let mut s = String::from(RunReport::CSV_HEADER);
            s.push('\n');
            for r in reports {
                for row in r.csv_rows() {
                    writeln!(s, "{row}").unwrap();
                }
            }
            s
        }
    }
}

fn traces(spec: &WorkloadSpec, chip: &ChipConfig, seed: u64) -> Result<Vec<ScheduleTimeline>> {
    let params = spec.params()?;
    let mut out = Vec::new();
    for op in &spec.ops {
        if let Op::Matvec(m) = op {
            if m.hoisting()? == osiris_core::matvec::HoistingMode::DoubleHoisted {
                let shape = params.shape_for_level(m.level as usize)?;
                out.push(schedule_matvec(&m.plan(), m.level, &m.diagonals(seed), &shape, chip)?);
            }
        }
    }
    Ok(out)
}

const SWEEP_HEADER: &str = "point,workload,n1,n2,p,bandwidth,cycles,wall_s,stall_cycles,stall_fraction,utilization,mults,dram_bytes,error";

fn sweep_row(i: usize, spec: &WorkloadSpec, chip: &ChipConfig, seed: u64) -> String {
    let (n1, n2) = spec
        .ops
        .iter()
        .find_map(|op| match op {
            Op::Matvec(m) => Some((m.n1.to_string(), m.n2.to_string())),
            _ => None,
        })
        .unwrap_or_default();
    let head = format!("{i},{},{n1},{n2},{},{}", spec.name, chip.p, chip.dram_bw_bytes_per_s);
    match perf_run(spec, chip, seed) {
        Ok(r) => format!(
            "{head},{},{:e},{},{:.6},{:.6},{},{},",
            r.total.cycles,
            r.total.wall_s,
            r.total.stall_cycles,
            r.stall_fraction(),
            r.total.roofline.map_or(0.0, |p| p.utilization),
            r.total.counts.mults.total(),
            r.total.counts.dram.total()
        ),
        Err(e) => format!("{head},,,,,,,,{}", e.to_string().replace(',', ";")),
    }
}

fn sweep_points(spec: &WorkloadSpec, chip: &ChipConfig, vary: Vary, values: &[f64], scale_bw: bool) -> Result<Vec<(WorkloadSpec, ChipConfig)>> {
    let mut points = Vec::new();
    match vary {
        Vary::BsgsRatio => {
            let max_d = spec
                .ops
                .iter()
                .filter_map(|op| if let Op::Matvec(m) = op { Some(m.d) } else { None })
                .max()
                .context("ratio sweep needs a matvec op")?;
            let n2s: Vec<usize> = if values.is_empty() {
                (0..).map(|e| 1usize << e).take_while(|&n2| n2 <= max_d).collect()
            } else {
                values.iter().map(|&v| v as usize).collect()
            };
            for n2 in n2s {
                let mut s = spec.clone();
                for op in &mut s.ops {
                    if let Op::Matvec(m) = op {
                        m.n2 = n2.clamp(1, m.d.max(1));
                        m.n1 = m.d.max(1).div_ceil(m.n2);
                    }
                }
                points.push((s, chip.clone()));
            }
        }
        Vary::Bandwidth => {
            let bws = if values.is_empty() { vec![0.25e12, 0.5e12, 1e12, 2e12, 4e12] } else { values.to_vec() };
            for bw in bws {
                points.push((spec.clone(), ChipConfig { dram_bw_bytes_per_s: bw, ..chip.clone() }));
            }
        }
        Vary::P => {
            let ps = if values.is_empty() { vec![256.0, 512.0, 1024.0] } else { values.to_vec() };
            for p in ps {
                let p = p as usize;
                if !p.is_power_of_two() || p < 2 {
                    bail!("lane count {p} is not a power of two");
                }
                let mut c = chip.clone();
                c.p = p;
                c.bconv.width = p;
                if scale_bw {
                    c.dram_bw_bytes_per_s = chip.dram_bw_bytes_per_s * p as f64 / chip.p as f64;
                }
                c.inventory = osiris_core::gsc::MultiplierInventory::for_geometry(&c);
                points.push((spec.clone(), c));
            }
        }
    }
    Ok(points)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Version => {
            println!("osiris {}", env!("CARGO_PKG_VERSION"));
        }
        Cmd::Storage { n, p, moduli, interleave, word_bits, groups, instances } => {
            let s = storage_report(n, p, moduli, interleave, word_bits, groups, instances);
            println!("twiddle_full_mb,twiddle_decomposed_mb,mdc_buffer_mb_per_instance,mdc_buffer_mb");
            println!(
                "{:.3},{:.3},{:.3},{:.3}",
                s.twiddle_full_bytes / 1e6,
                s.twiddle_decomposed_bytes / 1e6,
                s.mdc_buffer_bytes_per_instance / 1e6,
                s.mdc_buffer_bytes / 1e6
            );
        }
        Cmd::Simulate { common, n } => {
            let spec = load_workload(&common.workload)?;
            let r = simulate(&spec, n, common.seed)?;
            let text = match common.format {
                Format::Json => serde_json::to_string_pretty(&r)? + "\n",
                Format::Csv => {
                    let mut s = String::from("workload,index,op,passed,max_error,rotations,key_switches,mults,model_mults\n");
                    for o in &r.ops {
                        writeln!(
                            s,
                            "{},{},{},{},{:e},{},{},{},{}",
                            r.workload,
                            o.index,
                            o.op,
                            o.passed,
                            o.max_error,
                            o.rotations,
                            o.key_switches,
                            o.mults.total(),
                            o.model_mults.total()
                        )
                        .unwrap();
                    }
                    s
                }
            };
            emit(common.out.as_deref(), &text)?;
            if !r.passed() {
                eprintln!("functional check failed");
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Perf { common, chip, trace } => {
            let spec = load_workload(&common.workload)?;
            let chip = load_chip(chip.as_deref())?;
            let reports = perf_runs(&spec, &chip, common.seed)?;
            emit(common.out.as_deref(), &reports_text(&reports, common.format))?;
            if let Some(path) = trace {
                let tl = traces(&spec, &chip, common.seed)?;
                let phases: Vec<_> = tl.iter().map(|t| &t.phases).collect();
                std::fs::write(&path, serde_json::to_string_pretty(&phases)?)?;
            }
        }
        Cmd::Sweep { common, chip, vary, values, scale_bandwidth } => {
            let spec = load_workload(&common.workload)?;
            let chip = load_chip(chip.as_deref())?;
            let points = sweep_points(&spec, &chip, vary, &values, scale_bandwidth)?;
            let rows: Vec<String> = points
                .par_iter()
                .enumerate()
                .map(|(i, (s, c))| sweep_row(i, s, c, common.seed))
                .collect();
            let mut text = String::from(SWEEP_HEADER);
            text.push('\n');
            for r in rows {
                writeln!(text, "{r}").unwrap();
            }
            emit(common.out.as_deref(), &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(w) = std::env::var("OSIRIS_WORKERS") {
        if let Ok(n) = w.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
