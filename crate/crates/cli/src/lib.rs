//! Command-line front end: Monte Carlo sweeps, the synthetic two-radar
//! scenario and replay of recorded sensor tracks.
//!
//! Every output is written to a temporary file next to its destination and
//! renamed into place, so a reader never sees a partial file. Relative output
//! paths are resolved against `CIRCFUSE_OUT_DIR` when it is set.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use circfuse_core::distributions::Family;
use circfuse_core::montecarlo::{
    log_grid, run_fusion_experiment, run_stienne_experiment, run_variance_experiment, write_csv, ExperimentResult,
    SweepConfig, DEFAULT_GRID_POINTS, DEFAULT_TRIALS,
};
use circfuse_core::scenario::{generate_scenario, ScenarioSpec};
use circfuse_core::t2t::io::{poses_from_json, poses_to_json, read_sensor_tracks, write_cycles, write_sensor_tracks};
use circfuse_core::t2t::{replay, FusionConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const OUT_DIR_ENV: &str = "CIRCFUSE_OUT_DIR";

/// Sensor-2 dispersion range of the two-sensor sweeps: `σ²₂` for WN, `1/κ₂`
/// for VM fusion and `κ₂` for the circular-variance baseline.
pub const SWEEP_RANGE: (f64, f64) = (0.01, 1.5);
/// Dispersion range of the estimator sweep; reaches far enough for the
/// sample variance to saturate.
pub const VARIANCE_RANGE: (f64, f64) = (0.05, 20.0);

#[derive(Debug, Parser)]
#[command(name = "circfuse", version, about = "Circular fusion experiments and track-to-track fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Wn,
    Vm,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Wn => Family::WrappedNormal,
            FamilyArg::Vm => Family::VonMises,
        }
    }
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub points: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimator accuracy sweep: model estimator and sample variance.
    McVariance {
        #[arg(long, value_enum, default_value = "wn")]
        family: FamilyArg,
        #[command(flatten)]
        mc: McArgs,
        /// CSV for the model estimator (σ̂² or κ̂).
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV for the sample variance about the circular mean.
        #[arg(long)]
        ss_out: Option<PathBuf>,
    },
    /// Two-sensor weighted-average fusion sweep.
    McFusion {
        #[arg(long, value_enum, default_value = "wn")]
        family: FamilyArg,
        /// Sensor-1 variance (WN).
        #[arg(long, default_value_t = 0.3)]
        sigma1: f64,
        /// Sensor-1 concentration (VM); defaults to 1/0.3.
        #[arg(long)]
        kappa1: Option<f64>,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV for the equal-weight mean fusion.
        #[arg(long)]
        mean_out: Option<PathBuf>,
    },
    /// Circular-variance fusion baseline for von-Mises sensors.
    McStienne {
        #[arg(long, default_value_t = 0.5)]
        kappa1: f64,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulates the two-radar pedestrian scenario and fuses it.
    T2tSim {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Fused system tracks and per-cycle diagnostics (LDJSON).
        #[arg(long)]
        out: PathBuf,
        /// Sensor-frame sensor tracks (LDJSON).
        #[arg(long)]
        sensor_out: Option<PathBuf>,
        /// Sensor poses (JSON).
        #[arg(long)]
        poses_out: Option<PathBuf>,
        #[command(flatten)]
        fusion: FusionArgs,
    },
    /// Runs recorded sensor tracks through the fusion pipeline.
    T2tReplay {
        /// Sensor tracks (LDJSON) in arrival order.
        #[arg(long)]
        input: PathBuf,
        /// Sensor poses (JSON). Without it tracks are taken to be in the
        /// common frame.
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        fusion: FusionArgs,
    },
}

#[derive(Debug, Args)]
pub struct FusionArgs {
    #[arg(long, default_value_t = 18.0)]
    pub rate: f64,
    /// Include the heading term in the association distance.
    #[arg(long)]
    pub use_heading: bool,
    /// Heading dispersion family used inside the pipeline.
    #[arg(long, value_enum, default_value = "wn")]
    pub heading_family: FamilyArg,
}

impl FusionArgs {
    fn config(&self) -> FusionConfig {
        FusionConfig {
            rate_hz: self.rate,
            use_heading: self.use_heading,
            family: self.heading_family.into(),
            ..Default::default()
        }
    }
}

/// Sensor-2 grid of the fusion sweep in the family's native parameter.
pub fn fusion_grid(family: Family, points: usize) -> Vec<f64> {
    let grid = log_grid(SWEEP_RANGE.0, SWEEP_RANGE.1, points);
    match family {
        Family::WrappedNormal => grid,
        // swept in dispersion 1/κ, sampled in κ
        Family::VonMises => grid.iter().map(|d| 1.0 / d).collect(),
    }
}

pub fn fusion_config(family: Family, sigma1: f64, kappa1: Option<f64>, mc: &McArgs) -> SweepConfig {
    let fixed = match family {
        Family::WrappedNormal => sigma1,
        Family::VonMises => kappa1.unwrap_or(1.0 / sigma1),
    };
    SweepConfig {
        family,
        fixed_dispersion: fixed,
        sweep_grid: fusion_grid(family, mc.points),
        trials: mc.trials,
        seed: mc.seed,
    }
}

pub fn stienne_config(kappa1: f64, mc: &McArgs) -> SweepConfig {
    SweepConfig {
        family: Family::VonMises,
        fixed_dispersion: kappa1,
        sweep_grid: log_grid(SWEEP_RANGE.0, SWEEP_RANGE.1, mc.points),
        trials: mc.trials,
        seed: mc.seed,
    }
}

pub fn variance_grid(points: usize) -> Vec<f64> {
    log_grid(VARIANCE_RANGE.0, VARIANCE_RANGE.1, points)
}

/// Destination path, honouring the output-directory override.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes `path` atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let path = resolve_output(path);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
    }
    tmp.persist(&path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn write_rows(path: &Path, rows: &[ExperimentResult]) -> Result<()> {
    write_atomic(path, |w| write_csv(rows, w).context("writing CSV"))
}

fn check_points(mc: &McArgs) -> Result<()> {
    if mc.points < 2 {
        bail!("--points must be at least 2");
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::McVariance { family, mc, out, ss_out } => {
            check_points(&mc)?;
            let sweep = run_variance_experiment(family.into(), &variance_grid(mc.points), mc.trials, mc.seed)?;
            write_rows(&out, &sweep.model)?;
            if let Some(p) = ss_out {
                write_rows(&p, &sweep.ss)?;
            }
        }
        Command::McFusion {
            family,
            sigma1,
            kappa1,
            mc,
            out,
            mean_out,
        } => {
            check_points(&mc)?;
            if family == FamilyArg::Wn && kappa1.is_some() {
                bail!("--kappa1 applies to --family vm");
            }
            let sweep = run_fusion_experiment(&fusion_config(family.into(), sigma1, kappa1, &mc))?;
            write_rows(&out, &sweep.weighted)?;
            if let Some(p) = mean_out {
                write_rows(&p, &sweep.mean)?;
            }
        }
        Command::McStienne { kappa1, mc, out } => {
            check_points(&mc)?;
            let rows = run_stienne_experiment(&stienne_config(kappa1, &mc))?;
            write_rows(&out, &rows)?;
        }
        Command::T2tSim {
            seed,
            out,
            sensor_out,
            poses_out,
            fusion,
        } => {
            let mut spec = ScenarioSpec::default_with_seed(seed);
            spec.rate_hz = fusion.rate;
            let sc = generate_scenario(&spec)?;
            let cycles = replay(&sc.tracks, sc.poses.clone(), fusion.config())?;
            write_atomic(&out, |w| Ok(write_cycles(w, &cycles)?))?;
            if let Some(p) = sensor_out {
                write_atomic(&p, |w| Ok(write_sensor_tracks(w, &sc.tracks)?))?;
            }
            if let Some(p) = poses_out {
                let json = poses_to_json(&sc.poses)?;
                write_atomic(&p, |w| Ok(writeln!(w, "{json}")?))?;
            }
        }
        Command::T2tReplay {
            input,
            poses,
            out,
            fusion,
        } => {
            let file = fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let tracks = read_sensor_tracks(BufReader::new(file)).with_context(|| format!("reading {}", input.display()))?;
            let poses = match poses {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    poses_from_json(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => Default::default(),
            };
            let cycles = replay(&tracks, poses, fusion.config())?;
            write_atomic(&out, |w| Ok(write_cycles(w, &cycles)?))?;
        }
    }
    Ok(())
}
