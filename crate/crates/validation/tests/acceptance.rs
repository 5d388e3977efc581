//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that every criterion is evaluated and
//! reported even when an earlier one fails; the process exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use circfuse_cli::{fusion_config, stienne_config, variance_grid, Cli, McArgs};
use circfuse_core::circstats::{circ_distance, mean_orientation, summarize, Angle};
use circfuse_core::distributions::Family;
use circfuse_core::fusion::{
    fuse_circvar_stienne, fuse_kappa_mean, fuse_kappa_weighted, fuse_mean_weighted, fuse_variance_mean,
    fuse_variance_weighted, AngularEstimate, DispersionValue,
};
use circfuse_core::montecarlo::{
    run_fusion_experiment, run_stienne_experiment, run_variance_experiment, stienne_inputs, ExperimentResult,
};
use circfuse_core::rng::{derive_seed, seeded_rng};
use circfuse_core::scenario::{generate_scenario, ScenarioSpec};
use circfuse_core::t2t::{gnn_associate, replay, spatial_align, FusionConfig, DEFAULT_GATE};
use circfuse_validation::{brute_force_gnn, uniform_plateau};
use clap::Parser;
use rand::Rng;

// ── pinned protocol ────────────────────────────────────────────────────────
const TRIALS: usize = 100_000;
const SEED: u64 = 42;
const SCENARIO_SEED: u64 = 7;
/// Agreement band between prediction and Monte Carlo, in standard errors.
const K_SE: f64 = 3.0;
const EXACT: f64 = 1e-12;
/// Relative accuracy of the wrapped-normal variance estimator at n = 10⁵.
const WN_REL_TOL: f64 = 0.02;
/// Sample-variance plateau for a heading that has become uniform, measured
/// with the uniform-sample oracle below and pinned to 3 digits (π²/3).
const SS_PLATEAU: f64 = 3.29;
const PLATEAU_REL_TOL: f64 = 0.03;
const PLATEAU_FROM: f64 = 8.0;
/// Sign of MC − prediction for von-Mises dispersions above 1.0, as first
/// observed with the Monte Carlo oracle: the fused samples are wider than
/// the `κ₁ + κ₂` rule predicts.
const VM_DIVERGENCE_SIGN: f64 = 1.0;
const STIENNE_MIN_GAP: f64 = 0.05;
const HALVING_FACTOR: f64 = 0.55;
const HALVING_SHARE: f64 = 0.9;
const HEADING_MATCH: f64 = 1e-9;
const BOTH_SENSORS: (f64, f64) = (2.0, 5.0);
/// Trials for the byte-identity reruns; determinism does not depend on size.
const RERUN_TRIALS: &str = "2000";

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mc_args(trials: usize, seed: u64) -> McArgs {
    McArgs {
        trials,
        seed,
        points: 30,
    }
}

fn deg(d: f64) -> Angle {
    Angle::from_degrees(d).unwrap()
}

fn worst_z(rows: &[&ExperimentResult]) -> f64 {
    rows.iter().map(|r| r.z_score().abs()).fold(0.0, f64::max)
}

fn c1_crossover() -> Outcome {
    let d = DispersionValue::WnVariance(0.1);
    let fused = fuse_mean_weighted(&[
        AngularEstimate::new(deg(350.0), d).unwrap(),
        AngularEstimate::new(deg(10.0), d).unwrap(),
    ])
    .unwrap();
    let err = fused.radians().abs();
    outcome(err <= EXACT, format!("fused = {:.3e} rad", fused.radians()))
}

fn c2_wn_fusion() -> Outcome {
    let cfg = fusion_config(Family::WrappedNormal, 0.3, None, &mc_args(TRIALS, SEED));
    let rows = run_fusion_experiment(&cfg).unwrap().weighted;
    let bad: Vec<&ExperimentResult> = rows.iter().filter(|r| !r.matches(K_SE)).collect();
    let first = &rows[0];
    let last = rows.last().unwrap();
    let low_end = first.mc_estimate < first.grid_value && first.predicted < first.grid_value;
    let high_end = last.mc_estimate < 0.3 && last.predicted < 0.3 && last.predicted > rows[rows.len() - 2].predicted;
    let all: Vec<&ExperimentResult> = rows.iter().collect();
    outcome(
        bad.is_empty() && low_end && high_end,
        format!(
            "{}/{} rows within {K_SE} SE (max |z| = {:.1}, first outside at σ²₂ = {}); ends: σ²₂={:.2} → {:.4}, σ²₂={:.2} → {:.4} (pred {:.4})",
            rows.len() - bad.len(),
            rows.len(),
            worst_z(&all),
            bad.first().map_or("-".into(), |r| format!("{:.3}", r.grid_value)),
            first.grid_value,
            first.mc_estimate,
            last.grid_value,
            last.mc_estimate,
            last.predicted
        ),
    )
}

fn c3_vm_fusion() -> Outcome {
    let cfg = fusion_config(Family::VonMises, 0.3, None, &mc_args(TRIALS, SEED));
    let rows = run_fusion_experiment(&cfg).unwrap().weighted;
    let near: Vec<&ExperimentResult> = rows.iter().filter(|r| r.grid_value <= 0.3).collect();
    let far: Vec<&ExperimentResult> = rows.iter().filter(|r| r.grid_value > 1.0).collect();
    let near_bad = near.iter().filter(|r| !r.matches(K_SE)).count();
    let far_ok = !far.is_empty()
        && far
            .iter()
            .all(|r| r.is_ok() && r.z_score() * VM_DIVERGENCE_SIGN > K_SE);
    outcome(
        near_bad == 0 && far_ok,
        format!(
            "1/κ ≤ 0.3: {}/{} within {K_SE} SE (max |z| = {:.1}); 1/κ > 1.0: {}/{} diverge with sign {:+} (z ∈ [{:.1}, {:.1}])",
            near.len() - near_bad,
            near.len(),
            worst_z(&near),
            far.iter().filter(|r| r.z_score() * VM_DIVERGENCE_SIGN > K_SE).count(),
            far.len(),
            VM_DIVERGENCE_SIGN,
            far.iter().map(|r| r.z_score()).fold(f64::INFINITY, f64::min),
            far.iter().map(|r| r.z_score()).fold(f64::NEG_INFINITY, f64::max),
        ),
    )
}

const ORACLE_SAMPLES: usize = 1_000_000;

fn c4_variance() -> Outcome {
    let sweep = run_variance_experiment(Family::WrappedNormal, &variance_grid(30), TRIALS, SEED).unwrap();
    let tracked: Vec<&ExperimentResult> = sweep.model.iter().filter(|r| r.grid_value <= 1.5).collect();
    let worst_rel = tracked
        .iter()
        .map(|r| ((r.mc_estimate - r.grid_value) / r.grid_value).abs())
        .fold(0.0, f64::max);
    let (oracle, oracle_se) = uniform_plateau(ORACLE_SAMPLES, 0xA11CE);
    let oracle_pins = (oracle - SS_PLATEAU).abs() <= K_SE * oracle_se;
    let plateau: Vec<&ExperimentResult> = sweep.ss.iter().filter(|r| r.grid_value >= PLATEAU_FROM).collect();
    let worst_plateau = plateau
        .iter()
        .map(|r| ((r.mc_estimate - SS_PLATEAU) / SS_PLATEAU).abs())
        .fold(0.0, f64::max);
    outcome(
        worst_rel <= WN_REL_TOL && tracked.iter().all(|r| r.is_ok()) && oracle_pins && worst_plateau <= PLATEAU_REL_TOL,
        format!(
            "σ̂² worst rel. error {:.2}% over {} rows ≤ 1.5; plateau oracle {oracle:.4} ± {oracle_se:.4} (pinned {SS_PLATEAU}); {} rows σ² ≥ {PLATEAU_FROM}: worst rel. dev. {:.2}%",
            100.0 * worst_rel,
            tracked.len(),
            plateau.len(),
            100.0 * worst_plateau
        ),
    )
}

fn c5_stienne() -> Outcome {
    let kappa1 = 0.5;
    let cfg = stienne_config(kappa1, &mc_args(TRIALS, SEED));
    let rows = run_stienne_experiment(&cfg).unwrap();
    let mut below = 0;
    for r in &rows {
        let (v1, v2) = stienne_inputs(kappa1, r.grid_value).unwrap();
        if r.predicted < v1.min(v2) {
            below += 1;
        }
    }
    let last = rows.last().unwrap();
    let (v1, v2) = stienne_inputs(kappa1, last.grid_value).unwrap();
    let gap = v1.min(v2) - last.predicted;
    let v0 = 0.4;
    let mut v = v0;
    let mut decreasing = true;
    for _ in 0..5 {
        let next = fuse_circvar_stienne(&[v, v0]).unwrap();
        decreasing &= next < v;
        v = next;
    }
    outcome(
        below == rows.len() && gap > STIENNE_MIN_GAP && decreasing,
        format!(
            "{below}/{} rows with V_f < min(V); terminal gap {gap:.4} (> {STIENNE_MIN_GAP}); self-fusion of {v0}: 5 strict decreases = {decreasing} (→ {v:.4})",
            rows.len()
        ),
    )
}

fn c6_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let s2 = 0.01 + 1.49 * i as f64 / 19.0;
        worst = worst.max((fuse_variance_weighted(&[s2, s2]).unwrap() - fuse_variance_mean(&[s2, s2]).unwrap()).abs());
        let k = 1.0 / s2;
        worst = worst.max((fuse_kappa_weighted(&[k, k]).unwrap() - fuse_kappa_mean(&[k, k]).unwrap()).abs() / k.max(1.0));
    }
    let mut rng = seeded_rng(derive_seed(SEED, 6));
    let mut mismatches = 0;
    let mut sets = 0;
    while sets < 1000 {
        let n = rng.random_range(2..=10);
        let angles: Vec<Angle> = (0..n).map(|_| Angle::new(rng.random_range(-PI..PI)).unwrap()).collect();
        let summary = summarize(&angles, None).unwrap();
        if summary.r_bar < 1e-6 {
            continue;
        }
        sets += 1;
        let var = rng.random_range(0.01..3.0);
        let ests: Vec<AngularEstimate> = angles
            .iter()
            .map(|&a| AngularEstimate::new(a, DispersionValue::WnVariance(var)).unwrap())
            .collect();
        let fused = fuse_mean_weighted(&ests).unwrap();
        let plain = mean_orientation(&summary).unwrap();
        let d = circ_distance(fused, plain).abs();
        if d > 1e-9 / summary.r_bar {
            mismatches += 1;
        }
    }
    outcome(
        worst <= EXACT && mismatches == 0,
        format!("equal-sensor identity worst diff {worst:.1e} over 20 points; weighted vs plain mean: {mismatches}/1000 mismatches"),
    )
}

fn c7_gnn() -> Outcome {
    let mut rng = seeded_rng(derive_seed(SEED, 7));
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let costs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| if rng.random_bool(0.1) { f64::INFINITY } else { rng.random_range(-5.0..25.0) })
                    .collect()
            })
            .collect();
        let got = gnn_associate(&costs, DEFAULT_GATE).total_cost;
        if got != brute_force_gnn(&costs, DEFAULT_GATE) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/500 matrices differ from the exhaustive optimum"))
}

fn c8_scenario() -> Outcome {
    let sc = generate_scenario(&ScenarioSpec::default_with_seed(SCENARIO_SEED)).unwrap();
    let out = replay(&sc.tracks, sc.poses.clone(), FusionConfig::default()).unwrap();
    let aligned = |sensor: u32, t: f64| {
        sc.tracks
            .iter()
            .find(|x| x.sensor_id == sensor && x.timestamp == t)
            .map(|x| spatial_align(x, &sc.poses[&sensor]).unwrap())
    };
    // (a) variance halving while both sensors report
    let (mut halved, mut window) = (0, 0);
    for o in out.iter().filter(|o| o.time >= BOTH_SENSORS.0 && o.time <= BOTH_SENSORS.1) {
        let (Some(a), Some(b)) = (aligned(1, o.time), aligned(2, o.time)) else { continue };
        window += 1;
        let Some(f) = o.tracks.first() else { continue };
        let smaller = a.state.heading_dispersion.value().min(b.state.heading_dispersion.value());
        if f.state.heading_dispersion.value() <= HALVING_FACTOR * smaller {
            halved += 1;
        }
    }
    let a_ok = window > 0 && halved as f64 >= HALVING_SHARE * window as f64;
    // (b) sensor-2 only after sensor 1 loses the pedestrian
    let exit = sc.tracks.iter().filter(|t| t.sensor_id == 1).map(|t| t.timestamp).fold(f64::MIN, f64::max);
    let after: Vec<_> = out.iter().filter(|o| o.time > exit).collect();
    let mut worst: f64 = 0.0;
    for o in &after {
        let s2 = aligned(2, o.time).expect("sensor 2 covers the run");
        let d = match o.tracks.first() {
            Some(f) => (f.state.heading.radians() - s2.state.heading.radians()).abs(),
            None => f64::INFINITY,
        };
        worst = worst.max(d);
    }
    let b_ok = !after.is_empty() && worst <= HEADING_MATCH;
    // (c) one identity throughout
    let ids: std::collections::BTreeSet<u64> = out.iter().flat_map(|o| o.tracks.iter().map(|t| t.system_id)).collect();
    let c_ok = ids.len() == 1 && out.iter().all(|o| o.tracks.len() == 1);
    outcome(
        a_ok && b_ok && c_ok,
        format!(
            "(a) {halved}/{window} cycles in [{}, {}] s with fused ≤ {HALVING_FACTOR}× min: {}; (b) {} cycles after exit at {exit:.3} s, worst |Δθ| {worst:.1e}: {}; (c) ids {ids:?}: {}",
            BOTH_SENSORS.0,
            BOTH_SENSORS.1,
            if a_ok { "ok" } else { "no" },
            after.len(),
            if b_ok { "ok" } else { "no" },
            if c_ok { "ok" } else { "no" },
        ),
    )
}

/// Runs one command line twice, each time into a fresh directory, and
/// compares every output file byte for byte.
fn run_twice(dir: &Path, name: &str, args: &[&str], outputs: &[&str]) -> Result<bool, String> {
    let mut runs = Vec::new();
    for round in 0..2 {
        let out_dir = dir.join(format!("{name}-{round}"));
        std::fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
        let argv: Vec<String> = std::iter::once("circfuse".to_string())
            .chain(args.iter().map(|a| {
                if outputs.contains(a) {
                    out_dir.join(a).to_string_lossy().into_owned()
                } else {
                    a.to_string()
                }
            }))
            .collect();
        let cli = Cli::try_parse_from(&argv).map_err(|e| format!("{name}: {e}"))?;
        circfuse_cli::run(cli).map_err(|e| format!("{name}: {e:#}"))?;
        let bytes: Vec<Vec<u8>> = outputs
            .iter()
            .map(|o| std::fs::read(out_dir.join(o)).map_err(|e| format!("{name}: {o}: {e}")))
            .collect::<Result<_, _>>()?;
        runs.push(bytes);
    }
    Ok(runs[0] == runs[1] && runs[0].iter().all(|b| !b.is_empty()))
}

fn c9_determinism() -> Outcome {
    std::env::remove_var(circfuse_cli::OUT_DIR_ENV);
    let dir = tempfile::tempdir().expect("temp dir");
    let t = RERUN_TRIALS;
    let commands: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("mc-variance", vec!["mc-variance", "--family", "wn", "--trials", t, "--seed", "42", "--out", "a.csv", "--ss-out", "b.csv"], vec!["a.csv", "b.csv"]),
        ("mc-variance-vm", vec!["mc-variance", "--family", "vm", "--trials", t, "--seed", "42", "--out", "a.csv"], vec!["a.csv"]),
        ("mc-fusion-wn", vec!["mc-fusion", "--family", "wn", "--sigma1", "0.3", "--trials", t, "--seed", "42", "--out", "a.csv", "--mean-out", "b.csv"], vec!["a.csv", "b.csv"]),
        ("mc-fusion-vm", vec!["mc-fusion", "--family", "vm", "--trials", t, "--seed", "42", "--out", "a.csv"], vec!["a.csv"]),
        ("mc-stienne", vec!["mc-stienne", "--kappa1", "0.5", "--trials", t, "--seed", "42", "--out", "a.csv"], vec!["a.csv"]),
        ("t2t-sim", vec!["t2t-sim", "--seed", "7", "--out", "tracks.ldjson", "--sensor-out", "s.ldjson", "--poses-out", "p.json"], vec!["tracks.ldjson", "s.ldjson", "p.json"]),
    ];
    let mut failed = Vec::new();
    for (name, args, outs) in &commands {
        match run_twice(dir.path(), name, args, outs) {
            Ok(true) => {}
            Ok(false) => failed.push(format!("{name}: outputs differ")),
            Err(e) => failed.push(e),
        }
    }
    // replay of the simulated sensor tracks, twice
    let sim = dir.path().join("t2t-sim-0");
    let (i, p) = (
        sim.join("s.ldjson").to_string_lossy().into_owned(),
        sim.join("p.json").to_string_lossy().into_owned(),
    );
    match run_twice(dir.path(), "t2t-replay", &["t2t-replay", "--input", &i, "--poses", &p, "--out", "r.ldjson"], &["r.ldjson"]) {
        Ok(true) => {}
        Ok(false) => failed.push("t2t-replay: outputs differ".into()),
        Err(e) => failed.push(e),
    }
    let total = commands.len() + 1;
    outcome(
        failed.is_empty(),
        format!("{}/{total} commands byte-identical on rerun{}", total - failed.len(), if failed.is_empty() { String::new() } else { format!(" ({})", failed.join("; ")) }),
    )
}

fn main() {
    // `cargo test -- --list` style probes expect a quiet exit
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 9] = [
        ("crossover exactness", c1_crossover),
        ("weighted fusion, wrapped normal", c2_wn_fusion),
        ("weighted fusion, von Mises", c3_vm_fusion),
        ("dispersion estimators", c4_variance),
        ("circular-variance fusion baseline", c5_stienne),
        ("estimator identities", c6_identities),
        ("GNN vs exhaustive search", c7_gnn),
        ("two-radar scenario", c8_scenario),
        ("CLI determinism", c9_determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {} {} {name} [{:.1}s]: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
