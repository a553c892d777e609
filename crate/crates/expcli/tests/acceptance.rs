//! End-to-end acceptance checks. Each test prints one PASS/FAIL line; run
//! with `--nocapture` to see the report.

use std::sync::OnceLock;

use pima::metrics::AggregateSummary;
use pima::{sim, SchedulerKind, SimConfig};
use pima_exp::calibrate::{class_dp_suite, filter_suite, greedy_suite};
use pima_exp::presets::{lambda_grid, preset, Figure};
use pima_exp::{run_sweep, to_csv, SweepSpec};

use SchedulerKind::*;

const SMALL_SEEDS: u64 = 10;
const SMALL_FRAMES: u64 = 40_000;
const LARGE_SEEDS: u64 = 5;
const LARGE_FRAMES: u64 = 20_000;

struct Table(Vec<AggregateSummary>);

impl Table {
    fn row(&self, scheduler: SchedulerKind, lambda: f64) -> &AggregateSummary {
        self.0
            .iter()
            .find(|r| r.scheduler == scheduler && (r.lambda_total - lambda).abs() < 1e-9)
            .unwrap_or_else(|| panic!("no row for {scheduler} at {lambda}"))
    }
}

fn grid_point(approx: f64) -> f64 {
    *lambda_grid().iter().find(|l| (*l - approx).abs() < 0.01).expect("grid point")
}

fn report(id: u32, title: &str, lines: Vec<(bool, String)>) {
    let passed = lines.iter().all(|(ok, _)| *ok);
    println!("{} [{id}] {title}", if passed { "PASS" } else { "FAIL" });
    for (ok, line) in &lines {
        println!("    {} {line}", if *ok { "ok  " } else { "MISS" });
    }
    assert!(passed, "criterion {id} failed");
}

fn near(label: &str, got: f64, target: f64, tol: f64) -> (bool, String) {
    ((got - target).abs() <= tol, format!("{label} = {got:.4} (target {target} ± {tol})"))
}

/// `a >= b` allowing for overlapping confidence intervals.
fn at_least(label: &str, a: (f64, f64), b: (f64, f64)) -> (bool, String) {
    (a.0 + a.1 >= b.0 - b.1, format!("{label}: {:.4} ± {:.4} vs {:.4} ± {:.4}", a.0, a.1, b.0, b.1))
}

fn eta(r: &AggregateSummary) -> (f64, f64) {
    (r.eta_mean, r.eta_ci95)
}

fn latency(r: &AggregateSummary) -> (f64, f64) {
    (r.latency_ms_mean, r.latency_ms_ci95)
}

fn five_user_table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut spec = preset(Figure::Fig2);
        spec.base.horizon_frames = SMALL_FRAMES;
        spec.seeds = (0..SMALL_SEEDS).collect();
        spec.schedulers = vec![Tdma, Pima, Gfeo, Sgfeo];
        spec.lambda_grid = [0.01, 0.34, 0.39, 0.45, 0.5].map(grid_point).to_vec();
        Table(run_sweep(&spec).expect("five-user sweep"))
    })
}

fn thirty_user_table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut spec = preset(Figure::Fig4);
        spec.base.horizon_frames = LARGE_FRAMES;
        spec.seeds = (0..LARGE_SEEDS).collect();
        spec.schedulers = vec![Pima, Sgfeo];
        spec.lambda_grid = [0.34, 0.39, 0.45, 0.5].map(grid_point).to_vec();
        let mut rows = run_sweep(&spec).expect("thirty-user sweep");
        spec.schedulers = vec![Saloha];
        spec.lambda_grid = [0.28, 0.5].map(grid_point).to_vec();
        rows.extend(run_sweep(&spec).expect("thirty-user ALOHA sweep"));
        Table(rows)
    })
}

#[test]
fn criterion_1_low_load_plateau() {
    let t = five_user_table();
    let l = grid_point(0.01);
    let lines = [Gfeo, Sgfeo, Pima].map(|s| near(&format!("{} eta", s.label()), t.row(s, l).eta_mean, 0.9091, 0.003));
    report(1, "low-load efficiency plateau, N=5", lines.to_vec());
}

#[test]
fn criterion_2_high_load_efficiency() {
    let t = five_user_table();
    let top = grid_point(0.5);
    let mut lines = vec![
        near("PIMA eta @0.5", t.row(Pima, top).eta_mean, 0.817, 0.012),
        near("GFEO eta @0.5", t.row(Gfeo, top).eta_mean, 0.852, 0.012),
        near("S-GFEO eta @0.5", t.row(Sgfeo, top).eta_mean, 0.845, 0.012),
    ];
    for l in [0.39, 0.45, 0.5].map(grid_point) {
        lines.push(at_least(&format!("GFEO >= S-GFEO @{l:.4}"), eta(t.row(Gfeo, l)), eta(t.row(Sgfeo, l))));
        lines.push(at_least(&format!("S-GFEO >= PIMA @{l:.4}"), eta(t.row(Sgfeo, l)), eta(t.row(Pima, l))));
    }
    let gain = t.row(Gfeo, top).eta_mean / t.row(Pima, top).eta_mean - 1.0;
    lines.push((gain > 0.0, format!("GFEO gain over PIMA @0.5 = {:.2}%", 100.0 * gain)));
    report(2, "high-load efficiency and ordering, N=5", lines);
}

#[test]
fn criterion_3_tdma_efficiency() {
    let t = five_user_table();
    report(
        3,
        "TDMA efficiency, N=5",
        vec![
            near("TDMA eta @0.01", t.row(Tdma, grid_point(0.01)).eta_mean, 0.2035, 0.008),
            near("TDMA eta @0.5", t.row(Tdma, grid_point(0.5)).eta_mean, 0.5175, 0.012),
        ],
    );
}

#[test]
fn criterion_4_five_user_latency() {
    let t = five_user_table();
    let top = grid_point(0.5);
    let mut lines = vec![
        near("GFEO latency ms @0.01", t.row(Gfeo, grid_point(0.01)).latency_ms_mean, 0.144, 0.005),
        near("GFEO latency ms @0.5", t.row(Gfeo, top).latency_ms_mean, 0.332, 0.035),
        near("PIMA latency ms @0.5", t.row(Pima, top).latency_ms_mean, 0.461, 0.05),
    ];
    for l in [0.34, 0.39, 0.45, 0.5].map(grid_point) {
        lines.push(at_least(&format!("S-GFEO >= GFEO @{l:.4}"), latency(t.row(Sgfeo, l)), latency(t.row(Gfeo, l))));
        lines.push(at_least(&format!("PIMA >= S-GFEO @{l:.4}"), latency(t.row(Pima, l)), latency(t.row(Sgfeo, l))));
    }
    report(4, "latency and ordering, N=5", lines);
}

#[test]
fn criterion_5_thirty_user_latency() {
    let t = thirty_user_table();
    let top = grid_point(0.5);
    let mut lines = vec![near("S-GFEO latency ms @0.5", t.row(Sgfeo, top).latency_ms_mean, 3.25, 0.5)];
    for l in [0.34, 0.39, 0.45, 0.5].map(grid_point) {
        let (s, p) = (t.row(Sgfeo, l).latency_ms_mean, t.row(Pima, l).latency_ms_mean);
        lines.push((s < p, format!("S-GFEO < PIMA @{l:.4}: {s:.4} vs {p:.4} ms")));
    }
    let (lo, hi) = (t.row(Saloha, grid_point(0.28)).latency_ms_mean, t.row(Saloha, top).latency_ms_mean);
    lines.push((hi / lo > 10.0, format!("SALOHA blow-up {hi:.3} / {lo:.3} ms = {:.1} (> 10)", hi / lo)));
    report(5, "latency, N=30", lines);
}

#[test]
fn criterion_6_oracle_equivalence() {
    let reports = [filter_suite(2, 2, 100, 6), filter_suite(3, 2, 20, 6), class_dp_suite(100, 6)];
    report(6, "filter and class-model oracles", reports.iter().map(|r| (r.passed, format!("{}: {}", r.name, r.detail))).collect());
}

#[test]
fn criterion_7_greedy_quality() {
    let r = greedy_suite(4, 2, 200, 7);
    report(7, "greedy never beats exhaustive search", vec![(r.passed, format!("{}: {}", r.name, r.detail))]);
}

#[test]
fn criterion_8_determinism() {
    let mut spec: SweepSpec = preset(Figure::Fig3);
    spec.base.horizon_frames = 500;
    spec.seeds = vec![0, 1, 2];
    spec.lambda_grid = vec![0.1, 0.45];
    let first = to_csv(&run_sweep(&spec).unwrap());
    let second = to_csv(&run_sweep(&spec).unwrap());
    let mut lines = vec![(first == second, format!("rerun CSV identical ({} bytes)", first.len()))];
    for lambda in [0.1, 0.45] {
        for seed in [0, 7] {
            let sums: Vec<u64> = SchedulerKind::ALL
                .iter()
                .map(|&scheduler| {
                    let cfg = SimConfig { scheduler, total_rate: lambda, seed, horizon_frames: 200, ..spec.base.clone() };
                    sim::run(&cfg).unwrap().traffic_checksum
                })
                .collect();
            lines.push((
                sums.iter().all(|&s| s == sums[0]),
                format!("traffic checksum shared by all schedulers at ({lambda}, seed {seed}): {:016x}", sums[0]),
            ));
        }
    }
    report(8, "determinism and paired traffic", lines);
}

#[test]
fn criterion_9_structural_invariants() {
    let mut lines = Vec::new();
    let cfg = SimConfig { scheduler: Gfeo, n_users: 5, pia_len: 0.1, total_rate: 0.5, horizon_frames: 10_000, ..Default::default() };
    let summary = sim::run(&cfg).unwrap();
    let stats = summary.scheduler_stats.clone();
    lines.push((stats.calls == 10_000, format!("{} scheduling calls", stats.calls)));
    lines.push((stats.filter_fallbacks == 0, format!("{} filter restarts", stats.filter_fallbacks)));
    lines.push((
        stats.max_normalisation_drift <= 1e-12,
        format!("max belief normalisation drift {:.3e} (<= 1e-12)", stats.max_normalisation_drift),
    ));
    lines.push((
        stats.max_activation_residual <= 1e-9,
        format!("max |sum(phi) - nu| {:.3e} (<= 1e-9)", stats.max_activation_residual),
    ));
    for scheduler in [Pima, Gfeo, Sgfeo] {
        let mut bad = 0u64;
        let mut frames = 0u64;
        let cfg = SimConfig { scheduler, horizon_frames: 10_000, ..cfg.clone() };
        sim::run_observed(&cfg, |obs, a, _| {
            frames += 1;
            let sizes = a.group_sizes();
            if sizes.contains(&0) || (a.l2() == 0) != (obs.nu == 0) || !a.is_compact() {
                bad += 1;
            }
        })
        .unwrap();
        lines.push((bad == 0, format!("{}: {bad} of {frames} frames with an empty slot or bad L2", scheduler.label())));
    }
    report(9, "structural invariants", lines);
}
