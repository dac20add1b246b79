//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p cacheprobe --test acceptance`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use cacheprobe::optimizer::{solve_eta, SolverOptions};
use cacheprobe::policy::DecisionCounter;
use cacheprobe::sim::{run_simulation_with, SimOptions};
use cacheprobe::sweep::{run_point, run_sweep, sweep_rows, write_csv, PolicyChoice, SweepParameter, SweepSettings, SweepSpec};
use cacheprobe::{
    EstimatorSettings, EtaSolution, MLookupGrid, OmegaEstimator, Policy, RandomStream, Scenario, SimStats, SolveMethod,
    SystemConfig,
};
use cacheprobe_oracle::{exhaustive_policy_check, value_iteration_eta, DiscreteInstance, InstanceShape};

const FRAMES: u64 = 200_000;
const SEED: u64 = 2024;
const ALL: [PolicyChoice; 3] = [PolicyChoice::Jcpus, PolicyChoice::FullProbe, PolicyChoice::SingleProbe];

fn reference_config() -> SystemConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/paper_sec5.json");
    SystemConfig::load(&path).expect("shipped config loads")
}

struct PointRun {
    solution: EtaSolution,
    stats: BTreeMap<&'static str, SimStats>,
    seconds: f64,
}

impl PointRun {
    fn thr(&self, policy: &str) -> f64 {
        self.stats[policy].throughput_bps
    }

    fn ci(&self, policy: &str) -> f64 {
        self.stats[policy].throughput_ci95.unwrap_or(f64::INFINITY)
    }

    fn gain(&self, over: &str) -> f64 {
        self.thr("jcpus") / self.thr(over) - 1.0
    }
}

fn run(config: SystemConfig, policies: &[PolicyChoice]) -> PointRun {
    let start = Instant::now();
    let (solution, stats) = run_point(config, policies, FRAMES, SEED, &SweepSettings::default()).expect("point runs");
    PointRun {
        solution: solution.expect("jcpus requested"),
        stats: stats.into_iter().map(|(c, s)| (c.label(), s)).collect(),
        seconds: start.elapsed().as_secs_f64(),
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, passed: bool, detail: String) {
        println!("criterion {id} [{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.failures += usize::from(!passed);
    }
}

fn criterion_1(report: &mut Report, base: &PointRun) {
    let eta = base.solution.eta_star;
    let thr = base.thr("jcpus");
    let rel = (thr - eta).abs() / eta;
    report.line(
        1,
        "analytic-empirical consistency",
        rel <= 0.03 && base.seconds <= 120.0,
        format!(
            "eta* = {eta:.1} bps, simulated = {thr:.1} bps over {FRAMES} frames, |diff|/eta* = {:.3}% (<= 3%), solve+grid+3 sims {:.1} s (<= 120 s)",
            100.0 * rel,
            base.seconds
        ),
    );
}

fn criterion_2(report: &mut Report, powers: &[(f64, &PointRun)]) {
    let mut ok = true;
    let mut detail = Vec::new();
    for (p, r) in powers {
        let gap_hi = r.thr("jcpus") - r.thr("full-probe");
        let gap_lo = r.thr("full-probe") - r.thr("single-probe");
        let hi_ok = gap_hi > r.ci("jcpus") + r.ci("full-probe");
        let lo_ok = gap_lo > r.ci("full-probe") + r.ci("single-probe");
        ok &= hi_ok && lo_ok;
        detail.push(format!(
            "{p} dBm: {:.3e} > {:.3e} > {:.3e}{}",
            r.thr("jcpus"),
            r.thr("full-probe"),
            r.thr("single-probe"),
            if hi_ok && lo_ok { "" } else { " (gap within CI)" }
        ));
    }
    let at15 = powers.iter().find(|(p, _)| *p == 15.0).expect("15 dBm point").1;
    let gain = at15.gain("single-probe");
    ok &= gain >= 0.30;
    report.line(
        2,
        "policy ordering",
        ok,
        format!("{}; gain over single-probe at 15 dBm {:.1}% (>= 30%)", detail.join("; "), 100.0 * gain),
    );
}

fn criterion_3(report: &mut Report, small: &PointRun, large: &PointRun) {
    let (g40, g160) = (small.gain("full-probe"), large.gain("full-probe"));
    report.line(
        3,
        "content-size trend",
        g160 > g40,
        format!("gain over full-probe {:.1}% at 40 kbit, {:.1}% at 160 kbit", 100.0 * g40, 100.0 * g160),
    );
}

fn criterion_4(report: &mut Report, intervals: &[(f64, &PointRun)]) {
    let mut ok = true;
    for policy in ["jcpus", "full-probe", "single-probe"] {
        ok &= intervals.windows(2).all(|w| w[1].1.thr(policy) < w[0].1.thr(policy));
    }
    let gap = |t: f64| {
        let r = intervals.iter().find(|(x, _)| *x == t).expect("interval point").1;
        r.thr("jcpus") - r.thr("full-probe")
    };
    let (g10, g50) = (gap(0.01), gap(0.05));
    ok &= g50 < g10;
    let series: Vec<String> = intervals
        .iter()
        .map(|(t, r)| {
            format!(
                "{} ms: {:.3e}/{:.3e}/{:.3e}",
                t * 1e3,
                r.thr("jcpus"),
                r.thr("full-probe"),
                r.thr("single-probe")
            )
        })
        .collect();
    report.line(
        4,
        "interval trend",
        ok,
        format!(
            "{}; jcpus-full gap {:.3e} at 10 ms, {:.3e} at 50 ms",
            series.join("; "),
            g10,
            g50
        ),
    );
}

fn criterion_5(report: &mut Report, scenario: &Scenario) {
    let est = EstimatorSettings::default();
    let omega = OmegaEstimator::build(scenario, &est).expect("estimator builds");
    let eq: f64 = scenario
        .popularity()
        .iter()
        .zip(&scenario.config().content_sizes_bits)
        .map(|(p, q)| p * q)
        .sum();
    let tau_s = scenario.config().mean_interarrival_s;
    let etas: Vec<f64> = (0..20).map(|k| eq / tau_s * k as f64 / 19.0).collect();
    let values: Vec<f64> = etas.iter().map(|&e| omega.evaluate(e).value).collect();
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    let convex = etas.windows(2).zip(values.windows(2)).all(|(e, v)| {
        omega.evaluate(0.5 * (e[0] + e[1])).value <= 0.5 * (v[0] + v[1]) + 1e-9 * eq
    });
    let at_zero = (values[0] - eq).abs() <= 1e-12 * eq;
    let bounded = values.iter().all(|&v| (0.0..=eq * (1.0 + 1e-12)).contains(&v));

    let tol = 1e-3;
    let opts = SolverOptions::new(tol);
    let fp = solve_eta(scenario, SolveMethod::FixedPoint, &opts, &est).expect("fixed point");
    let bi = solve_eta(scenario, SolveMethod::Bisection, &opts, &est).expect("bisection");
    let combined = 2.0 * tol * eq / tau_s;
    let agree = (fp.eta_star - bi.eta_star).abs() <= 2.0 * combined;
    report.line(
        5,
        "omega properties",
        monotone && convex && at_zero && bounded && agree,
        format!(
            "20-point grid: non-increasing {monotone}, midpoint-convex {convex}, Omega(0) = {:.6} vs E[Q] = {eq:.6}, bounded {bounded}; \
             fixed point {:.1} vs bisection {:.1}, |diff| {:.1} <= {:.1}",
            values[0],
            fp.eta_star,
            bi.eta_star,
            (fp.eta_star - bi.eta_star).abs(),
            2.0 * combined
        ),
    );
}

fn criterion_6(report: &mut Report) {
    let shapes = [InstanceShape::OneRelay, InstanceShape::TwoRelays, InstanceShape::TwoContents];
    let est = EstimatorSettings::default().with_samples(1_000_000, 64);
    let mut ok = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_mc = 0.0f64;
    let mut policies = 0u64;
    let count = 6;
    for k in 0..count {
        let inst = DiscreteInstance::random(100 + k as u64, shapes[k % shapes.len()]);
        let exact = value_iteration_eta(&inst).expect("oracle root");
        let check = exhaustive_policy_check(&inst, exact).expect("enumerable");
        policies += check.policies;
        ok &= check.passed(1e-9);
        worst_ratio = worst_ratio
            .max((check.best_ratio - exact) / exact)
            .max((check.threshold_ratio - exact).abs() / exact);
        let mc = solve_eta(&inst, SolveMethod::FixedPoint, &SolverOptions::new(1e-5), &est).expect("mc solve");
        let rel = (mc.eta_star - exact).abs() / exact;
        worst_mc = worst_mc.max(rel);
        ok &= rel <= 1e-3;
    }
    report.line(
        6,
        "oracle optimality",
        ok,
        format!(
            "{count} random instances, {policies} policies enumerated, worst optimality gap {worst_ratio:.2e} (<= 1e-9), \
             worst Monte Carlo eta* error {worst_mc:.2e} (<= 1e-3)"
        ),
    );
}

fn criterion_7(report: &mut Report, scenario: &Scenario, base: &PointRun) {
    let eta = base.solution.eta_star;
    let grid = MLookupGrid::build(scenario, eta, &Default::default()).expect("grid");
    let policy = Policy::jcpus_with_grid(eta, grid, scenario).expect("policy");
    let sim = |workers| {
        let opts = SimOptions {
            workers: Some(workers),
            trace: None,
        };
        let stats = run_simulation_with(scenario, &policy, FRAMES, SEED, &opts).expect("sim");
        serde_json::to_vec(&stats).expect("stats serialize")
    };
    let stats_equal = sim(1) == sim(8);

    let spec = SweepSpec {
        parameter: SweepParameter::TxPowerDbm,
        values: vec![10.0, 20.0],
        policies: ALL.to_vec(),
        frames: 20_000,
        seed: SEED,
    };
    let csv = |workers| {
        let settings = SweepSettings {
            workers: Some(workers),
            ..SweepSettings::default()
        };
        let results = run_sweep(scenario.config(), &spec, &settings).expect("sweep");
        let mut out = Vec::new();
        write_csv(&sweep_rows(&results, spec.seed), &mut out).expect("csv");
        out
    };
    let csv_equal = csv(1) == csv(8);
    report.line(
        7,
        "determinism and sharding",
        stats_equal && csv_equal,
        format!("SimStats JSON identical across 1/8 workers: {stats_equal}; sweep CSV identical: {csv_equal}"),
    );
}

fn criterion_8(report: &mut Report, scenario: &Scenario, base: &PointRun) {
    let eta = base.solution.eta_star;
    let grid = MLookupGrid::build(scenario, eta, &Default::default()).expect("grid");
    let policy = Policy::jcpus_with_grid(eta, grid, scenario).expect("policy");
    let l = scenario.relay_count() as u64;
    let mut stream = RandomStream::new(SEED);
    let (mut worst_m, mut worst_total, mut worst_lookups) = (0, 0, 0);
    let n = 100_000;
    for _ in 0..n {
        let req = scenario.sample_request(&mut stream);
        let obs = scenario.sample_first_stage(&mut stream, &req).expect("observation");
        let mut counter = DecisionCounter::default();
        policy.first_stage(&obs, scenario, &mut stream, &mut counter).expect("decision");
        worst_m = worst_m.max(counter.m_comparisons);
        worst_total = worst_total.max(counter.comparisons());
        worst_lookups = worst_lookups.max(counter.lookups);
    }
    report.line(
        8,
        "decision-path complexity",
        worst_m <= l && worst_lookups <= l,
        format!(
            "L = {l}, over {n} decisions: at most {worst_m} comparisons on probe rewards (<= L), \
             {worst_total} including the direct threshold, {worst_lookups} grid lookups"
        ),
    );
}

fn main() -> ExitCode {
    let config = reference_config();
    let scenario = Scenario::new(config.clone()).expect("reference config is valid");
    let mut report = Report { failures: 0 };

    let powers: Vec<(f64, PointRun)> = [5.0, 10.0, 15.0, 20.0, 25.0]
        .iter()
        .map(|&p| (p, run(SweepParameter::TxPowerDbm.apply(&config, p), &ALL)))
        .collect();
    let base = &powers.iter().find(|(p, _)| *p == 15.0).expect("15 dBm").1;
    criterion_1(&mut report, base);
    criterion_2(&mut report, &powers.iter().map(|(p, r)| (*p, r)).collect::<Vec<_>>());

    let two = [PolicyChoice::Jcpus, PolicyChoice::FullProbe];
    let small = run(SweepParameter::ContentSizeBits.apply(&config, 40e3), &two);
    let large = run(SweepParameter::ContentSizeBits.apply(&config, 160e3), &two);
    criterion_3(&mut report, &small, &large);

    let others: Vec<(f64, PointRun)> = [0.005, 0.02, 0.05]
        .iter()
        .map(|&t| (t, run(SweepParameter::MeanInterarrivalS.apply(&config, t), &ALL)))
        .collect();
    let mut intervals: Vec<(f64, &PointRun)> = others.iter().map(|(t, r)| (*t, r)).collect();
    intervals.push((0.01, base));
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    criterion_4(&mut report, &intervals);

    criterion_5(&mut report, &scenario);
    criterion_6(&mut report);
    criterion_7(&mut report, &scenario, base);
    criterion_8(&mut report, &scenario, base);

    println!("acceptance: {} of 8 criteria failed", report.failures);
    if report.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
