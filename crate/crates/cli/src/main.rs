//! `cacheprobe` command-line tool: solve for the maximal throughput, simulate
//! policies, and run parameter sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cacheprobe::optimizer::{solve_eta, SolverOptions};
use cacheprobe::policy::{decide_first_stage, DecisionCounter, GridSpec};
use cacheprobe::reward::{probe_reward_profile, OmegaEstimator};
use cacheprobe::sim::{run_simulation_with, SimOptions};
use cacheprobe::sweep::{run_sweep, sweep_rows, write_csv, PolicyChoice, SweepParameter, SweepSettings, SweepSpec};
use cacheprobe::{
    EstimatorSettings, EtaSolution, MLookupGrid, Policy, RandomStream, RewardContext, Scenario, SimStats,
    SolveMethod, SystemConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "cacheprobe", version, about = "Cache-aided cooperative probing and scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for eta* with both root finders and check they agree.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one policy and report throughput statistics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = PolicyArg::Jcpus)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(1..))]
        frames: u64,
        /// Use this eta* instead of solving for it.
        #[arg(long)]
        eta: Option<f64>,
        /// Worker threads (results do not depend on it).
        #[arg(long)]
        workers: Option<usize>,
        /// Write one JSON line per frame here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter and write a CSV with one row per (value, policy).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        parameter: ParameterArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "jcpus,full-probe,single-probe")]
        policies: Vec<PolicyChoiceArg>,
        #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(1..))]
        frames: u64,
        #[arg(long)]
        workers: Option<usize>,
        /// CSV destination; metadata goes to `<out>.meta.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant checks on a configuration.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON system configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Relative solver tolerance.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Outer Monte Carlo draws of the Omega estimator.
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    /// Probe draws per outer draw.
    #[arg(long, default_value_t = 128)]
    inner_samples: usize,
}

impl Common {
    fn estimator(&self) -> EstimatorSettings {
        EstimatorSettings::default()
            .with_seed(self.seed)
            .with_samples(self.samples, self.inner_samples)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Jcpus,
    FullProbe,
    SingleProbe,
    DirectOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyChoiceArg {
    Jcpus,
    FullProbe,
    SingleProbe,
}

impl From<PolicyChoiceArg> for PolicyChoice {
    fn from(p: PolicyChoiceArg) -> Self {
        match p {
            PolicyChoiceArg::Jcpus => PolicyChoice::Jcpus,
            PolicyChoiceArg::FullProbe => PolicyChoice::FullProbe,
            PolicyChoiceArg::SingleProbe => PolicyChoice::SingleProbe,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ParameterArg {
    TxPowerDbm,
    ContentSizeBits,
    MeanInterarrivalS,
}

impl From<ParameterArg> for SweepParameter {
    fn from(p: ParameterArg) -> Self {
        match p {
            ParameterArg::TxPowerDbm => SweepParameter::TxPowerDbm,
            ParameterArg::ContentSizeBits => SweepParameter::ContentSizeBits,
            ParameterArg::MeanInterarrivalS => SweepParameter::MeanInterarrivalS,
        }
    }
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn check(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<cacheprobe::Error> for Failure {
    fn from(e: cacheprobe::Error) -> Self {
        use cacheprobe::Error as E;
        let code = match e {
            E::InvalidConfig { .. } | E::InvalidArgument(_) | E::Json(_) | E::Io(_) | E::GridFormat(_) => 2,
            E::RunawayPolicy { .. } => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

/// Provenance attached to every output.
#[derive(Serialize)]
struct Meta {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    seed: u64,
}

fn config_hash(cfg: &SystemConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn meta(cfg: &SystemConfig, seed: u64) -> Meta {
    Meta {
        tool: "cacheprobe",
        version: VERSION,
        config_hash: config_hash(cfg),
        seed,
    }
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let cfg = SystemConfig::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(Scenario::new(cfg)?)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn emit_json(value: &impl Serialize, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    match out {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}")
                .and_then(|_| w.flush())
                .map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn check_tol(tol: f64) -> CliResult<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--tol must be in (0, 1), got {tol}")))
    }
}

/// Largest allowed gap between the two root finders: twice their combined bracket.
fn agreement_band(scenario: &Scenario, tol: f64) -> f64 {
    2.0 * 2.0 * tol * scenario.mean_content_size() / scenario.config().mean_interarrival_s
}

#[derive(Serialize)]
struct SolveOutput {
    meta: Meta,
    eta_star: f64,
    fixed_point: EtaSolution,
    bisection: EtaSolution,
    agreement_band: f64,
}

fn solve_both(scenario: &Scenario, common: &Common) -> CliResult<(EtaSolution, EtaSolution)> {
    check_tol(common.tol)?;
    let est = common.estimator();
    let options = SolverOptions::new(common.tol);
    let fp = solve_eta(scenario, SolveMethod::FixedPoint, &options, &est)?;
    let bi = solve_eta(scenario, SolveMethod::Bisection, &options, &est)?;
    Ok((fp, bi))
}

fn cmd_solve(common: &Common, out: Option<&Path>) -> CliResult<()> {
    let scenario = load_scenario(&common.config)?;
    let (fp, bi) = solve_both(&scenario, common)?;
    let band = agreement_band(&scenario, common.tol);
    let gap = (fp.eta_star - bi.eta_star).abs();
    let output = SolveOutput {
        meta: meta(scenario.config(), common.seed),
        eta_star: fp.eta_star,
        fixed_point: fp,
        bisection: bi,
        agreement_band: band,
    };
    emit_json(&output, out)?;
    if gap > band {
        return Err(Failure::check(format!(
            "fixed-point and bisection disagree: |{} - {}| = {gap} > {band}",
            output.fixed_point.eta_star, output.bisection.eta_star
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateOutput {
    meta: Meta,
    eta_star: Option<f64>,
    stats: SimStats,
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    common: &Common,
    policy: PolicyArg,
    frames: u64,
    eta: Option<f64>,
    workers: Option<usize>,
    trace: Option<PathBuf>,
    out: Option<&Path>,
) -> CliResult<()> {
    let scenario = load_scenario(&common.config)?;
    let (policy, eta_star) = match policy {
        PolicyArg::Jcpus => {
            let eta = match eta {
                Some(e) => e,
                None => {
                    check_tol(common.tol)?;
                    solve_eta(
                        &scenario,
                        SolveMethod::FixedPoint,
                        &SolverOptions::new(common.tol),
                        &common.estimator(),
                    )?
                    .eta_star
                }
            };
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Failure::usage(format!("--eta must be positive, got {eta}")));
            }
            let grid = MLookupGrid::build(&scenario, eta, &GridSpec::default())?;
            (Policy::jcpus_with_grid(eta, grid, &scenario)?, Some(eta))
        }
        PolicyArg::FullProbe => (Policy::full_probe(), None),
        PolicyArg::SingleProbe => (Policy::single_probe(), None),
        PolicyArg::DirectOnly => (Policy::direct_only(), None),
    };
    if let Some(dir) = trace.as_deref().and_then(Path::parent) {
        if !dir.as_os_str().is_empty() && !dir.is_dir() {
            return Err(Failure::usage(format!("trace directory {} does not exist", dir.display())));
        }
    }
    let options = SimOptions { workers, trace };
    let stats = run_simulation_with(&scenario, &policy, frames, common.seed, &options)?;
    emit_json(
        &SimulateOutput {
            meta: meta(scenario.config(), common.seed),
            eta_star,
            stats,
        },
        out,
    )
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    meta: Meta,
    spec: &'a SweepSpec,
    tol: f64,
    samples: usize,
    inner_samples: usize,
}

fn cmd_sweep(common: &Common, spec: SweepSpec, workers: Option<usize>, out: &Path) -> CliResult<()> {
    check_tol(common.tol)?;
    spec.validate()?;
    let scenario = load_scenario(&common.config)?;
    // Fail on an unwritable destination before spending time on the sweep.
    let mut csv_out = create(out)?;
    let meta_path = {
        let mut p = out.as_os_str().to_owned();
        p.push(".meta.json");
        PathBuf::from(p)
    };
    let settings = SweepSettings {
        estimator: common.estimator(),
        tol: common.tol,
        grid: GridSpec::default(),
        workers,
    };
    let results = run_sweep(scenario.config(), &spec, &settings)?;
    write_csv(&sweep_rows(&results, spec.seed), &mut csv_out)?;
    csv_out
        .flush()
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", out.display())))?;
    emit_json(
        &SweepMeta {
            meta: meta(scenario.config(), spec.seed),
            spec: &spec,
            tol: common.tol,
            samples: common.samples,
            inner_samples: common.inner_samples,
        },
        Some(&meta_path),
    )
}

/// One named check; printed as a PASS/FAIL line.
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn run_checks(scenario: &Scenario, common: &Common) -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    let est = common.estimator();
    let omega = OmegaEstimator::build(scenario, &est)?;
    let eq = scenario.mean_content_size();
    let tau_s = scenario.config().mean_interarrival_s;

    let at_zero = omega.evaluate(0.0).value;
    checks.push(Check {
        name: "omega_at_zero_is_mean_size",
        passed: (at_zero - eq).abs() <= 1e-9 * eq,
        detail: format!("Omega(0) = {at_zero}, E[Q] = {eq}"),
    });

    let etas: Vec<f64> = (0..20).map(|k| eq / tau_s * k as f64 / 19.0).collect();
    let values: Vec<f64> = etas.iter().map(|&e| omega.evaluate(e).value).collect();
    let slack = 1e-9 * eq;
    let bounded = values.iter().all(|&v| v >= -slack && v <= eq + slack);
    checks.push(Check {
        name: "omega_bounded",
        passed: bounded,
        detail: format!("min {:.6e}, max {:.6e}", values.iter().cloned().fold(f64::MAX, f64::min), values[0]),
    });
    let monotone = values.windows(2).all(|w| w[1] <= w[0] + slack);
    checks.push(Check {
        name: "omega_non_increasing",
        passed: monotone,
        detail: format!("{} grid points", values.len()),
    });
    let convex = etas.windows(2).all(|w| {
        let mid = omega.evaluate(0.5 * (w[0] + w[1])).value;
        let chord = 0.5 * (omega.evaluate(w[0]).value + omega.evaluate(w[1]).value);
        mid <= chord + slack
    });
    checks.push(Check {
        name: "omega_midpoint_convex",
        passed: convex,
        detail: format!("{} intervals", etas.len() - 1),
    });

    let (fp, bi) = solve_both(scenario, common)?;
    let band = agreement_band(scenario, common.tol);
    checks.push(Check {
        name: "solvers_agree",
        passed: (fp.eta_star - bi.eta_star).abs() <= band,
        detail: format!("fixed point {}, bisection {}, band {band}", fp.eta_star, bi.eta_star),
    });

    let mut stream = RandomStream::new(common.seed);
    let mut worst = 0u64;
    for _ in 0..64 {
        let req = scenario.sample_request(&mut stream);
        let obs = scenario.sample_first_stage(&mut stream, &req)?;
        let ctx = RewardContext {
            user_position: req.user_position,
            direct_gain: obs.direct_gain,
            bs_cached: obs.bs_cached,
            content: req.content,
            size_bits: req.size_bits,
            price: fp.eta_star,
        };
        let m: Vec<f64> = probe_reward_profile(&ctx, scenario, &EstimatorSettings::online().with_samples(200, 1))?
            .iter()
            .map(|e| e.value)
            .collect();
        let mut counter = DecisionCounter::default();
        decide_first_stage(cacheprobe::policy::direct_reward(&obs, fp.eta_star, scenario), &m, &mut counter);
        worst = worst.max(counter.m_comparisons);
    }
    checks.push(Check {
        name: "decision_comparisons_linear",
        passed: worst <= scenario.relay_count() as u64,
        detail: format!("at most {worst} comparisons for L = {}", scenario.relay_count()),
    });
    Ok(checks)
}

fn cmd_validate(common: &Common) -> CliResult<()> {
    check_tol(common.tol)?;
    let scenario = load_scenario(&common.config)?;
    let checks = run_checks(&scenario, common)?;
    let m = meta(scenario.config(), common.seed);
    println!("config {} seed {} version {}", m.config_hash, m.seed, m.version);
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::check(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { common, out } => cmd_solve(&common, out.as_deref()),
        Command::Simulate {
            common,
            policy,
            frames,
            eta,
            workers,
            trace,
            out,
        } => cmd_simulate(&common, policy, frames, eta, workers, trace, out.as_deref()),
        Command::Sweep {
            common,
            parameter,
            values,
            policies,
            frames,
            workers,
            out,
        } => {
            let spec = SweepSpec {
                parameter: parameter.into(),
                values,
                policies: policies.into_iter().map(Into::into).collect(),
                frames,
                seed: common.seed,
            };
            cmd_sweep(&common, spec, workers, &out)
        }
        Command::Validate { common } => cmd_validate(&common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
