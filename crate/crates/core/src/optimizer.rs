//! Solvers for the maximal throughput `eta*`, the root of
//! `g(eta) = Omega(eta) - eta * tau_s`.
//!
//! `g` is strictly decreasing with `g(0) = E[Q] > 0`, so the root is unique.
//! The damped fixed-point iteration `eta <- eta + beta2 * g(eta)` is the primary
//! method; bisection on `[0, E[Q] / tau_s]` is an independent cross-check. Both
//! evaluate `Omega` on one set of common random numbers so that the root of the
//! estimate is well defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{
    beta1_bound, evaluation_seed, omega_streaming, ContentClass, EstimatorSettings, OmegaEstimator,
    OmegaModel,
};
use crate::rng::{derive_seed, tags};

/// One solver step: the price tried and `Omega(eta) - eta * tau_s` there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub eta: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    FixedPoint,
    Bisection,
}

/// Initial price of the fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// `E[Q] / (tau_s + E[t1])` with `t1` taken at the median direct rate.
    MedianLatency,
    /// `eta_0 = 1` bit/s.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative tolerance; the residual threshold is `tol * E[Q]` bits.
    pub tol: f64,
    pub max_iterations: usize,
    pub warm_start: WarmStart,
    /// Re-evaluate the residual at the solution with a fresh seed and 10x samples.
    pub validate: bool,
}

impl SolverOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iterations: 10_000,
            warm_start: WarmStart::MedianLatency,
            validate: false,
        }
    }
}

/// Residual of a solution recomputed on independent draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub seed: u64,
    pub sample_count: usize,
    pub inner_sample_count: usize,
    pub omega: f64,
    pub omega_std_error: f64,
    /// `Omega(eta*) - eta* * tau_s` on the fresh draws, bits.
    pub residual_bits: f64,
    /// First-order shift of the root implied by the fresh residual, bits/s.
    pub eta_shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSolution {
    pub eta_star: f64,
    /// `|Omega(eta*) - eta* * tau_s|`, bits.
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
    pub tol: f64,
    pub tol_bits: f64,
    pub seed: u64,
    pub sample_count: usize,
    pub inner_sample_count: usize,
    pub trace: Vec<TracePoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validation: Option<Validation>,
}

/// Constants of the root problem shared by both methods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootProblem {
    pub tau_s: f64,
    pub mean_size: f64,
    /// Upper bound used to size the step, seconds.
    pub beta1: f64,
    pub eta0: f64,
}

/// Outcome of a root search on an arbitrary `Omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct Root {
    pub eta: f64,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
}

/// Step size: midpoint of `[tol, (2 - tol) / (tau_s + beta1)]`.
pub fn step_size(tol: f64, tau_s: f64, beta1: f64) -> Result<f64> {
    let hi = (2.0 - tol) / (tau_s + beta1);
    if !(hi.is_finite() && hi >= tol) {
        return Err(Error::SolverConfig(format!(
            "empty step interval [{tol}, {hi}] (tau_s={tau_s}, beta1={beta1})"
        )));
    }
    Ok(0.5 * (tol + hi))
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

/// Damped fixed-point iteration on `omega`; stops once `|delta| < tol * E[Q]` and
/// returns the iterate after that last update.
pub fn fixed_point_root(
    mut omega: impl FnMut(f64) -> f64,
    problem: &RootProblem,
    tol: f64,
    max_iterations: usize,
) -> Result<Root> {
    check_tol(tol)?;
    let beta2 = step_size(tol, problem.tau_s, problem.beta1)?;
    let tol_bits = tol * problem.mean_size;
    let mut eta = problem.eta0.max(0.0);
    let mut trace = Vec::new();
    for m in 0..max_iterations {
        let delta = omega(eta) - eta * problem.tau_s;
        trace.push(TracePoint { eta, delta });
        let next = (eta + beta2 * delta).max(0.0);
        if delta.abs() < tol_bits {
            // The loop guard is checked after the update, so the last step is kept.
            let residual = omega(next) - next * problem.tau_s;
            trace.push(TracePoint { eta: next, delta: residual });
            return Ok(Root {
                eta: next,
                residual: residual.abs(),
                iterations: m + 1,
                trace,
            });
        }
        eta = next;
    }
    let last_residual = trace.last().map_or(f64::NAN, |t| t.delta.abs());
    Err(Error::NonConvergence {
        iterations: max_iterations,
        last_residual,
        trace,
    })
}

/// Bisection on `[0, E[Q] / tau_s]` until the bracket is narrower than
/// `tol * E[Q] / tau_s`; returns the bracket midpoint.
pub fn bisection_root(mut omega: impl FnMut(f64) -> f64, problem: &RootProblem, tol: f64) -> Result<Root> {
    check_tol(tol)?;
    let (mut lo, mut hi) = (0.0, problem.mean_size / problem.tau_s);
    let width = tol * problem.mean_size / problem.tau_s;
    let mut trace = Vec::new();
    let mut iterations = 0;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let delta = omega(mid) - mid * problem.tau_s;
        trace.push(TracePoint { eta: mid, delta });
        if delta > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let eta = 0.5 * (lo + hi);
    let delta = omega(eta) - eta * problem.tau_s;
    trace.push(TracePoint { eta, delta });
    Ok(Root {
        eta,
        residual: delta.abs(),
        iterations,
        trace,
    })
}

fn mean_size(contents: &[ContentClass]) -> f64 {
    contents.iter().map(|c| c.popularity * c.size_bits).sum()
}

fn expected_fetch(contents: &[ContentClass], fetch_time_s: f64) -> f64 {
    contents
        .iter()
        .map(|c| c.popularity * (1.0 - c.bs_cache_prob) * fetch_time_s)
        .sum()
}

/// Solves for `eta*` on any model of the randomness.
pub fn solve_eta<M: OmegaModel>(
    model: &M,
    method: SolveMethod,
    options: &SolverOptions,
    est: &EstimatorSettings,
) -> Result<EtaSolution> {
    check_tol(options.tol)?;
    let contents = model.contents();
    let tau_s = model.mean_interarrival_s();
    let eq = mean_size(&contents);
    let beta1 = beta1_bound(model, est)?.value;
    let estimator = OmegaEstimator::build(model, est)?;
    let eta0 = match options.warm_start {
        WarmStart::Unit => 1.0,
        WarmStart::MedianLatency => {
            let t1 = eq * estimator.median_direct_inverse_rate()
                + expected_fetch(&contents, model.fetch_time_s());
            eq / (tau_s + t1)
        }
    };
    let problem = RootProblem {
        tau_s,
        mean_size: eq,
        beta1,
        eta0,
    };

    let mut evaluate = |eta: f64| -> f64 {
        if est.crn_enabled {
            estimator.evaluate(eta).value
        } else {
            let seeded = est.with_seed(evaluation_seed(est, eta));
            omega_streaming(model, eta, &seeded)
                .map(|e| e.value)
                .unwrap_or(f64::NAN)
        }
    };
    let root = match method {
        SolveMethod::FixedPoint => fixed_point_root(&mut evaluate, &problem, options.tol, options.max_iterations)?,
        SolveMethod::Bisection => bisection_root(&mut evaluate, &problem, options.tol)?,
    };
    let validation = if options.validate {
        Some(validate_root(model, &estimator, root.eta, est)?)
    } else {
        None
    };
    Ok(EtaSolution {
        eta_star: root.eta,
        residual: root.residual,
        iterations: root.iterations,
        method,
        tol: options.tol,
        tol_bits: options.tol * eq,
        seed: est.seed,
        sample_count: est.sample_count,
        inner_sample_count: est.inner_sample_count,
        trace: root.trace,
        validation,
    })
}

/// Residual at `eta` on a fresh seed with ten times the user draws.
fn validate_root<M: OmegaModel>(
    model: &M,
    estimator: &OmegaEstimator,
    eta: f64,
    est: &EstimatorSettings,
) -> Result<Validation> {
    let tau_s = model.mean_interarrival_s();
    let fresh = EstimatorSettings {
        seed: derive_seed(est.seed, tags::VALIDATE),
        sample_count: est.sample_count * 10,
        ..*est
    };
    let o = omega_streaming(model, eta, &fresh)?;
    let h = 1e-3 * eta.max(1.0);
    let slope = (estimator.evaluate(eta + h).value - estimator.evaluate((eta - h).max(0.0)).value)
        / (eta + h - (eta - h).max(0.0));
    let residual_bits = o.value - eta * tau_s;
    Ok(Validation {
        seed: fresh.seed,
        sample_count: fresh.sample_count,
        inner_sample_count: fresh.inner_sample_count,
        omega: o.value,
        omega_std_error: o.std_error,
        residual_bits,
        eta_shift: residual_bits / (tau_s - slope),
    })
}

/// Algorithm entry point: damped fixed-point iteration.
pub fn solve_eta_fixed_point<M: OmegaModel>(model: &M, tol: f64, est: &EstimatorSettings) -> Result<EtaSolution> {
    solve_eta(model, SolveMethod::FixedPoint, &SolverOptions::new(tol), est)
}

/// Cross-check: bisection on the same estimate.
pub fn solve_eta_bisection<M: OmegaModel>(model: &M, tol: f64, est: &EstimatorSettings) -> Result<EtaSolution> {
    solve_eta(model, SolveMethod::Bisection, &SolverOptions::new(tol), est)
}
