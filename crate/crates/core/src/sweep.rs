//! One-parameter sweeps comparing policies.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Scenario, SystemConfig};
use crate::optimizer::{solve_eta_fixed_point, EtaSolution};
use crate::policy::{GridSpec, MLookupGrid, Policy};
use crate::reward::EstimatorSettings;
use crate::sim::{run_simulation_with, SimOptions, SimStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TxPowerDbm,
    ContentSizeBits,
    MeanInterarrivalS,
}

impl SweepParameter {
    /// Copy of `base` with the parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> SystemConfig {
        let mut cfg = base.clone();
        match self {
            SweepParameter::TxPowerDbm => cfg.tx_power_dbm = value,
            SweepParameter::ContentSizeBits => cfg = cfg.with_uniform_content_size(value),
            SweepParameter::MeanInterarrivalS => cfg.mean_interarrival_s = value,
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    Jcpus,
    FullProbe,
    SingleProbe,
}

impl PolicyChoice {
    pub fn label(self) -> &'static str {
        match self {
            PolicyChoice::Jcpus => "jcpus",
            PolicyChoice::FullProbe => "full-probe",
            PolicyChoice::SingleProbe => "single-probe",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyChoice>,
    pub frames: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one value".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one policy".into()));
        }
        if self.frames == 0 {
            return Err(Error::InvalidArgument("frames must be >= 1".into()));
        }
        Ok(())
    }
}

/// Solver and simulator effort used at every sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub estimator: EstimatorSettings,
    pub tol: f64,
    pub grid: GridSpec,
    pub workers: Option<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            estimator: EstimatorSettings::default(),
            tol: 1e-3,
            grid: GridSpec::default(),
            workers: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter_value: f64,
    pub policy: String,
    pub eta_star: Option<f64>,
    pub throughput_bps: f64,
    pub ci95_bps: Option<f64>,
    pub frames: u64,
    pub seed: u64,
}

/// Solution (JCPUS only) and per-policy statistics at one configuration.
pub type PointOutput = (Option<EtaSolution>, Vec<(PolicyChoice, SimStats)>);

/// Everything computed at one sweep point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub value: f64,
    pub solution: Option<EtaSolution>,
    pub stats: Vec<(PolicyChoice, SimStats)>,
}

/// Solves and simulates one configuration for each requested policy.
pub fn run_point(
    config: SystemConfig,
    policies: &[PolicyChoice],
    frames: u64,
    seed: u64,
    settings: &SweepSettings,
) -> Result<PointOutput> {
    let scenario = Scenario::new(config)?;
    let options = SimOptions {
        workers: settings.workers,
        trace: None,
    };
    let solution = if policies.contains(&PolicyChoice::Jcpus) {
        Some(solve_eta_fixed_point(&scenario, settings.tol, &settings.estimator)?)
    } else {
        None
    };
    let mut stats = Vec::with_capacity(policies.len());
    for &choice in policies {
        let policy = match choice {
            PolicyChoice::Jcpus => {
                let eta = solution.as_ref().expect("solved above").eta_star;
                let grid = MLookupGrid::build(&scenario, eta, &settings.grid)?;
                Policy::jcpus_with_grid(eta, grid, &scenario)?
            }
            PolicyChoice::FullProbe => Policy::full_probe(),
            PolicyChoice::SingleProbe => Policy::single_probe(),
        };
        stats.push((choice, run_simulation_with(&scenario, &policy, frames, seed, &options)?));
    }
    Ok((solution, stats))
}

/// Runs every point (in parallel) and returns results in the order of `spec.values`.
pub fn run_sweep(base: &SystemConfig, spec: &SweepSpec, settings: &SweepSettings) -> Result<Vec<PointResult>> {
    spec.validate()?;
    spec.values
        .par_iter()
        .map(|&value| {
            let cfg = spec.parameter.apply(base, value);
            let (solution, stats) = run_point(cfg, &spec.policies, spec.frames, spec.seed, settings)?;
            Ok(PointResult { value, solution, stats })
        })
        .collect()
}

/// Flattens results to one row per (value, policy), in input order.
pub fn sweep_rows(results: &[PointResult], seed: u64) -> Vec<SweepRow> {
    results
        .iter()
        .flat_map(|p| {
            p.stats.iter().map(move |(choice, st)| SweepRow {
                parameter_value: p.value,
                policy: choice.label().to_string(),
                eta_star: match choice {
                    PolicyChoice::Jcpus => p.solution.as_ref().map(|s| s.eta_star),
                    _ => None,
                },
                throughput_bps: st.throughput_bps,
                ci95_bps: st.throughput_ci95,
                frames: st.frames,
                seed,
            })
        })
        .collect()
}

pub fn write_csv(rows: &[SweepRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn light() -> SweepSettings {
        SweepSettings {
            estimator: EstimatorSettings::default().with_samples(300, 16),
            tol: 1e-3,
            grid: GridSpec {
                gain_points: 8,
                radius_points: 6,
                angle_sectors: 4,
                samples_per_node: 100,
                quantile_samples: 2000,
                seed: 1,
            },
            workers: Some(1),
        }
    }

    #[test]
    fn apply_sets_one_field() {
        let base = SystemConfig::evaluation_default();
        assert_eq!(SweepParameter::TxPowerDbm.apply(&base, 20.0).tx_power_dbm, 20.0);
        let q = SweepParameter::ContentSizeBits.apply(&base, 4e4);
        assert!(q.content_sizes_bits.iter().all(|&x| x == 4e4));
        assert_eq!(SweepParameter::MeanInterarrivalS.apply(&base, 0.05).mean_interarrival_s, 0.05);
    }

    #[test]
    fn empty_inputs_rejected() {
        let spec = SweepSpec {
            parameter: SweepParameter::TxPowerDbm,
            values: vec![15.0],
            policies: vec![],
            frames: 10,
            seed: 1,
        };
        assert!(run_sweep(&SystemConfig::evaluation_default(), &spec, &light()).is_err());
    }

    #[test]
    fn rows_follow_input_order_and_csv_is_stable() {
        let spec = SweepSpec {
            parameter: SweepParameter::TxPowerDbm,
            values: vec![20.0, 10.0],
            policies: vec![PolicyChoice::SingleProbe, PolicyChoice::Jcpus],
            frames: 200,
            seed: 5,
        };
        let base = SystemConfig::evaluation_default();
        let rows = sweep_rows(&run_sweep(&base, &spec, &light()).unwrap(), spec.seed);
        let order: Vec<(f64, &str)> = rows.iter().map(|r| (r.parameter_value, r.policy.as_str())).collect();
        assert_eq!(
            order,
            vec![(20.0, "single-probe"), (20.0, "jcpus"), (10.0, "single-probe"), (10.0, "jcpus")]
        );
        assert!(rows[0].eta_star.is_none() && rows[1].eta_star.is_some());
        let mut a = Vec::new();
        write_csv(&rows, &mut a).unwrap();
        let rows2 = sweep_rows(&run_sweep(&base, &spec, &light()).unwrap(), spec.seed);
        let mut b = Vec::new();
        write_csv(&rows2, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("parameter_value,policy,eta_star,throughput_bps,ci95_bps,frames,seed\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("20.0,single-probe,,"));
    }
}
