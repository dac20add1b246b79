//! Renewal-reward simulation.
//!
//! A frame starts when the previous delivery ends and runs through arriving users
//! until one is served. Frames are i.i.d., so each is simulated on its own
//! substream (keyed by frame index) and the results are reduced in index order;
//! the statistics do not depend on how frames are spread over workers.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delivery::{direct_outcome, DeliveryMode, DeliveryOutcome};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::policy::{DecisionCounter, FirstStageDecision, Policy, SecondStageDecision};
use crate::rng::{tags, RandomStream};

/// Users allowed in one frame before the run is declared runaway.
pub const MAX_USERS_PER_FRAME: u64 = 1_000_000;

/// Batches for the batch-means confidence interval.
pub const CI_BATCHES: usize = 30;

/// Two-sided 95% Student t quantile with `CI_BATCHES - 1` degrees of freedom.
const T_QUANTILE_29: f64 = 2.045;

const CHUNK_FRAMES: usize = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTally {
    pub direct: u64,
    pub drop: u64,
    /// Index `j` counts decisions to probe `j + 1` relays.
    pub probe: [u64; 8],
    pub probe_more: u64,
    pub deliver_direct: u64,
    pub deliver_mode_i: u64,
    pub deliver_mode_ii: u64,
    pub drop_after_probe: u64,
}

impl DecisionTally {
    fn add(&mut self, o: &DecisionTally) {
        self.direct += o.direct;
        self.drop += o.drop;
        for (a, b) in self.probe.iter_mut().zip(&o.probe) {
            *a += b;
        }
        self.probe_more += o.probe_more;
        self.deliver_direct += o.deliver_direct;
        self.deliver_mode_i += o.deliver_mode_i;
        self.deliver_mode_ii += o.deliver_mode_ii;
        self.drop_after_probe += o.drop_after_probe;
    }

    fn histogram(&self) -> BTreeMap<String, u64> {
        let mut h = BTreeMap::new();
        h.insert("direct".to_string(), self.direct);
        h.insert("drop".to_string(), self.drop);
        for (j, &n) in self.probe.iter().enumerate() {
            if n > 0 {
                h.insert(format!("probe_{}", j + 1), n);
            }
        }
        if self.probe_more > 0 {
            h.insert("probe_more".to_string(), self.probe_more);
        }
        h.insert("deliver_direct".to_string(), self.deliver_direct);
        h.insert("deliver_mode_i".to_string(), self.deliver_mode_i);
        h.insert("deliver_mode_ii".to_string(), self.deliver_mode_ii);
        h.insert("drop_after_probe".to_string(), self.drop_after_probe);
        h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub bits_delivered: f64,
    pub duration_s: f64,
    pub users_seen: u64,
    pub probes_spent: u64,
    pub final_mode: DeliveryMode,
    pub drops_after_probe: u64,
    /// Sum of the users' interarrival times.
    pub waiting_s: f64,
    /// Latency of the final delivery, fetch included.
    pub delivery_s: f64,
    pub tally: DecisionTally,
}

/// Simulates one frame.
pub fn run_frame(stream: &mut RandomStream, policy: &Policy, scenario: &Scenario) -> Result<FrameOutcome> {
    let tau = scenario.config().probe_time_s;
    let mut tally = DecisionTally::default();
    let mut waiting = 0.0;
    let mut probe_time = 0.0;
    let mut probes = 0u64;
    let mut users = 0u64;
    let mut counter = DecisionCounter::default();
    loop {
        if users >= MAX_USERS_PER_FRAME {
            return Err(Error::RunawayPolicy {
                limit: MAX_USERS_PER_FRAME,
            });
        }
        users += 1;
        let request = scenario.sample_request(stream);
        waiting += request.interarrival_s;
        let obs = scenario.sample_first_stage(stream, &request)?;
        match policy.first_stage(&obs, scenario, stream, &mut counter)? {
            FirstStageDecision::DirectDeliver => {
                tally.direct += 1;
                tally.deliver_direct += 1;
                let outcome = direct_outcome(request.size_bits, obs.direct_gain, obs.bs_cached, scenario);
                return Ok(frame_end(&request, waiting, probe_time, users, probes, outcome, tally));
            }
            FirstStageDecision::Drop => tally.drop += 1,
            FirstStageDecision::Probe(j) => {
                match tally.probe.get_mut(j - 1) {
                    Some(n) => *n += 1,
                    None => tally.probe_more += 1,
                }
                probes += j as u64;
                probe_time += j as f64 * tau;
                let report = scenario.sample_probe_report(stream, &request, j)?;
                match policy.second_stage(&obs, &report, scenario)? {
                    (SecondStageDecision::Deliver(mode), outcome) => {
                        match mode {
                            DeliveryMode::Direct => tally.deliver_direct += 1,
                            DeliveryMode::ModeI => tally.deliver_mode_i += 1,
                            DeliveryMode::ModeII => tally.deliver_mode_ii += 1,
                        }
                        return Ok(frame_end(&request, waiting, probe_time, users, probes, outcome, tally));
                    }
                    (SecondStageDecision::Drop, _) => tally.drop_after_probe += 1,
                }
            }
        }
    }
}

fn frame_end(
    request: &crate::model::Request,
    waiting: f64,
    probe_time: f64,
    users: u64,
    probes: u64,
    outcome: DeliveryOutcome,
    tally: DecisionTally,
) -> FrameOutcome {
    FrameOutcome {
        bits_delivered: request.size_bits,
        duration_s: waiting + probe_time + outcome.latency_s,
        users_seen: users,
        probes_spent: probes,
        final_mode: outcome.mode,
        drops_after_probe: tally.drop_after_probe,
        waiting_s: waiting,
        delivery_s: outcome.latency_s,
        tally,
    }
}

#[derive(Clone, Debug, Default)]
pub struct SimOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Newline-delimited JSON file receiving one line per frame.
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub policy: String,
    pub seed: u64,
    pub frames: u64,
    pub total_bits: f64,
    pub total_time_s: f64,
    pub throughput_bps: f64,
    /// Batch-means 95% half-width; absent with fewer frames than batches.
    pub throughput_ci95: Option<f64>,
    pub batches: usize,
    pub users_seen: u64,
    pub probes_spent: u64,
    pub drops_after_probe: u64,
    pub decision_histogram: BTreeMap<String, u64>,
}

pub fn run_simulation(scenario: &Scenario, policy: &Policy, frames: u64, seed: u64) -> Result<SimStats> {
    run_simulation_with(scenario, policy, frames, seed, &SimOptions::default())
}

pub fn run_simulation_with(
    scenario: &Scenario,
    policy: &Policy,
    frames: u64,
    seed: u64,
    options: &SimOptions,
) -> Result<SimStats> {
    if frames == 0 {
        return Err(Error::InvalidArgument("frames must be >= 1".into()));
    }
    match options.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| simulate(scenario, policy, frames, seed, options))
        }
        None => simulate(scenario, policy, frames, seed, options),
    }
}

/// Contiguous frame ranges of the batch-means estimator.
fn batch_bounds(frames: u64, batches: usize) -> Vec<u64> {
    (0..=batches as u64).map(|b| b * frames / batches as u64).collect()
}

fn simulate(scenario: &Scenario, policy: &Policy, frames: u64, seed: u64, options: &SimOptions) -> Result<SimStats> {
    let root = RandomStream::new(seed).substream(tags::FRAMES);
    let mut trace = match &options.trace {
        Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => None,
    };
    let batches = if frames >= CI_BATCHES as u64 { CI_BATCHES } else { 0 };
    let bounds = batch_bounds(frames, batches.max(1));
    let mut batch_sums = vec![(0.0f64, 0.0f64); batches];
    let mut batch = 0usize;

    let (mut bits, mut time) = (0.0, 0.0);
    let (mut users, mut probes, mut drops) = (0u64, 0u64, 0u64);
    let mut tally = DecisionTally::default();
    let mut start = 0u64;
    while start < frames {
        let end = (start + CHUNK_FRAMES as u64).min(frames);
        let outcomes: Vec<FrameOutcome> = (start..end)
            .into_par_iter()
            .map(|k| run_frame(&mut root.substream(k), policy, scenario))
            .collect::<Result<_>>()?;
        for (i, o) in outcomes.iter().enumerate() {
            let k = start + i as u64;
            bits += o.bits_delivered;
            time += o.duration_s;
            users += o.users_seen;
            probes += o.probes_spent;
            drops += o.drops_after_probe;
            tally.add(&o.tally);
            if batches > 0 {
                while k >= bounds[batch + 1] {
                    batch += 1;
                }
                batch_sums[batch].0 += o.bits_delivered;
                batch_sums[batch].1 += o.duration_s;
            }
            if let Some(w) = trace.as_mut() {
                serde_json::to_writer(&mut *w, &TraceLine { frame: k, outcome: o })?;
                w.write_all(b"\n")?;
            }
        }
        start = end;
    }
    if let Some(mut w) = trace {
        w.flush()?;
    }

    let throughput_ci95 = (batches > 0).then(|| {
        let rates: Vec<f64> = batch_sums.iter().map(|(b, t)| b / t).collect();
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        T_QUANTILE_29 * (var / n).sqrt()
    });
    Ok(SimStats {
        policy: policy.kind().label().to_string(),
        seed,
        frames,
        total_bits: bits,
        total_time_s: time,
        throughput_bps: bits / time,
        throughput_ci95,
        batches,
        users_seen: users,
        probes_spent: probes,
        drops_after_probe: drops,
        decision_histogram: tally.histogram(),
    })
}

#[derive(Serialize)]
struct TraceLine<'a> {
    frame: u64,
    #[serde(flatten)]
    outcome: &'a FrameOutcome,
}
