//! Scheduling policies: the price-threshold rule and two no-wait baselines.
//!
//! At price `eta*` the first stage compares three values for the current user:
//! the direct reward `Q - eta* * (t1 + fetch)`, zero (drop), and the best probe
//! reward `M_J`. Direct wins ties; `J` is the smallest maximizer. After probing,
//! the user is served iff `Q - eta* * t2 >= 0`; the probing time is sunk.

mod grid;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use grid::{GridMeta, GridSpec, MLookupGrid};

use crate::delivery::{cache_aided_outcome, direct_latency, direct_outcome, DeliveryMode, DeliveryOutcome};
use crate::error::{Error, Result};
use crate::model::{Observation, ProbeReport, Scenario};
use crate::reward::{probe_reward_profile, EstimatorSettings, RewardContext};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStageDecision {
    DirectDeliver,
    Drop,
    /// Probe this many relays (1..=L).
    Probe(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondStageDecision {
    Deliver(DeliveryMode),
    Drop,
}

/// Where the threshold policy gets its probe rewards.
#[derive(Clone, Debug)]
pub enum MSource {
    /// Fresh Monte Carlo per observation.
    Online(EstimatorSettings),
    /// Precomputed table, interpolated.
    Grid(Arc<MLookupGrid>),
}

#[derive(Clone, Debug)]
pub enum PolicyKind {
    Jcpus { eta_star: f64, source: MSource },
    NoWaitFullProbe,
    NoWaitSingleProbe,
    /// Serves every user directly; a reference point, not a contender.
    DirectOnly,
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Jcpus { .. } => "jcpus",
            PolicyKind::NoWaitFullProbe => "full-probe",
            PolicyKind::NoWaitSingleProbe => "single-probe",
            PolicyKind::DirectOnly => "direct-only",
        }
    }
}

/// Work done by one first-stage decision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecisionCounter {
    /// Probe-reward values read from the M-source.
    pub lookups: u64,
    /// Comparisons involving a probe reward.
    pub m_comparisons: u64,
    /// The final direct-versus-threshold comparison.
    pub threshold_comparisons: u64,
}

impl DecisionCounter {
    pub fn comparisons(&self) -> u64 {
        self.m_comparisons + self.threshold_comparisons
    }
}

/// Three-way first-stage rule on precomputed branch values.
pub fn decide_first_stage(direct_reward: f64, m_values: &[f64], counter: &mut DecisionCounter) -> FirstStageDecision {
    let mut j = 0;
    let mut best = m_values[0];
    for (l, &m) in m_values.iter().enumerate().skip(1) {
        counter.m_comparisons += 1;
        if m > best {
            best = m;
            j = l;
        }
    }
    counter.m_comparisons += 1;
    let probe_worthwhile = best >= 0.0;
    let floor = if probe_worthwhile { best } else { 0.0 };
    counter.threshold_comparisons += 1;
    if direct_reward >= floor {
        FirstStageDecision::DirectDeliver
    } else if probe_worthwhile {
        FirstStageDecision::Probe(j + 1)
    } else {
        FirstStageDecision::Drop
    }
}

/// Direct reward `Q - eta * (t1 + [not cached] * T1)`.
pub fn direct_reward(obs: &Observation, eta_star: f64, scenario: &Scenario) -> f64 {
    let r = &obs.request;
    r.size_bits - eta_star * direct_latency(r.size_bits, obs.direct_gain, obs.bs_cached, scenario)
}

pub fn jcpus_first_stage(
    obs: &Observation,
    eta_star: f64,
    m_values: &[f64],
    scenario: &Scenario,
) -> Result<FirstStageDecision> {
    if m_values.len() != scenario.relay_count() || m_values.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "expected {} finite probe rewards",
            scenario.relay_count()
        )));
    }
    let d = direct_reward(obs, eta_star, scenario);
    Ok(decide_first_stage(d, m_values, &mut DecisionCounter::default()))
}

/// Serve iff `Q - eta* * t2 >= 0`.
pub fn jcpus_second_stage(size_bits: f64, outcome: &DeliveryOutcome, eta_star: f64) -> SecondStageDecision {
    if size_bits - eta_star * outcome.latency_s >= 0.0 {
        SecondStageDecision::Deliver(outcome.mode)
    } else {
        SecondStageDecision::Drop
    }
}

pub fn baseline_decide(kind: &PolicyKind, scenario: &Scenario) -> Result<FirstStageDecision> {
    match kind {
        PolicyKind::NoWaitFullProbe => Ok(FirstStageDecision::Probe(scenario.relay_count())),
        PolicyKind::NoWaitSingleProbe => Ok(FirstStageDecision::Probe(1)),
        PolicyKind::DirectOnly => Ok(FirstStageDecision::DirectDeliver),
        PolicyKind::Jcpus { .. } => Err(Error::InvalidArgument(
            "baseline_decide called with the threshold policy".into(),
        )),
    }
}

/// A validated, immutable policy.
#[derive(Clone, Debug)]
pub struct Policy {
    kind: PolicyKind,
}

impl Policy {
    pub fn new(kind: PolicyKind, scenario: &Scenario) -> Result<Self> {
        if let PolicyKind::Jcpus { eta_star, source } = &kind {
            if !(*eta_star > 0.0 && eta_star.is_finite()) {
                return Err(Error::InvalidArgument(format!("eta* must be positive, got {eta_star}")));
            }
            if let MSource::Grid(grid) = source {
                grid.check_compatible(scenario, *eta_star)?;
            }
        }
        Ok(Self { kind })
    }

    pub fn jcpus_with_grid(eta_star: f64, grid: MLookupGrid, scenario: &Scenario) -> Result<Self> {
        Self::new(
            PolicyKind::Jcpus {
                eta_star,
                source: MSource::Grid(Arc::new(grid)),
            },
            scenario,
        )
    }

    pub fn full_probe() -> Self {
        Self {
            kind: PolicyKind::NoWaitFullProbe,
        }
    }

    pub fn single_probe() -> Self {
        Self {
            kind: PolicyKind::NoWaitSingleProbe,
        }
    }

    pub fn direct_only() -> Self {
        Self {
            kind: PolicyKind::DirectOnly,
        }
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    /// Probe rewards for `obs`, one per probe count.
    pub fn probe_rewards(
        &self,
        obs: &Observation,
        scenario: &Scenario,
        stream: &mut RandomStream,
        out: &mut [f64],
        counter: &mut DecisionCounter,
    ) -> Result<()> {
        let PolicyKind::Jcpus { eta_star, source } = &self.kind else {
            return Err(Error::InvalidArgument("baselines have no probe rewards".into()));
        };
        let r = &obs.request;
        match source {
            MSource::Grid(grid) => {
                grid.probe_rewards(r.user_position, obs.direct_gain, r.content, r.size_bits, out);
            }
            MSource::Online(settings) => {
                let ctx = RewardContext {
                    user_position: r.user_position,
                    direct_gain: obs.direct_gain,
                    bs_cached: obs.bs_cached,
                    content: r.content,
                    size_bits: r.size_bits,
                    price: *eta_star,
                };
                let est = settings.with_seed(rand::RngCore::next_u64(stream));
                for (o, e) in out.iter_mut().zip(probe_reward_profile(&ctx, scenario, &est)?) {
                    *o = e.value;
                }
            }
        }
        counter.lookups += out.len() as u64;
        Ok(())
    }

    pub fn first_stage(
        &self,
        obs: &Observation,
        scenario: &Scenario,
        stream: &mut RandomStream,
        counter: &mut DecisionCounter,
    ) -> Result<FirstStageDecision> {
        match &self.kind {
            PolicyKind::Jcpus { eta_star, .. } => {
                let mut m = vec![0.0; scenario.relay_count()];
                self.probe_rewards(obs, scenario, stream, &mut m, counter)?;
                Ok(decide_first_stage(direct_reward(obs, *eta_star, scenario), &m, counter))
            }
            kind => baseline_decide(kind, scenario),
        }
    }

    /// Second-stage decision and the outcome it would realize.
    pub fn second_stage(
        &self,
        obs: &Observation,
        report: &ProbeReport,
        scenario: &Scenario,
    ) -> Result<(SecondStageDecision, DeliveryOutcome)> {
        let r = &obs.request;
        let aided = cache_aided_outcome(r.size_bits, obs.direct_gain, report, scenario)?;
        match &self.kind {
            PolicyKind::Jcpus { eta_star, .. } => Ok((jcpus_second_stage(r.size_bits, &aided, *eta_star), aided)),
            _ => {
                let direct = direct_outcome(r.size_bits, obs.direct_gain, obs.bs_cached, scenario);
                let best = if direct.latency_s < aided.latency_s { direct } else { aided };
                Ok((SecondStageDecision::Deliver(best.mode), best))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, Request, SystemConfig};

    fn scenario() -> Scenario {
        Scenario::new(SystemConfig::evaluation_default()).unwrap()
    }

    fn decide(d: f64, m: &[f64]) -> FirstStageDecision {
        decide_first_stage(d, m, &mut DecisionCounter::default())
    }

    #[test]
    fn direct_wins_tie_with_zero() {
        assert_eq!(decide(0.0, &[-1.0, -2.0, -0.5]), FirstStageDecision::DirectDeliver);
    }

    #[test]
    fn direct_wins_tie_with_probe() {
        assert_eq!(decide(3.0, &[1.0, 3.0, 2.0]), FirstStageDecision::DirectDeliver);
    }

    #[test]
    fn all_negative_drops() {
        assert_eq!(decide(-1.0, &[-1.0, -2.0, -0.5]), FirstStageDecision::Drop);
    }

    #[test]
    fn smallest_maximizer_is_probed() {
        assert_eq!(decide(1.0, &[2.0, 5.0, 5.0, 4.0]), FirstStageDecision::Probe(2));
    }

    #[test]
    fn zero_probe_reward_beats_negative_direct() {
        assert_eq!(decide(-1.0, &[0.0, -1.0]), FirstStageDecision::Probe(1));
    }

    #[test]
    fn comparison_count_is_linear() {
        for l in 1..=8 {
            let m: Vec<f64> = (0..l).map(|i| i as f64).collect();
            let mut c = DecisionCounter::default();
            decide_first_stage(-1.0, &m, &mut c);
            assert_eq!(c.m_comparisons, l as u64);
            assert_eq!(c.comparisons(), l as u64 + 1);
        }
    }

    #[test]
    fn second_stage_boundary_delivers() {
        let outcome = DeliveryOutcome {
            latency_s: 0.05,
            mode: DeliveryMode::ModeII,
            rate_bps: 2e6,
        };
        assert_eq!(
            jcpus_second_stage(1e5, &outcome, 1e5 / 0.05),
            SecondStageDecision::Deliver(DeliveryMode::ModeII)
        );
        let slow = DeliveryOutcome {
            latency_s: f64::INFINITY,
            ..outcome
        };
        assert_eq!(jcpus_second_stage(1e5, &slow, 1.0), SecondStageDecision::Drop);
    }

    #[test]
    fn second_stage_matches_rate_form() {
        let mut rs = RandomStream::new(8);
        for _ in 0..10_000 {
            let q = 1e4 + 2e5 * rs.uniform();
            let rate = 1e5 + 5e6 * rs.uniform();
            let eta = 1e5 + 5e6 * rs.uniform();
            let o = DeliveryOutcome {
                latency_s: q / rate,
                mode: DeliveryMode::ModeI,
                rate_bps: rate,
            };
            let deliver = matches!(jcpus_second_stage(q, &o, eta), SecondStageDecision::Deliver(_));
            // Equal up to rounding on the boundary.
            if (rate - eta).abs() > 1e-9 * eta {
                assert_eq!(deliver, rate >= eta, "q={q} rate={rate} eta={eta}");
            }
        }
    }

    #[test]
    fn baselines_are_fixed() {
        let s = scenario();
        assert_eq!(baseline_decide(&PolicyKind::NoWaitFullProbe, &s).unwrap(), FirstStageDecision::Probe(5));
        assert_eq!(baseline_decide(&PolicyKind::NoWaitSingleProbe, &s).unwrap(), FirstStageDecision::Probe(1));
        let jcpus = PolicyKind::Jcpus {
            eta_star: 1.0,
            source: MSource::Online(EstimatorSettings::online()),
        };
        assert!(matches!(baseline_decide(&jcpus, &s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn baseline_second_stage_is_min_latency() {
        let s = scenario();
        let mut rs = RandomStream::new(4);
        let p = Policy::full_probe();
        for _ in 0..2000 {
            let req = s.sample_request(&mut rs);
            let obs = s.sample_first_stage(&mut rs, &req).unwrap();
            let rep = s.sample_probe_report(&mut rs, &req, 5).unwrap();
            let (d, o) = p.second_stage(&obs, &rep, &s).unwrap();
            let t_direct = direct_latency(req.size_bits, obs.direct_gain, obs.bs_cached, &s);
            let t_aided = cache_aided_outcome(req.size_bits, obs.direct_gain, &rep, &s).unwrap().latency_s;
            assert_eq!(o.latency_s, t_direct.min(t_aided));
            assert_eq!(d, SecondStageDecision::Deliver(o.mode));
        }
    }

    #[test]
    fn policy_rejects_bad_eta() {
        let s = scenario();
        let kind = PolicyKind::Jcpus {
            eta_star: 0.0,
            source: MSource::Online(EstimatorSettings::online()),
        };
        assert!(Policy::new(kind, &s).is_err());
    }

    #[test]
    fn online_policy_probes_only_when_probe_reward_wins() {
        let s = scenario();
        let eta = 3e6;
        let policy = Policy::new(
            PolicyKind::Jcpus {
                eta_star: eta,
                source: MSource::Online(EstimatorSettings::online().with_samples(500, 1)),
            },
            &s,
        )
        .unwrap();
        let obs = Observation {
            request: Request {
                interarrival_s: 0.01,
                content: 0,
                size_bits: 1e5,
                user_position: Point::new(190.0, 0.0),
            },
            direct_gain: s.direct_gain_at(Point::new(190.0, 0.0), 1.0).unwrap(),
            bs_cached: false,
        };
        let mut counter = DecisionCounter::default();
        let d = policy
            .first_stage(&obs, &s, &mut RandomStream::new(1), &mut counter)
            .unwrap();
        assert_eq!(counter.lookups, 5);
        // Cell edge at a high price: direct delivery is far too slow.
        assert_ne!(d, FirstStageDecision::DirectDeliver);
    }
}
