//! Exact oracles on finite instances.
//!
//! A [`DiscreteInstance`] replaces every continuous distribution of the model by a
//! finite support: a handful of SNR levels for the direct link and for each relay
//! hop, at most two relays and two contents. On such an instance `Omega(eta)` is a
//! finite sum, so the maximal throughput can be computed to machine precision and
//! every deterministic scheduling policy can be enumerated.
//!
//! Rates here are computed independently of the main crate.

use std::collections::BTreeMap;

use cacheprobe::policy::{decide_first_stage, jcpus_second_stage, DecisionCounter};
use cacheprobe::reward::{ContentClass, OmegaModel};
use cacheprobe::{DeliveryMode, DeliveryOutcome, FirstStageDecision, RandomStream, SecondStageDecision};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("enumeration needs {needed} policies, limit is {limit}")]
    TooLarge { needed: f64, limit: u64 },
}

/// One support point of a finite distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub value: f64,
    pub prob: f64,
}

/// Linear SNR distributions of a relay's two hops, for the fixed user position.
#[derive(Clone, Debug, PartialEq)]
pub struct RelayLinks {
    pub bs_snr: Vec<Level>,
    pub user_snr: Vec<Level>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteInstance {
    pub bandwidth_hz: f64,
    pub direct_snr: Vec<Level>,
    pub relays: Vec<RelayLinks>,
    pub contents: Vec<ContentClass>,
    pub mean_interarrival_s: f64,
    pub probe_time_s: f64,
    pub fetch_time_s: f64,
}

/// Relay index, bs-link level, user-link level and cache bit of one probed relay.
type ProbedRelay = (usize, usize, usize, bool);

/// A probe result reduced to what the delivery rates depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOutcome {
    pub prob: f64,
    pub bottleneck_snr: f64,
    pub cached_snr: f64,
}

fn rate(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * (1.0 + snr).log2()
}

fn check_dist(name: &str, levels: &[Level]) -> Result<(), OracleError> {
    if levels.is_empty() || levels.len() > 8 {
        return Err(OracleError::Invalid(format!("{name}: need 1..=8 levels")));
    }
    if levels.iter().any(|l| l.prob.is_nan() || l.prob < 0.0 || !l.value.is_finite() || l.value <= 0.0) {
        return Err(OracleError::Invalid(format!("{name}: levels must be positive with prob >= 0")));
    }
    let total: f64 = levels.iter().map(|l| l.prob).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(OracleError::Invalid(format!("{name}: probabilities sum to {total}")));
    }
    Ok(())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn categorical(levels: &[Level], u: f64) -> f64 {
    let mut acc = 0.0;
    for l in levels {
        acc += l.prob;
        if u < acc {
            return l.value;
        }
    }
    levels.last().expect("validated non-empty").value
}

impl DiscreteInstance {
    pub fn validate(&self) -> Result<(), OracleError> {
        check_dist("direct", &self.direct_snr)?;
        if self.relays.len() > 2 {
            return Err(OracleError::Invalid("at most two relays".into()));
        }
        for (k, r) in self.relays.iter().enumerate() {
            check_dist(&format!("relay {k} bs"), &r.bs_snr)?;
            check_dist(&format!("relay {k} user"), &r.user_snr)?;
        }
        if self.contents.is_empty() || self.contents.len() > 2 {
            return Err(OracleError::Invalid("need one or two contents".into()));
        }
        let total: f64 = self.contents.iter().map(|c| c.popularity).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OracleError::Invalid(format!("popularity sums to {total}")));
        }
        for c in &self.contents {
            let ok = c.size_bits > 0.0
                && (0.0..=1.0).contains(&c.bs_cache_prob)
                && (0.0..=1.0).contains(&c.relay_cache_prob);
            if !ok {
                return Err(OracleError::Invalid("content fields out of range".into()));
            }
        }
        if !(self.mean_interarrival_s > 0.0 && self.probe_time_s >= 0.0 && self.fetch_time_s >= 0.0) {
            return Err(OracleError::Invalid("time constants out of range".into()));
        }
        Ok(())
    }

    pub fn mean_size(&self) -> f64 {
        self.contents.iter().map(|c| c.popularity * c.size_bits).sum()
    }

    /// Direct latency including the fetch when the BS misses.
    pub fn direct_latency(&self, content: usize, bs_cached: bool, direct_snr: f64) -> f64 {
        let q = self.contents[content].size_bits;
        q / rate(self.bandwidth_hz, direct_snr) + if bs_cached { 0.0 } else { self.fetch_time_s }
    }

    pub fn cache_aided_latency(&self, content: usize, direct_snr: f64, o: &ProbeOutcome) -> f64 {
        let q = self.contents[content].size_bits;
        let r1 = 0.5 * rate(self.bandwidth_hz, direct_snr + o.bottleneck_snr);
        let r2 = rate(self.bandwidth_hz, direct_snr + o.cached_snr);
        q / r1.max(r2)
    }

    /// Distinct observable results of probing `probe_count` relays for `content`.
    /// The probed set is a uniformly random prefix of a uniformly random order;
    /// results are keyed by the probed set and each relay's levels and cache bit.
    pub fn probe_outcomes(&self, content: usize, probe_count: usize) -> Vec<ProbeOutcome> {
        let p_cache = self.contents[content].relay_cache_prob;
        let perms = permutations(self.relays.len());
        let w_perm = 1.0 / perms.len() as f64;
        let mut merged: BTreeMap<Vec<ProbedRelay>, ProbeOutcome> = BTreeMap::new();
        for perm in &perms {
            let mut set: Vec<usize> = perm[..probe_count].to_vec();
            set.sort_unstable();
            let mut partial: Vec<(Vec<ProbedRelay>, f64)> = vec![(Vec::new(), w_perm)];
            for &r in &set {
                let links = &self.relays[r];
                let mut next = Vec::new();
                for (key, p) in &partial {
                    for (fi, f) in links.bs_snr.iter().enumerate() {
                        for (gi, g) in links.user_snr.iter().enumerate() {
                            for (cached, pc) in [(true, p_cache), (false, 1.0 - p_cache)] {
                                let w = p * f.prob * g.prob * pc;
                                if w > 0.0 {
                                    let mut k = key.clone();
                                    k.push((r, fi, gi, cached));
                                    next.push((k, w));
                                }
                            }
                        }
                    }
                }
                partial = next;
            }
            for (key, p) in partial {
                let mut bottleneck = 0.0f64;
                let mut cached = 0.0;
                for &(r, fi, gi, c) in &key {
                    let f = self.relays[r].bs_snr[fi].value;
                    let g = self.relays[r].user_snr[gi].value;
                    bottleneck = bottleneck.max(f.min(g));
                    if c {
                        cached += g;
                    }
                }
                merged
                    .entry(key)
                    .and_modify(|o| o.prob += p)
                    .or_insert(ProbeOutcome {
                        prob: p,
                        bottleneck_snr: bottleneck,
                        cached_snr: cached,
                    });
            }
        }
        merged.into_values().collect()
    }

    /// Exact `M_1..M_L` for a user with direct SNR `direct_snr` requesting `content`.
    pub fn probe_rewards(&self, content: usize, direct_snr: f64, eta: f64) -> Vec<f64> {
        let q = self.contents[content].size_bits;
        (1..=self.relays.len())
            .map(|l| {
                let gross: f64 = self
                    .probe_outcomes(content, l)
                    .iter()
                    .map(|o| o.prob * (q - eta * self.cache_aided_latency(content, direct_snr, o)).max(0.0))
                    .sum();
                gross - eta * l as f64 * self.probe_time_s
            })
            .collect()
    }

    /// First-stage observation states `(content, bs_cached, direct SNR)` with
    /// their probabilities; zero-probability states are skipped.
    pub fn first_stage_states(&self) -> Vec<(usize, bool, f64, f64)> {
        let mut states = Vec::new();
        for (i, c) in self.contents.iter().enumerate() {
            for (cached, pb) in [(true, c.bs_cache_prob), (false, 1.0 - c.bs_cache_prob)] {
                for h in &self.direct_snr {
                    let p = c.popularity * pb * h.prob;
                    if p > 0.0 {
                        states.push((i, cached, h.value, p));
                    }
                }
            }
        }
        states
    }

    /// Exact `Omega(eta)`.
    pub fn omega_exact(&self, eta: f64) -> f64 {
        self.first_stage_states()
            .iter()
            .map(|&(i, cached, h, p)| {
                let q = self.contents[i].size_bits;
                let direct = q - eta * self.direct_latency(i, cached, h);
                let best = self
                    .probe_rewards(i, h, eta)
                    .into_iter()
                    .fold(direct.max(0.0), f64::max);
                p * best
            })
            .sum()
    }
}

/// Root of `Omega(eta) = eta * tau_s` on the exact `Omega`, by bisection down to
/// adjacent floating-point values.
pub fn value_iteration_eta(instance: &DiscreteInstance) -> Result<f64, OracleError> {
    instance.validate()?;
    let tau_s = instance.mean_interarrival_s;
    let (mut lo, mut hi) = (0.0f64, instance.mean_size() / tau_s);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if instance.omega_exact(mid) - mid * tau_s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g_lo = (instance.omega_exact(lo) - lo * tau_s).abs();
    let g_hi = (instance.omega_exact(hi) - hi * tau_s).abs();
    Ok(if g_lo <= g_hi { lo } else { hi })
}

/// Result of enumerating every deterministic policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyCheckReport {
    pub policies: u64,
    pub best_ratio: f64,
    /// First-stage action of the best enumerated policy, per observation state.
    pub best_first_stage: Vec<FirstStageDecision>,
    pub threshold_ratio: f64,
    pub threshold_first_stage: Vec<FirstStageDecision>,
    pub eta_oracle: f64,
}

impl PolicyCheckReport {
    /// No enumerated policy beats `eta_oracle` and the threshold policy attains it,
    /// both to relative accuracy `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.best_ratio <= self.eta_oracle * (1.0 + tol)
            && (self.threshold_ratio - self.eta_oracle).abs() <= tol * self.eta_oracle
    }
}

/// One first-stage option with its expected contribution (bits, seconds).
#[derive(Clone, Copy)]
struct Choice {
    action: FirstStageDecision,
    bits: f64,
    time: f64,
}

pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// Enumerates every map from observations (first stage, and probe results in the
/// second) to decisions and evaluates its renewal ratio
/// `sum p_s y_s / (tau_s + sum p_s t_s)`.
pub fn exhaustive_policy_check(instance: &DiscreteInstance, eta_oracle: f64) -> Result<PolicyCheckReport, OracleError> {
    instance.validate()?;
    let tau = instance.probe_time_s;
    let states = instance.first_stage_states();

    let mut options: Vec<Vec<Choice>> = Vec::with_capacity(states.len());
    let mut needed = 1.0f64;
    for &(i, cached, h, p) in &states {
        let q = instance.contents[i].size_bits;
        let mut opts = vec![
            Choice {
                action: FirstStageDecision::DirectDeliver,
                bits: p * q,
                time: p * instance.direct_latency(i, cached, h),
            },
            Choice {
                action: FirstStageDecision::Drop,
                bits: 0.0,
                time: 0.0,
            },
        ];
        for l in 1..=instance.relays.len() {
            let outcomes = instance.probe_outcomes(i, l);
            if outcomes.len() > 20 {
                return Err(OracleError::TooLarge {
                    needed: f64::INFINITY,
                    limit: ENUMERATION_LIMIT,
                });
            }
            for mask in 0u32..(1 << outcomes.len()) {
                let (mut bits, mut time) = (0.0, l as f64 * tau);
                for (k, o) in outcomes.iter().enumerate() {
                    if mask & (1 << k) != 0 {
                        bits += o.prob * q;
                        time += o.prob * instance.cache_aided_latency(i, h, o);
                    }
                }
                opts.push(Choice {
                    action: FirstStageDecision::Probe(l),
                    bits: p * bits,
                    time: p * time,
                });
            }
        }
        needed *= opts.len() as f64;
        options.push(opts);
    }
    if needed > ENUMERATION_LIMIT as f64 {
        return Err(OracleError::TooLarge {
            needed,
            limit: ENUMERATION_LIMIT,
        });
    }

    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut stack = vec![0usize; options.len()];
    let mut count = 0u64;
    enumerate(&options, 0, 0.0, instance.mean_interarrival_s, &mut stack, &mut best, &mut count);

    let (threshold_ratio, threshold_first_stage) = threshold_policy_ratio(instance, eta_oracle);
    Ok(PolicyCheckReport {
        policies: count,
        best_ratio: best.0,
        best_first_stage: best.1.iter().zip(&options).map(|(&k, o)| o[k].action).collect(),
        threshold_ratio,
        threshold_first_stage,
        eta_oracle,
    })
}

fn enumerate(
    options: &[Vec<Choice>],
    depth: usize,
    bits: f64,
    time: f64,
    stack: &mut Vec<usize>,
    best: &mut (f64, Vec<usize>),
    count: &mut u64,
) {
    if depth == options.len() {
        *count += 1;
        let ratio = bits / time;
        if ratio > best.0 {
            *best = (ratio, stack.clone());
        }
        return;
    }
    for (k, c) in options[depth].iter().enumerate() {
        stack[depth] = k;
        enumerate(options, depth + 1, bits + c.bits, time + c.time, stack, best, count);
    }
}

/// Renewal ratio of the threshold policy run at price `eta`, using the crate's
/// decision functions on exact probe rewards.
pub fn threshold_policy_ratio(instance: &DiscreteInstance, eta: f64) -> (f64, Vec<FirstStageDecision>) {
    let (mut bits, mut time) = (0.0, instance.mean_interarrival_s);
    let mut actions = Vec::new();
    for (i, cached, h, p) in instance.first_stage_states() {
        let q = instance.contents[i].size_bits;
        let t1 = instance.direct_latency(i, cached, h);
        let m = if instance.relays.is_empty() {
            vec![f64::NEG_INFINITY]
        } else {
            instance.probe_rewards(i, h, eta)
        };
        let action = decide_first_stage(q - eta * t1, &m, &mut DecisionCounter::default());
        match action {
            FirstStageDecision::DirectDeliver => {
                bits += p * q;
                time += p * t1;
            }
            FirstStageDecision::Drop => {}
            FirstStageDecision::Probe(l) => {
                time += p * l as f64 * instance.probe_time_s;
                for o in instance.probe_outcomes(i, l) {
                    let t2 = instance.cache_aided_latency(i, h, &o);
                    let outcome = DeliveryOutcome {
                        latency_s: t2,
                        mode: DeliveryMode::ModeI,
                        rate_bps: q / t2,
                    };
                    if let SecondStageDecision::Deliver(_) = jcpus_second_stage(q, &outcome, eta) {
                        bits += p * o.prob * q;
                        time += p * o.prob * t2;
                    }
                }
            }
        }
        actions.push(action);
    }
    (bits / time, actions)
}

impl OmegaModel for DiscreteInstance {
    type User = f64;

    fn contents(&self) -> Vec<ContentClass> {
        self.contents.clone()
    }

    fn relay_count(&self) -> usize {
        self.relays.len()
    }

    fn mean_interarrival_s(&self) -> f64 {
        self.mean_interarrival_s
    }

    fn probe_time_s(&self) -> f64 {
        self.probe_time_s
    }

    fn fetch_time_s(&self) -> f64 {
        self.fetch_time_s
    }

    fn draw_user(&self, stream: &mut RandomStream) -> f64 {
        categorical(&self.direct_snr, stream.uniform())
    }

    fn direct_inverse_rate(&self, user: &f64) -> f64 {
        1.0 / rate(self.bandwidth_hz, *user)
    }

    fn draw_probes(
        &self,
        user: &f64,
        relay_cache_probs: &[f64],
        stream: &mut RandomStream,
        draws: usize,
        sink: &mut dyn FnMut(usize, &[f64]),
    ) {
        let l_count = self.relays.len();
        let mut order: Vec<usize> = (0..l_count).collect();
        let mut cached = vec![0.0; relay_cache_probs.len()];
        let mut out = vec![0.0; l_count * relay_cache_probs.len()];
        for j in 0..draws {
            for (i, o) in order.iter_mut().enumerate() {
                *o = i;
            }
            stream.shuffle(&mut order);
            let mut bottleneck = 0.0f64;
            cached.fill(0.0);
            for (k, &r) in order.iter().enumerate() {
                let f = categorical(&self.relays[r].bs_snr, stream.uniform());
                let g = categorical(&self.relays[r].user_snr, stream.uniform());
                let u = stream.uniform();
                bottleneck = bottleneck.max(f.min(g));
                for (gi, &p) in relay_cache_probs.iter().enumerate() {
                    if u < p {
                        cached[gi] += g;
                    }
                    let r1 = 0.5 * rate(self.bandwidth_hz, user + bottleneck);
                    let r2 = rate(self.bandwidth_hz, user + cached[gi]);
                    out[gi * l_count + k] = 1.0 / r1.max(r2);
                }
            }
            sink(j, &out);
        }
    }
}

/// Shapes of random instances, each small enough to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceShape {
    /// One relay, two direct levels, two relay-user levels, uncertain BS cache.
    OneRelay,
    /// Two relays, three direct levels, single-level hops, deterministic BS cache.
    TwoRelays,
    /// Two contents, one relay, deterministic BS cache per content.
    TwoContents,
}

fn log_uniform(rs: &mut RandomStream, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rs.uniform()).exp()
}

fn random_levels(rs: &mut RandomStream, n: usize, lo: f64, hi: f64) -> Vec<Level> {
    let weights: Vec<f64> = (0..n).map(|_| 0.2 + rs.uniform()).collect();
    let total: f64 = weights.iter().sum();
    let mut levels: Vec<Level> = weights
        .iter()
        .map(|w| Level {
            value: log_uniform(rs, lo, hi),
            prob: w / total,
        })
        .collect();
    let rest: f64 = levels[..n - 1].iter().map(|l| l.prob).sum();
    levels[n - 1].prob = 1.0 - rest;
    levels
}

impl DiscreteInstance {
    /// Random instance of the given shape with SNRs in roughly 0.1..100.
    pub fn random(seed: u64, shape: InstanceShape) -> Self {
        let mut rs = RandomStream::new(seed);
        let q = 1e5 * (0.5 + rs.uniform());
        let relay = |rs: &mut RandomStream, f_levels: usize, g_levels: usize| RelayLinks {
            bs_snr: random_levels(rs, f_levels, 1.0, 100.0),
            user_snr: random_levels(rs, g_levels, 0.5, 100.0),
        };
        let (direct_levels, relays, contents) = match shape {
            InstanceShape::OneRelay => (
                2,
                vec![relay(&mut rs, 1, 2)],
                vec![ContentClass {
                    size_bits: q,
                    popularity: 1.0,
                    bs_cache_prob: 0.2 + 0.6 * rs.uniform(),
                    relay_cache_prob: 0.2 + 0.6 * rs.uniform(),
                }],
            ),
            InstanceShape::TwoRelays => (
                3,
                vec![relay(&mut rs, 1, 1), relay(&mut rs, 1, 1)],
                vec![ContentClass {
                    size_bits: q,
                    popularity: 1.0,
                    bs_cache_prob: 0.0,
                    relay_cache_prob: 0.2 + 0.6 * rs.uniform(),
                }],
            ),
            InstanceShape::TwoContents => {
                let p1 = 0.3 + 0.4 * rs.uniform();
                let relay = relay(&mut rs, 1, 2);
                (
                    2,
                    vec![relay],
                    vec![
                        ContentClass {
                            size_bits: q,
                            popularity: p1,
                            bs_cache_prob: 1.0,
                            relay_cache_prob: 0.2 + 0.6 * rs.uniform(),
                        },
                        ContentClass {
                            size_bits: q * (0.5 + rs.uniform()),
                            popularity: 1.0 - p1,
                            bs_cache_prob: 0.0,
                            relay_cache_prob: 0.2 + 0.6 * rs.uniform(),
                        },
                    ],
                )
            }
        };
        DiscreteInstance {
            bandwidth_hz: 1e6,
            direct_snr: random_levels(&mut rs, direct_levels, 0.1, 30.0),
            relays,
            contents,
            mean_interarrival_s: 0.01,
            probe_time_s: log_uniform(&mut rs, 1e-4, 2e-3),
            fetch_time_s: log_uniform(&mut rs, 1e-4, 1e-2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> Vec<Level> {
        vec![Level { value: v, prob: 1.0 }]
    }

    fn content(q: f64) -> ContentClass {
        ContentClass {
            size_bits: q,
            popularity: 1.0,
            bs_cache_prob: 1.0,
            relay_cache_prob: 0.0,
        }
    }

    fn no_relay(h: f64, q: f64) -> DiscreteInstance {
        DiscreteInstance {
            bandwidth_hz: 1e6,
            direct_snr: single(h),
            relays: vec![],
            contents: vec![content(q)],
            mean_interarrival_s: 0.01,
            probe_time_s: 1e-4,
            fetch_time_s: 1e-4,
        }
    }

    #[test]
    fn single_branch_instance_has_closed_form_root() {
        let inst = no_relay(3.0, 1e5);
        let t1 = 1e5 / (1e6 * 4f64.log2());
        let exact = 1e5 / (0.01 + t1);
        let eta = value_iteration_eta(&inst).unwrap();
        assert!((eta - exact).abs() <= 1e-12 * exact, "{eta} vs {exact}");
    }

    #[test]
    fn oracle_root_is_a_fixed_point() {
        for seed in 0..6 {
            let inst = DiscreteInstance::random(seed, InstanceShape::OneRelay);
            let eta = value_iteration_eta(&inst).unwrap();
            let g = inst.omega_exact(eta) - eta * inst.mean_interarrival_s;
            assert!(g.abs() <= 1e-12 * inst.mean_size(), "seed {seed}: {g}");
        }
    }

    #[test]
    fn useless_relay_leaves_root_unchanged() {
        let base = no_relay(3.0, 1e5);
        let mut with_relay = base.clone();
        with_relay.relays.push(RelayLinks {
            bs_snr: single(1e-3),
            user_snr: single(1e-3),
        });
        let a = value_iteration_eta(&base).unwrap();
        let b = value_iteration_eta(&with_relay).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
        let report = exhaustive_policy_check(&with_relay, b).unwrap();
        assert_eq!(report.threshold_first_stage, vec![FirstStageDecision::DirectDeliver]);
    }

    #[test]
    fn validation_catches_bad_probabilities() {
        let mut inst = no_relay(3.0, 1e5);
        inst.direct_snr[0].prob = 0.9;
        assert!(matches!(value_iteration_eta(&inst), Err(OracleError::Invalid(_))));
    }

    #[test]
    fn probe_outcomes_are_a_distribution() {
        for shape in [InstanceShape::OneRelay, InstanceShape::TwoRelays, InstanceShape::TwoContents] {
            let inst = DiscreteInstance::random(3, shape);
            for l in 1..=inst.relays.len() {
                let total: f64 = inst.probe_outcomes(0, l).iter().map(|o| o.prob).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oversized_enumeration_is_refused() {
        let mut inst = DiscreteInstance::random(1, InstanceShape::OneRelay);
        inst.relays[0].bs_snr = random_levels(&mut RandomStream::new(2), 4, 1.0, 10.0);
        inst.direct_snr = random_levels(&mut RandomStream::new(3), 4, 1.0, 10.0);
        let eta = value_iteration_eta(&inst).unwrap();
        assert!(matches!(
            exhaustive_policy_check(&inst, eta),
            Err(OracleError::TooLarge { .. })
        ));
    }
}
