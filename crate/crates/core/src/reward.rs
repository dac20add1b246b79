//! Monte Carlo estimators for the probe reward `M_l` and the optimality
//! function `Omega(eta)`.
//!
//! Both quantities are expectations of `max{q - eta * t, 0}`-type terms. Writing
//! `t = q * u` with `u` the inverse rate (seconds per bit), every sampled term is
//! `q * max(1 - eta * u, 0)`, so the random part can be drawn once and reused
//! for every price. [`OmegaEstimator`] stores the inverse rates of a fixed set of
//! draws; evaluating it at any price is then a pure function of those numbers,
//! which makes the estimate exactly non-increasing and convex in the price.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delivery::shannon_rate;
use crate::error::{Error, Result};
use crate::model::{OmegaGainConvention, Point, ProbeSelection, Scenario};
use crate::rng::{tags, RandomStream};

/// Sampling parameters of an estimator.
///
/// For [`omega`] and the solvers `sample_count` is the number of user draws and
/// `inner_sample_count` the number of probe draws nested in each. For the
/// single-context estimators ([`probe_reward`], [`best_probe_count`])
/// `sample_count` is the number of probe draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub sample_count: usize,
    pub inner_sample_count: usize,
    pub seed: u64,
    pub crn_enabled: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            sample_count: 50_000,
            inner_sample_count: 128,
            seed: 0x5eed,
            crn_enabled: true,
        }
    }
}

impl EstimatorSettings {
    /// Defaults for a single online `M_l` evaluation.
    pub fn online() -> Self {
        Self {
            sample_count: 10_000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, outer: usize, inner: usize) -> Self {
        self.sample_count = outer;
        self.inner_sample_count = inner;
        self
    }

    fn check(&self) -> Result<()> {
        if self.sample_count == 0 || self.inner_sample_count == 0 {
            return Err(Error::InvalidArgument("sample counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_samples(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            value: mean,
            std_error: (var / nf).sqrt(),
        }
    }
}

/// Conditioning variables of the probe reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardContext {
    pub user_position: Point,
    pub direct_gain: f64,
    pub bs_cached: bool,
    /// Zero-based content index; selects the relay caching probability.
    pub content: usize,
    pub size_bits: f64,
    /// Price on time, bits/s.
    pub price: f64,
}

/// One content as seen by the estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentClass {
    pub size_bits: f64,
    pub popularity: f64,
    pub bs_cache_prob: f64,
    pub relay_cache_prob: f64,
}

/// Source of the randomness entering `Omega`. Implemented by [`Scenario`] and by
/// finite test instances.
pub trait OmegaModel: Sync {
    /// User-level draw: everything observed before probing except the content.
    type User: Send + Sync;

    fn contents(&self) -> Vec<ContentClass>;
    fn relay_count(&self) -> usize;
    fn mean_interarrival_s(&self) -> f64;
    fn probe_time_s(&self) -> f64;
    fn fetch_time_s(&self) -> f64;

    fn draw_user(&self, stream: &mut RandomStream) -> Self::User;

    /// Seconds per bit of direct delivery (excluding fetch).
    fn direct_inverse_rate(&self, user: &Self::User) -> f64;

    /// `draws` nested probe draws for `user`. For each draw `j`, calls
    /// `sink(j, inv)` where `inv[g * L + l - 1]` is the seconds per bit of the best
    /// cache-aided mode after probing `l` relays, for content caching group `g`
    /// (relay caching probability `relay_cache_probs[g]`). Cache states must be
    /// drawn with one shared uniform per relay so groups are coupled.
    fn draw_probes(
        &self,
        user: &Self::User,
        relay_cache_probs: &[f64],
        stream: &mut RandomStream,
        draws: usize,
        sink: &mut dyn FnMut(usize, &[f64]),
    );
}

/// User draw of the continuous model.
#[derive(Clone, Debug)]
pub struct ScenarioUser {
    pub position: Point,
    pub direct_snr: f64,
    /// Per probe count, the direct SNR used in the probe term under the literal
    /// gain convention; empty under the direct convention.
    literal_probe_snr: Vec<f64>,
}

/// Reusable sampler of probe scenarios for a fixed user position.
///
/// Each draw fills, for every prefix `l` of the probe order, the max-min DF SNR
/// (`bottleneck[l-1]`) and, per caching group, the summed SNR of caching relays
/// (`cached[g * L + l - 1]`). Neither depends on the direct gain.
pub(crate) struct ProbeSampler {
    bs_snr: Vec<f64>,
    user_snr: Vec<f64>,
    random_order: bool,
    order: Vec<usize>,
    groups: Vec<f64>,
    pub(crate) bottleneck: Vec<f64>,
    pub(crate) cached: Vec<f64>,
}

impl ProbeSampler {
    pub(crate) fn new(scenario: &Scenario, position: Point, groups: &[f64]) -> Self {
        let cfg = scenario.config();
        let alpha = cfg.pathloss_exponent_relay;
        let scale = scenario.snr_per_gain();
        let l_count = scenario.relay_count();
        let random_order = cfg.probe_selection == ProbeSelection::Random;
        Self {
            bs_snr: (0..l_count)
                .map(|r| scale * scenario.gain_unchecked(scenario.relay_bs_distance(r), alpha, 1.0))
                .collect(),
            user_snr: cfg
                .relay_positions
                .iter()
                .map(|z| scale * scenario.gain_unchecked(z.distance(position), alpha, 1.0))
                .collect(),
            random_order,
            order: if random_order {
                (0..l_count).collect()
            } else {
                scenario.relays_by_distance(position)
            },
            groups: groups.to_vec(),
            bottleneck: vec![0.0; l_count],
            cached: vec![0.0; l_count * groups.len()],
        }
    }

    pub(crate) fn draw(&mut self, stream: &mut RandomStream) {
        let l_count = self.order.len();
        if self.random_order {
            for (i, o) in self.order.iter_mut().enumerate() {
                *o = i;
            }
            stream.shuffle(&mut self.order);
        }
        let mut best = 0.0f64;
        for (k, &relay) in self.order.iter().enumerate() {
            let f = self.bs_snr[relay] * stream.exp1();
            let g = self.user_snr[relay] * stream.exp1();
            let u = stream.uniform();
            best = best.max(f.min(g));
            self.bottleneck[k] = best;
            for (gi, &p) in self.groups.iter().enumerate() {
                let prev = if k == 0 { 0.0 } else { self.cached[gi * l_count + k - 1] };
                self.cached[gi * l_count + k] = prev + if u < p { g } else { 0.0 };
            }
        }
    }
}

/// Best cache-aided rate for each probe prefix given the prefix SNRs of one
/// draw. Prefix SNRs repeat often, so rates are only recomputed on change.
#[inline]
pub(crate) fn fill_prefix_rates(
    bandwidth_hz: f64,
    direct_snr: f64,
    bottleneck: &[f64],
    cached: &[f64],
    out: &mut [f64],
) {
    let (mut last_b, mut last_c) = (f64::NAN, f64::NAN);
    let (mut r1, mut r2) = (0.0, 0.0);
    for ((o, &b), &c) in out.iter_mut().zip(bottleneck).zip(cached) {
        if b != last_b {
            r1 = 0.5 * shannon_rate(bandwidth_hz, direct_snr + b);
            last_b = b;
        }
        if c != last_c {
            r2 = shannon_rate(bandwidth_hz, direct_snr + c);
            last_c = c;
        }
        *o = r1.max(r2);
    }
}

impl OmegaModel for Scenario {
    type User = ScenarioUser;

    fn contents(&self) -> Vec<ContentClass> {
        let cfg = self.config();
        (0..cfg.num_contents)
            .map(|i| ContentClass {
                size_bits: cfg.content_sizes_bits[i],
                popularity: self.popularity()[i],
                bs_cache_prob: cfg.bs_cache_probs[i],
                relay_cache_prob: cfg.relay_cache_probs[i],
            })
            .collect()
    }

    fn relay_count(&self) -> usize {
        Scenario::relay_count(self)
    }

    fn mean_interarrival_s(&self) -> f64 {
        self.config().mean_interarrival_s
    }

    fn probe_time_s(&self) -> f64 {
        self.config().probe_time_s
    }

    fn fetch_time_s(&self) -> f64 {
        self.config().fetch_time_s
    }

    fn draw_user(&self, stream: &mut RandomStream) -> ScenarioUser {
        let cfg = self.config();
        let position = self.sample_position(stream);
        let fading = stream.exp1();
        let alpha = cfg.pathloss_exponent_direct;
        let direct_snr = self.snr_per_gain() * self.gain_unchecked(position.norm(), alpha, fading);
        let literal_probe_snr = match cfg.omega_gain_convention {
            OmegaGainConvention::Direct => Vec::new(),
            OmegaGainConvention::Literal => cfg
                .relay_positions
                .iter()
                .map(|&z| self.snr_per_gain() * self.gain_unchecked(position.distance(z), alpha, fading))
                .collect(),
        };
        ScenarioUser {
            position,
            direct_snr,
            literal_probe_snr,
        }
    }

    fn direct_inverse_rate(&self, user: &ScenarioUser) -> f64 {
        1.0 / shannon_rate(self.config().bandwidth_hz, user.direct_snr)
    }

    fn draw_probes(
        &self,
        user: &ScenarioUser,
        relay_cache_probs: &[f64],
        stream: &mut RandomStream,
        draws: usize,
        sink: &mut dyn FnMut(usize, &[f64]),
    ) {
        let l_count = self.relay_count();
        let bw = self.config().bandwidth_hz;
        let mut sampler = ProbeSampler::new(self, user.position, relay_cache_probs);
        let mut rates = vec![0.0; l_count];
        let mut out = vec![0.0; l_count * relay_cache_probs.len()];
        for j in 0..draws {
            sampler.draw(stream);
            for g in 0..relay_cache_probs.len() {
                let cached = &sampler.cached[g * l_count..(g + 1) * l_count];
                if user.literal_probe_snr.is_empty() {
                    fill_prefix_rates(bw, user.direct_snr, &sampler.bottleneck, cached, &mut rates);
                } else {
                    for l in 0..l_count {
                        fill_prefix_rates(
                            bw,
                            user.literal_probe_snr[l],
                            &sampler.bottleneck[l..=l],
                            &cached[l..=l],
                            &mut rates[l..=l],
                        );
                    }
                }
                for (o, r) in out[g * l_count..].iter_mut().zip(&rates) {
                    *o = 1.0 / r;
                }
            }
            sink(j, &out);
        }
    }
}

/// Distinct relay caching probabilities and the group of each content.
fn cache_groups(contents: &[ContentClass]) -> (Vec<f64>, Vec<usize>) {
    let mut groups: Vec<f64> = Vec::new();
    let group_of = contents
        .iter()
        .map(|c| match groups.iter().position(|&p| p == c.relay_cache_prob) {
            Some(g) => g,
            None => {
                groups.push(c.relay_cache_prob);
                groups.len() - 1
            }
        })
        .collect();
    (groups, group_of)
}

/// `mean_j max(1 - price * u_j, 0)`.
#[inline]
fn clipped_mean(inverse_rates: &[f32], price: f64) -> f64 {
    let sum: f64 = inverse_rates
        .iter()
        .map(|&u| (1.0 - price * u as f64).max(0.0))
        .sum();
    sum / inverse_rates.len() as f64
}

/// Prepared common-random-number estimator of `Omega(eta)`.
pub struct OmegaEstimator {
    contents: Vec<ContentClass>,
    group_of: Vec<usize>,
    group_count: usize,
    relay_count: usize,
    inner: usize,
    probe_time_s: f64,
    fetch_time_s: f64,
    mean_interarrival_s: f64,
    /// Per user draw: direct seconds per bit.
    direct_inverse: Vec<f64>,
    /// Per user draw: the shared uniform deciding BS cache hits.
    bs_uniform: Vec<f64>,
    /// Per user draw, group, probe count: `inner` probe inverse rates.
    probe_inverse: Vec<f32>,
}

impl OmegaEstimator {
    pub fn build<M: OmegaModel>(model: &M, settings: &EstimatorSettings) -> Result<Self> {
        settings.check()?;
        let contents = model.contents();
        let (groups, group_of) = cache_groups(&contents);
        let relay_count = model.relay_count();
        let inner = settings.inner_sample_count;
        let stride = groups.len() * relay_count * inner;
        let root = RandomStream::new(settings.seed).substream(tags::OMEGA);

        let draws: Vec<(f64, f64, Vec<f32>)> = (0..settings.sample_count)
            .into_par_iter()
            .map(|k| {
                let mut stream = root.substream(k as u64);
                let user = model.draw_user(&mut stream);
                let bs_u = stream.uniform();
                let mut block = vec![0f32; stride];
                model.draw_probes(&user, &groups, &mut stream, inner, &mut |j, inv| {
                    for (slot, &u) in inv.iter().enumerate() {
                        block[slot * inner + j] = u as f32;
                    }
                });
                (model.direct_inverse_rate(&user), bs_u, block)
            })
            .collect();

        let mut direct_inverse = Vec::with_capacity(draws.len());
        let mut bs_uniform = Vec::with_capacity(draws.len());
        let mut probe_inverse = Vec::with_capacity(draws.len() * stride);
        for (d, b, block) in draws {
            direct_inverse.push(d);
            bs_uniform.push(b);
            probe_inverse.extend_from_slice(&block);
        }
        Ok(Self {
            contents,
            group_of,
            group_count: groups.len(),
            relay_count,
            inner,
            probe_time_s: model.probe_time_s(),
            fetch_time_s: model.fetch_time_s(),
            mean_interarrival_s: model.mean_interarrival_s(),
            direct_inverse,
            bs_uniform,
            probe_inverse,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.direct_inverse.len()
    }

    pub fn mean_interarrival_s(&self) -> f64 {
        self.mean_interarrival_s
    }

    pub fn contents(&self) -> &[ContentClass] {
        &self.contents
    }

    /// `E[Q]`.
    pub fn mean_content_size(&self) -> f64 {
        self.contents.iter().map(|c| c.popularity * c.size_bits).sum()
    }

    pub fn max_content_size(&self) -> f64 {
        self.contents.iter().map(|c| c.size_bits).fold(f64::MIN, f64::max)
    }

    /// Mean direct rate over the user draws, bits/s.
    pub fn mean_direct_rate(&self) -> f64 {
        self.direct_inverse.iter().map(|u| 1.0 / u).sum::<f64>() / self.sample_count() as f64
    }

    /// Median direct seconds per bit over the user draws.
    pub fn median_direct_inverse_rate(&self) -> f64 {
        let mut v = self.direct_inverse.clone();
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }

    fn probe_slice(&self, k: usize, group: usize, l_index: usize) -> &[f32] {
        let stride = self.group_count * self.relay_count * self.inner;
        let start = k * stride + (group * self.relay_count + l_index) * self.inner;
        &self.probe_inverse[start..start + self.inner]
    }

    /// Best first-stage value of user draw `k`, averaged over contents.
    fn user_value(&self, k: usize, price: f64, probe_terms: &mut [f64]) -> f64 {
        for g in 0..self.group_count {
            for l in 0..self.relay_count {
                probe_terms[g * self.relay_count + l] = clipped_mean(self.probe_slice(k, g, l), price);
            }
        }
        let direct_u = self.direct_inverse[k];
        let bs_u = self.bs_uniform[k];
        let mut total = 0.0;
        for (c, &g) in self.contents.iter().zip(&self.group_of) {
            let fetch = if bs_u < c.bs_cache_prob { 0.0 } else { self.fetch_time_s };
            let direct = c.size_bits * (1.0 - price * direct_u) - price * fetch;
            let mut best = direct.max(0.0);
            for l in 0..self.relay_count {
                let m = c.size_bits * probe_terms[g * self.relay_count + l]
                    - price * (l + 1) as f64 * self.probe_time_s;
                best = best.max(m);
            }
            total += c.popularity * best;
        }
        total
    }

    /// `Omega(price)` on the stored draws.
    pub fn evaluate(&self, price: f64) -> Estimate {
        let mut terms = vec![0.0; self.group_count * self.relay_count];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for k in 0..self.sample_count() {
            let v = self.user_value(k, price, &mut terms);
            sum += v;
            sum_sq += v * v;
        }
        Estimate::from_samples(sum, sum_sq, self.sample_count())
    }
}

/// Streaming `Omega(price)`: same estimator as [`OmegaEstimator`] without keeping
/// the draws, for one-off evaluations at large sample counts.
pub fn omega_streaming<M: OmegaModel>(model: &M, price: f64, settings: &EstimatorSettings) -> Result<Estimate> {
    settings.check()?;
    let contents = model.contents();
    let (groups, group_of) = cache_groups(&contents);
    let l_count = model.relay_count();
    let inner = settings.inner_sample_count;
    let root = RandomStream::new(settings.seed).substream(tags::OMEGA);
    let (probe_time, fetch_time) = (model.probe_time_s(), model.fetch_time_s());
    let values: Vec<f64> = (0..settings.sample_count)
        .into_par_iter()
        .map(|k| {
            let mut stream = root.substream(k as u64);
            let user = model.draw_user(&mut stream);
            let bs_u = stream.uniform();
            let mut acc = vec![0.0; groups.len() * l_count];
            model.draw_probes(&user, &groups, &mut stream, inner, &mut |_, inv| {
                for (a, &u) in acc.iter_mut().zip(inv) {
                    *a += (1.0 - price * (u as f32) as f64).max(0.0);
                }
            });
            let direct_u = model.direct_inverse_rate(&user);
            contents
                .iter()
                .zip(&group_of)
                .map(|(c, &g)| {
                    let fetch = if bs_u < c.bs_cache_prob { 0.0 } else { fetch_time };
                    let mut best = (c.size_bits * (1.0 - price * direct_u) - price * fetch).max(0.0);
                    for l in 0..l_count {
                        let m = c.size_bits * acc[g * l_count + l] / inner as f64
                            - price * (l + 1) as f64 * probe_time;
                        best = best.max(m);
                    }
                    c.popularity * best
                })
                .sum()
        })
        .collect();
    let (sum, sum_sq) = values.iter().fold((0.0, 0.0), |(s, s2), v| (s + v, s2 + v * v));
    Ok(Estimate::from_samples(sum, sum_sq, values.len()))
}

/// Seed used for a price evaluation; fixed when common random numbers are on.
pub(crate) fn evaluation_seed(settings: &EstimatorSettings, price: f64) -> u64 {
    if settings.crn_enabled {
        settings.seed
    } else {
        crate::rng::derive_seed(settings.seed, price.to_bits())
    }
}

/// `Omega(price)` for a configuration.
pub fn omega(price: f64, scenario: &Scenario, settings: &EstimatorSettings) -> Result<Estimate> {
    if !(price >= 0.0) {
        return Err(Error::InvalidArgument(format!("price must be >= 0, got {price}")));
    }
    let seeded = settings.with_seed(evaluation_seed(settings, price));
    omega_streaming(scenario, price, &seeded)
}

/// Upper bound `max_i q_i / E[direct rate]` (seconds) used to size the fixed-point step.
pub fn beta1_bound<M: OmegaModel>(model: &M, settings: &EstimatorSettings) -> Result<Estimate> {
    settings.check()?;
    let root = RandomStream::new(settings.seed).substream(tags::BOUND);
    let rates: Vec<f64> = (0..settings.sample_count)
        .into_par_iter()
        .map(|k| {
            let mut stream = root.substream(k as u64);
            let user = model.draw_user(&mut stream);
            1.0 / model.direct_inverse_rate(&user)
        })
        .collect();
    let (sum, sum_sq) = rates.iter().fold((0.0, 0.0), |(s, s2), v| (s + v, s2 + v * v));
    let mean_rate = Estimate::from_samples(sum, sum_sq, rates.len());
    if !(mean_rate.value > 0.0 && mean_rate.value.is_finite()) {
        return Err(Error::SolverConfig(format!(
            "mean direct rate is {}, cannot bound the step size",
            mean_rate.value
        )));
    }
    let q_max = model
        .contents()
        .iter()
        .map(|c| c.size_bits)
        .fold(f64::MIN, f64::max);
    let value = q_max / mean_rate.value;
    Ok(Estimate {
        value,
        std_error: value * mean_rate.std_error / mean_rate.value,
    })
}

/// `M_l` for every `l = 1..=L` with nested common random numbers: each draw probes
/// a prefix of one relay order, so `M_l + eta * l * tau` is non-decreasing in `l`.
pub fn probe_reward_profile(
    ctx: &RewardContext,
    scenario: &Scenario,
    settings: &EstimatorSettings,
) -> Result<Vec<Estimate>> {
    settings.check()?;
    check_context(ctx, scenario)?;
    let l_count = scenario.relay_count();
    let cfg = scenario.config();
    let groups = [cfg.relay_cache_probs[ctx.content]];
    let direct_snr = scenario.snr_per_gain() * ctx.direct_gain;
    let mut stream = RandomStream::new(settings.seed).substream(tags::PROBE);
    let mut sampler = ProbeSampler::new(scenario, ctx.user_position, &groups);
    let mut rates = vec![0.0; l_count];
    let mut sums = vec![(0.0, 0.0); l_count];
    for _ in 0..settings.sample_count {
        sampler.draw(&mut stream);
        fill_prefix_rates(cfg.bandwidth_hz, direct_snr, &sampler.bottleneck, &sampler.cached, &mut rates);
        for (l, &rate) in rates.iter().enumerate() {
            let v = (ctx.size_bits - ctx.price * ctx.size_bits / rate).max(0.0);
            sums[l].0 += v;
            sums[l].1 += v * v;
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(l, (s, s2))| {
            let e = Estimate::from_samples(s, s2, settings.sample_count);
            Estimate {
                value: e.value - ctx.price * (l + 1) as f64 * cfg.probe_time_s,
                std_error: e.std_error,
            }
        })
        .collect())
}

fn check_context(ctx: &RewardContext, scenario: &Scenario) -> Result<()> {
    if !(ctx.price >= 0.0) {
        return Err(Error::InvalidArgument(format!("price must be >= 0, got {}", ctx.price)));
    }
    if !(ctx.direct_gain > 0.0) {
        return Err(Error::InvalidArgument("direct gain must be > 0".into()));
    }
    if ctx.content >= scenario.config().num_contents {
        return Err(Error::InvalidArgument(format!("content index {} out of range", ctx.content)));
    }
    if scenario
        .config()
        .relay_positions
        .iter()
        .any(|&z| z.distance(ctx.user_position) == 0.0)
    {
        return Err(Error::Domain("user co-located with a relay".into()));
    }
    Ok(())
}

/// Expected net reward of probing `probe_count` relays.
pub fn probe_reward(
    probe_count: usize,
    ctx: &RewardContext,
    scenario: &Scenario,
    settings: &EstimatorSettings,
) -> Result<Estimate> {
    let l = scenario.relay_count();
    if probe_count == 0 || probe_count > l {
        return Err(Error::InvalidArgument(format!(
            "probe count must lie in 1..={l}, got {probe_count}"
        )));
    }
    Ok(probe_reward_profile(ctx, scenario, settings)?[probe_count - 1])
}

/// Smallest index attaining the maximum; returns `(index, value)`.
pub fn smallest_argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// `(J*, M_J*)`: the smallest probe count maximizing `M_l`.
pub fn best_probe_count(
    ctx: &RewardContext,
    scenario: &Scenario,
    settings: &EstimatorSettings,
) -> Result<(usize, f64)> {
    let values: Vec<f64> = probe_reward_profile(ctx, scenario, settings)?
        .iter()
        .map(|e| e.value)
        .collect();
    let (i, v) = smallest_argmax(&values);
    Ok((i + 1, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemConfig;

    fn reference() -> Scenario {
        Scenario::new(SystemConfig::evaluation_default()).unwrap()
    }

    fn ctx(price: f64) -> RewardContext {
        let s = reference();
        RewardContext {
            user_position: Point::new(100.0, 0.0),
            direct_gain: s.direct_gain_at(Point::new(100.0, 0.0), 1.0).unwrap(),
            bs_cached: false,
            content: 0,
            size_bits: 1e5,
            price,
        }
    }

    #[test]
    fn zero_price_reward_is_the_size() {
        let s = reference();
        let est = EstimatorSettings::online().with_samples(500, 1);
        for l in 1..=5 {
            assert_eq!(probe_reward(l, &ctx(0.0), &s, &est).unwrap().value, 1e5);
        }
    }

    #[test]
    fn huge_price_reward_is_the_probe_cost() {
        let s = reference();
        let est = EstimatorSettings::online().with_samples(500, 1);
        let price = 1e15;
        for l in 1..=5 {
            let m = probe_reward(l, &ctx(price), &s, &est).unwrap().value;
            let expect = -price * l as f64 * 1e-4;
            assert!((m - expect).abs() <= 1e-12 * expect.abs(), "{m} vs {expect}");
        }
        assert_eq!(best_probe_count(&ctx(price), &s, &est).unwrap().0, 1);
    }

    #[test]
    fn probe_reward_rejects_bad_arguments() {
        let s = reference();
        let est = EstimatorSettings::online();
        assert!(probe_reward(0, &ctx(1e6), &s, &est).is_err());
        assert!(probe_reward(6, &ctx(1e6), &s, &est).is_err());
        let mut c = ctx(1e6);
        c.price = -1.0;
        assert!(probe_reward(1, &c, &s, &est).is_err());
        c = ctx(1e6);
        c.user_position = s.config().relay_positions[2];
        assert!(matches!(probe_reward(1, &c, &s, &est), Err(Error::Domain(_))));
    }

    #[test]
    fn free_probing_reward_is_non_decreasing() {
        let mut cfg = SystemConfig::evaluation_default();
        cfg.probe_time_s = 0.0;
        let s = Scenario::new(cfg).unwrap();
        let est = EstimatorSettings::online().with_samples(4000, 1);
        let profile: Vec<f64> = probe_reward_profile(&ctx(2e6), &s, &est)
            .unwrap()
            .iter()
            .map(|e| e.value)
            .collect();
        assert!(profile.windows(2).all(|w| w[1] >= w[0]), "{profile:?}");
        let (j, v) = best_probe_count(&ctx(2e6), &s, &est).unwrap();
        let max = profile.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(v, max);
        assert_eq!(j, profile.iter().position(|&m| m == max).unwrap() + 1);
    }

    #[test]
    fn best_probe_count_is_exhaustive_argmax() {
        let s = reference();
        let mut rs = RandomStream::new(31);
        for t in 0..20 {
            let pos = s.sample_position(&mut rs);
            let c = RewardContext {
                user_position: pos,
                direct_gain: s.direct_gain_at(pos, rs.exp1()).unwrap(),
                bs_cached: rs.bernoulli(0.5),
                content: rs.index(8),
                size_bits: 1e5,
                price: 5e5 + 2e6 * rs.uniform(),
            };
            let est = EstimatorSettings::online().with_samples(800, 1).with_seed(t);
            let (j, v) = best_probe_count(&c, &s, &est).unwrap();
            let each: Vec<f64> = (1..=5)
                .map(|l| probe_reward(l, &c, &s, &est).unwrap().value)
                .collect();
            let max = each.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(v, max);
            assert_eq!(j, each.iter().position(|&m| m == max).unwrap() + 1);
        }
    }

    #[test]
    fn nested_draws_make_gross_reward_monotone_in_probe_count() {
        let s = reference();
        let c = ctx(3e6);
        let est = EstimatorSettings::online().with_samples(2000, 1);
        let p = probe_reward_profile(&c, &s, &est).unwrap();
        let gross: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(l, e)| e.value + c.price * (l + 1) as f64 * 1e-4)
            .collect();
        assert!(gross.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{gross:?}");
    }

    #[test]
    fn omega_at_zero_price_is_mean_size() {
        let mut cfg = SystemConfig::evaluation_default();
        cfg.content_sizes_bits = vec![8e4, 9e4, 1e5, 1.1e5, 1.2e5, 1.3e5, 1.4e5, 1.5e5];
        let s = Scenario::new(cfg).unwrap();
        let est = EstimatorSettings::default().with_samples(300, 8);
        let o = OmegaEstimator::build(&s, &est).unwrap();
        let v = o.evaluate(0.0).value;
        let expect = s.mean_content_size();
        assert!((v - expect).abs() <= 1e-12 * expect, "{v} vs {expect}");
        assert!((omega(0.0, &s, &est).unwrap().value - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn prepared_and_streaming_estimators_agree() {
        let s = reference();
        let est = EstimatorSettings::default().with_samples(200, 16);
        let o = OmegaEstimator::build(&s, &est).unwrap();
        for price in [0.0, 5e5, 1e6, 3e6, 1e7] {
            let a = o.evaluate(price).value;
            let b = omega_streaming(&s, price, &est).unwrap().value;
            assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{price}: {a} vs {b}");
        }
    }

    #[test]
    fn omega_is_bounded_monotone_convex() {
        let s = reference();
        let est = EstimatorSettings::default().with_samples(400, 16);
        let o = OmegaEstimator::build(&s, &est).unwrap();
        let eq = s.mean_content_size();
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 5e5).collect();
        let vals: Vec<f64> = grid.iter().map(|&p| o.evaluate(p).value).collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for w in vals.windows(3) {
            assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-9 * eq);
        }
        assert!(vals.iter().all(|&v| (0.0..=eq).contains(&v)));
    }

    #[test]
    fn omega_without_crn_still_runs() {
        let s = reference();
        let mut est = EstimatorSettings::default().with_samples(100, 4);
        est.crn_enabled = false;
        let a = omega(1e6, &s, &est).unwrap();
        assert!(a.value > 0.0 && a.value < s.mean_content_size());
        assert!(omega(-1.0, &s, &est).is_err());
    }

    #[test]
    fn beta1_scales_with_size() {
        let s = reference();
        let est = EstimatorSettings::default().with_samples(2000, 1);
        let b = beta1_bound(&s, &est).unwrap().value;
        let s2 = Scenario::new(SystemConfig::evaluation_default().with_uniform_content_size(2e5)).unwrap();
        let b2 = beta1_bound(&s2, &est).unwrap().value;
        assert!((b2 - 2.0 * b).abs() <= 1e-12 * b2);
    }

    #[test]
    fn literal_convention_changes_omega_only_through_probe_term() {
        let mut cfg = SystemConfig::evaluation_default();
        cfg.omega_gain_convention = OmegaGainConvention::Literal;
        let lit = Scenario::new(cfg).unwrap();
        let est = EstimatorSettings::default().with_samples(200, 8);
        let a = OmegaEstimator::build(&lit, &est).unwrap();
        let b = OmegaEstimator::build(&reference(), &est).unwrap();
        assert_eq!(a.evaluate(0.0).value, b.evaluate(0.0).value);
        assert_ne!(a.evaluate(2e6).value, b.evaluate(2e6).value);
    }
}
