//! Scenario parameters and all random draws of the network model.
//!
//! The base station sits at the origin, relays at fixed positions, and users
//! arrive as a Poisson process at positions uniform on the coverage disk.
//! Every link gain is `10^(ref_db/10) * d^-exponent * fading` with unit-mean
//! exponential (Rayleigh power) fading.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

const PROB_SUM_TOL: f64 = 1e-9;

/// A point in the plane, in meters. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// How the relays to probe are chosen once a probe count is fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSelection {
    /// Uniformly random subset, without replacement.
    #[default]
    Random,
    /// The relays closest to the user (ablation heuristic).
    Nearest,
}

/// Which gain enters the probe-reward term when averaging over users.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaGainConvention {
    /// The user's direct BS gain `|z|^-a1 * x`.
    #[default]
    Direct,
    /// `|z - z_l|^-a1 * x`, a separate gain for each probe count `l`.
    Literal,
}

/// Reference bandwidth of `noise_floor_dbm`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseReference {
    /// The noise floor is the total noise power over the band.
    #[default]
    Band,
    /// The noise floor is a density in dBm/Hz and is multiplied by the bandwidth.
    PerHz,
}

fn default_exponent() -> f64 {
    3.0
}

/// Full scenario parameterization (SI units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub coverage_radius_m: f64,
    pub relay_positions: Vec<Point>,
    #[serde(default = "default_exponent")]
    pub pathloss_exponent_direct: f64,
    #[serde(default = "default_exponent")]
    pub pathloss_exponent_relay: f64,
    pub pathloss_ref_db: f64,
    pub noise_floor_dbm: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub num_contents: usize,
    pub content_sizes_bits: Vec<f64>,
    pub zipf_skew: f64,
    pub bs_cache_probs: Vec<f64>,
    pub relay_cache_probs: Vec<f64>,
    /// Declared BS caching capacity; when present the BS probabilities must sum to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bs_cache_capacity: Option<f64>,
    /// Declared relay caching capacity; when present the relay probabilities must sum to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relay_cache_capacity: Option<f64>,
    pub mean_interarrival_s: f64,
    pub probe_time_s: f64,
    pub fetch_time_s: f64,
    #[serde(default)]
    pub probe_selection: ProbeSelection,
    #[serde(default)]
    pub omega_gain_convention: OmegaGainConvention,
    #[serde(default)]
    pub noise_reference: NoiseReference,
}

impl SystemConfig {
    /// Evaluation setup of the reference study: 200 m cell, five relays evenly on a
    /// 50 m ring, eight equally sized contents, 15 dBm, 100 kbit, 10 ms.
    pub fn evaluation_default() -> Self {
        let relays = (0..5)
            .map(|k| Point::polar(50.0, 2.0 * PI * k as f64 / 5.0))
            .collect();
        SystemConfig {
            coverage_radius_m: 200.0,
            relay_positions: relays,
            pathloss_exponent_direct: 3.0,
            pathloss_exponent_relay: 3.0,
            pathloss_ref_db: -30.0,
            noise_floor_dbm: -80.0,
            bandwidth_hz: 1e6,
            tx_power_dbm: 15.0,
            num_contents: 8,
            content_sizes_bits: vec![100e3; 8],
            zipf_skew: 1.5,
            bs_cache_probs: vec![3.0 / 8.0; 8],
            relay_cache_probs: vec![1.0 / 8.0; 8],
            bs_cache_capacity: Some(3.0),
            relay_cache_capacity: Some(1.0),
            mean_interarrival_s: 0.01,
            probe_time_s: 1e-4,
            fetch_time_s: 1e-4,
            probe_selection: ProbeSelection::Random,
            omega_gain_convention: OmegaGainConvention::Direct,
            noise_reference: NoiseReference::Band,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn relay_count(&self) -> usize {
        self.relay_positions.len()
    }

    /// Sets every content to the same size.
    pub fn with_uniform_content_size(mut self, bits: f64) -> Self {
        self.content_sizes_bits = vec![bits; self.num_contents];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |field: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and > 0, got {v}")))
            }
        };
        let finite_nonneg = |field: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and >= 0, got {v}")))
            }
        };
        let finite = |field: &'static str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, "must be finite"))
            }
        };

        finite_pos("coverage_radius_m", self.coverage_radius_m)?;
        finite_pos("pathloss_exponent_direct", self.pathloss_exponent_direct)?;
        finite_pos("pathloss_exponent_relay", self.pathloss_exponent_relay)?;
        finite("pathloss_ref_db", self.pathloss_ref_db)?;
        finite("noise_floor_dbm", self.noise_floor_dbm)?;
        finite("tx_power_dbm", self.tx_power_dbm)?;
        finite_pos("bandwidth_hz", self.bandwidth_hz)?;
        finite_pos("mean_interarrival_s", self.mean_interarrival_s)?;
        finite_nonneg("probe_time_s", self.probe_time_s)?;
        finite_nonneg("fetch_time_s", self.fetch_time_s)?;
        if !(self.zipf_skew.is_finite() && self.zipf_skew >= 0.0) {
            return Err(Error::config("zipf_skew", "must be finite and >= 0"));
        }

        if self.relay_positions.is_empty() {
            return Err(Error::config("relay_positions", "at least one relay is required"));
        }
        for (i, p) in self.relay_positions.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::config("relay_positions", format!("relay {i} is not finite")));
            }
            let r = p.norm();
            if r == 0.0 {
                return Err(Error::config(
                    "relay_positions",
                    format!("relay {i} is co-located with the base station"),
                ));
            }
            if r > self.coverage_radius_m {
                return Err(Error::config(
                    "relay_positions",
                    format!("relay {i} at {r:.3} m lies outside the coverage disk"),
                ));
            }
        }

        if self.num_contents == 0 {
            return Err(Error::config("num_contents", "must be >= 1"));
        }
        let n = self.num_contents;
        for (field, v) in [
            ("content_sizes_bits", &self.content_sizes_bits),
            ("bs_cache_probs", &self.bs_cache_probs),
            ("relay_cache_probs", &self.relay_cache_probs),
        ] {
            if v.len() != n {
                return Err(Error::config(
                    field,
                    format!("expected {n} entries, got {}", v.len()),
                ));
            }
        }
        for (i, &q) in self.content_sizes_bits.iter().enumerate() {
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::config(
                    "content_sizes_bits",
                    format!("entry {i} must be finite and > 0, got {q}"),
                ));
            }
        }
        for (field, probs, capacity) in [
            ("bs_cache_probs", &self.bs_cache_probs, self.bs_cache_capacity),
            ("relay_cache_probs", &self.relay_cache_probs, self.relay_cache_capacity),
        ] {
            for (i, &p) in probs.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(
                        field,
                        format!("entry {i} must lie in [0, 1], got {p}"),
                    ));
                }
            }
            if let Some(c) = capacity {
                let sum: f64 = probs.iter().sum();
                if (sum - c).abs() > PROB_SUM_TOL {
                    return Err(Error::config(
                        field,
                        format!("entries sum to {sum}, declared capacity is {c}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Zipf popularity `p_i = i^-skew / sum_u u^-skew`, `i = 1..=num_contents`.
pub fn zipf_popularity(num_contents: usize, skew: f64) -> Result<Vec<f64>> {
    if num_contents == 0 {
        return Err(Error::config("num_contents", "must be >= 1"));
    }
    if !(skew.is_finite() && skew >= 0.0) {
        return Err(Error::config("zipf_skew", "must be finite and >= 0"));
    }
    let weights: Vec<f64> = (1..=num_contents).map(|i| (i as f64).powf(-skew)).collect();
    let norm: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / norm).collect())
}

/// Linear power gain of a link.
pub fn channel_gain(distance_m: f64, exponent: f64, fading: f64, ref_db: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!(
            "link distance must be > 0, got {distance_m}"
        )));
    }
    if !(fading > 0.0) {
        return Err(Error::Domain(format!("fading must be > 0, got {fading}")));
    }
    Ok(db_to_linear(ref_db) * distance_m.powf(-exponent) * fading)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

/// One user request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Request {
    pub interarrival_s: f64,
    /// Zero-based content index.
    pub content: usize,
    pub size_bits: f64,
    pub user_position: Point,
}

/// First-stage observables available after the request pilot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub request: Request,
    pub direct_gain: f64,
    pub bs_cached: bool,
}

/// Second-stage observables for the probed relays, in probe order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub probed_indices: Vec<usize>,
    pub bs_relay_gains: Vec<f64>,
    pub relay_user_gains: Vec<f64>,
    pub relay_cached: Vec<bool>,
}

impl ProbeReport {
    pub fn len(&self) -> usize {
        self.probed_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probed_indices.is_empty()
    }
}

/// A validated configuration together with quantities derived from it.
#[derive(Clone, Debug)]
pub struct Scenario {
    config: SystemConfig,
    popularity: Vec<f64>,
    popularity_cdf: Vec<f64>,
    ref_gain: f64,
    snr_per_gain: f64,
    relay_bs_distance: Vec<f64>,
}

impl Scenario {
    pub fn new(config: SystemConfig) -> Result<Self> {
        config.validate()?;
        let popularity = zipf_popularity(config.num_contents, config.zipf_skew)?;
        let mut acc = 0.0;
        let mut popularity_cdf: Vec<f64> = popularity
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *popularity_cdf.last_mut().expect("num_contents >= 1") = 1.0;
        let noise_w = match config.noise_reference {
            NoiseReference::Band => dbm_to_watts(config.noise_floor_dbm),
            NoiseReference::PerHz => dbm_to_watts(config.noise_floor_dbm) * config.bandwidth_hz,
        };
        let snr_per_gain = dbm_to_watts(config.tx_power_dbm) / noise_w;
        let relay_bs_distance = config.relay_positions.iter().map(|p| p.norm()).collect();
        Ok(Self {
            ref_gain: db_to_linear(config.pathloss_ref_db),
            config,
            popularity,
            popularity_cdf,
            snr_per_gain,
            relay_bs_distance,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn popularity(&self) -> &[f64] {
        &self.popularity
    }

    pub fn relay_count(&self) -> usize {
        self.config.relay_positions.len()
    }

    /// `E[Q] = sum_i p_i q_i`.
    pub fn mean_content_size(&self) -> f64 {
        self.popularity
            .iter()
            .zip(&self.config.content_sizes_bits)
            .map(|(p, q)| p * q)
            .sum()
    }

    pub fn max_content_size(&self) -> f64 {
        self.config
            .content_sizes_bits
            .iter()
            .copied()
            .fold(f64::MIN, f64::max)
    }

    /// Received SNR per unit of linear gain.
    pub fn snr_per_gain(&self) -> f64 {
        self.snr_per_gain
    }

    /// Gain without the distance check; callers guarantee `distance > 0`.
    #[inline]
    pub(crate) fn gain_unchecked(&self, distance: f64, exponent: f64, fading: f64) -> f64 {
        self.ref_gain * distance.powf(-exponent) * fading
    }

    pub(crate) fn relay_bs_distance(&self, relay: usize) -> f64 {
        self.relay_bs_distance[relay]
    }

    pub fn sample_content(&self, stream: &mut RandomStream) -> usize {
        let u = stream.uniform();
        self.popularity_cdf
            .partition_point(|&c| c <= u)
            .min(self.config.num_contents - 1)
    }

    /// Uniform position on the coverage disk, resampled on the measure-zero
    /// events of landing on the base station or on a relay.
    pub fn sample_position(&self, stream: &mut RandomStream) -> Point {
        loop {
            let r = self.config.coverage_radius_m * stream.uniform().sqrt();
            let theta = 2.0 * PI * stream.uniform();
            let z = Point::polar(r, theta);
            if r > 0.0 && self.config.relay_positions.iter().all(|&p| p.distance(z) > 0.0) {
                return z;
            }
        }
    }

    pub fn sample_request(&self, stream: &mut RandomStream) -> Request {
        let interarrival_s = self.config.mean_interarrival_s * stream.exp1();
        let content = self.sample_content(stream);
        let user_position = self.sample_position(stream);
        Request {
            interarrival_s,
            content,
            size_bits: self.config.content_sizes_bits[content],
            user_position,
        }
    }

    pub fn direct_gain_at(&self, position: Point, fading: f64) -> Result<f64> {
        channel_gain(
            position.norm(),
            self.config.pathloss_exponent_direct,
            fading,
            self.config.pathloss_ref_db,
        )
    }

    pub fn sample_first_stage(
        &self,
        stream: &mut RandomStream,
        request: &Request,
    ) -> Result<Observation> {
        let direct_gain = self.direct_gain_at(request.user_position, stream.exp1())?;
        let bs_cached = stream.bernoulli(self.config.bs_cache_probs[request.content]);
        Ok(Observation {
            request: *request,
            direct_gain,
            bs_cached,
        })
    }

    /// Relay indices ordered by distance to `position` (ties by index).
    pub fn relays_by_distance(&self, position: Point) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.relay_count()).collect();
        let pos = &self.config.relay_positions;
        order.sort_by(|&a, &b| {
            pos[a]
                .distance(position)
                .total_cmp(&pos[b].distance(position))
                .then(a.cmp(&b))
        });
        order
    }

    /// Relay visiting order for probing; the first `J` entries are the probed set.
    pub(crate) fn probe_order(&self, stream: &mut RandomStream, position: Point) -> Vec<usize> {
        match self.config.probe_selection {
            ProbeSelection::Random => {
                let mut order: Vec<usize> = (0..self.relay_count()).collect();
                stream.shuffle(&mut order);
                order
            }
            ProbeSelection::Nearest => self.relays_by_distance(position),
        }
    }

    pub fn sample_probe_report(
        &self,
        stream: &mut RandomStream,
        request: &Request,
        probe_count: usize,
    ) -> Result<ProbeReport> {
        let l = self.relay_count();
        if probe_count == 0 || probe_count > l {
            return Err(Error::InvalidArgument(format!(
                "probe count must lie in 1..={l}, got {probe_count}"
            )));
        }
        let mut order = self.probe_order(stream, request.user_position);
        order.truncate(probe_count);
        let alpha = self.config.pathloss_exponent_relay;
        let ref_db = self.config.pathloss_ref_db;
        let p_cache = self.config.relay_cache_probs[request.content];
        let mut report = ProbeReport {
            probed_indices: Vec::with_capacity(probe_count),
            bs_relay_gains: Vec::with_capacity(probe_count),
            relay_user_gains: Vec::with_capacity(probe_count),
            relay_cached: Vec::with_capacity(probe_count),
        };
        for relay in order {
            let zr = self.config.relay_positions[relay];
            let f = channel_gain(self.relay_bs_distance[relay], alpha, stream.exp1(), ref_db)?;
            let g = channel_gain(zr.distance(request.user_position), alpha, stream.exp1(), ref_db)?;
            let cached = stream.bernoulli(p_cache);
            report.probed_indices.push(relay);
            report.bs_relay_gains.push(f);
            report.relay_user_gains.push(g);
            report.relay_cached.push(cached);
        }
        Ok(report)
    }
}
