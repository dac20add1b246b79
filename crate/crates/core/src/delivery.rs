//! Achievable rates and delivery latencies.
//!
//! All rates are `B * log2(1 + SNR)` in bits/s. Mode I is two-slot
//! decode-and-forward through the best probed relay, encoded as a halved rate.
//! Mode II is joint transmission by the BS and every probed relay holding the
//! file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProbeReport, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    Direct,
    ModeI,
    ModeII,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    pub latency_s: f64,
    pub mode: DeliveryMode,
    pub rate_bps: f64,
}

pub fn snr(gain: f64, scenario: &Scenario) -> f64 {
    scenario.snr_per_gain() * gain
}

#[inline]
pub(crate) fn shannon_rate(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

pub fn direct_rate(direct_gain: f64, scenario: &Scenario) -> f64 {
    shannon_rate(scenario.config().bandwidth_hz, snr(direct_gain, scenario))
}

/// `t1 = Q / rate + [not cached] * T1`.
pub fn direct_latency(size_bits: f64, direct_gain: f64, bs_cached: bool, scenario: &Scenario) -> f64 {
    let fetch = if bs_cached {
        0.0
    } else {
        scenario.config().fetch_time_s
    };
    size_bits / direct_rate(direct_gain, scenario) + fetch
}

/// Cache-aided rate from SNR components: `direct_snr` of the BS link, `relay_snr`
/// of the best max-min DF bottleneck, `cached_snr` summed over caching relays.
/// Returns the better rate and its mode; ties go to mode I.
#[inline]
pub(crate) fn best_cache_aided_rate(
    bandwidth_hz: f64,
    direct_snr: f64,
    relay_snr: f64,
    cached_snr: f64,
) -> (f64, DeliveryMode) {
    let r1 = 0.5 * shannon_rate(bandwidth_hz, direct_snr + relay_snr);
    let r2 = shannon_rate(bandwidth_hz, direct_snr + cached_snr);
    if r1 >= r2 {
        (r1, DeliveryMode::ModeI)
    } else {
        (r2, DeliveryMode::ModeII)
    }
}

fn bottleneck_snr(report: &ProbeReport, scenario: &Scenario) -> f64 {
    report
        .bs_relay_gains
        .iter()
        .zip(&report.relay_user_gains)
        .map(|(&f, &g)| snr(f.min(g), scenario))
        .fold(0.0, f64::max)
}

fn cached_snr(report: &ProbeReport, scenario: &Scenario) -> f64 {
    report
        .relay_user_gains
        .iter()
        .zip(&report.relay_cached)
        .filter(|(_, &c)| c)
        .map(|(&g, _)| snr(g, scenario))
        .sum()
}

/// Mode I rate `(B/2) log2(1 + SNR_h + SNR(max_l min(f_l, g_l)))` over all probed relays.
pub fn mode1_rate(direct_gain: f64, report: &ProbeReport, scenario: &Scenario) -> Result<f64> {
    if report.is_empty() {
        return Err(Error::InvalidArgument("mode I needs at least one probed relay".into()));
    }
    let s = snr(direct_gain, scenario) + bottleneck_snr(report, scenario);
    Ok(0.5 * shannon_rate(scenario.config().bandwidth_hz, s))
}

/// Mode II rate `B log2(1 + SNR_h + sum over caching relays of SNR_g)`.
pub fn mode2_rate(direct_gain: f64, report: &ProbeReport, scenario: &Scenario) -> f64 {
    let s = snr(direct_gain, scenario) + cached_snr(report, scenario);
    shannon_rate(scenario.config().bandwidth_hz, s)
}

/// Best cache-aided delivery: latency `Q / max(r1, r2)`, mode I on ties.
pub fn cache_aided_outcome(
    size_bits: f64,
    direct_gain: f64,
    report: &ProbeReport,
    scenario: &Scenario,
) -> Result<DeliveryOutcome> {
    if report.is_empty() {
        return Err(Error::InvalidArgument("cache-aided delivery needs at least one probed relay".into()));
    }
    let (rate_bps, mode) = best_cache_aided_rate(
        scenario.config().bandwidth_hz,
        snr(direct_gain, scenario),
        bottleneck_snr(report, scenario),
        cached_snr(report, scenario),
    );
    Ok(DeliveryOutcome {
        latency_s: size_bits / rate_bps,
        mode,
        rate_bps,
    })
}

/// Direct delivery outcome; `latency_s` includes the fetch time when not cached.
pub fn direct_outcome(size_bits: f64, direct_gain: f64, bs_cached: bool, scenario: &Scenario) -> DeliveryOutcome {
    DeliveryOutcome {
        latency_s: direct_latency(size_bits, direct_gain, bs_cached, scenario),
        mode: DeliveryMode::Direct,
        rate_bps: direct_rate(direct_gain, scenario),
    }
}
