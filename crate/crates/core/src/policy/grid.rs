//! Precomputed probe rewards over (user radius, user angle, direct gain).
//!
//! `M_l = q * A_l - eta * l * tau` where `A_l = E[max(1 - eta / r2, 0)]` depends on
//! the content only through its relay caching probability. The table stores
//! `A_l` per caching group, so one table serves every content. It does not
//! depend on the BS cache state, which only enters the direct branch.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Point, Scenario, SystemConfig};
use crate::reward::{fill_prefix_rates, ProbeSampler};
use crate::rng::{tags, RandomStream};

const MAGIC: &[u8; 8] = b"CPMGRID\0";
const FORMAT_VERSION: u32 = 1;

/// Resolution and sampling effort of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gain_points: usize,
    pub radius_points: usize,
    pub angle_sectors: usize,
    pub samples_per_node: usize,
    /// Draws used to locate the gain quantiles that bound the gain axis.
    pub quantile_samples: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            gain_points: 64,
            radius_points: 32,
            angle_sectors: 16,
            samples_per_node: 1000,
            quantile_samples: 100_000,
            seed: 0x9e1d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub format_version: u32,
    pub eta_star: f64,
    pub config: SystemConfig,
    pub spec: GridSpec,
    pub log10_gain_min: f64,
    pub log10_gain_max: f64,
    pub radius_max: f64,
    pub relay_count: usize,
    /// Distinct relay caching probabilities, one table slice each.
    pub cache_groups: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MLookupGrid {
    meta: GridMeta,
    group_of: Vec<usize>,
    /// `[radius][angle][gain][group][l]`.
    values: Vec<f64>,
}

/// Linear interpolation cell: lower index and weight of the upper neighbour.
#[inline]
fn cell(t: f64, points: usize) -> (usize, f64) {
    let t = t.clamp(0.0, (points - 1) as f64);
    let i = (t.floor() as usize).min(points - 2);
    (i, t - i as f64)
}

fn groups_of(config: &SystemConfig) -> (Vec<f64>, Vec<usize>) {
    let mut groups: Vec<f64> = Vec::new();
    let group_of = config
        .relay_cache_probs
        .iter()
        .map(|&p| match groups.iter().position(|&g| g == p) {
            Some(i) => i,
            None => {
                groups.push(p);
                groups.len() - 1
            }
        })
        .collect();
    (groups, group_of)
}

impl MLookupGrid {
    pub fn build(scenario: &Scenario, eta_star: f64, spec: &GridSpec) -> Result<Self> {
        if !(eta_star > 0.0 && eta_star.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta* must be positive, got {eta_star}")));
        }
        if spec.gain_points < 2 || spec.radius_points < 2 || spec.angle_sectors < 1 {
            return Err(Error::InvalidArgument("grid needs >= 2 gain and radius points and >= 1 sector".into()));
        }
        if spec.samples_per_node == 0 || spec.quantile_samples == 0 {
            return Err(Error::InvalidArgument("grid sample counts must be >= 1".into()));
        }
        let cfg = scenario.config();
        let (groups, group_of) = groups_of(cfg);
        let root = RandomStream::new(spec.seed).substream(tags::GRID);

        let mut qstream = root.substream(u64::MAX);
        let mut gains: Vec<f64> = (0..spec.quantile_samples)
            .map(|_| {
                let z = scenario.sample_position(&mut qstream);
                let x = qstream.exp1();
                scenario.gain_unchecked(z.norm(), cfg.pathloss_exponent_direct, x)
            })
            .collect();
        gains.sort_unstable_by(f64::total_cmp);
        let pick = |q: f64| gains[((q * gains.len() as f64) as usize).min(gains.len() - 1)];
        let (lo, hi) = (pick(0.001).log10(), pick(0.999).log10());

        let l_count = scenario.relay_count();
        let g_count = groups.len();
        let h_count = spec.gain_points;
        let block = h_count * g_count * l_count;
        let snr_h: Vec<f64> = (0..h_count)
            .map(|k| scenario.snr_per_gain() * 10f64.powf(lo + (hi - lo) * k as f64 / (h_count - 1) as f64))
            .collect();
        let bw = cfg.bandwidth_hz;
        let radius_max = cfg.coverage_radius_m;

        let meta = GridMeta {
            format_version: FORMAT_VERSION,
            eta_star,
            config: cfg.clone(),
            spec: *spec,
            log10_gain_min: lo,
            log10_gain_max: hi,
            radius_max,
            relay_count: l_count,
            cache_groups: groups.clone(),
        };

        let nodes = spec.radius_points * spec.angle_sectors;
        let blocks: Vec<Vec<f64>> = (0..nodes)
            .into_par_iter()
            .map(|node| {
                let pos = node_position(&meta, node / spec.angle_sectors, node % spec.angle_sectors);
                let mut stream = root.substream(node as u64);
                let mut sampler = ProbeSampler::new(scenario, pos, &groups);
                let mut rates = vec![0.0; l_count];
                let mut acc = vec![0.0; block];
                for _ in 0..spec.samples_per_node {
                    sampler.draw(&mut stream);
                    for (k, &sh) in snr_h.iter().enumerate() {
                        for g in 0..g_count {
                            let cached = &sampler.cached[g * l_count..(g + 1) * l_count];
                            fill_prefix_rates(bw, sh, &sampler.bottleneck, cached, &mut rates);
                            let row = &mut acc[(k * g_count + g) * l_count..][..l_count];
                            for (a, &rate) in row.iter_mut().zip(&rates) {
                                *a += (1.0 - eta_star / rate).max(0.0);
                            }
                        }
                    }
                }
                let n = spec.samples_per_node as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                acc
            })
            .collect();

        Ok(Self {
            meta,
            group_of,
            values: blocks.concat(),
        })
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn eta_star(&self) -> f64 {
        self.meta.eta_star
    }

    /// Errors unless the grid was built for this configuration and price.
    pub fn check_compatible(&self, scenario: &Scenario, eta_star: f64) -> Result<()> {
        if &self.meta.config != scenario.config() {
            return Err(Error::GridFormat("grid was built for a different configuration".into()));
        }
        if (self.meta.eta_star - eta_star).abs() > 1e-12 * eta_star {
            return Err(Error::GridFormat(format!(
                "grid was built for eta*={}, policy uses {eta_star}",
                self.meta.eta_star
            )));
        }
        Ok(())
    }

    /// Interpolated `M_1..M_L` for a user at `position` with direct gain `gain`
    /// requesting `content` of `size_bits`. Inputs outside the grid are clamped.
    pub fn probe_rewards(&self, position: Point, gain: f64, content: usize, size_bits: f64, out: &mut [f64]) {
        let m = &self.meta;
        let s = &m.spec;
        let l_count = m.relay_count;
        let g_count = m.cache_groups.len();
        let group = self.group_of[content];

        let (ri, rw) = cell(position.norm() / m.radius_max * (s.radius_points - 1) as f64, s.radius_points);
        let sector = 2.0 * PI / s.angle_sectors as f64;
        let a = position.y.atan2(position.x).rem_euclid(2.0 * PI) / sector - 0.5;
        let a0f = a.floor();
        let aw = a - a0f;
        let a0 = (a0f as i64).rem_euclid(s.angle_sectors as i64) as usize;
        let a1 = (a0 + 1) % s.angle_sectors;
        let x = (gain.log10() - m.log10_gain_min) / (m.log10_gain_max - m.log10_gain_min);
        let (hi, hw) = cell(x * (s.gain_points - 1) as f64, s.gain_points);

        out.fill(0.0);
        for (r, wr) in [(ri, 1.0 - rw), (ri + 1, rw)] {
            for (ang, wa) in [(a0, 1.0 - aw), (a1, aw)] {
                for (h, wh) in [(hi, 1.0 - hw), (hi + 1, hw)] {
                    let w = wr * wa * wh;
                    let node = r * s.angle_sectors + ang;
                    let start = ((node * s.gain_points + h) * g_count + group) * l_count;
                    for (o, v) in out.iter_mut().zip(&self.values[start..start + l_count]) {
                        *o += w * v;
                    }
                }
            }
        }
        let tau = m.config.probe_time_s;
        for (l, o) in out.iter_mut().enumerate() {
            *o = size_bits * *o - m.eta_star * (l + 1) as f64 * tau;
        }
    }

    /// Versioned binary form: magic, format version, JSON header, values.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = serde_json::to_vec(&self.meta)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::GridFormat("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::GridFormat(format!("unsupported format version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let mut header = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut header)?;
        let meta: GridMeta = serde_json::from_slice(&header)?;
        meta.config.validate()?;
        let (groups, group_of) = groups_of(&meta.config);
        if groups != meta.cache_groups || meta.relay_count != meta.config.relay_count() {
            return Err(Error::GridFormat("header inconsistent with its configuration".into()));
        }
        let s = &meta.spec;
        let expected = s.radius_points * s.angle_sectors * s.gain_points * groups.len() * meta.relay_count;
        r.read_exact(&mut b8)?;
        if u64::from_le_bytes(b8) as usize != expected {
            return Err(Error::GridFormat(format!("expected {expected} values")));
        }
        let mut values = Vec::with_capacity(expected);
        for _ in 0..expected {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Ok(Self { meta, group_of, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Grid node position; nudged off a relay if it lands on one.
fn node_position(meta: &GridMeta, ri: usize, ai: usize) -> Point {
    let s = &meta.spec;
    let r = meta.radius_max * ri as f64 / (s.radius_points - 1) as f64;
    let theta = 2.0 * PI * (ai as f64 + 0.5) / s.angle_sectors as f64;
    let p = Point::polar(r, theta);
    if meta.config.relay_positions.iter().any(|&z| z.distance(p) < 1e-9 * meta.radius_max) {
        Point::polar(r + 1e-3 * meta.radius_max, theta)
    } else {
        p
    }
}
