//! Synthetic households, irradiance and wholesale prices.
//!
//! Stands in for metered data so the whole pipeline runs offline. Every
//! stream is seeded from what it describes (household id, zip, node, day),
//! never from generation order.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, HourlySeries, LoadTrace, Season, Unit, HOURS_PER_DAY};
use crate::error::{Error, Result};
use crate::ingest::{lmp_to_kwh, GeoPoint, NodePriceSet, ZipGeo};
use crate::seed::SeedPath;

/// Consumption shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    DaytimePeak,
    EveningPeak,
    Flat,
}

impl Archetype {
    fn profile(self) -> [f64; HOURS_PER_DAY] {
        match self {
            Archetype::DaytimePeak => [
                0.55, 0.5, 0.5, 0.5, 0.5, 0.55, 0.7, 0.9, 1.1, 1.3, 1.5, 1.65, 1.7, 1.7, 1.65, 1.5, 1.3, 1.15, 1.05,
                1.0, 0.9, 0.8, 0.7, 0.6,
            ],
            Archetype::EveningPeak => [
                0.5, 0.45, 0.4, 0.4, 0.4, 0.45, 0.7, 0.95, 0.85, 0.6, 0.5, 0.5, 0.5, 0.5, 0.55, 0.7, 1.0, 1.6, 2.1,
                2.3, 2.2, 1.8, 1.3, 0.8,
            ],
            Archetype::Flat => [
                0.9, 0.9, 0.85, 0.85, 0.85, 0.9, 0.95, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.05, 1.1, 1.15,
                1.15, 1.1, 1.05, 1.0, 0.95,
            ],
        }
    }
}

/// Weights over [`Archetype`]s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchetypeMix {
    pub daytime: f64,
    pub evening: f64,
    pub flat: f64,
}

impl Default for ArchetypeMix {
    fn default() -> Self {
        ArchetypeMix {
            daytime: 0.3,
            evening: 0.5,
            flat: 0.2,
        }
    }
}

impl ArchetypeMix {
    fn pick(&self, u: f64) -> Archetype {
        if u < self.daytime {
            Archetype::DaytimePeak
        } else if u < self.daytime + self.evening {
            Archetype::EveningPeak
        } else {
            Archetype::Flat
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_households: usize,
    pub mix: ArchetypeMix,
    /// Log-normal parameters of each household's annual mean demand, ln kW.
    pub mean_kw_log_mu: f64,
    pub mean_kw_log_sigma: f64,
    /// Hour-to-hour multiplicative noise on load.
    pub noise_cv: f64,
    pub n_zips: usize,
    /// Wholesale pricing nodes.
    pub n_nodes: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_households: 200,
            mix: ArchetypeMix::default(),
            mean_kw_log_mu: 0.8f64.ln(),
            mean_kw_log_sigma: 0.6,
            noise_cv: 0.3,
            n_zips: 12,
            n_nodes: 6,
            seed: 7,
        }
    }
}

/// Annual mean demand is clamped into this range, kW.
pub const MEAN_KW_RANGE: (f64, f64) = (0.12, 20.0);

impl SynthConfig {
    /// Diagnostics as `(field path, message)`; `prefix` is prepended to paths.
    pub fn validate(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let path = |f: &str| format!("{prefix}{f}");
        if self.n_households == 0 {
            out.push((path("n_households"), "must be at least 1".into()));
        }
        if self.n_zips == 0 {
            out.push((path("n_zips"), "must be at least 1".into()));
        }
        if self.n_nodes == 0 {
            out.push((path("n_nodes"), "must be at least 1".into()));
        }
        let w = [self.mix.daytime, self.mix.evening, self.mix.flat];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            out.push((path("mix"), format!("weights must be nonnegative and sum to 1, got {w:?}")));
        }
        if !self.mean_kw_log_mu.is_finite() {
            out.push((path("mean_kw_log_mu"), "must be finite".into()));
        }
        if !(self.mean_kw_log_sigma.is_finite() && self.mean_kw_log_sigma >= 0.0) {
            out.push((path("mean_kw_log_sigma"), "must be finite and nonnegative".into()));
        }
        if !(self.noise_cv.is_finite() && self.noise_cv >= 0.0) {
            out.push((path("noise_cv"), "must be finite and nonnegative".into()));
        }
        out
    }

    fn check(&self) -> Result<()> {
        match self.validate("synth.").first() {
            Some((p, m)) => Err(Error::invalid(format!("{p}: {m}"))),
            None => Ok(()),
        }
    }
}

/// Multiplicative noise with mean one and the given CV.
fn unit_lognormal(cv: f64) -> LogNormal<f64> {
    let s2 = (1.0 + cv * cv).ln();
    LogNormal::new(-s2 / 2.0, s2.sqrt()).expect("valid log-normal")
}

pub fn household_id(k: usize) -> String {
    format!("h{k:05}")
}

fn zip_id(k: usize) -> String {
    format!("9{:04}", 4000 + k)
}

fn node_id(k: usize) -> String {
    format!("N{k:03}")
}

/// Zip centroids scattered over a California-sized box.
pub fn synth_zips(cfg: &SynthConfig) -> Vec<ZipGeo> {
    let mut rng = SeedPath::root(cfg.seed).with_str("zips").rng();
    (0..cfg.n_zips)
        .map(|k| {
            let lat = rng.random_range(33.0..41.0);
            let lon = rng.random_range(-123.0..-116.0);
            GeoPoint::new(zip_id(k), lat, lon).expect("in range")
        })
        .collect()
}

pub fn synth_nodes(cfg: &SynthConfig) -> Vec<GeoPoint> {
    let mut rng = SeedPath::root(cfg.seed).with_str("nodes").rng();
    (0..cfg.n_nodes)
        .map(|k| {
            let lat = rng.random_range(33.0..41.0);
            let lon = rng.random_range(-123.0..-116.0);
            GeoPoint::new(node_id(k), lat, lon).expect("in range")
        })
        .collect()
}

fn synth_load(cfg: &SynthConfig, id: &str, zips: &[ZipGeo], calendar: &Calendar) -> LoadTrace {
    let mut rng = SeedPath::root(cfg.seed).with_str("load").with_str(id).rng();
    let zip = zips[rng.random_range(0..zips.len())].id.clone();
    let archetype = cfg.mix.pick(rng.random());
    let mean_kw = LogNormal::new(cfg.mean_kw_log_mu, cfg.mean_kw_log_sigma)
        .expect("validated")
        .sample(&mut rng)
        .clamp(MEAN_KW_RANGE.0, MEAN_KW_RANGE.1);
    let shift: i64 = rng.random_range(-1..=1);
    let cooling = rng.random_range(0.0..0.8);
    let heating = rng.random_range(0.0..0.4);
    let base = archetype.profile();
    let flat = Archetype::Flat.profile();
    let daily = unit_lognormal(0.15);
    let hourly = unit_lognormal(cfg.noise_cv);

    let mut values = Vec::with_capacity(calendar.n_hours());
    for day in calendar.days() {
        let level = daily.sample(&mut rng);
        let weekend = !day.is_business_day();
        for h in 0..HOURS_PER_DAY {
            let src = (h as i64 - shift).rem_euclid(HOURS_PER_DAY as i64) as usize;
            let mut v = base[src];
            if weekend {
                v = 0.7 * v + 0.3 * flat[src] * 1.1;
            }
            v += match day.season {
                Season::Summer if (12..20).contains(&src) => cooling,
                Season::Winter if (6..9).contains(&src) || (17..22).contains(&src) => heating,
                _ => 0.0,
            };
            values.push(v * level * hourly.sample(&mut rng));
        }
    }
    let scale = mean_kw * values.len() as f64 / values.iter().sum::<f64>();
    values.iter_mut().for_each(|v| *v *= scale);
    LoadTrace {
        household_id: id.to_string(),
        zip,
        series: HourlySeries::new(Unit::Kwh, values).expect("positive load"),
    }
}

/// Clear-sky horizontal irradiance for the hour starting at `hour`, kWh/m^2.
pub fn clear_sky(lat: f64, lon: f64, day_of_year: u32, hour: usize) -> f64 {
    let decl = 23.45f64.to_radians() * (2.0 * PI * (284.0 + day_of_year as f64) / 365.0).sin();
    // hours are local standard time on the -120 meridian
    let solar_time = hour as f64 + 0.5 + (lon + 120.0) / 15.0;
    let hour_angle = (15.0 * (solar_time - 12.0)).to_radians();
    let phi = lat.to_radians();
    let cos_z = phi.sin() * decl.sin() + phi.cos() * decl.cos() * hour_angle.cos();
    if cos_z <= 0.0 {
        0.0
    } else {
        1.098 * cos_z * (-0.057 / cos_z).exp()
    }
}

fn synth_irradiance(cfg: &SynthConfig, zip: &ZipGeo, calendar: &Calendar) -> HourlySeries {
    use chrono::Datelike;
    let mut rng = SeedPath::root(cfg.seed).with_str("irradiance").with_str(&zip.id).rng();
    let hourly = unit_lognormal(0.1);
    let mut values = Vec::with_capacity(calendar.n_hours());
    for day in calendar.days() {
        let p_cloudy = match day.season {
            Season::Summer => 0.08,
            Season::Winter => 0.35,
        };
        let clearness = if rng.random::<f64>() < p_cloudy {
            rng.random_range(0.15..0.6)
        } else {
            rng.random_range(0.8..1.0)
        };
        let doy = day.date.ordinal();
        for h in 0..HOURS_PER_DAY {
            let noise = hourly.sample(&mut rng);
            values.push(clear_sky(zip.lat, zip.lon, doy, h) * clearness * noise);
        }
    }
    HourlySeries::new(Unit::KwhPerM2, values).expect("nonnegative irradiance")
}

/// Day-ahead style prices in $/MWh: evening ramp, a midday solar dip that
/// can push spring middays negative, correlated day levels, rare spikes.
fn synth_lmp(cfg: &SynthConfig, node: &GeoPoint, calendar: &Calendar) -> Vec<f64> {
    use chrono::Datelike;
    let system = SeedPath::root(cfg.seed).with_str("lmp-system");
    let mut rng = SeedPath::root(cfg.seed).with_str("lmp").with_str(&node.id).rng();
    let offset = rng.random_range(-4.0..6.0);
    let congestion = rng.random_range(0.9..1.2);
    let hourly = Normal::new(0.0, 4.0).expect("valid normal");
    let mut values = Vec::with_capacity(calendar.n_hours());
    for (j, day) in calendar.days().iter().enumerate() {
        let level = Normal::new(0.0, 5.0).expect("valid normal").sample(&mut system.with(j as u64).rng());
        let month = day.date.month();
        let summer = day.season == Season::Summer;
        let base = 32.0 + if summer { 10.0 } else { 0.0 } + level;
        let dip = if (3..=6).contains(&month) { 28.0 } else { 12.0 };
        let ramp = if summer { 35.0 } else { 22.0 };
        for h in 0..HOURS_PER_DAY {
            let shape = match h {
                0..=5 => -8.0,
                6..=9 => 6.0,
                10..=15 => -dip * (PI * (h as f64 - 9.5) / 7.0).sin(),
                16 => 8.0,
                17..=21 => ramp,
                _ => 4.0,
            };
            let mut p = offset + congestion * (base + shape) + hourly.sample(&mut rng);
            if rng.random::<f64>() < 0.005 {
                p += rng.random_range(50.0..250.0);
            }
            values.push(p);
        }
    }
    values
}

/// Households and per-zip irradiance.
pub fn synth_population(
    cfg: &SynthConfig,
    calendar: &Calendar,
) -> Result<(Vec<LoadTrace>, BTreeMap<String, HourlySeries>)> {
    let world = synth_world(cfg, calendar)?;
    Ok((world.traces, world.irradiance))
}

/// Everything the pipeline needs, generated together.
#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub traces: Vec<LoadTrace>,
    pub irradiance: BTreeMap<String, HourlySeries>,
    pub zips: Vec<ZipGeo>,
    pub nodes: Vec<GeoPoint>,
    /// Raw wholesale prices in $/MWh, negatives included.
    pub lmp_raw: BTreeMap<String, Vec<f64>>,
}

impl SynthWorld {
    /// Wholesale prices as ingestion would see them.
    pub fn node_prices(&self) -> Result<NodePriceSet> {
        let prices = self
            .lmp_raw
            .iter()
            .map(|(k, v)| Ok((k.clone(), HourlySeries::new(Unit::UsdPerKwh, v.iter().map(|p| lmp_to_kwh(*p)).collect())?)))
            .collect::<Result<_>>()?;
        let geo = self.nodes.iter().map(|g| (g.id.clone(), g.clone())).collect();
        Ok(NodePriceSet { prices, geo })
    }
}

pub fn synth_world(cfg: &SynthConfig, calendar: &Calendar) -> Result<SynthWorld> {
    cfg.check()?;
    let zips = synth_zips(cfg);
    let nodes = synth_nodes(cfg);
    let traces = (0..cfg.n_households)
        .map(|k| synth_load(cfg, &household_id(k), &zips, calendar))
        .collect();
    let irradiance = zips.iter().map(|z| (z.id.clone(), synth_irradiance(cfg, z, calendar))).collect();
    let lmp_raw = nodes.iter().map(|n| (n.id.clone(), synth_lmp(cfg, n, calendar))).collect();
    Ok(SynthWorld {
        traces,
        irradiance,
        zips,
        nodes,
        lmp_raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::default_calendar;

    fn small() -> SynthConfig {
        SynthConfig {
            n_households: 20,
            n_zips: 3,
            n_nodes: 2,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_world() {
        let cal = default_calendar();
        let a = synth_world(&small(), &cal).unwrap();
        let b = synth_world(&small(), &cal).unwrap();
        assert_eq!(a.traces, b.traces);
        assert_eq!(a.irradiance, b.irradiance);
        assert_eq!(a.lmp_raw, b.lmp_raw);
        let c = synth_world(&SynthConfig { seed: 8, ..small() }, &cal).unwrap();
        assert_ne!(a.traces, c.traces);
    }

    #[test]
    fn household_does_not_depend_on_population_size() {
        let cal = default_calendar();
        let a = synth_world(&small(), &cal).unwrap();
        let b = synth_world(&SynthConfig { n_households: 5, ..small() }, &cal).unwrap();
        assert_eq!(a.traces[..5], b.traces[..]);
    }

    #[test]
    fn traces_pass_filters() {
        let cal = default_calendar();
        let (traces, _) = synth_population(&small(), &cal).unwrap();
        assert!(traces.iter().all(|t| t.screen().is_none() && t.series.len() == cal.n_hours()));
    }

    #[test]
    fn irradiance_is_dark_at_midnight_and_brighter_in_summer() {
        let cal = default_calendar();
        let (_, irr) = synth_population(&small(), &cal).unwrap();
        for s in irr.values() {
            let v = s.values();
            assert!((0..cal.n_days()).all(|j| v[24 * j] == 0.0));
            let mut tot = [0.0, 0.0];
            let mut cnt = [0.0, 0.0];
            for (j, d) in cal.days().iter().enumerate() {
                let k = (d.season == Season::Winter) as usize;
                tot[k] += v[24 * j..24 * j + 24].iter().sum::<f64>();
                cnt[k] += 1.0;
            }
            assert!(tot[0] / cnt[0] >= tot[1] / cnt[1]);
        }
    }

    #[test]
    fn clear_sky_shape() {
        assert_eq!(clear_sky(37.0, -120.0, 172, 0), 0.0);
        let noon_summer = clear_sky(37.0, -120.0, 172, 11);
        let noon_winter = clear_sky(37.0, -120.0, 355, 11);
        assert!(noon_summer > noon_winter && noon_summer < 1.1);
    }

    #[test]
    fn rejects_bad_mix() {
        let cfg = SynthConfig {
            mix: ArchetypeMix { daytime: 0.5, evening: 0.5, flat: 0.5 },
            ..small()
        };
        assert_eq!(cfg.validate("synth.")[0].0, "synth.mix");
        assert!(synth_world(&cfg, &default_calendar()).is_err());
    }
}
