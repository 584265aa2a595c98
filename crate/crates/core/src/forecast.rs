//! Forecast error and the value of information.
//!
//! A household plans each day on noisy forecasts of its load and PV output,
//! then pays for that plan against what actually happens. Errors are
//! Gaussian with standard deviation `cv * mean`, drawn independently per
//! hour and day and truncated so forecasts stay nonnegative.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::HOURS_PER_DAY;
use crate::devices::DeviceSpec;
use crate::dispatch::{run_year, settle, solve_day, DayProblem, SolverOptions, YearInputs};
use crate::error::{Error, Result};
use crate::seed::SeedPath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// CV of the load forecast error (fraction, not percent).
    pub cv_load: f64,
    pub cv_gen: f64,
    pub sigma_load: f64,
    pub sigma_gen: f64,
    pub seed: SeedPath,
}

impl NoiseModel {
    /// Same CV for load and generation; `load_mean`, `gen_mean` are annual
    /// hourly means (nights included).
    pub fn new(cv: f64, load_mean: f64, gen_mean: f64, seed: SeedPath) -> Result<Self> {
        Self::split(cv, cv, load_mean, gen_mean, seed)
    }

    pub fn split(cv_load: f64, cv_gen: f64, load_mean: f64, gen_mean: f64, seed: SeedPath) -> Result<Self> {
        for (name, v) in [("cv_load", cv_load), ("cv_gen", cv_gen), ("load mean", load_mean), ("generation mean", gen_mean)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(NoiseModel {
            cv_load,
            cv_gen,
            sigma_load: cv_load * load_mean,
            sigma_gen: cv_gen * gen_mean,
            seed,
        })
    }

    pub fn is_exact(&self) -> bool {
        self.sigma_load == 0.0 && self.sigma_gen == 0.0
    }
}

/// Forecasts `([l + eps]+, [e + gamma]+)` for day `j`.
pub fn perturb_day(l: &[f64], e: &[f64], noise: &NoiseModel, j: usize) -> ([f64; HOURS_PER_DAY], [f64; HOURS_PER_DAY]) {
    let mut lh = [0.0; HOURS_PER_DAY];
    let mut eh = [0.0; HOURS_PER_DAY];
    lh.copy_from_slice(&l[..HOURS_PER_DAY]);
    eh.copy_from_slice(&e[..HOURS_PER_DAY]);
    if noise.is_exact() {
        return (lh, eh);
    }
    let mut rng = noise.seed.with(j as u64).rng();
    for v in lh.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = (*v + noise.sigma_load * z).max(0.0);
    }
    for v in eh.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = (*v + noise.sigma_gen * z).max(0.0);
    }
    (lh, eh)
}

/// Bill for executing a planned schedule against the true net load.
pub fn realized_cost(u: &[f64], x0: f64, net_true: &[f64], buy: &[f64], sell: &[f64], device: &DeviceSpec) -> Result<f64> {
    for v in [net_true, buy, sell] {
        if v.len() != u.len() {
            return Err(Error::LengthMismatch { expected: u.len(), got: v.len() });
        }
    }
    let tol = 1e-9 * (1.0 + device.capacity_kwh);
    let mut x = x0;
    for (h, uh) in u.iter().enumerate() {
        if *uh > device.max_charge + tol || *uh < -device.max_discharge - tol {
            return Err(Error::invalid(format!("hour {h}: action {uh} exceeds rate limits")));
        }
        x = device.eta_retention * x + uh;
        if x < -tol || x > device.capacity_kwh + tol {
            return Err(Error::invalid(format!("hour {h}: state {x} outside [0, {}]", device.capacity_kwh)));
        }
    }
    Ok(settle(u, net_true, buy, sell, device).1)
}

/// Plan every day on forecasts, pay realized costs. With exact forecasts
/// this reproduces the perfect-foresight annual bill bit for bit.
pub fn realized_year(inputs: &YearInputs, device: &DeviceSpec, opts: &SolverOptions, noise: &NoiseModel) -> Result<f64> {
    if noise.is_exact() {
        return run_year(inputs, device, opts).map(|o| o.bill);
    }
    let n_days = inputs.n_days();
    if inputs.load.len() != n_days * HOURS_PER_DAY || inputs.pv.len() != inputs.load.len() {
        return Err(Error::LengthMismatch { expected: inputs.load.len(), got: inputs.pv.len() });
    }
    let mut x0 = 0.0;
    let mut total = 0.0;
    for j in 0..n_days {
        let truth = inputs.net_load(j, device.eta_inverter);
        let (buy, sell) = inputs.day_prices(j);
        let r = j * HOURS_PER_DAY..(j + 1) * HOURS_PER_DAY;
        let (lh, eh) = perturb_day(&inputs.load[r.clone()], &inputs.pv[r], noise, j);
        let mut forecast = [0.0; HOURS_PER_DAY];
        for h in 0..HOURS_PER_DAY {
            forecast[h] = lh[h] - device.eta_inverter * eh[h];
        }
        let plan = solve_day(&DayProblem { net_load: &forecast, buy, sell, device, x0 }, opts).map_err(|e| e.on_day(j))?;
        x0 = plan.x[HOURS_PER_DAY - 1];
        total += settle(&plan.u, &truth, buy, sell, device).1;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoiOptions {
    /// Forecast CVs in percentage points; must include 0.
    pub cv_grid: Vec<f64>,
    /// Monte Carlo replicates per CV level.
    pub replicates: usize,
    /// Reuse the same standard-normal draws at every CV level.
    pub common_random_numbers: bool,
}

impl Default for VoiOptions {
    fn default() -> Self {
        VoiOptions {
            cv_grid: (0..=10).map(|k| 10.0 * k as f64).collect(),
            replicates: 30,
            common_random_numbers: true,
        }
    }
}

impl VoiOptions {
    pub fn validate(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.cv_grid.len() < 2 {
            out.push((format!("{prefix}cv_grid"), "needs at least two CV levels".into()));
        }
        if !self.cv_grid.contains(&0.0) {
            out.push((format!("{prefix}cv_grid"), "must include 0".into()));
        }
        if let Some(v) = self.cv_grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            out.push((format!("{prefix}cv_grid"), format!("CV levels must be nonnegative, got {v}")));
        }
        if self.replicates == 0 {
            out.push((format!("{prefix}replicates"), "must be at least 1".into()));
        }
        out
    }
}

/// Noise stream for one household replicate at one CV level.
pub fn household_stream(root: SeedPath, household_id: &str, replicate: usize, cv_index: usize, crn: bool) -> SeedPath {
    let s = root.with_str("forecast").with_str(household_id).with(replicate as u64);
    if crn {
        s
    } else {
        s.with(cv_index as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiResult {
    pub household_id: String,
    pub z: f64,
    pub cv_grid: Vec<f64>,
    /// Realized annual bill, indexed `[cv][replicate]`.
    pub per_replicate: Vec<Vec<f64>>,
    /// Mean over replicates at each CV level.
    pub annual_cost: Vec<f64>,
    /// Bill with perfect forecasts.
    pub perfect: f64,
    /// $ per CV percentage point per year.
    pub slope: f64,
    /// `slope / z`.
    pub norm_slope: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = a + b x`; returns `(b, r^2)`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("regression needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("regression needs at least two distinct x values"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    Ok((slope, r2))
}

pub fn voi_household(
    household_id: &str,
    inputs: &YearInputs,
    device: &DeviceSpec,
    solver: &SolverOptions,
    voi: &VoiOptions,
    root: SeedPath,
) -> Result<VoiResult> {
    if let Some((p, m)) = voi.validate("voi.").first() {
        return Err(Error::invalid(format!("{p}: {m}")));
    }
    let n = inputs.load.len() as f64;
    let load_mean = inputs.load.iter().sum::<f64>() / n;
    let gen_mean = inputs.pv.iter().sum::<f64>() / n;
    let mut per_replicate = Vec::with_capacity(voi.cv_grid.len());
    let mut perfect = None;
    for (k, pct) in voi.cv_grid.iter().enumerate() {
        let cv = pct / 100.0;
        let row = if cv == 0.0 {
            let exact = NoiseModel::new(0.0, load_mean, gen_mean, root)?;
            let b = realized_year(inputs, device, solver, &exact)?;
            perfect = Some(b);
            vec![b; voi.replicates]
        } else {
            (0..voi.replicates)
                .map(|s| {
                    let seed = household_stream(root, household_id, s, k, voi.common_random_numbers);
                    realized_year(inputs, device, solver, &NoiseModel::new(cv, load_mean, gen_mean, seed)?)
                })
                .collect::<Result<Vec<f64>>>()?
        };
        per_replicate.push(row);
    }
    // the perfect-forecast row is constant; averaging it would only add rounding
    let annual_cost: Vec<f64> = voi
        .cv_grid
        .iter()
        .zip(&per_replicate)
        .map(|(pct, r)| if *pct == 0.0 { r[0] } else { r.iter().sum::<f64>() / r.len() as f64 })
        .collect();
    let (slope, r2) = ols(&voi.cv_grid, &annual_cost)?;
    Ok(VoiResult {
        household_id: household_id.to_string(),
        z: device.pv_kw,
        cv_grid: voi.cv_grid.clone(),
        per_replicate,
        annual_cost,
        perfect: perfect.expect("grid contains 0"),
        slope,
        norm_slope: slope / device.pv_kw,
        r2,
    })
}

/// `household_id,z,cv,annual_cost,slope,norm_slope,r2`, one row per CV level.
pub fn write_voi_csv<W: Write>(w: W, results: &[VoiResult]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["household_id", "z", "cv", "annual_cost", "slope", "norm_slope", "r2"])?;
    for r in results {
        for (cv, cost) in r.cv_grid.iter().zip(&r.annual_cost) {
            wtr.write_record([
                r.household_id.clone(),
                r.z.to_string(),
                cv.to_string(),
                cost.to_string(),
                r.slope.to_string(),
                r.norm_slope.to_string(),
                r.r2.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<voi>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::make_device;

    #[test]
    fn zero_noise_is_identity() {
        let l: Vec<f64> = (0..24).map(|h| h as f64 * 0.1).collect();
        let e: Vec<f64> = (0..24).map(|h| if (8..17).contains(&h) { 1.0 } else { 0.0 }).collect();
        let noise = NoiseModel::new(0.0, 1.0, 1.0, SeedPath::root(1)).unwrap();
        let (lh, eh) = perturb_day(&l, &e, &noise, 3);
        assert_eq!(lh.to_vec(), l);
        assert_eq!(eh.to_vec(), e);
    }

    #[test]
    fn truncates_and_repeats() {
        let l = [0.0; 24];
        let e = [0.0; 24];
        let noise = NoiseModel::new(5.0, 1.0, 1.0, SeedPath::root(2)).unwrap();
        let a = perturb_day(&l, &e, &noise, 0);
        assert!(a.0.iter().chain(&a.1).all(|v| *v >= 0.0));
        assert!(a.0.contains(&0.0) && a.0.iter().any(|v| *v > 0.0));
        assert_eq!(a, perturb_day(&l, &e, &noise, 0));
        assert_ne!(a, perturb_day(&l, &e, &noise, 1));
    }

    #[test]
    fn idle_plan_costs_the_bare_net_load() {
        let dev = make_device(2.0).unwrap();
        let n: Vec<f64> = (0..24).map(|h| (h as f64 - 12.0) * 0.1).collect();
        let q = [0.3; 24];
        let r = [0.05; 24];
        let c = realized_cost(&[0.0; 24], 0.0, &n, &q, &r, &dev).unwrap();
        let want: f64 = n.iter().map(|v| if *v > 0.0 { 0.3 * v } else { 0.05 * v }).sum();
        assert!((c - want).abs() < 1e-12);
        let mut bad = [0.0; 24];
        bad[0] = -0.1;
        assert!(realized_cost(&bad, 0.0, &n, &q, &r, &dev).is_err());
    }

    #[test]
    fn ols_recovers_a_line() {
        let x = [0.0, 10.0, 20.0, 30.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 0.5 * v).collect();
        let (b, r2) = ols(&x, &y).unwrap();
        assert!((b - 0.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        assert_eq!(ols(&x, &[1.0; 4]).unwrap(), (0.0, 1.0));
        assert!(ols(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn grid_must_include_zero() {
        let v = VoiOptions { cv_grid: vec![10.0, 20.0], ..Default::default() };
        assert_eq!(v.validate("voi.")[0].0, "voi.cv_grid");
        assert!(VoiOptions::default().validate("voi.").is_empty());
    }
}
