//! Browser bindings. Each export returns a JSON string.

use dervalue_core::analytic::{toy_curve, ToyParams};
use dervalue_core::calendar::{default_calendar, HOURS_PER_DAY};
use dervalue_core::devices::make_device;
use dervalue_core::dispatch::{settle, solve_day, DayProblem, SolverOptions};
use dervalue_core::tariffs::{build_flipped_tou, build_retail_tou, FlippedRates, TouRates};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn js(e: dervalue_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    f: f64,
    vca: f64,
    vca_frac: f64,
    regime: &'static str,
}

/// Value of coordination in the two-type model, `steps + 1` points over
/// adoption fractions 0..=1.
#[wasm_bindgen]
pub fn analytic_curve(e: f64, pa: f64, q: f64, r: f64, n: u32, steps: u32) -> Result<String, JsError> {
    let p = ToyParams { e, p_a: pa, q, r, n, f: 0.0 };
    let pts: Vec<CurvePoint> = toy_curve(&p, steps)
        .map_err(js)?
        .into_iter()
        .map(|t| CurvePoint { f: t.f, vca: t.vca, vca_frac: t.vca_frac, regime: t.regime })
        .collect();
    to_json(&pts)
}

#[derive(Serialize)]
struct DayResult {
    battery: Vec<f64>,
    state: Vec<f64>,
    grid: Vec<f64>,
    cost: f64,
    /// Same day with the battery idle.
    cost_pv_only: f64,
    capacity_kwh: f64,
}

/// Optimal battery schedule for one day, starting empty. `load` and `pv`
/// are 24 hourly kWh values; `pv` is on the DC side of the inverter.
#[wasm_bindgen]
pub fn dispatch_day(load: &[f64], pv: &[f64], buy: &[f64], sell: &[f64], pv_kw: f64) -> Result<String, JsError> {
    for (name, v) in [("load", load), ("pv", pv), ("buy", buy), ("sell", sell)] {
        if v.len() != HOURS_PER_DAY {
            return Err(JsError::new(&format!("{name} needs {HOURS_PER_DAY} values, got {}", v.len())));
        }
    }
    let device = make_device(pv_kw).map_err(js)?;
    let net: Vec<f64> = load.iter().zip(pv).map(|(l, e)| l - device.eta_inverter * e).collect();
    let problem = DayProblem { net_load: &net, buy, sell, device: &device, x0: 0.0 };
    let day = solve_day(&problem, &SolverOptions::default()).map_err(js)?;
    let (_, idle) = settle(&[0.0; HOURS_PER_DAY], &net, buy, sell, &device);
    to_json(&DayResult {
        battery: day.u,
        state: day.x,
        grid: day.g,
        cost: day.cost,
        cost_pv_only: idle,
        capacity_kwh: device.capacity_kwh,
    })
}

#[derive(Serialize)]
struct TariffDay {
    date: String,
    business_day: bool,
    tou: Vec<f64>,
    flipped: Vec<f64>,
}

/// Retail and flipped time-of-use prices, $/kWh, for day `index` of the
/// study year beginning 2011-11-01.
#[wasm_bindgen]
pub fn tariff_day(index: usize) -> Result<String, JsError> {
    let cal = default_calendar();
    let info = cal
        .days()
        .get(index)
        .ok_or_else(|| JsError::new(&format!("day index {index} outside 0..{}", cal.n_days())))?;
    let hours = index * HOURS_PER_DAY..(index + 1) * HOURS_PER_DAY;
    to_json(&TariffDay {
        date: info.date.to_string(),
        business_day: info.is_business_day(),
        tou: build_retail_tou(&cal, &TouRates::default()).values()[hours.clone()].to_vec(),
        flipped: build_flipped_tou(&cal, &FlippedRates::default()).values()[hours].to_vec(),
    })
}
