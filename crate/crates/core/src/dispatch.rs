//! Daily storage scheduling and annual bills.
//!
//! Each day solves
//!
//! ```text
//! min  sum_h q_h [g_h]+ + r_h [g_h]-
//! s.t. g = n + [u]+ / (eta_C eta_I) + eta_D eta_I [u]-
//!      -u_dis <= u <= u_chg,  0 <= x <= x_max,
//!      x_h = eta_S x_{h-1} + u_h,  x_0 given
//! ```
//!
//! with a small throughput penalty so that ties resolve to the least
//! battery activity. The reported cost never includes that penalty.
//!
//! Two backends solve the same problem. [`Backend::ConvexDp`] runs the
//! backward recursion on convex piecewise-linear cost-to-go functions, which
//! is exact because every stage cost is convex when `q >= r >= 0`.
//! [`Backend::Simplex`] builds the split-variable LP and hands it to
//! [`crate::lp`].

use serde::{Deserialize, Serialize};

use crate::calendar::HOURS_PER_DAY;
use crate::devices::DeviceSpec;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram};
use crate::pwl::{argmin_sum, ConvexPwl, Segment};
use crate::tariffs::PriceSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    ConvexDp,
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub backend: Backend,
    /// Penalty per kWh of battery throughput, $/kWh.
    pub tie_break: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: Backend::ConvexDp,
            tie_break: 1e-7,
        }
    }
}

/// One day's inputs.
#[derive(Debug, Clone, Copy)]
pub struct DayProblem<'a> {
    /// `l - eta_I e`, kWh.
    pub net_load: &'a [f64],
    pub buy: &'a [f64],
    pub sell: &'a [f64],
    pub device: &'a DeviceSpec,
    pub x0: f64,
}

impl DayProblem<'_> {
    fn validate(&self) -> Result<()> {
        for v in [self.net_load, self.buy, self.sell] {
            if v.len() != HOURS_PER_DAY {
                return Err(Error::LengthMismatch { expected: HOURS_PER_DAY, got: v.len() });
            }
        }
        self.device.validate()?;
        for h in 0..HOURS_PER_DAY {
            let (n, q, r) = (self.net_load[h], self.buy[h], self.sell[h]);
            if !n.is_finite() {
                return Err(Error::invalid(format!("net load at hour {h} is not finite")));
            }
            if !(r >= 0.0 && q >= r && q.is_finite()) {
                return Err(Error::invalid(format!("hour {h}: prices must satisfy 0 <= sell <= buy (buy {q}, sell {r})")));
            }
        }
        let cap = self.device.capacity_kwh;
        if !(self.x0 >= 0.0 && self.x0 <= cap * (1.0 + 1e-12) + 1e-12) {
            return Err(Error::invalid(format!("initial state {} outside [0, {cap}]", self.x0)));
        }
        Ok(())
    }
}

/// Split form of the solution; at most one side of each pair is nonzero
/// at an optimum.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitFlows {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub import: Vec<f64>,
    pub export: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayDispatch {
    /// Signed battery action, kWh; positive charges.
    pub u: Vec<f64>,
    /// State of charge at the end of each hour, kWh.
    pub x: Vec<f64>,
    /// Grid exchange, kWh; positive imports.
    pub g: Vec<f64>,
    /// Bill for the day, $.
    pub cost: f64,
    pub split: SplitFlows,
}

/// Grid exchange for battery action `u` given net load `n`.
#[inline]
pub fn grid_exchange(n: f64, u: f64, device: &DeviceSpec) -> f64 {
    let a = 1.0 / (device.eta_charge * device.eta_inverter);
    let b = device.eta_discharge * device.eta_inverter;
    n + a * u.max(0.0) + b * u.min(0.0)
}

#[inline]
pub fn hour_cost(g: f64, buy: f64, sell: f64) -> f64 {
    if g >= 0.0 {
        buy * g
    } else {
        sell * g
    }
}

/// Apply a schedule against a net-load vector and price the grid exchange.
pub fn settle(u: &[f64], net_load: &[f64], buy: &[f64], sell: &[f64], device: &DeviceSpec) -> (Vec<f64>, f64) {
    let g: Vec<f64> = u.iter().zip(net_load).map(|(u, n)| grid_exchange(*n, *u, device)).collect();
    let cost = g.iter().zip(buy.iter().zip(sell)).map(|(g, (q, r))| hour_cost(*g, *q, *r)).sum();
    (g, cost)
}

/// State trajectory implied by `u`.
pub fn states(u: &[f64], x0: f64, retention: f64) -> Vec<f64> {
    let mut x = x0;
    u.iter()
        .map(|u| {
            x = retention * x + u;
            x
        })
        .collect()
}

/// Clamp a schedule onto the feasible set (absorbs solver round-off).
fn project(u: &mut [f64], x0: f64, device: &DeviceSpec) -> Vec<f64> {
    let mut prev = x0;
    u.iter_mut()
        .map(|u| {
            let base = device.eta_retention * prev;
            let x = (base + u.clamp(-device.max_discharge, device.max_charge)).clamp(0.0, device.capacity_kwh);
            *u = x - base;
            prev = x;
            x
        })
        .collect()
}

fn finish(p: &DayProblem, mut u: Vec<f64>, split: Option<SplitFlows>) -> DayDispatch {
    let x = project(&mut u, p.x0, p.device);
    let (g, cost) = settle(&u, p.net_load, p.buy, p.sell, p.device);
    let split = split.unwrap_or_else(|| SplitFlows {
        charge: u.iter().map(|v| v.max(0.0)).collect(),
        discharge: u.iter().map(|v| (-v).max(0.0)).collect(),
        import: g.iter().map(|v| v.max(0.0)).collect(),
        export: g.iter().map(|v| (-v).max(0.0)).collect(),
    });
    DayDispatch { u, x, g, cost, split }
}

pub fn solve_day(p: &DayProblem, opts: &SolverOptions) -> Result<DayDispatch> {
    p.validate()?;
    if !(opts.tie_break >= 0.0 && opts.tie_break.is_finite()) {
        return Err(Error::invalid("tie_break must be finite and nonnegative"));
    }
    match opts.backend {
        Backend::ConvexDp => Ok(finish(p, solve_convex_dp(p, opts.tie_break), None)),
        Backend::Simplex => solve_simplex(p, opts.tie_break),
    }
}

/// Stage cost as a function of the battery action `u` on `[-u_dis, u_chg]`.
fn stage_cost(n: f64, q: f64, r: f64, d: &DeviceSpec, eps: f64, min_len: f64) -> ConvexPwl {
    let a = 1.0 / (d.eta_charge * d.eta_inverter);
    let b = d.eta_discharge * d.eta_inverter;
    let (lo, hi) = (-d.max_discharge, d.max_charge);
    let mut segs = Vec::with_capacity(4);
    // discharging: g = n + b u
    if n > 0.0 {
        let kink = (-n / b).max(lo);
        segs.push(Segment { len: kink - lo, slope: b * r - eps });
        segs.push(Segment { len: -kink, slope: b * q - eps });
    } else {
        segs.push(Segment { len: -lo, slope: b * r - eps });
    }
    // charging: g = n + a u
    if n < 0.0 {
        let kink = (-n / a).min(hi);
        segs.push(Segment { len: kink, slope: a * r + eps });
        segs.push(Segment { len: hi - kink, slope: a * q + eps });
    } else {
        segs.push(Segment { len: hi, slope: a * q + eps });
    }
    let value = hour_cost(n + b * lo, q, r) - eps * lo;
    ConvexPwl::new(lo, value, segs, min_len)
}

fn solve_convex_dp(p: &DayProblem, eps: f64) -> Vec<f64> {
    let d = p.device;
    let cap = d.capacity_kwh;
    let s = d.eta_retention;
    let min_len = 1e-13 * (1.0 + cap + d.max_charge + d.max_discharge);
    let stages: Vec<ConvexPwl> = (0..HOURS_PER_DAY)
        .map(|h| stage_cost(p.net_load[h], p.buy[h], p.sell[h], d, eps, min_len))
        .collect();

    // togo[h]: optimal cost of hours h+1.. as a function of the state after hour h
    let mut togo = Vec::with_capacity(HOURS_PER_DAY + 1);
    togo.push(ConvexPwl::zero_on(0.0, cap));
    for stage in stages.iter().rev() {
        let next = togo.last().expect("nonempty");
        let h = next.inf_convolve(&stage.reflect(), min_len);
        togo.push(h.restrict(0.0, s * cap, min_len).compose_scale(s));
    }
    togo.reverse();

    let mut u = Vec::with_capacity(HOURS_PER_DAY);
    let mut prev = p.x0.min(cap);
    for (h, stage) in stages.iter().enumerate() {
        let base = s * prev;
        let lo = (base - d.max_discharge).max(0.0);
        let hi = (base + d.max_charge).min(cap);
        let x = if hi <= lo { lo } else { argmin_sum(stage, base, &togo[h + 1], lo, hi, 1e-12) };
        u.push(x - base);
        prev = x;
    }
    u
}

fn solve_simplex(p: &DayProblem, eps: f64) -> Result<DayDispatch> {
    const NV: usize = 5;
    let d = p.device;
    let scale = p
        .net_load
        .iter()
        .map(|v| v.abs())
        .chain([d.capacity_kwh, d.max_charge, d.max_discharge, 1.0])
        .fold(0.0, f64::max);
    let a = 1.0 / (d.eta_charge * d.eta_inverter);
    let b = d.eta_discharge * d.eta_inverter;
    let n = NV * HOURS_PER_DAY;
    // per hour: charge, discharge, import, export, state
    let col = |h: usize, k: usize| NV * h + k;
    let mut cost = vec![0.0; n];
    let mut upper = vec![f64::INFINITY; n];
    let mut rows = Vec::with_capacity(2 * HOURS_PER_DAY);
    let mut rhs = Vec::with_capacity(2 * HOURS_PER_DAY);
    for h in 0..HOURS_PER_DAY {
        cost[col(h, 0)] = eps;
        cost[col(h, 1)] = eps;
        cost[col(h, 2)] = p.buy[h];
        cost[col(h, 3)] = -p.sell[h];
        upper[col(h, 0)] = d.max_charge / scale;
        upper[col(h, 1)] = d.max_discharge / scale;
        upper[col(h, 4)] = d.capacity_kwh / scale;

        let mut bal = vec![0.0; n];
        bal[col(h, 2)] = 1.0;
        bal[col(h, 3)] = -1.0;
        bal[col(h, 0)] = -a;
        bal[col(h, 1)] = b;
        rows.push(bal);
        rhs.push(p.net_load[h] / scale);

        let mut st = vec![0.0; n];
        st[col(h, 4)] = 1.0;
        st[col(h, 0)] = -1.0;
        st[col(h, 1)] = 1.0;
        if h > 0 {
            st[col(h - 1, 4)] = -d.eta_retention;
            rhs.push(0.0);
        } else {
            rhs.push(d.eta_retention * p.x0 / scale);
        }
        rows.push(st);
    }
    let sol = lp::solve(&LinearProgram { cost, upper, rows, rhs })
        .map_err(|e| Error::Solver { day: 0, msg: e.to_string() })?;
    let pick = |k: usize| -> Vec<f64> { (0..HOURS_PER_DAY).map(|h| sol.x[col(h, k)] * scale).collect() };
    let split = SplitFlows {
        charge: pick(0),
        discharge: pick(1),
        import: pick(2),
        export: pick(3),
    };
    let u = split.charge.iter().zip(&split.discharge).map(|(c, d)| c - d).collect();
    Ok(finish(p, u, Some(split)))
}

/// Hourly inputs for a full year (or any whole number of days).
#[derive(Debug, Clone, Copy)]
pub struct YearInputs<'a> {
    pub load: &'a [f64],
    /// DC-side PV energy, kWh.
    pub pv: &'a [f64],
    pub buy: &'a [f64],
    pub sell: &'a [f64],
}

impl<'a> YearInputs<'a> {
    pub fn new(load: &'a [f64], pv: &'a [f64], prices: &'a PriceSchedule) -> Self {
        YearInputs {
            load,
            pv,
            buy: prices.buy().values(),
            sell: prices.sell().values(),
        }
    }

    pub fn n_days(&self) -> usize {
        self.load.len() / HOURS_PER_DAY
    }

    fn validate(&self) -> Result<()> {
        let n = self.load.len();
        if n == 0 || !n.is_multiple_of(HOURS_PER_DAY) {
            return Err(Error::invalid(format!("load length {n} is not a whole number of days")));
        }
        for v in [self.pv, self.buy, self.sell] {
            if v.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: v.len() });
            }
        }
        Ok(())
    }

    /// Net load for day `j`.
    pub fn net_load(&self, j: usize, eta_inverter: f64) -> [f64; HOURS_PER_DAY] {
        let mut n = [0.0; HOURS_PER_DAY];
        let off = j * HOURS_PER_DAY;
        for (h, v) in n.iter_mut().enumerate() {
            *v = self.load[off + h] - eta_inverter * self.pv[off + h];
        }
        n
    }

    pub fn day_prices(&self, j: usize) -> (&'a [f64], &'a [f64]) {
        let r = j * HOURS_PER_DAY..(j + 1) * HOURS_PER_DAY;
        (&self.buy[r.clone()], &self.sell[r])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearOutcome {
    /// Annual bill with technology, $.
    pub bill: f64,
    pub daily_costs: Vec<f64>,
    /// State of charge at the end of each day.
    pub terminal_states: Vec<f64>,
}

/// Solve every day in order, carrying the end-of-day state forward.
/// The first day starts empty.
pub fn run_year(inputs: &YearInputs, device: &DeviceSpec, opts: &SolverOptions) -> Result<YearOutcome> {
    run_year_with(inputs, device, opts, |_, _| {})
}

/// [`run_year`] with a callback receiving each day's dispatch.
pub fn run_year_with(
    inputs: &YearInputs,
    device: &DeviceSpec,
    opts: &SolverOptions,
    mut on_day: impl FnMut(usize, &DayDispatch),
) -> Result<YearOutcome> {
    inputs.validate()?;
    let n_days = inputs.n_days();
    let mut daily_costs = Vec::with_capacity(n_days);
    let mut terminal_states = Vec::with_capacity(n_days);
    let mut x0 = 0.0;
    for j in 0..n_days {
        let net = inputs.net_load(j, device.eta_inverter);
        let (buy, sell) = inputs.day_prices(j);
        let problem = DayProblem { net_load: &net, buy, sell, device, x0 };
        let day = solve_day(&problem, opts).map_err(|e| e.on_day(j))?;
        x0 = day.x[HOURS_PER_DAY - 1];
        daily_costs.push(day.cost);
        terminal_states.push(x0);
        on_day(j, &day);
    }
    Ok(YearOutcome {
        bill: daily_costs.iter().sum(),
        daily_costs,
        terminal_states,
    })
}

/// Bill without technology, `L . Q`.
pub fn baseline_bill(load: &[f64], buy: &[f64]) -> Result<f64> {
    if load.len() != buy.len() {
        return Err(Error::LengthMismatch { expected: load.len(), got: buy.len() });
    }
    Ok(load.iter().zip(buy).map(|(l, q)| l * q).sum())
}

/// Write `household_id,day,hour,u,x,g,cost_contrib` rows for one day.
pub fn write_dispatch_rows<W: std::io::Write>(
    wtr: &mut csv::Writer<W>,
    household_id: &str,
    day: usize,
    dispatch: &DayDispatch,
    buy: &[f64],
    sell: &[f64],
) -> Result<()> {
    for h in 0..HOURS_PER_DAY {
        let g = dispatch.g[h];
        wtr.write_record([
            household_id,
            &day.to_string(),
            &h.to_string(),
            &dispatch.u[h].to_string(),
            &dispatch.x[h].to_string(),
            &g.to_string(),
            &hour_cost(g, buy[h], sell[h]).to_string(),
        ])?;
    }
    Ok(())
}
