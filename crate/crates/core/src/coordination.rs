//! Adoption patterns and the value of coordinating storage across a
//! population.
//!
//! Without coordination each adopter runs its own device against its own
//! prices. With coordination one operator sees the whole population's load,
//! the adopters' PV and the sum of their batteries, and pays group-average
//! prices.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::devices::DeviceSpec;
use crate::dispatch::{run_year, SolverOptions, YearInputs};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::forecast::{household_stream, realized_year, NoiseModel};
use crate::pipeline::Failure;
use crate::seed::SeedPath;
use crate::tariffs::PriceSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Forward,
    Reverse,
    Random,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::Forward, Pattern::Reverse, Pattern::Random];
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Forward => "forward",
            Pattern::Reverse => "reverse",
            Pattern::Random => "random",
        })
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Pattern::Forward),
            "reverse" => Ok(Pattern::Reverse),
            "random" => Ok(Pattern::Random),
            other => Err(Error::invalid(format!("unknown adoption pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdoptionOrdering {
    pub pattern: Pattern,
    /// Household ids, first adopter first.
    pub order: Vec<String>,
    /// Only meaningful for [`Pattern::Random`].
    pub seed: u64,
}

/// Order households for adoption. `savings` holds `(household_id, s_n)`.
pub fn rank_households(savings: &[(String, f64)], pattern: Pattern, seed: u64) -> Result<AdoptionOrdering> {
    if savings.is_empty() {
        return Err(Error::invalid("cannot order an empty population"));
    }
    if let Some((id, _)) = savings.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::invalid(format!("{id}: normalized savings is NaN")));
    }
    let mut rows: Vec<&(String, f64)> = savings.iter().collect();
    match pattern {
        Pattern::Forward => rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))),
        Pattern::Reverse => rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0))),
        Pattern::Random => {
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            rows.shuffle(&mut SeedPath::root(seed).with_str("adoption").rng());
        }
    }
    Ok(AdoptionOrdering {
        pattern,
        order: rows.into_iter().map(|(id, _)| id.clone()).collect(),
        seed,
    })
}

/// The first `floor(N t / 100)` households of the ordering.
pub fn adopters_at(ordering: &AdoptionOrdering, t_pct: f64) -> Result<&[String]> {
    if !(0.0..=100.0).contains(&t_pct) {
        return Err(Error::invalid(format!("adoption level {t_pct}% outside [0, 100]")));
    }
    let k = (ordering.order.len() as f64 * t_pct / 100.0).floor() as usize;
    Ok(&ordering.order[..k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bills {
    /// No technology.
    pub baseline: f64,
    /// PV and storage, perfect foresight.
    pub with_tech: f64,
}

/// Adopters pay their technology bill, everyone else their baseline bill.
pub fn total_cost_no_coord(t_pct: f64, ordering: &AdoptionOrdering, bills: &BTreeMap<String, Bills>) -> Result<f64> {
    let adopters = adopters_at(ordering, t_pct)?;
    let k = adopters.len();
    ordering
        .order
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let b = bills.get(id).ok_or_else(|| Error::invalid(format!("no bill for household {id}")))?;
            Ok(if i < k { b.with_tech } else { b.baseline })
        })
        .sum()
}

/// CV the coordinator achieves on an aggregate with mean `x`:
/// `clamp(a x^-b, cv_min, cv_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingLaw {
    pub a: f64,
    pub b: f64,
    pub cv_min: f64,
    pub cv_max: f64,
}

impl Default for ScalingLaw {
    /// Placeholder values, not fitted to any forecasting model.
    fn default() -> Self {
        ScalingLaw {
            a: 0.25,
            b: 0.33,
            cv_min: 0.01,
            cv_max: 1.0,
        }
    }
}

impl ScalingLaw {
    pub fn cv(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.cv_max;
        }
        (self.a * x.powf(-self.b)).clamp(self.cv_min, self.cv_max)
    }

    pub fn validate(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if !(self.a.is_finite() && self.a >= 0.0) {
            out.push((format!("{prefix}a"), format!("must be finite and nonnegative, got {}", self.a)));
        }
        if !self.b.is_finite() {
            out.push((format!("{prefix}b"), "must be finite".into()));
        }
        if !(self.cv_min >= 0.0 && self.cv_min <= self.cv_max && self.cv_max.is_finite()) {
            out.push((format!("{prefix}cv_min"), "need 0 <= cv_min <= cv_max".into()));
        }
        out
    }
}

/// How well the coordinator forecasts the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupForecast {
    /// CV from the scaling law applied to the aggregate's mean.
    Law(ScalingLaw),
    /// Same CV as the households.
    MatchHouseholds,
    /// A fixed CV (fraction).
    Fixed { cv: f64 },
}

impl Default for GroupForecast {
    fn default() -> Self {
        GroupForecast::Law(ScalingLaw::default())
    }
}

impl GroupForecast {
    /// `(load CV, generation CV)` for household CV `household_cv` (fraction).
    pub fn cvs(&self, household_cv: f64, load_mean: f64, gen_mean: f64) -> (f64, f64) {
        match self {
            GroupForecast::Law(law) => (law.cv(load_mean), law.cv(gen_mean)),
            GroupForecast::MatchHouseholds => (household_cv, household_cv),
            GroupForecast::Fixed { cv } => (*cv, *cv),
        }
    }
}

/// One household as the coordination analysis sees it.
#[derive(Debug, Clone)]
pub struct Member {
    pub id: String,
    pub load: Vec<f64>,
    /// DC-side PV energy if it adopts.
    pub pv: Vec<f64>,
    pub device: DeviceSpec,
    pub prices: PriceSchedule,
    pub bills: Bills,
}

impl Member {
    pub fn inputs(&self) -> YearInputs<'_> {
        YearInputs::new(&self.load, &self.pv, &self.prices)
    }
}

/// The whole population plus the group-level quantities that do not depend
/// on who adopts.
#[derive(Debug, Clone)]
pub struct Community {
    members: Vec<Member>,
    index: BTreeMap<String, usize>,
    load_total: Vec<f64>,
    prices: PriceSchedule,
    self_discharge: bool,
}

impl Community {
    /// `self_discharge = false` drops the battery's standing loss from the
    /// group problem.
    pub fn new(mut members: Vec<Member>, self_discharge: bool) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("empty population"));
        }
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let n_hours = members[0].load.len();
        let mut load_total = vec![0.0; n_hours];
        let mut index = BTreeMap::new();
        for (i, m) in members.iter().enumerate() {
            if m.load.len() != n_hours || m.pv.len() != n_hours || m.prices.buy().len() != n_hours {
                return Err(Error::LengthMismatch { expected: n_hours, got: m.load.len() });
            }
            if index.insert(m.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate household {}", m.id)));
            }
            load_total.iter_mut().zip(&m.load).for_each(|(a, b)| *a += b);
        }
        let prices = PriceSchedule::mean(members.iter().map(|m| &m.prices))?;
        Ok(Community { members, index, load_total, prices, self_discharge })
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, id: &str) -> Result<&Member> {
        self.index
            .get(id)
            .map(|i| &self.members[*i])
            .ok_or_else(|| Error::invalid(format!("unknown household {id}")))
    }

    /// Group-average prices.
    pub fn prices(&self) -> &PriceSchedule {
        &self.prices
    }

    pub fn load_total(&self) -> &[f64] {
        &self.load_total
    }

    pub fn bills(&self) -> BTreeMap<String, Bills> {
        self.members.iter().map(|m| (m.id.clone(), m.bills)).collect()
    }

    /// Sum of baseline bills.
    pub fn baseline_total(&self) -> f64 {
        self.members.iter().map(|m| m.bills.baseline).sum()
    }

    /// Share of total PV capacity held by `adopters`.
    pub fn capacity_fraction(&self, adopters: &[String]) -> Result<f64> {
        let total: f64 = self.members.iter().map(|m| m.device.pv_kw).sum();
        let mut part = 0.0;
        for id in adopters {
            part += self.member(id)?.device.pv_kw;
        }
        Ok(if total > 0.0 { part / total } else { 0.0 })
    }

    /// Aggregate PV and storage for an adopter set.
    pub fn group_assets(&self, adopters: &[String]) -> Result<(Vec<f64>, DeviceSpec)> {
        let mut pv = vec![0.0; self.load_total.len()];
        let mut devices = Vec::with_capacity(adopters.len());
        for id in adopters {
            let m = self.member(id)?;
            pv.iter_mut().zip(&m.pv).for_each(|(a, b)| *a += b);
            devices.push(&m.device);
        }
        let template = devices.first().copied().copied().unwrap_or(self.members[0].device);
        let mut device = DeviceSpec::aggregate(devices, &template);
        if !self.self_discharge {
            device.eta_retention = 1.0;
        }
        Ok((pv, device))
    }

    /// Coordinated annual cost with perfect foresight.
    pub fn solve_group_year(&self, adopters: &[String], solver: &SolverOptions) -> Result<f64> {
        let (pv, device) = self.group_assets(adopters)?;
        let inputs = YearInputs::new(&self.load_total, &pv, &self.prices);
        Ok(run_year(&inputs, &device, solver)?.bill)
    }

    /// Coordinated annual cost when the operator plans on noisy aggregate
    /// forecasts.
    pub fn realized_group_year(
        &self,
        adopters: &[String],
        solver: &SolverOptions,
        forecast: &GroupForecast,
        household_cv: f64,
        seed: SeedPath,
    ) -> Result<f64> {
        let (pv, device) = self.group_assets(adopters)?;
        let n = self.load_total.len() as f64;
        let load_mean = self.load_total.iter().sum::<f64>() / n;
        let gen_mean = pv.iter().sum::<f64>() / n;
        let (cv_l, cv_g) = forecast.cvs(household_cv, load_mean, gen_mean);
        let noise = NoiseModel::split(cv_l, cv_g, load_mean, gen_mean, seed)?;
        let inputs = YearInputs::new(&self.load_total, &pv, &self.prices);
        realized_year(&inputs, &device, solver, &noise)
    }

    /// The same population with every household facing the group prices.
    pub fn repriced(&self, solver: &SolverOptions) -> Result<BTreeMap<String, Bills>> {
        let q = self.prices.buy().values();
        par_map(&self.members, |m| {
            let baseline = m.load.iter().zip(q).map(|(l, q)| l * q).sum();
            let with_tech = run_year(&YearInputs::new(&m.load, &m.pv, &self.prices), &m.device, solver)?.bill;
            Ok((m.id.clone(), Bills { baseline, with_tech }))
        })
        .into_iter()
        .collect()
    }
}

/// `VCA = T - C`.
pub fn vca(t_total: f64, c_total: f64) -> f64 {
    t_total - c_total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoordOptions {
    /// Adoption levels in percent.
    pub t_grid: Vec<f64>,
    pub patterns: Vec<Pattern>,
    /// Seed of the random adoption pattern; required when that pattern runs.
    pub random_seed: Option<u64>,
    /// Household forecast CVs for the information value, percent. Empty
    /// skips it.
    pub cv_grid: Vec<f64>,
    pub replicates: usize,
    pub group_forecast: GroupForecast,
    pub group_self_discharge: bool,
    pub common_random_numbers: bool,
}

impl Default for CoordOptions {
    fn default() -> Self {
        CoordOptions {
            t_grid: (0..=10).map(|k| 10.0 * k as f64).collect(),
            patterns: Pattern::ALL.to_vec(),
            random_seed: None,
            cv_grid: vec![0.0, 20.0, 50.0, 100.0],
            replicates: 30,
            group_forecast: GroupForecast::default(),
            group_self_discharge: true,
            common_random_numbers: true,
        }
    }
}

impl CoordOptions {
    pub fn validate(&self, prefix: &str) -> Vec<(String, String)> {
        let p = |f: &str| format!("{prefix}{f}");
        let mut out = Vec::new();
        if self.t_grid.is_empty() {
            out.push((p("t_grid"), "needs at least one adoption level".into()));
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(0.0..=100.0).contains(*t)) {
            out.push((p("t_grid"), format!("adoption level {t} outside [0, 100]")));
        }
        if self.patterns.is_empty() {
            out.push((p("patterns"), "needs at least one adoption pattern".into()));
        }
        if self.patterns.contains(&Pattern::Random) && self.random_seed.is_none() {
            out.push((p("random_seed"), "required when the random pattern is requested".into()));
        }
        if let Some(v) = self.cv_grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            out.push((p("cv_grid"), format!("CV levels must be nonnegative, got {v}")));
        }
        if !self.cv_grid.is_empty() && self.replicates == 0 {
            out.push((p("replicates"), "must be at least 1".into()));
        }
        match &self.group_forecast {
            GroupForecast::Law(law) => out.extend(law.validate(&p("group_forecast."))),
            GroupForecast::Fixed { cv } if !(cv.is_finite() && *cv >= 0.0) => {
                out.push((p("group_forecast.cv"), format!("must be nonnegative, got {cv}")))
            }
            _ => {}
        }
        out
    }
}

/// One `(pattern, t, cv)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordRow {
    pub pattern: Pattern,
    pub t_pct: f64,
    pub capacity_frac: f64,
    pub t_total: f64,
    pub c_total: f64,
    pub vca: f64,
    pub vca_frac: f64,
    /// Household CV in percent; `None` when the information value is skipped.
    pub cv: Option<f64>,
    pub vci: Option<f64>,
    pub vci_frac: Option<f64>,
    pub n_seeds: usize,
    pub stderr: Option<f64>,
}

/// Uncoordinated total repriced at group-average prices, alongside the
/// literal one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordVariantRow {
    pub pattern: Pattern,
    pub t_pct: f64,
    pub t_total: f64,
    pub t_total_group_prices: f64,
    pub c_total: f64,
    pub vca: f64,
    pub vca_group_prices: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CoordOutput {
    pub rows: Vec<CoordRow>,
    pub variants: Vec<CoordVariantRow>,
    pub failures: Vec<Failure>,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Full sweep over patterns, adoption levels and household CVs.
/// `savings` is `(household_id, s_n)` for the ordering.
pub fn coordination_sweep(
    community: &Community,
    savings: &[(String, f64)],
    opts: &CoordOptions,
    solver: &SolverOptions,
    root: SeedPath,
) -> Result<CoordOutput> {
    if let Some((p, m)) = opts.validate("coord.").first() {
        return Err(Error::invalid(format!("{p}: {m}")));
    }
    let bills = community.bills();
    let t_bl = community.baseline_total();
    let repriced = community.repriced(solver)?;
    let mut out = CoordOutput::default();

    // realized household bills b(P, s) for every household, CV and replicate
    let cvs: Vec<(usize, f64)> = opts.cv_grid.iter().copied().enumerate().collect();
    let household_realized: Vec<std::result::Result<Vec<Vec<f64>>, String>> = par_map(community.members(), |m| {
        cvs.iter()
            .map(|(k, pct)| {
                let cv = pct / 100.0;
                if cv == 0.0 {
                    return Ok(vec![m.bills.with_tech; opts.replicates]);
                }
                let n = m.load.len() as f64;
                let (lm, gm) = (m.load.iter().sum::<f64>() / n, m.pv.iter().sum::<f64>() / n);
                (0..opts.replicates)
                    .map(|s| {
                        let seed = household_stream(root, &m.id, s, *k, opts.common_random_numbers);
                        realized_year(&m.inputs(), &m.device, solver, &NoiseModel::new(cv, lm, gm, seed)?)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.to_string())
    });
    let mut realized: BTreeMap<&str, &Vec<Vec<f64>>> = BTreeMap::new();
    for (m, r) in community.members().iter().zip(&household_realized) {
        match r {
            Ok(v) => {
                realized.insert(m.id.as_str(), v);
            }
            Err(msg) => out.failures.push(Failure::new("coord", &m.id, msg)),
        }
    }

    let mut cells = Vec::new();
    for pattern in &opts.patterns {
        let ordering = rank_households(savings, *pattern, opts.random_seed.unwrap_or(0))?;
        for (ti, t) in opts.t_grid.iter().enumerate() {
            cells.push((ordering.clone(), ti, *t));
        }
    }
    let results = par_map(&cells, |(ordering, ti, t)| {
        coord_cell(community, &bills, &repriced, &realized, ordering, *ti, *t, opts, solver, root, t_bl)
    });
    for ((ordering, _, t), r) in cells.iter().zip(results) {
        match r {
            Ok((rows, variant)) => {
                out.rows.extend(rows);
                out.variants.push(variant);
            }
            Err(e) => out.failures.push(Failure::new("coord", format!("{}@{t}", ordering.pattern), e)),
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn coord_cell(
    community: &Community,
    bills: &BTreeMap<String, Bills>,
    repriced: &BTreeMap<String, Bills>,
    realized: &BTreeMap<&str, &Vec<Vec<f64>>>,
    ordering: &AdoptionOrdering,
    t_index: usize,
    t: f64,
    opts: &CoordOptions,
    solver: &SolverOptions,
    root: SeedPath,
    t_bl: f64,
) -> Result<(Vec<CoordRow>, CoordVariantRow)> {
    let adopters = adopters_at(ordering, t)?;
    let t_total = total_cost_no_coord(t, ordering, bills)?;
    let c_total = community.solve_group_year(adopters, solver)?;
    let vca_value = vca(t_total, c_total);
    let capacity_frac = community.capacity_fraction(adopters)?;
    let t_repriced = total_cost_no_coord(t, ordering, repriced)?;
    let variant = CoordVariantRow {
        pattern: ordering.pattern,
        t_pct: t,
        t_total,
        t_total_group_prices: t_repriced,
        c_total,
        vca: vca_value,
        vca_group_prices: vca(t_repriced, c_total),
    };
    let base = CoordRow {
        pattern: ordering.pattern,
        t_pct: t,
        capacity_frac,
        t_total,
        c_total,
        vca: vca_value,
        vca_frac: vca_value / t_bl,
        cv: None,
        vci: None,
        vci_frac: None,
        n_seeds: 0,
        stderr: None,
    };
    if opts.cv_grid.is_empty() {
        return Ok((vec![base], variant));
    }
    let non_adopters: f64 = ordering.order[adopters.len()..].iter().map(|id| bills[id].baseline).sum();
    let group_seed = |k: usize, s: usize| {
        let g = root.with_str("group").with_str(&ordering.pattern.to_string()).with(t_index as u64).with(s as u64);
        if opts.common_random_numbers {
            g
        } else {
            g.with(k as u64)
        }
    };
    // the operator's noise usually does not depend on the household CV
    let mut cache: BTreeMap<(u64, usize), f64> = BTreeMap::new();
    let mut rows = Vec::with_capacity(opts.cv_grid.len());
    for (k, pct) in opts.cv_grid.iter().enumerate() {
        let cv = pct / 100.0;
        let mut per_seed = Vec::with_capacity(opts.replicates);
        for s in 0..opts.replicates {
            let mut adopters_realized = 0.0;
            for id in adopters {
                let r = realized
                    .get(id.as_str())
                    .ok_or_else(|| Error::invalid(format!("no realized bills for {id}")))?;
                adopters_realized += r[k][s];
            }
            let key_cv = match opts.group_forecast {
                GroupForecast::MatchHouseholds => cv.to_bits(),
                _ => 0,
            };
            let key = (key_cv, s);
            let c_dagger = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let v = community.realized_group_year(adopters, solver, &opts.group_forecast, cv, group_seed(k, s))?;
                    if opts.common_random_numbers {
                        cache.insert(key, v);
                    }
                    v
                }
            };
            per_seed.push(adopters_realized + non_adopters - c_dagger - vca_value);
        }
        let (mean, se) = mean_stderr(&per_seed);
        rows.push(CoordRow {
            cv: Some(*pct),
            vci: Some(mean),
            vci_frac: Some(mean / t_bl),
            n_seeds: per_seed.len(),
            stderr: Some(se),
            ..base.clone()
        });
    }
    Ok((rows, variant))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `pattern,t_pct,capacity_frac,T_total,C_total,vca,vca_frac_of_tbl,cv,vci,vci_frac_of_tbl,n_seeds,stderr`
pub fn write_coord_csv<W: Write>(w: W, rows: &[CoordRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "pattern", "t_pct", "capacity_frac", "T_total", "C_total", "vca", "vca_frac_of_tbl", "cv", "vci", "vci_frac_of_tbl",
        "n_seeds", "stderr",
    ])?;
    for r in rows {
        wtr.write_record([
            r.pattern.to_string(),
            r.t_pct.to_string(),
            r.capacity_frac.to_string(),
            r.t_total.to_string(),
            r.c_total.to_string(),
            r.vca.to_string(),
            r.vca_frac.to_string(),
            opt(r.cv),
            opt(r.vci),
            opt(r.vci_frac),
            r.n_seeds.to_string(),
            opt(r.stderr),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<coord>", e))?;
    Ok(())
}

pub fn write_coord_variants_csv<W: Write>(w: W, rows: &[CoordVariantRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pattern", "t_pct", "T_total", "T_total_group_prices", "C_total", "vca", "vca_group_prices"])?;
    for r in rows {
        wtr.write_record([
            r.pattern.to_string(),
            r.t_pct.to_string(),
            r.t_total.to_string(),
            r.t_total_group_prices.to_string(),
            r.c_total.to_string(),
            r.vca.to_string(),
            r.vca_group_prices.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<coord variants>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sn(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(a, b)| (a.to_string(), *b)).collect()
    }

    #[test]
    fn forward_and_reverse_orders() {
        let s = sn(&[("h1", 5.0), ("h2", 1.0), ("h3", 3.0)]);
        assert_eq!(rank_households(&s, Pattern::Forward, 0).unwrap().order, ["h1", "h3", "h2"]);
        assert_eq!(rank_households(&s, Pattern::Reverse, 0).unwrap().order, ["h2", "h3", "h1"]);
        let tied = sn(&[("b", 1.0), ("a", 1.0)]);
        assert_eq!(rank_households(&tied, Pattern::Forward, 0).unwrap().order, ["a", "b"]);
        assert_eq!(rank_households(&tied, Pattern::Reverse, 0).unwrap().order, ["a", "b"]);
        assert!(rank_households(&[], Pattern::Forward, 0).is_err());
    }

    #[test]
    fn random_order_is_a_seeded_permutation() {
        let s: Vec<(String, f64)> = (0..20).map(|k| (format!("h{k:02}"), k as f64)).collect();
        let a = rank_households(&s, Pattern::Random, 9).unwrap();
        assert_eq!(a, rank_households(&s, Pattern::Random, 9).unwrap());
        let mut sorted = a.order.clone();
        sorted.sort();
        assert_eq!(sorted, s.iter().map(|x| x.0.clone()).collect::<Vec<_>>());
        assert_ne!(a.order, rank_households(&s, Pattern::Random, 10).unwrap().order);
    }

    #[test]
    fn adopter_counts_floor() {
        let s: Vec<(String, f64)> = (0..10).map(|k| (format!("h{k}"), -(k as f64))).collect();
        let o = rank_households(&s, Pattern::Forward, 0).unwrap();
        assert!(adopters_at(&o, 0.0).unwrap().is_empty());
        assert_eq!(adopters_at(&o, 25.0).unwrap(), ["h0", "h1"]);
        assert_eq!(adopters_at(&o, 100.0).unwrap().len(), 10);
        assert!(adopters_at(&o, 120.0).is_err());
    }

    #[test]
    fn uncoordinated_totals() {
        let s = sn(&[("a", 2.0), ("b", 1.0)]);
        let o = rank_households(&s, Pattern::Forward, 0).unwrap();
        let bills: BTreeMap<String, Bills> = [
            ("a".to_string(), Bills { baseline: 10.0, with_tech: 4.0 }),
            ("b".to_string(), Bills { baseline: 6.0, with_tech: 5.0 }),
        ]
        .into();
        assert_eq!(total_cost_no_coord(0.0, &o, &bills).unwrap(), 16.0);
        assert_eq!(total_cost_no_coord(50.0, &o, &bills).unwrap(), 10.0);
        assert_eq!(total_cost_no_coord(100.0, &o, &bills).unwrap(), 9.0);
        let mut missing = bills.clone();
        missing.remove("b");
        assert!(total_cost_no_coord(0.0, &o, &missing).is_err());
    }

    #[test]
    fn scaling_law_clamps() {
        let law = ScalingLaw::default();
        assert_eq!(law.cv(0.0), 1.0);
        assert!((law.cv(1.0) - 0.25).abs() < 1e-12);
        assert_eq!(law.cv(1e12), 0.01);
        assert!(law.cv(10.0) >= law.cv(100.0));
    }

    #[test]
    fn options_need_a_random_seed() {
        let o = CoordOptions::default();
        assert_eq!(o.validate("coord.")[0].0, "coord.random_seed");
        let o = CoordOptions { random_seed: Some(1), t_grid: vec![0.0, 120.0], ..Default::default() };
        assert_eq!(o.validate("coord.")[0].0, "coord.t_grid");
    }
}
