//! From traces, irradiance and wholesale prices to per-household bills.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::calendar::{Calendar, HourlySeries, LoadTrace};
use crate::coordination::{Bills, Member};
use crate::devices::{make_device, net_zero_size, pv_generation, DeviceSpec};
use crate::dispatch::{run_year, SolverOptions, YearInputs};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::metrics::{BootstrapOptions, SavingsRecord};
use crate::seed::SeedPath;
use crate::synth::SynthWorld;
use crate::tariffs::{assemble_policy, PolicyId, PriceSchedule, RateConfig, RateLibrary};

/// Work item that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub subject: String,
    pub message: String,
}

impl Failure {
    pub fn new(stage: &str, subject: impl Into<String>, err: impl ToString) -> Self {
        Failure {
            stage: stage.to_string(),
            subject: subject.into(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Household {
    pub id: String,
    pub zip: String,
    pub load: HourlySeries,
    /// DC-side PV energy of the net-zero system.
    pub pv: HourlySeries,
    pub device: DeviceSpec,
}

/// Sized households plus every rate they can face.
#[derive(Debug, Clone)]
pub struct Population {
    pub households: Vec<Household>,
    pub rates: RateLibrary,
    pub failures: Vec<Failure>,
}

impl Population {
    /// Households whose zip has no irradiance, or that cannot be sized,
    /// are dropped and recorded. `wholesale_by_zip` is in $/kWh.
    pub fn assemble(
        calendar: &Calendar,
        traces: &[LoadTrace],
        irradiance: &BTreeMap<String, HourlySeries>,
        wholesale_by_zip: BTreeMap<String, HourlySeries>,
        rates: &RateConfig,
    ) -> Result<Self> {
        let mut traces: Vec<&LoadTrace> = traces.iter().collect();
        traces.sort_by(|a, b| a.household_id.cmp(&b.household_id));
        let sized = par_map(&traces, |t| -> Result<Household> {
            t.series.check_calendar(calendar)?;
            let v = irradiance
                .get(&t.zip)
                .ok_or_else(|| Error::invalid(format!("no irradiance for zip {}", t.zip)))?;
            let template = make_device(1.0)?;
            let z = net_zero_size(&t.series, v, template.eta_inverter)?;
            Ok(Household {
                id: t.household_id.clone(),
                zip: t.zip.clone(),
                load: t.series.clone(),
                pv: pv_generation(z, v)?,
                device: make_device(z)?,
            })
        });
        let mut households = Vec::with_capacity(sized.len());
        let mut kept = Vec::with_capacity(sized.len());
        let mut failures = Vec::new();
        for (t, r) in traces.iter().zip(sized) {
            match r {
                Ok(h) => {
                    households.push(h);
                    kept.push((*t).clone());
                }
                Err(e) => failures.push(Failure::new("sizing", &t.household_id, e)),
            }
        }
        if households.is_empty() {
            return Err(Error::invalid("no usable households"));
        }
        let rates = RateLibrary::build(calendar, rates, wholesale_by_zip, &kept)?;
        Ok(Population { households, rates, failures })
    }

    pub fn from_synth(calendar: &Calendar, world: &SynthWorld, rates: &RateConfig) -> Result<Self> {
        let wholesale = world.node_prices()?.by_zip(&world.zips)?;
        Population::assemble(calendar, &world.traces, &world.irradiance, wholesale, rates)
    }

    pub fn prices(&self, policy: PolicyId, zip: &str) -> Result<PriceSchedule> {
        assemble_policy(policy, zip, &self.rates)
    }

    /// Zips in use, sorted.
    pub fn zips(&self) -> Vec<String> {
        let mut z: Vec<String> = self.households.iter().map(|h| h.zip.clone()).collect();
        z.sort();
        z.dedup();
        z
    }
}

/// One household under one policy: prices, bills and day-by-day costs.
#[derive(Debug, Clone)]
pub struct HouseholdRun {
    pub member: Member,
    pub baseline_daily: Vec<f64>,
    pub tech_daily: Vec<f64>,
}

pub fn run_household(h: &Household, prices: PriceSchedule, solver: &SolverOptions) -> Result<HouseholdRun> {
    let load = h.load.values();
    let buy = prices.buy().values();
    let baseline_daily: Vec<f64> = load
        .chunks(24)
        .zip(buy.chunks(24))
        .map(|(l, q)| l.iter().zip(q).map(|(a, b)| a * b).sum())
        .collect();
    let outcome = run_year(&YearInputs::new(load, h.pv.values(), &prices), &h.device, solver)?;
    let bills = Bills {
        baseline: baseline_daily.iter().sum(),
        with_tech: outcome.bill,
    };
    Ok(HouseholdRun {
        member: Member {
            id: h.id.clone(),
            load: load.to_vec(),
            pv: h.pv.values().to_vec(),
            device: h.device,
            prices,
            bills,
        },
        baseline_daily,
        tech_daily: outcome.daily_costs,
    })
}

#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub policy: PolicyId,
    /// Sorted by household id.
    pub records: Vec<SavingsRecord>,
    pub members: Vec<Member>,
    pub failures: Vec<Failure>,
}

impl PolicyRun {
    /// `(household_id, s_n)` pairs for adoption ordering.
    pub fn normalized_savings(&self) -> Vec<(String, f64)> {
        self.records.iter().map(|r| (r.household_id.clone(), r.s_n)).collect()
    }
}

/// Bills and savings for every household under `policy`.
pub fn run_policy(
    pop: &Population,
    policy: PolicyId,
    solver: &SolverOptions,
    boot: &BootstrapOptions,
    root: SeedPath,
) -> PolicyRun {
    let results = par_map(&pop.households, |h| -> Result<(SavingsRecord, Member)> {
        let prices = pop.prices(policy, &h.zip)?;
        let run = run_household(h, prices, solver)?;
        let seed = root.with_str("bootstrap").with_str(&policy.to_string()).with_str(&h.id);
        let rec = SavingsRecord::from_daily(&h.id, policy, h.device.pv_kw, &run.baseline_daily, &run.tech_daily, boot, seed)?;
        Ok((rec, run.member))
    });
    let mut out = PolicyRun {
        policy,
        records: Vec::new(),
        members: Vec::new(),
        failures: Vec::new(),
    };
    for (h, r) in pop.households.iter().zip(results) {
        match r {
            Ok((rec, m)) => {
                out.records.push(rec);
                out.members.push(m);
            }
            Err(e) => out.failures.push(Failure::new(&format!("savings/{policy}"), &h.id, e)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::default_calendar;
    use crate::synth::{synth_world, SynthConfig};

    #[test]
    fn small_synthetic_population_runs_every_policy() {
        let cal = default_calendar();
        let cfg = SynthConfig { n_households: 4, n_zips: 2, n_nodes: 2, ..Default::default() };
        let world = synth_world(&cfg, &cal).unwrap();
        let pop = Population::from_synth(&cal, &world, &RateConfig::default()).unwrap();
        assert_eq!(pop.households.len(), 4);
        let boot = BootstrapOptions { replicates: 50, ..Default::default() };
        for policy in PolicyId::ALL {
            let run = run_policy(&pop, policy, &SolverOptions::default(), &boot, SeedPath::root(1));
            assert!(run.failures.is_empty(), "{:?}", run.failures);
            for r in &run.records {
                assert!(r.s_a >= -1e-6, "{r:?}");
                assert!(r.s_a_ci.0 <= r.s_a_ci.1);
            }
        }
    }
}
