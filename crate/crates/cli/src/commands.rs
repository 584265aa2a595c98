use std::collections::BTreeMap;
use std::path::PathBuf;

use dervalue_core::analytic::{toy_curve, write_toy_curve, ToyParams};
use dervalue_core::calendar::Calendar;
use dervalue_core::coordination::{coordination_sweep, write_coord_csv, write_coord_variants_csv, Community};
use dervalue_core::devices::write_sizing_audit;
use dervalue_core::dispatch::{run_year_with, write_dispatch_rows, YearInputs};
use dervalue_core::exec::par_map;
use dervalue_core::forecast::{voi_household, write_voi_csv, VoiResult};
use dervalue_core::ingest::{
    load_traces_csv, read_geo_csv, read_irradiance_csv, read_node_prices, write_geo_csv, write_irradiance_csv,
    write_loads, write_raw_lmp_csv,
};
use dervalue_core::metrics::{
    policy_correlations, savings_table, write_correlations_csv, write_quantiles_csv, write_savings_csv,
};
use dervalue_core::pipeline::{run_policy, Failure, PolicyRun, Population};
use dervalue_core::seed::SeedPath;
use dervalue_core::synth::{synth_world, SynthWorld};
use dervalue_core::tariffs::{write_rate_audit, PolicyId};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::Outputs;
use crate::RunError;

/// Parameters of the `analytic` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticArgs {
    pub e: f64,
    pub pa: f64,
    pub q: f64,
    pub r: f64,
    pub n: u32,
    pub steps: u32,
}

impl Default for AnalyticArgs {
    fn default() -> Self {
        AnalyticArgs {
            e: 2.0,
            pa: 0.75,
            q: 1.0,
            r: 0.0,
            n: 100,
            steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    Synth,
    Prices,
    Savings,
    Voi,
    Coord,
    Analytic(AnalyticArgs),
    All,
}

#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub failures: Vec<Failure>,
}

impl Report {
    /// Failures that came from solving rather than from bad input rows.
    pub fn solver_failures(&self) -> usize {
        self.failures.iter().filter(|f| f.stage != "sizing").count()
    }
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<Report, RunError> {
    if !matches!(command, Command::Analytic(_)) {
        let diags = cfg.validate();
        if !diags.is_empty() {
            return Err(RunError::Config(diags));
        }
    }
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::config("threads", e.to_string()))?;
    pool.install(|| {
        let mut ctx = Ctx {
            cfg,
            out: Outputs::new(dir, command.clone(), cfg)?,
            root: SeedPath::root(cfg.seed),
            failures: Vec::new(),
        };
        ctx.execute(command)?;
        Ok(Report {
            files: ctx.out.written().to_vec(),
            failures: ctx.failures,
        })
    })
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: Outputs,
    root: SeedPath,
    failures: Vec<Failure>,
}

struct World {
    population: Population,
    synth: Option<SynthWorld>,
}

impl Ctx<'_> {
    fn execute(&mut self, command: &Command) -> Result<(), RunError> {
        match command {
            Command::Analytic(a) => self.analytic(a),
            Command::Synth => {
                let calendar = self.cfg.calendar.build()?;
                let world = self.synth_world(&calendar)?;
                self.write_synth(&world)
            }
            Command::Prices => {
                let w = self.world()?;
                self.prices(&w)
            }
            Command::Savings => {
                let w = self.world()?;
                self.savings(&w)?;
                self.write_failures()
            }
            Command::Voi => {
                let w = self.world()?;
                self.voi(&w)?;
                self.write_failures()
            }
            Command::Coord => {
                let w = self.world()?;
                let run = self.policy_run(&w, self.cfg.coord_policy);
                self.coord(run)?;
                self.write_failures()
            }
            Command::All => {
                let w = self.world()?;
                if let Some(s) = &w.synth {
                    self.write_synth(s)?;
                }
                self.prices(&w)?;
                let mut runs = self.savings(&w)?;
                self.voi(&w)?;
                let run = match runs.remove(&self.cfg.coord_policy) {
                    Some(r) => r,
                    None => self.policy_run(&w, self.cfg.coord_policy),
                };
                self.coord(run)?;
                self.analytic(&AnalyticArgs::default())?;
                self.write_failures()
            }
        }
    }

    fn synth_world(&self, calendar: &Calendar) -> Result<SynthWorld, RunError> {
        let cfg = self
            .cfg
            .synth
            .as_ref()
            .ok_or_else(|| RunError::config("synth", "the synth command needs a [synth] section"))?;
        log::info!("generating {} synthetic households", cfg.n_households);
        Ok(synth_world(cfg, calendar)?)
    }

    fn world(&mut self) -> Result<World, RunError> {
        let calendar = self.cfg.calendar.build()?;
        let (population, synth) = match &self.cfg.data {
            Some(d) => {
                log::info!("reading {}", d.loads.display());
                let ingest = load_traces_csv(&d.loads, &calendar)?;
                if ingest.dropped_low_consumption + ingest.dropped_zero_readings > 0 {
                    log::warn!(
                        "dropped {} low-consumption and {} mostly-zero meters",
                        ingest.dropped_low_consumption,
                        ingest.dropped_zero_readings
                    );
                }
                let irradiance = read_irradiance_csv(&d.irradiance, &calendar)?;
                let zips = read_geo_csv(&d.zips)?;
                let wholesale = match (&d.lmp, &d.nodes) {
                    (Some(lmp), Some(nodes)) => read_node_prices(lmp, nodes, &calendar)?.by_zip(&zips)?,
                    _ => BTreeMap::new(),
                };
                let pop = Population::assemble(&calendar, &ingest.traces, &irradiance, wholesale, &self.cfg.rates)?;
                (pop, None)
            }
            None => {
                let world = self.synth_world(&calendar)?;
                let pop = Population::from_synth(&calendar, &world, &self.cfg.rates)?;
                (pop, Some(world))
            }
        };
        for f in &population.failures {
            log::warn!("{} {}: {}", f.stage, f.subject, f.message);
        }
        self.failures.extend(population.failures.iter().cloned());
        log::info!("{} households", population.households.len());
        Ok(World { population, synth })
    }

    fn write_synth(&mut self, w: &SynthWorld) -> Result<(), RunError> {
        let traces = &w.traces;
        self.out.csv("loads.csv", |b| write_loads(b, traces))?;
        self.out.csv_at("irradiance.csv", |p| write_irradiance_csv(p, &w.irradiance))?;
        self.out.csv_at("lmp.csv", |p| write_raw_lmp_csv(p, &w.lmp_raw))?;
        self.out.csv_at("nodes.csv", |p| write_geo_csv(p, "node_id", &w.nodes))?;
        self.out.csv_at("zips.csv", |p| write_geo_csv(p, "zip", &w.zips))
    }

    fn prices(&mut self, w: &World) -> Result<(), RunError> {
        let pop = &w.population;
        let mut rows = Vec::new();
        for policy in sorted(&self.cfg.policies) {
            for zip in pop.zips() {
                let sched = pop.prices(policy, &zip)?;
                rows.push((zip, policy, sched));
            }
        }
        self.out.csv("rate_audit.csv", |b| write_rate_audit(b, &rows))?;
        let sizing: Vec<_> = pop.households.iter().map(|h| (h.id.clone(), h.device)).collect();
        self.out.csv("sizing_audit.csv", |b| write_sizing_audit(b, &sizing))
    }

    fn policy_run(&mut self, w: &World, policy: PolicyId) -> PolicyRun {
        log::info!("bills under {policy}");
        let run = run_policy(&w.population, policy, &self.cfg.solver, &self.cfg.bootstrap, self.root);
        self.failures.extend(run.failures.iter().cloned());
        run
    }

    fn savings(&mut self, w: &World) -> Result<BTreeMap<PolicyId, PolicyRun>, RunError> {
        let mut runs = BTreeMap::new();
        let mut by_policy = BTreeMap::new();
        let mut records = Vec::new();
        let mut summaries = Vec::new();
        for policy in sorted(&self.cfg.policies) {
            let run = self.policy_run(w, policy);
            if run.records.is_empty() {
                self.failures.push(Failure::new("savings", policy.to_string(), "no household could be solved"));
            } else {
                let (recs, summary) = savings_table(run.records.clone(), policy)?;
                records.extend(recs.iter().cloned());
                by_policy.insert(policy, recs);
                summaries.push(summary);
            }
            runs.insert(policy, run);
        }
        self.out.csv("savings.csv", |b| write_savings_csv(b, &records))?;
        let correlations = match policy_correlations(&by_policy) {
            Ok(c) => c,
            Err(e) => {
                self.failures.push(Failure::new("correlations", "all", e));
                Vec::new()
            }
        };
        self.out.csv("correlations.csv", |b| write_correlations_csv(b, &correlations))?;
        self.out.csv("quantiles.csv", |b| write_quantiles_csv(b, &summaries))?;
        if !self.cfg.dispatch_dump.is_empty() {
            self.dispatch_dump(w)?;
        }
        Ok(runs)
    }

    fn dispatch_dump(&mut self, w: &World) -> Result<(), RunError> {
        let policy = sorted(&self.cfg.policies)[0];
        let pop = &w.population;
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["household_id", "day", "hour", "u", "x", "g", "cost_contrib"])
            .map_err(dervalue_core::Error::from)?;
        let mut ids = self.cfg.dispatch_dump.clone();
        ids.sort();
        ids.dedup();
        for id in &ids {
            let h = pop
                .households
                .iter()
                .find(|h| &h.id == id)
                .ok_or_else(|| RunError::config("dispatch_dump", format!("unknown household {id}")))?;
            let prices = pop.prices(policy, &h.zip)?;
            let inputs = YearInputs::new(h.load.values(), h.pv.values(), &prices);
            let mut first_err = None;
            run_year_with(&inputs, &h.device, &self.cfg.solver, |j, day| {
                let (buy, sell) = inputs.day_prices(j);
                if let Err(e) = write_dispatch_rows(&mut wtr, id, j, day, buy, sell) {
                    first_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = first_err {
                return Err(e.into());
            }
        }
        let bytes = wtr.into_inner().map_err(|e| dervalue_core::Error::InvalidInput(e.to_string()))?;
        self.out.csv("dispatch.csv", |b| {
            b.extend_from_slice(&bytes);
            Ok(())
        })
    }

    fn voi(&mut self, w: &World) -> Result<(), RunError> {
        let pop = &w.population;
        let n = self.cfg.voi_households.unwrap_or(pop.households.len()).min(pop.households.len());
        let policy = self.cfg.voi_policy;
        log::info!("value of information for {n} households under {policy}");
        let (cfg, root) = (self.cfg, self.root.with_str("voi"));
        let results = par_map(&pop.households[..n], |h| -> dervalue_core::Result<VoiResult> {
            let prices = pop.prices(policy, &h.zip)?;
            let inputs = YearInputs::new(h.load.values(), h.pv.values(), &prices);
            voi_household(&h.id, &inputs, &h.device, &cfg.solver, &cfg.voi, root)
        });
        let mut ok = Vec::with_capacity(n);
        for (h, r) in pop.households[..n].iter().zip(results) {
            match r {
                Ok(v) => ok.push(v),
                Err(e) => self.failures.push(Failure::new("voi", &h.id, e)),
            }
        }
        self.out.csv("voi.csv", |b| write_voi_csv(b, &ok))
    }

    fn coord(&mut self, run: PolicyRun) -> Result<(), RunError> {
        log::info!("coordination sweep under {}", run.policy);
        let savings = run.normalized_savings();
        if savings.is_empty() {
            self.failures.push(Failure::new("coord", run.policy.to_string(), "no households to coordinate"));
            return Ok(());
        }
        let community = Community::new(run.members, self.cfg.coord.group_self_discharge)?;
        let out = coordination_sweep(&community, &savings, &self.cfg.coord, &self.cfg.solver, self.root.with_str("coord"))?;
        self.failures.extend(out.failures);
        self.out.csv("coord.csv", |b| write_coord_csv(b, &out.rows))?;
        self.out.csv("coord_variants.csv", |b| write_coord_variants_csv(b, &out.variants))
    }

    fn analytic(&mut self, a: &AnalyticArgs) -> Result<(), RunError> {
        let p = ToyParams { e: a.e, p_a: a.pa, q: a.q, r: a.r, n: a.n, f: 0.0 };
        p.validate().map_err(|e| RunError::config("analytic", e.to_string()))?;
        if !p.in_closed_form_regime() {
            log::warn!("pa <= 0.5: the closed forms assume type A is the majority");
        }
        let pts = toy_curve(&p, a.steps).map_err(|e| RunError::config("analytic.steps", e.to_string()))?;
        self.out.csv("analytic.csv", |b| write_toy_curve(b, &pts))
    }

    fn write_failures(&mut self) -> Result<(), RunError> {
        let failures = &self.failures;
        self.out.csv("failures.csv", |b| {
            let mut wtr = csv::Writer::from_writer(b);
            wtr.write_record(["stage", "subject", "message"])?;
            for f in failures {
                wtr.write_record([&f.stage, &f.subject, &f.message])?;
            }
            wtr.flush().map_err(|e| dervalue_core::Error::Io { path: "<failures>".into(), source: e })?;
            Ok(())
        })
    }
}

fn sorted(policies: &[PolicyId]) -> Vec<PolicyId> {
    let mut p = policies.to_vec();
    p.sort();
    p.dedup();
    p
}
