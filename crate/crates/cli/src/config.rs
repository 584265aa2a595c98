use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use dervalue_core::calendar::{build_calendar, read_holiday_file, us_federal_holidays, Calendar};
use dervalue_core::coordination::{CoordOptions, Pattern};
use dervalue_core::dispatch::SolverOptions;
use dervalue_core::forecast::VoiOptions;
use dervalue_core::metrics::BootstrapOptions;
use dervalue_core::synth::SynthConfig;
use dervalue_core::tariffs::{PolicyId, RateConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunError;

/// Environment variable that overrides `out_dir` from the config file.
pub const OUT_DIR_ENV: &str = "DERVALUE_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalendarConfig {
    pub start: NaiveDate,
    pub n_days: usize,
    /// One ISO date per line; US federal holidays when absent.
    pub holidays: Option<PathBuf>,
}

impl Default for CalendarConfig {
    fn default() -> Self {
        CalendarConfig {
            start: NaiveDate::from_ymd_opt(2011, 11, 1).expect("valid date"),
            n_days: 366,
            holidays: None,
        }
    }
}

impl CalendarConfig {
    pub fn build(&self) -> Result<Calendar, RunError> {
        let holidays = match &self.holidays {
            Some(p) => read_holiday_file(p).map_err(RunError::Data)?,
            None => us_federal_holidays(self.start, self.n_days),
        };
        build_calendar(self.start, self.n_days, &holidays).map_err(RunError::Data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub loads: PathBuf,
    pub irradiance: PathBuf,
    pub zips: PathBuf,
    /// Wholesale prices; needed by P1 and P2.
    pub lmp: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 picks the machine default.
    pub threads: usize,
    pub policies: Vec<PolicyId>,
    /// Policy whose prices drive the information-value sweep.
    pub voi_policy: PolicyId,
    /// Analyse only the first households by id; all when absent.
    pub voi_households: Option<usize>,
    pub coord_policy: PolicyId,
    /// Households whose hourly dispatch is dumped under the first policy.
    pub dispatch_dump: Vec<String>,
    pub calendar: CalendarConfig,
    pub data: Option<DataPaths>,
    pub synth: Option<SynthConfig>,
    pub rates: RateConfig,
    pub solver: SolverOptions,
    pub bootstrap: BootstrapOptions,
    pub voi: VoiOptions,
    pub coord: CoordOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out_dir: None,
            threads: 0,
            policies: PolicyId::ALL.to_vec(),
            voi_policy: PolicyId::P1,
            voi_households: None,
            coord_policy: PolicyId::P1,
            dispatch_dump: Vec::new(),
            calendar: CalendarConfig::default(),
            data: None,
            synth: None,
            rates: RateConfig::default(),
            solver: SolverOptions::default(),
            bootstrap: BootstrapOptions::default(),
            voi: VoiOptions::default(),
            coord: CoordOptions::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub households: Option<usize>,
}

impl RunConfig {
    /// Parse TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, RunError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(vec![("<file>".into(), e.to_string())]))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(vec![("<file>".into(), format!("{}: {e}", path.display()))]))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut self.data {
            fix(&mut d.loads);
            fix(&mut d.irradiance);
            fix(&mut d.zips);
            d.lmp.as_mut().map(fix);
            d.nodes.as_mut().map(fix);
        }
        self.calendar.holidays.as_mut().map(fix);
        self.out_dir.as_mut().map(fix);
    }

    /// File < environment < flags. `--seed` also seeds the synthetic
    /// population and the random adoption order.
    pub fn apply(&mut self, o: &Overrides) {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                self.out_dir = Some(PathBuf::from(dir));
            }
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = Some(d.clone());
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(n) = o.households {
            self.synth.get_or_insert_with(SynthConfig::default).n_households = n;
        }
        if let Some(s) = o.seed {
            self.seed = s;
            if let Some(synth) = &mut self.synth {
                synth.seed = s;
            }
            self.coord.random_seed = Some(s);
        }
    }

    /// Every violated constraint, as `(field path, message)`.
    pub fn validate(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.data.is_none() && self.synth.is_none() {
            out.push(("data".into(), "either [data] paths or a [synth] section is required".into()));
        }
        if self.policies.is_empty() {
            out.push(("policies".into(), "at least one policy is required".into()));
        }
        let mut seen = self.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policies.len() {
            out.push(("policies".into(), "policies must not repeat".into()));
        }
        if let Some(d) = &self.data {
            let wholesale = self.policies.iter().chain([&self.voi_policy, &self.coord_policy]).any(|p| !p.is_uniform());
            if wholesale && (d.lmp.is_none() || d.nodes.is_none()) {
                out.push(("data.lmp".into(), "P1 and P2 need wholesale prices: set data.lmp and data.nodes".into()));
            }
        }
        if !matches!(self.calendar.n_days, 365 | 366) {
            out.push(("calendar.n_days".into(), format!("must be 365 or 366, got {}", self.calendar.n_days)));
        }
        if let Some(s) = &self.synth {
            out.extend(s.validate("synth."));
        }
        out.extend(self.rates.validate());
        if !(self.solver.tie_break.is_finite() && self.solver.tie_break >= 0.0) {
            out.push(("solver.tie_break".into(), "must be finite and nonnegative".into()));
        }
        if self.bootstrap.replicates == 0 {
            out.push(("bootstrap.replicates".into(), "must be at least 1".into()));
        }
        if !(self.bootstrap.alpha > 0.0 && self.bootstrap.alpha < 1.0) {
            out.push(("bootstrap.alpha".into(), format!("must lie in (0, 1), got {}", self.bootstrap.alpha)));
        }
        if self.voi_households == Some(0) {
            out.push(("voi_households".into(), "must be at least 1".into()));
        }
        out.extend(self.voi.validate("voi."));
        out.extend(self.coord.validate("coord."));
        out
    }

    /// The configuration as recorded in manifests: everything that affects
    /// results, nothing that only affects where or how fast they are made.
    pub fn semantic(&self) -> RunConfig {
        RunConfig {
            out_dir: None,
            threads: 0,
            ..self.clone()
        }
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.semantic()).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.coord.patterns
    }
}
