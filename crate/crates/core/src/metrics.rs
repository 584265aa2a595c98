//! Savings records, rank correlation and bootstrap intervals.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedPath;
use crate::tariffs::PolicyId;

/// Average ranks (1-based); ties share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in &idx[i..=j] {
            ranks[*k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::invalid("spearman needs at least two observations"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("spearman input contains NaN"));
    }
    pearson(&average_ranks(x), &average_ranks(y)).ok_or_else(|| Error::invalid("zero rank variance"))
}

/// Linear-interpolation quantile of sorted data, `p` in [0, 1].
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub alpha: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            replicates: 1000,
            alpha: 0.05,
        }
    }
}

/// Percentile interval for the annual total of `daily`, resampling days
/// with replacement.
pub fn bootstrap_ci(daily: &[f64], opts: &BootstrapOptions, seed: SeedPath) -> Result<(f64, f64)> {
    if daily.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least two days"));
    }
    if opts.replicates == 0 {
        return Err(Error::invalid("bootstrap needs at least one replicate"));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {} outside (0, 1)", opts.alpha)));
    }
    let mut rng = seed.rng();
    let n = daily.len();
    let mut totals: Vec<f64> = (0..opts.replicates)
        .map(|_| (0..n).map(|_| daily[rng.random_range(0..n)]).sum())
        .collect();
    totals.sort_by(f64::total_cmp);
    Ok((quantile(&totals, opts.alpha / 2.0), quantile(&totals, 1.0 - opts.alpha / 2.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsRecord {
    pub household_id: String,
    pub policy: PolicyId,
    pub z: f64,
    pub b_bl: f64,
    pub b_n: f64,
    /// Absolute savings, $/yr.
    pub s_a: f64,
    /// Savings per unit of system size, $/kW-kWh/yr.
    pub s_n: f64,
    pub s_a_ci: (f64, f64),
    pub s_n_ci: (f64, f64),
}

impl SavingsRecord {
    /// Build from day-by-day bills; the interval resamples daily savings.
    pub fn from_daily(
        household_id: &str,
        policy: PolicyId,
        z: f64,
        baseline_daily: &[f64],
        tech_daily: &[f64],
        boot: &BootstrapOptions,
        seed: SeedPath,
    ) -> Result<Self> {
        if baseline_daily.len() != tech_daily.len() {
            return Err(Error::LengthMismatch { expected: baseline_daily.len(), got: tech_daily.len() });
        }
        if !(z > 0.0) {
            return Err(Error::invalid(format!("{household_id}: system size must be positive")));
        }
        let b_bl: f64 = baseline_daily.iter().sum();
        let b_n: f64 = tech_daily.iter().sum();
        let s_a = b_bl - b_n;
        let diff: Vec<f64> = baseline_daily.iter().zip(tech_daily).map(|(a, b)| a - b).collect();
        let s_a_ci = bootstrap_ci(&diff, boot, seed)?;
        Ok(SavingsRecord {
            household_id: household_id.to_string(),
            policy,
            z,
            b_bl,
            b_n,
            s_a,
            s_n: s_a / z,
            s_a_ci,
            s_n_ci: (s_a_ci.0 / z, s_a_ci.1 / z),
        })
    }
}

/// Distribution summary of one policy's savings.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingsSummary {
    pub policy: PolicyId,
    /// `(percent, s_a, s_n)` for percent = 1..=99.
    pub quantiles: Vec<(u32, f64, f64)>,
    /// Household ids by decreasing `s_n`, ties by id.
    pub ranking: Vec<String>,
}

/// Records for one policy sorted by household id, plus their summary.
pub fn savings_table(mut records: Vec<SavingsRecord>, policy: PolicyId) -> Result<(Vec<SavingsRecord>, SavingsSummary)> {
    if records.is_empty() {
        return Err(Error::invalid("no households"));
    }
    if let Some(r) = records.iter().find(|r| r.policy != policy) {
        return Err(Error::invalid(format!("record for {} is under {} not {policy}", r.household_id, r.policy)));
    }
    records.sort_by(|a, b| a.household_id.cmp(&b.household_id));
    let mut sa: Vec<f64> = records.iter().map(|r| r.s_a).collect();
    let mut sn: Vec<f64> = records.iter().map(|r| r.s_n).collect();
    sa.sort_by(f64::total_cmp);
    sn.sort_by(f64::total_cmp);
    let quantiles = (1..=99)
        .map(|p| {
            let f = p as f64 / 100.0;
            (p, quantile(&sa, f), quantile(&sn, f))
        })
        .collect();
    let mut ranking: Vec<&SavingsRecord> = records.iter().collect();
    ranking.sort_by(|a, b| b.s_n.total_cmp(&a.s_n).then_with(|| a.household_id.cmp(&b.household_id)));
    let ranking = ranking.into_iter().map(|r| r.household_id.clone()).collect();
    Ok((records, SavingsSummary { policy, quantiles, ranking }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub policy_x: PolicyId,
    pub policy_y: PolicyId,
    /// `s_a` or `s_n`.
    pub metric: &'static str,
    pub spearman: f64,
}

/// Spearman correlation of savings for every pair of policies, matching
/// households by id.
pub fn policy_correlations(by_policy: &BTreeMap<PolicyId, Vec<SavingsRecord>>) -> Result<Vec<CorrelationRow>> {
    let keyed: BTreeMap<PolicyId, BTreeMap<&str, &SavingsRecord>> = by_policy
        .iter()
        .map(|(p, rs)| (*p, rs.iter().map(|r| (r.household_id.as_str(), r)).collect()))
        .collect();
    let policies: Vec<PolicyId> = keyed.keys().copied().collect();
    let mut out = Vec::new();
    for (i, px) in policies.iter().enumerate() {
        for py in &policies[i + 1..] {
            let (a, b) = (&keyed[px], &keyed[py]);
            let common: Vec<&str> = a.keys().filter(|k| b.contains_key(*k)).copied().collect();
            for (metric, get) in [("s_a", (|r: &SavingsRecord| r.s_a) as fn(&SavingsRecord) -> f64), ("s_n", |r| r.s_n)] {
                let x: Vec<f64> = common.iter().map(|k| get(a[k])).collect();
                let y: Vec<f64> = common.iter().map(|k| get(b[k])).collect();
                out.push(CorrelationRow {
                    policy_x: *px,
                    policy_y: *py,
                    metric,
                    spearman: spearman(&x, &y)?,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_savings_csv<W: Write>(w: W, records: &[SavingsRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["household_id", "policy", "z", "b_bl", "b_n", "s_a", "s_n", "s_a_lo", "s_a_hi", "s_n_lo", "s_n_hi"])?;
    for r in records {
        wtr.write_record([
            r.household_id.clone(),
            r.policy.to_string(),
            r.z.to_string(),
            r.b_bl.to_string(),
            r.b_n.to_string(),
            r.s_a.to_string(),
            r.s_n.to_string(),
            r.s_a_ci.0.to_string(),
            r.s_a_ci.1.to_string(),
            r.s_n_ci.0.to_string(),
            r.s_n_ci.1.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<savings>", e))?;
    Ok(())
}

pub fn write_correlations_csv<W: Write>(w: W, rows: &[CorrelationRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["policy_x", "policy_y", "metric", "spearman"])?;
    for r in rows {
        wtr.write_record([r.policy_x.to_string(), r.policy_y.to_string(), r.metric.to_string(), r.spearman.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<correlations>", e))?;
    Ok(())
}

/// `policy,pct,s_a,s_n` rows.
pub fn write_quantiles_csv<W: Write>(w: W, summaries: &[SavingsSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["policy", "pct", "s_a", "s_n"])?;
    for s in summaries {
        for (p, a, n) in &s.quantiles {
            wtr.write_record([s.policy.to_string(), p.to_string(), a.to_string(), n.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<quantiles>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::spearman_by_counting;

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(spearman(&x, &[1.0; 4]).is_err());
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest::proptest! {
        #[test]
        fn spearman_matches_rank_counting(
            pairs in proptest::collection::vec((0u8..6, 0u8..6), 3..30)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let oracle = spearman_by_counting(&x, &y);
            match spearman(&x, &y) {
                Ok(r) => proptest::prop_assert!((r - oracle).abs() < 1e-12),
                Err(_) => proptest::prop_assert!(oracle.is_nan()),
            }
        }
    }

    #[test]
    fn bootstrap_constant_and_reproducible() {
        let seed = SeedPath::root(1);
        let opts = BootstrapOptions::default();
        let (lo, hi) = bootstrap_ci(&[2.0; 30], &opts, seed).unwrap();
        assert!((lo - 60.0).abs() < 1e-9 && (hi - 60.0).abs() < 1e-9);
        let d: Vec<f64> = (0..50).map(|k| (k % 7) as f64).collect();
        assert_eq!(bootstrap_ci(&d, &opts, seed).unwrap(), bootstrap_ci(&d, &opts, seed).unwrap());
        assert!(bootstrap_ci(&[1.0], &opts, seed).is_err());
    }

    #[test]
    fn savings_arithmetic() {
        let bl = [500.0, 500.0];
        let n = [200.0, 200.0];
        let r = SavingsRecord::from_daily("a", PolicyId::P1, 3.0, &bl, &n, &BootstrapOptions::default(), SeedPath::root(0))
            .unwrap();
        assert_eq!((r.b_bl, r.b_n, r.s_a, r.s_n), (1000.0, 400.0, 600.0, 200.0));
    }

    #[test]
    fn table_sorts_and_ranks() {
        let mk = |id: &str, s: f64| SavingsRecord {
            household_id: id.into(),
            policy: PolicyId::P3,
            z: 1.0,
            b_bl: 10.0,
            b_n: 10.0 - s,
            s_a: s,
            s_n: s,
            s_a_ci: (s, s),
            s_n_ci: (s, s),
        };
        let (rows, summary) = savings_table(vec![mk("b", 1.0), mk("a", 5.0), mk("c", 3.0)], PolicyId::P3).unwrap();
        assert_eq!(rows.iter().map(|r| r.household_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(summary.ranking, ["a", "c", "b"]);
        assert_eq!(summary.quantiles.len(), 99);
        assert!(savings_table(vec![mk("a", 1.0)], PolicyId::P1).is_err());
    }

    #[test]
    fn all_policy_pairs() {
        let mut by = BTreeMap::new();
        for p in PolicyId::ALL {
            by.insert(
                p,
                (0..5)
                    .map(|k| SavingsRecord {
                        household_id: format!("h{k}"),
                        policy: p,
                        z: 1.0 + k as f64,
                        b_bl: 0.0,
                        b_n: 0.0,
                        s_a: (k * k) as f64 + p as u8 as f64,
                        s_n: k as f64,
                        s_a_ci: (0.0, 0.0),
                        s_n_ci: (0.0, 0.0),
                    })
                    .collect(),
            );
        }
        let rows = policy_correlations(&by).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(|r| (r.spearman - 1.0).abs() < 1e-12));
    }
}
