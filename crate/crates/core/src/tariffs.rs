//! Rate construction and the four pricing policies.
//!
//! | policy | buy               | sell                          |
//! |--------|-------------------|-------------------------------|
//! | P1     | retail TOU        | wholesale                     |
//! | P2     | retail dynamic    | discounted dynamic            |
//! | P3     | retail TOU        | discounted retail TOU         |
//! | P4     | flipped TOU       | nothing (sale price zero)     |
//!
//! The sale price is capped at the purchase price hour by hour.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, HourlySeries, LoadTrace, Season, Unit, HOURS_PER_DAY};
use crate::error::{Error, Result};

/// Retail time-of-use levels in $/kWh. Peak is `[peak_start, peak_end)` on
/// non-holiday weekdays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TouRates {
    pub summer_peak: f64,
    pub summer_off_peak: f64,
    pub winter_peak: f64,
    pub winter_off_peak: f64,
    pub peak_start: usize,
    pub peak_end: usize,
}

impl Default for TouRates {
    fn default() -> Self {
        TouRates {
            summer_peak: 0.35817,
            summer_off_peak: 0.25511,
            winter_peak: 0.22071,
            winter_off_peak: 0.20191,
            peak_start: 16,
            peak_end: 21,
        }
    }
}

/// Flipped TOU: off-peak is `[off_peak_start, off_peak_end)` every day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlippedRates {
    pub summer_peak: f64,
    pub summer_off_peak: f64,
    pub winter_peak: f64,
    pub winter_off_peak: f64,
    pub off_peak_start: usize,
    pub off_peak_end: usize,
}

impl Default for FlippedRates {
    fn default() -> Self {
        FlippedRates {
            summer_peak: 0.25,
            summer_off_peak: 0.15,
            winter_peak: 0.30,
            winter_off_peak: 0.20,
            off_peak_start: 9,
            off_peak_end: 15,
        }
    }
}

/// Rate overrides accepted from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub tou: TouRates,
    pub flipped: FlippedRates,
    /// Fraction of the retail rate paid for exports under the discounted rates.
    pub discount: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            tou: TouRates::default(),
            flipped: FlippedRates::default(),
            discount: 0.8,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut nonneg = |path: &str, v: f64| {
            if !(v.is_finite() && v >= 0.0) {
                out.push((path.to_string(), format!("must be a nonnegative price, got {v}")));
            }
        };
        nonneg("rates.tou.summer_peak", self.tou.summer_peak);
        nonneg("rates.tou.summer_off_peak", self.tou.summer_off_peak);
        nonneg("rates.tou.winter_peak", self.tou.winter_peak);
        nonneg("rates.tou.winter_off_peak", self.tou.winter_off_peak);
        nonneg("rates.flipped.summer_peak", self.flipped.summer_peak);
        nonneg("rates.flipped.summer_off_peak", self.flipped.summer_off_peak);
        nonneg("rates.flipped.winter_peak", self.flipped.winter_peak);
        nonneg("rates.flipped.winter_off_peak", self.flipped.winter_off_peak);
        if !(0.0..=1.0).contains(&self.discount) {
            out.push(("rates.discount".into(), format!("must lie in [0, 1], got {}", self.discount)));
        }
        if !(self.tou.peak_start < self.tou.peak_end && self.tou.peak_end <= HOURS_PER_DAY) {
            out.push(("rates.tou.peak_start".into(), "peak window must satisfy start < end <= 24".into()));
        }
        if !(self.flipped.off_peak_start < self.flipped.off_peak_end && self.flipped.off_peak_end <= HOURS_PER_DAY) {
            out.push((
                "rates.flipped.off_peak_start".into(),
                "off-peak window must satisfy start < end <= 24".into(),
            ));
        }
        out
    }
}

fn build_hourly(calendar: &Calendar, price: impl Fn(usize, usize) -> f64) -> HourlySeries {
    let values = (0..calendar.n_days())
        .flat_map(|j| (0..HOURS_PER_DAY).map(move |h| (j, h)))
        .map(|(j, h)| price(j, h))
        .collect();
    HourlySeries::new(Unit::UsdPerKwh, values).expect("finite rates")
}

pub fn build_retail_tou(calendar: &Calendar, rates: &TouRates) -> HourlySeries {
    build_hourly(calendar, |j, h| {
        let day = calendar.day(j);
        let peak = day.is_business_day() && (rates.peak_start..rates.peak_end).contains(&h);
        match (day.season, peak) {
            (Season::Summer, true) => rates.summer_peak,
            (Season::Summer, false) => rates.summer_off_peak,
            (Season::Winter, true) => rates.winter_peak,
            (Season::Winter, false) => rates.winter_off_peak,
        }
    })
}

pub fn build_flipped_tou(calendar: &Calendar, rates: &FlippedRates) -> HourlySeries {
    build_hourly(calendar, |j, h| {
        let off = (rates.off_peak_start..rates.off_peak_end).contains(&h);
        match (calendar.day(j).season, off) {
            (Season::Summer, false) => rates.summer_peak,
            (Season::Summer, true) => rates.summer_off_peak,
            (Season::Winter, false) => rates.winter_peak,
            (Season::Winter, true) => rates.winter_off_peak,
        }
    })
}

pub fn discount_schedule(prices: &HourlySeries, factor: f64) -> Result<HourlySeries> {
    if !(0.0..=1.0).contains(&factor) {
        return Err(Error::invalid(format!("discount factor {factor} outside [0, 1]")));
    }
    prices.map(|p| factor * p)
}

/// Dynamic retail prices and the per-day scale applied to wholesale.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRates {
    pub by_zip: BTreeMap<String, HourlySeries>,
    pub daily_scale: Vec<f64>,
}

/// Scale wholesale prices day by day so that the inflexible load of the
/// whole population pays the same under the dynamic rate as under TOU.
pub fn build_dynamic(
    tou: &HourlySeries,
    wholesale_by_zip: &BTreeMap<String, HourlySeries>,
    loads: &[LoadTrace],
) -> Result<DynamicRates> {
    let n_hours = tou.len();
    for s in wholesale_by_zip.values() {
        if s.len() != n_hours {
            return Err(Error::LengthMismatch { expected: n_hours, got: s.len() });
        }
    }
    let n_days = tou.n_days();
    let mut rev_tou = vec![0.0; n_days];
    let mut rev_whl = vec![0.0; n_days];
    for trace in loads {
        let whl = wholesale_by_zip
            .get(&trace.zip)
            .ok_or_else(|| Error::MissingZip(trace.zip.clone()))?;
        if trace.series.len() != n_hours {
            return Err(Error::LengthMismatch { expected: n_hours, got: trace.series.len() });
        }
        let l = trace.series.values();
        for j in 0..n_days {
            for h in j * HOURS_PER_DAY..(j + 1) * HOURS_PER_DAY {
                rev_tou[j] += l[h] * tou.values()[h];
                rev_whl[j] += l[h] * whl.values()[h];
            }
        }
    }
    let daily_scale = rev_tou
        .iter()
        .zip(&rev_whl)
        .enumerate()
        .map(|(j, (t, w))| if *w > 0.0 { Ok(t / w) } else { Err(Error::DegenerateDay { day: j }) })
        .collect::<Result<Vec<f64>>>()?;
    let by_zip = wholesale_by_zip
        .iter()
        .map(|(zip, s)| {
            let values = s
                .values()
                .iter()
                .enumerate()
                .map(|(h, p)| p * daily_scale[h / HOURS_PER_DAY])
                .collect();
            Ok((zip.clone(), HourlySeries::new(Unit::UsdPerKwh, values)?))
        })
        .collect::<Result<_>>()?;
    Ok(DynamicRates { by_zip, daily_scale })
}

/// Population revenue under `rate` relative to `reference`.
pub fn revenue_ratio(loads: &[LoadTrace], rate: &HourlySeries, reference: &HourlySeries) -> f64 {
    let dot = |p: &HourlySeries| -> f64 {
        loads
            .iter()
            .map(|t| t.series.values().iter().zip(p.values()).map(|(l, q)| l * q).sum::<f64>())
            .sum()
    };
    dot(rate) / dot(reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyId {
    P1,
    P2,
    P3,
    P4,
}

impl PolicyId {
    pub const ALL: [PolicyId; 4] = [PolicyId::P1, PolicyId::P2, PolicyId::P3, PolicyId::P4];

    /// Every household faces the same prices.
    pub fn is_uniform(self) -> bool {
        matches!(self, PolicyId::P3 | PolicyId::P4)
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" | "1" => Ok(PolicyId::P1),
            "P2" | "2" => Ok(PolicyId::P2),
            "P3" | "3" => Ok(PolicyId::P3),
            "P4" | "4" => Ok(PolicyId::P4),
            other => Err(Error::invalid(format!("unknown policy {other:?}"))),
        }
    }
}

/// Hourly purchase and sale prices for one household-year.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSchedule {
    buy: HourlySeries,
    sell: HourlySeries,
}

impl PriceSchedule {
    /// Enforces `0 <= sell <= buy` by capping the sale price.
    pub fn capped(buy: HourlySeries, sell: &HourlySeries) -> Result<Self> {
        if buy.len() != sell.len() {
            return Err(Error::LengthMismatch { expected: buy.len(), got: sell.len() });
        }
        if buy.values().iter().any(|p| *p < 0.0) || sell.values().iter().any(|p| *p < 0.0) {
            return Err(Error::invalid("negative price"));
        }
        let sell = HourlySeries::new(
            Unit::UsdPerKwh,
            sell.values().iter().zip(buy.values()).map(|(s, b)| s.min(*b)).collect(),
        )?;
        Ok(PriceSchedule { buy, sell })
    }

    pub fn buy(&self) -> &HourlySeries {
        &self.buy
    }

    pub fn sell(&self) -> &HourlySeries {
        &self.sell
    }

    /// Multiply every price by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        PriceSchedule::capped(self.buy.map(|p| p * factor)?, &self.sell.map(|p| p * factor)?)
    }

    /// Elementwise mean of several schedules.
    pub fn mean<'a>(schedules: impl IntoIterator<Item = &'a PriceSchedule>) -> Result<Self> {
        let mut it = schedules.into_iter();
        let first = it.next().ok_or_else(|| Error::invalid("no schedules to average"))?;
        let mut buy = first.buy.values().to_vec();
        let mut sell = first.sell.values().to_vec();
        let mut n = 1.0;
        for s in it {
            if s.buy.len() != buy.len() {
                return Err(Error::LengthMismatch { expected: buy.len(), got: s.buy.len() });
            }
            buy.iter_mut().zip(s.buy.values()).for_each(|(a, b)| *a += b);
            sell.iter_mut().zip(s.sell.values()).for_each(|(a, b)| *a += b);
            n += 1.0;
        }
        buy.iter_mut().for_each(|v| *v /= n);
        sell.iter_mut().for_each(|v| *v /= n);
        PriceSchedule::capped(HourlySeries::new(Unit::UsdPerKwh, buy)?, &HourlySeries::new(Unit::UsdPerKwh, sell)?)
    }
}

/// Every rate series a policy can draw on.
#[derive(Debug, Clone)]
pub struct RateLibrary {
    pub tou: HourlySeries,
    pub flipped: HourlySeries,
    pub discount: f64,
    pub wholesale_by_zip: BTreeMap<String, HourlySeries>,
    pub dynamic: Option<DynamicRates>,
}

impl RateLibrary {
    /// Build all rates. The dynamic rate needs wholesale prices for every
    /// household's zip; it is skipped when `wholesale_by_zip` is empty.
    pub fn build(
        calendar: &Calendar,
        config: &RateConfig,
        wholesale_by_zip: BTreeMap<String, HourlySeries>,
        loads: &[LoadTrace],
    ) -> Result<Self> {
        let tou = build_retail_tou(calendar, &config.tou);
        let flipped = build_flipped_tou(calendar, &config.flipped);
        let dynamic = if wholesale_by_zip.is_empty() {
            None
        } else {
            Some(build_dynamic(&tou, &wholesale_by_zip, loads)?)
        };
        Ok(RateLibrary {
            tou,
            flipped,
            discount: config.discount,
            wholesale_by_zip,
            dynamic,
        })
    }

    fn wholesale(&self, zip: &str) -> Result<&HourlySeries> {
        self.wholesale_by_zip.get(zip).ok_or_else(|| Error::MissingZip(zip.to_string()))
    }

    fn dynamic(&self, zip: &str) -> Result<&HourlySeries> {
        self.dynamic
            .as_ref()
            .and_then(|d| d.by_zip.get(zip))
            .ok_or_else(|| Error::MissingZip(zip.to_string()))
    }
}

pub fn assemble_policy(policy: PolicyId, zip: &str, rates: &RateLibrary) -> Result<PriceSchedule> {
    match policy {
        PolicyId::P1 => PriceSchedule::capped(rates.tou.clone(), rates.wholesale(zip)?),
        PolicyId::P2 => {
            let dynamic = rates.dynamic(zip)?;
            PriceSchedule::capped(dynamic.clone(), &discount_schedule(dynamic, rates.discount)?)
        }
        PolicyId::P3 => PriceSchedule::capped(rates.tou.clone(), &discount_schedule(&rates.tou, rates.discount)?),
        PolicyId::P4 => PriceSchedule::capped(rates.flipped.clone(), &rates.flipped.map(|_| 0.0)?),
    }
}

/// Write `zip,hour_index,buy,sell,policy` rows.
pub fn write_rate_audit<W: Write>(
    w: W,
    rows: &[(String, PolicyId, PriceSchedule)],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["zip", "hour_index", "buy", "sell", "policy"])?;
    for (zip, policy, sched) in rows {
        let p = policy.to_string();
        for (h, (b, s)) in sched.buy.values().iter().zip(sched.sell.values()).enumerate() {
            wtr.write_record([zip.as_str(), &h.to_string(), &b.to_string(), &s.to_string(), &p])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<rate audit>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::{build_calendar, default_calendar};
    use chrono::NaiveDate;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn at(cal: &Calendar, s: &HourlySeries, date: NaiveDate, hour: usize) -> f64 {
        s.values()[cal.day_index(date).unwrap() * 24 + hour]
    }

    #[test]
    fn retail_tou_table_values() {
        let cal = default_calendar();
        let tou = build_retail_tou(&cal, &TouRates::default());
        // 2012-07-11 Wednesday, 2012-07-15 Sunday, 2012-01-10 Tuesday
        assert_eq!(at(&cal, &tou, ymd(2012, 7, 11), 17), 0.35817);
        assert_eq!(at(&cal, &tou, ymd(2012, 7, 15), 17), 0.25511);
        assert_eq!(at(&cal, &tou, ymd(2012, 1, 10), 15), 0.20191);
        assert_eq!(at(&cal, &tou, ymd(2012, 1, 10), 16), 0.22071);
        assert_eq!(at(&cal, &tou, ymd(2012, 1, 10), 20), 0.22071);
        assert_eq!(at(&cal, &tou, ymd(2012, 1, 10), 21), 0.20191);
        // holiday on a Wednesday
        assert_eq!(at(&cal, &tou, ymd(2012, 7, 4), 17), 0.25511);
    }

    #[test]
    fn retail_tou_two_levels_per_season() {
        let cal = default_calendar();
        let tou = build_retail_tou(&cal, &TouRates::default());
        for (j, d) in cal.days().iter().enumerate() {
            for h in 0..24 {
                let p = tou.values()[j * 24 + h];
                let peak = d.is_business_day() && (16..21).contains(&h);
                let expect = match (d.season, peak) {
                    (Season::Summer, true) => 0.35817,
                    (Season::Summer, false) => 0.25511,
                    (Season::Winter, true) => 0.22071,
                    (Season::Winter, false) => 0.20191,
                };
                assert_eq!(p, expect);
            }
        }
    }

    #[test]
    fn flipped_tou_values() {
        let cal = default_calendar();
        let f = build_flipped_tou(&cal, &FlippedRates::default());
        assert_eq!(at(&cal, &f, ymd(2012, 1, 10), 18), 0.30);
        assert_eq!(at(&cal, &f, ymd(2012, 7, 11), 11), 0.15);
        assert_eq!(at(&cal, &f, ymd(2012, 1, 10), 10), 0.20);
        assert_eq!(at(&cal, &f, ymd(2012, 7, 15), 20), 0.25);
        assert_eq!(at(&cal, &f, ymd(2012, 1, 14), 8), 0.30);
    }

    #[test]
    fn discounting() {
        let cal = build_calendar(ymd(2012, 1, 1), 366, &[]).unwrap();
        let p = HourlySeries::constant(Unit::UsdPerKwh, 0.35817, &cal).unwrap();
        let d = discount_schedule(&p, 0.8).unwrap();
        assert!((d.values()[0] - 0.286536).abs() < 1e-15);
        assert_eq!(discount_schedule(&p, 1.0).unwrap(), p);
        assert!(discount_schedule(&p, 0.0).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(discount_schedule(&p, 1.5).is_err());
    }

    fn trace(id: &str, zip: &str, vals: Vec<f64>) -> LoadTrace {
        LoadTrace {
            household_id: id.into(),
            zip: zip.into(),
            series: HourlySeries::new(Unit::Kwh, vals).unwrap(),
        }
    }

    fn usd(v: Vec<f64>) -> HourlySeries {
        HourlySeries::new(Unit::UsdPerKwh, v).unwrap()
    }

    #[test]
    fn dynamic_halved_wholesale_scales_by_two() {
        let tou: Vec<f64> = (0..24).map(|h| if h >= 16 { 0.4 } else { 0.2 }).collect();
        let whl: Vec<f64> = tou.iter().map(|p| p / 2.0).collect();
        let loads = vec![trace("a", "z", vec![1.0; 24])];
        let map = BTreeMap::from([("z".to_string(), usd(whl.clone()))]);
        let d = build_dynamic(&usd(tou.clone()), &map, &loads).unwrap();
        assert!((d.daily_scale[0] - 2.0).abs() < 1e-15);
        for (a, b) in d.by_zip["z"].values().iter().zip(&tou) {
            assert!((a - b).abs() < 1e-15);
        }

        let map = BTreeMap::from([("z".to_string(), usd(tou.clone()))]);
        let d = build_dynamic(&usd(tou.clone()), &map, &loads).unwrap();
        assert_eq!(d.by_zip["z"].values(), tou.as_slice());
    }

    #[test]
    fn dynamic_revenue_neutral_two_zips() {
        // Crafted two-day instance with different wholesale shapes per zip.
        let tou: Vec<f64> = (0..48).map(|h| if h % 24 >= 16 && h % 24 < 21 { 0.35817 } else { 0.25511 }).collect();
        let w1: Vec<f64> = (0..48).map(|h| 0.02 + 0.001 * (h % 24) as f64).collect();
        let w2: Vec<f64> = (0..48).map(|h| 0.05 + 0.03 * ((h as f64) * 0.7).sin().abs()).collect();
        let loads = vec![
            trace("a", "z1", (0..48).map(|h| 0.3 + 0.1 * (h % 7) as f64).collect()),
            trace("b", "z1", (0..48).map(|h| 1.0 + 0.5 * ((h % 24) > 17) as u8 as f64).collect()),
            trace("c", "z2", (0..48).map(|h| 2.0 - 0.03 * (h % 24) as f64).collect()),
        ];
        let map = BTreeMap::from([("z1".to_string(), usd(w1)), ("z2".to_string(), usd(w2))]);
        let d = build_dynamic(&usd(tou.clone()), &map, &loads).unwrap();
        for j in 0..2 {
            let (mut rt, mut rd) = (0.0, 0.0);
            for t in &loads {
                for h in j * 24..(j + 1) * 24 {
                    let l = t.series.values()[h];
                    rt += l * tou[h];
                    rd += l * d.by_zip[&t.zip].values()[h];
                }
            }
            assert!(((rd - rt) / rt).abs() < 1e-9, "day {j}: {rd} vs {rt}");
        }
    }

    #[test]
    fn dynamic_degenerate_day() {
        let loads = vec![trace("a", "z", vec![1.0; 48])];
        let mut w = vec![0.03; 48];
        w[24..].iter_mut().for_each(|v| *v = 0.0);
        let map = BTreeMap::from([("z".to_string(), usd(w))]);
        match build_dynamic(&usd(vec![0.2; 48]), &map, &loads) {
            Err(Error::DegenerateDay { day }) => assert_eq!(day, 1),
            other => panic!("{other:?}"),
        }
        let missing = vec![trace("a", "nowhere", vec![1.0; 48])];
        assert!(matches!(build_dynamic(&usd(vec![0.2; 48]), &map, &missing), Err(Error::MissingZip(_))));
    }

    fn library() -> RateLibrary {
        let cal = default_calendar();
        let n = cal.n_hours();
        let whl: Vec<f64> = (0..n).map(|h| if h % 24 == 12 { 0.30 } else { 0.04 }).collect();
        let loads = vec![trace("a", "z", vec![1.0; n])];
        let map = BTreeMap::from([("z".to_string(), usd(whl))]);
        RateLibrary::build(&cal, &RateConfig::default(), map, &loads).unwrap()
    }

    #[test]
    fn policy_assembly() {
        let lib = library();
        let cal = default_calendar();
        let p1 = assemble_policy(PolicyId::P1, "z", &lib).unwrap();
        // winter weekday noon: TOU off-peak 0.20191 < wholesale 0.30
        let h = cal.day_index(ymd(2012, 1, 10)).unwrap() * 24 + 12;
        assert_eq!(p1.buy().values()[h], 0.20191);
        assert_eq!(p1.sell().values()[h], 0.20191);
        assert_eq!(p1.sell().values()[h + 1], 0.04);

        let p3 = assemble_policy(PolicyId::P3, "z", &lib).unwrap();
        for (b, s) in p3.buy().values().iter().zip(p3.sell().values()) {
            assert_eq!(*s, 0.8 * b);
        }
        let p4 = assemble_policy(PolicyId::P4, "z", &lib).unwrap();
        assert!(p4.sell().values().iter().all(|v| *v == 0.0));

        for policy in PolicyId::ALL {
            let s = assemble_policy(policy, "z", &lib).unwrap();
            for (b, s) in s.buy().values().iter().zip(s.sell().values()) {
                assert!(0.0 <= *s && s <= b);
            }
        }
        assert!(matches!(assemble_policy(PolicyId::P1, "other", &lib), Err(Error::MissingZip(_))));
    }

    #[test]
    fn policy_parse() {
        assert_eq!("p2".parse::<PolicyId>().unwrap(), PolicyId::P2);
        assert_eq!("4".parse::<PolicyId>().unwrap(), PolicyId::P4);
        assert!("P5".parse::<PolicyId>().is_err());
    }
}
