//! Time axis shared by every other module.
//!
//! Days are fixed 24-hour blocks of naive local time; hour `h` of day `j`
//! covers `[h, h+1)` and lives at flat index `24 * j + h`.

use std::fmt;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Summer,
    Winter,
}

impl Season {
    /// June through September is summer, everything else winter.
    pub fn of_month(month: u32) -> Season {
        if (6..=9).contains(&month) {
            Season::Summer
        } else {
            Season::Winter
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayInfo {
    pub date: NaiveDate,
    /// 0 = Monday .. 6 = Sunday.
    pub weekday_index: u8,
    pub is_holiday: bool,
    pub season: Season,
}

impl DayInfo {
    /// Weekday that is not a holiday; the only days with retail peak pricing.
    pub fn is_business_day(&self) -> bool {
        self.weekday_index < 5 && !self.is_holiday
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calendar {
    days: Vec<DayInfo>,
}

impl Calendar {
    pub fn start_date(&self) -> NaiveDate {
        self.days[0].date
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn n_hours(&self) -> usize {
        self.days.len() * HOURS_PER_DAY
    }

    pub fn day(&self, j: usize) -> &DayInfo {
        &self.days[j]
    }

    pub fn days(&self) -> &[DayInfo] {
        &self.days
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date()).num_days();
        usize::try_from(offset).ok().filter(|&j| j < self.n_days())
    }

    /// `(day, hour-of-day)` for a flat hour index.
    pub fn split_hour(&self, hour_index: usize) -> (usize, usize) {
        (hour_index / HOURS_PER_DAY, hour_index % HOURS_PER_DAY)
    }
}

/// Build a calendar of `n_days` days starting at `start`.
///
/// `n_days` must be 365 or 366 and every holiday must fall inside the span.
pub fn build_calendar(start: NaiveDate, n_days: usize, holidays: &[NaiveDate]) -> Result<Calendar> {
    if n_days != 365 && n_days != 366 {
        return Err(Error::invalid(format!("n_days must be 365 or 366, got {n_days}")));
    }
    let end = start + Duration::days(n_days as i64 - 1);
    if let Some(bad) = holidays.iter().find(|d| **d < start || **d > end) {
        return Err(Error::invalid(format!(
            "holiday {bad} outside calendar span {start}..={end}"
        )));
    }
    let days = (0..n_days)
        .map(|j| {
            let date = start + Duration::days(j as i64);
            DayInfo {
                date,
                weekday_index: date.weekday().num_days_from_monday() as u8,
                is_holiday: holidays.contains(&date),
                season: Season::of_month(date.month()),
            }
        })
        .collect();
    Ok(Calendar { days })
}

/// November 2011 through October 2012 with US federal holidays.
pub fn default_calendar() -> Calendar {
    let start = NaiveDate::from_ymd_opt(2011, 11, 1).expect("valid date");
    build_calendar(start, 366, &us_federal_holidays(start, 366)).expect("default calendar")
}

/// Parse a holiday list: one ISO-8601 date per line, `#` starts a comment.
pub fn parse_holiday_list(text: &str, path: &Path) -> Result<Vec<NaiveDate>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            msg: format!("bad date {line:?}: {e}"),
        })?;
        out.push(date);
    }
    Ok(out)
}

pub fn read_holiday_file(path: &Path) -> Result<Vec<NaiveDate>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_holiday_list(&text, path)
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).expect("valid nth weekday")
}

fn last_weekday(year: i32, month: u32, weekday: Weekday) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, 5)
        .unwrap_or_else(|| nth_weekday(year, month, weekday, 4))
}

fn observed(date: NaiveDate) -> NaiveDate {
    match date.weekday() {
        Weekday::Sat => date - Duration::days(1),
        Weekday::Sun => date + Duration::days(1),
        _ => date,
    }
}

/// US federal holidays (observed dates) that fall inside the span.
pub fn us_federal_holidays(start: NaiveDate, n_days: usize) -> Vec<NaiveDate> {
    let end = start + Duration::days(n_days as i64 - 1);
    let mut out = Vec::new();
    for year in start.year() - 1..=end.year() + 1 {
        let fixed = |m, d| observed(NaiveDate::from_ymd_opt(year, m, d).expect("valid date"));
        out.extend([
            fixed(1, 1),
            nth_weekday(year, 1, Weekday::Mon, 3),
            nth_weekday(year, 2, Weekday::Mon, 3),
            last_weekday(year, 5, Weekday::Mon),
            fixed(7, 4),
            nth_weekday(year, 9, Weekday::Mon, 1),
            nth_weekday(year, 10, Weekday::Mon, 2),
            fixed(11, 11),
            nth_weekday(year, 11, Weekday::Thu, 4),
            fixed(12, 25),
        ]);
    }
    out.retain(|d| *d >= start && *d <= end);
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Kwh,
    KwhPerM2,
    UsdPerKwh,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Kwh => "kWh",
            Unit::KwhPerM2 => "kWh/m2",
            Unit::UsdPerKwh => "$/kWh",
        })
    }
}

/// A year of hourly values tagged with their unit.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    unit: Unit,
    values: Vec<f64>,
}

impl HourlySeries {
    /// Energy series must be nonnegative; every value must be finite and the
    /// length a whole number of days.
    pub fn new(unit: Unit, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(HOURS_PER_DAY) {
            return Err(Error::invalid(format!(
                "series length {} is not a positive multiple of 24",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at hour {i}")));
        }
        if unit != Unit::UsdPerKwh {
            if let Some(i) = values.iter().position(|v| *v < 0.0) {
                return Err(Error::invalid(format!("negative {unit} at hour {i}")));
            }
        }
        Ok(HourlySeries { unit, values })
    }

    pub fn constant(unit: Unit, value: f64, calendar: &Calendar) -> Result<Self> {
        Self::new(unit, vec![value; calendar.n_hours()])
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_days(&self) -> usize {
        self.values.len() / HOURS_PER_DAY
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.values.len() as f64
    }

    pub fn day(&self, j: usize) -> Result<&[f64]> {
        slice_day(&self.values, j)
    }

    pub fn check_calendar(&self, calendar: &Calendar) -> Result<()> {
        if self.len() != calendar.n_hours() {
            return Err(Error::LengthMismatch {
                expected: calendar.n_hours(),
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Elementwise map keeping the unit.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.unit, self.values.iter().map(|v| f(*v)).collect())
    }
}

/// Hours `24j .. 24j+23` of a flat hourly vector.
pub fn slice_day(values: &[f64], j: usize) -> Result<&[f64]> {
    let n_days = values.len() / HOURS_PER_DAY;
    if j >= n_days {
        return Err(Error::OutOfRange { index: j, len: n_days });
    }
    Ok(&values[j * HOURS_PER_DAY..(j + 1) * HOURS_PER_DAY])
}

/// Inflexible household consumption for the year.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTrace {
    pub household_id: String,
    pub zip: String,
    pub series: HourlySeries,
}

/// Minimum annual mean demand, kW.
pub const MIN_MEAN_KW: f64 = 0.1;
/// Maximum share of zero readings.
pub const MAX_ZERO_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRejection {
    LowConsumption,
    TooManyZeros,
}

impl LoadTrace {
    pub fn mean_kw(&self) -> f64 {
        self.series.mean()
    }

    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.series.values().iter().filter(|v| **v == 0.0).count();
        zeros as f64 / self.series.len() as f64
    }

    pub fn screen(&self) -> Option<TraceRejection> {
        if self.mean_kw() < MIN_MEAN_KW {
            Some(TraceRejection::LowConsumption)
        } else if self.zero_fraction() > MAX_ZERO_FRACTION {
            Some(TraceRejection::TooManyZeros)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn default_year_flags_independence_day() {
        let cal = default_calendar();
        let j = cal.day_index(ymd(2012, 7, 4)).unwrap();
        assert!(cal.day(j).is_holiday);
        let before = cal.day(j - 1);
        assert!(!before.is_holiday);
        assert!(before.is_business_day());
        assert_eq!(cal.day_index(ymd(2011, 11, 1)), Some(0));
        assert_eq!(cal.day_index(ymd(2012, 10, 31)), Some(365));
        assert_eq!(cal.day_index(ymd(2012, 11, 1)), None);
    }

    #[test]
    fn no_holidays_and_month_rule() {
        let cal = build_calendar(ymd(2012, 1, 1), 366, &[]).unwrap();
        assert!(cal.days().iter().all(|d| !d.is_holiday));
        let j = cal.day_index(ymd(2012, 6, 15)).unwrap();
        assert_eq!(cal.day(j).season, Season::Summer);
        for d in cal.days() {
            let summer = (6..=9).contains(&d.date.month());
            assert_eq!(d.season == Season::Summer, summer, "{}", d.date);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_calendar(ymd(2012, 1, 1), 364, &[]).is_err());
        assert!(build_calendar(ymd(2012, 1, 1), 366, &[ymd(2013, 1, 1)]).is_err());
        assert!(build_calendar(ymd(2012, 1, 1), 366, &[ymd(2011, 12, 31)]).is_err());
    }

    #[test]
    fn federal_holidays_2011_2012() {
        let hol = us_federal_holidays(ymd(2011, 11, 1), 366);
        let expect = [
            ymd(2011, 11, 11),
            ymd(2011, 11, 24),
            ymd(2011, 12, 26),
            ymd(2012, 1, 2),
            ymd(2012, 1, 16),
            ymd(2012, 2, 20),
            ymd(2012, 5, 28),
            ymd(2012, 7, 4),
            ymd(2012, 9, 3),
            ymd(2012, 10, 8),
        ];
        assert_eq!(hol, expect);
    }

    #[test]
    fn holiday_file_parsing() {
        let text = "# header\n2012-07-04  # independence\n\n2012-09-03\n";
        let got = parse_holiday_list(text, Path::new("h.txt")).unwrap();
        assert_eq!(got, vec![ymd(2012, 7, 4), ymd(2012, 9, 3)]);
        let err = parse_holiday_list("2012-13-01\n", Path::new("h.txt")).unwrap_err();
        assert!(err.to_string().contains("h.txt:1"));
    }

    #[test]
    fn slice_day_examples() {
        let cal = default_calendar();
        let c = HourlySeries::constant(Unit::Kwh, 2.0, &cal).unwrap();
        assert_eq!(c.day(100).unwrap(), &[2.0; 24]);
        let ramp: Vec<f64> = (0..24 * 366).map(|v| v as f64).collect();
        assert_eq!(slice_day(&ramp, 1).unwrap()[0], 24.0);
        assert!(slice_day(&ramp, 366).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(HourlySeries::new(Unit::Kwh, vec![1.0; 23]).is_err());
        assert!(HourlySeries::new(Unit::Kwh, vec![-1.0; 24]).is_err());
        assert!(HourlySeries::new(Unit::UsdPerKwh, vec![-1.0; 24]).is_ok());
        assert!(HourlySeries::new(Unit::Kwh, vec![f64::NAN; 24]).is_err());
    }

    #[test]
    fn trace_screening() {
        let mk = |vals: Vec<f64>| LoadTrace {
            household_id: "h".into(),
            zip: "z".into(),
            series: HourlySeries::new(Unit::Kwh, vals).unwrap(),
        };
        assert_eq!(mk(vec![0.05; 48]).screen(), Some(TraceRejection::LowConsumption));
        let mut v = vec![0.0; 48];
        for x in v.iter_mut().take(19) {
            *x = 1.0;
        }
        assert_eq!(mk(v).screen(), Some(TraceRejection::TooManyZeros));
        assert_eq!(mk(vec![0.5; 48]).screen(), None);
    }

    proptest::proptest! {
        #[test]
        fn slices_partition_the_series(days in 1usize..6, seed in 0u64..1000) {
            let vals: Vec<f64> = (0..days * 24).map(|i| ((i as u64 * 31 + seed) % 97) as f64).collect();
            let joined: Vec<f64> = (0..days).flat_map(|j| slice_day(&vals, j).unwrap().to_vec()).collect();
            proptest::prop_assert_eq!(joined, vals);
        }
    }
}
