//! CSV ingestion of loads, irradiance, wholesale prices and geography.
//!
//! Every reader validates hour coverage against the calendar: each entity
//! must supply exactly one value for every hour index in `[0, 24 * n_days)`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, HourlySeries, LoadTrace, TraceRejection, Unit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

pub type ZipGeo = GeoPoint;

impl GeoPoint {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64) -> Result<Self> {
        let id = id.into();
        if !(lat.abs() <= 90.0 && lon.abs() <= 180.0) {
            return Err(Error::invalid(format!("{id}: lat/lon ({lat}, {lon}) out of range")));
        }
        Ok(GeoPoint { id, lat, lon })
    }
}

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance in km.
pub fn haversine_km(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Map each zip to its nearest pricing node. Ties go to the smallest node id.
pub fn map_zip_to_node(zips: &[ZipGeo], nodes: &[GeoPoint]) -> Result<BTreeMap<String, String>> {
    if nodes.is_empty() {
        return Err(Error::invalid("node set is empty"));
    }
    if zips.is_empty() {
        return Err(Error::invalid("zip set is empty"));
    }
    let mut sorted: Vec<&GeoPoint> = nodes.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(zips
        .iter()
        .map(|z| {
            let mut best = sorted[0];
            let mut best_d = haversine_km(z, best);
            for n in &sorted[1..] {
                let d = haversine_km(z, n);
                if d < best_d {
                    best = n;
                    best_d = d;
                }
            }
            (z.id.clone(), best.id.clone())
        })
        .collect())
}

/// Wholesale prices by node, in $/kWh, with node locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodePriceSet {
    pub prices: BTreeMap<String, HourlySeries>,
    pub geo: BTreeMap<String, GeoPoint>,
}

impl NodePriceSet {
    pub fn nodes(&self) -> Vec<GeoPoint> {
        self.geo.values().cloned().collect()
    }

    /// Resolve per-zip wholesale series through the nearest-node mapping.
    pub fn by_zip(&self, zips: &[ZipGeo]) -> Result<BTreeMap<String, HourlySeries>> {
        let located: Vec<GeoPoint> = self
            .geo
            .values()
            .filter(|g| self.prices.contains_key(&g.id))
            .cloned()
            .collect();
        let map = map_zip_to_node(zips, &located)?;
        Ok(map
            .into_iter()
            .map(|(zip, node)| (zip, self.prices[&node].clone()))
            .collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadIngest {
    pub traces: Vec<LoadTrace>,
    pub dropped_low_consumption: usize,
    pub dropped_zero_readings: usize,
}

#[derive(Deserialize)]
struct LoadRow {
    household_id: String,
    zip: String,
    hour_index: usize,
    kwh: f64,
}

#[derive(Deserialize)]
struct IrradianceRow {
    zip: String,
    hour_index: usize,
    ghi_kwh_m2: f64,
}

#[derive(Deserialize)]
struct LmpRow {
    node_id: String,
    hour_index: usize,
    usd_per_mwh: f64,
}

#[derive(Deserialize)]
struct GeoRow {
    id: String,
    lat: f64,
    lon: f64,
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(path, line, e.to_string())
}

/// Rows keyed by entity, with one slot per hour.
struct HourGrid {
    path: PathBuf,
    n_hours: usize,
    slots: BTreeMap<String, Vec<Option<f64>>>,
}

impl HourGrid {
    fn new(path: &Path, calendar: &Calendar) -> Self {
        HourGrid {
            path: path.to_path_buf(),
            n_hours: calendar.n_hours(),
            slots: BTreeMap::new(),
        }
    }

    fn put(&mut self, line: u64, key: &str, hour: usize, value: f64) -> Result<()> {
        if hour >= self.n_hours {
            return Err(parse_err(&self.path, line, format!("hour_index {hour} >= {}", self.n_hours)));
        }
        if !value.is_finite() {
            return Err(parse_err(&self.path, line, "non-finite value"));
        }
        let n = self.n_hours;
        let slots = self.slots.entry(key.to_string()).or_insert_with(|| vec![None; n]);
        if slots[hour].replace(value).is_some() {
            return Err(parse_err(&self.path, line, format!("duplicate hour {hour} for {key}")));
        }
        Ok(())
    }

    fn finish(self) -> Result<BTreeMap<String, Vec<f64>>> {
        let path = self.path;
        self.slots
            .into_iter()
            .map(|(key, slots)| {
                let got = slots.iter().filter(|s| s.is_some()).count();
                if got != slots.len() {
                    return Err(parse_err(
                        &path,
                        0,
                        format!("{key}: {got} rows, expected {}", slots.len()),
                    ));
                }
                Ok((key, slots.into_iter().map(|s| s.unwrap_or_default()).collect()))
            })
            .collect()
    }
}

fn read_rows<T, R, F>(path: &Path, reader: R, mut f: F) -> Result<()>
where
    T: serde::de::DeserializeOwned,
    R: Read,
    F: FnMut(u64, T) -> Result<()>,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => return Ok(()),
            Ok(true) => {}
            Err(e) => return Err(csv_err(path, e)),
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: T = rec
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        f(line, row)?;
    }
}

pub fn load_traces_from_reader<R: Read>(path: &Path, reader: R, calendar: &Calendar) -> Result<LoadIngest> {
    let mut grid = HourGrid::new(path, calendar);
    let mut zips: BTreeMap<String, String> = BTreeMap::new();
    read_rows::<LoadRow, _, _>(path, reader, |line, row| {
        let zip = zips.entry(row.household_id.clone()).or_insert_with(|| row.zip.clone());
        if *zip != row.zip {
            return Err(parse_err(path, line, format!("{} changes zip", row.household_id)));
        }
        if row.kwh < 0.0 {
            return Err(parse_err(path, line, "negative kwh"));
        }
        grid.put(line, &row.household_id, row.hour_index, row.kwh)
    })?;
    let mut out = LoadIngest::default();
    for (id, values) in grid.finish()? {
        let trace = LoadTrace {
            zip: zips[&id].clone(),
            household_id: id,
            series: HourlySeries::new(Unit::Kwh, values)?,
        };
        match trace.screen() {
            None => out.traces.push(trace),
            Some(TraceRejection::LowConsumption) => out.dropped_low_consumption += 1,
            Some(TraceRejection::TooManyZeros) => out.dropped_zero_readings += 1,
        }
    }
    Ok(out)
}

/// Read `household_id,zip,hour_index,kwh`; screened-out households are counted.
pub fn load_traces_csv(path: &Path, calendar: &Calendar) -> Result<LoadIngest> {
    load_traces_from_reader(path, open(path)?, calendar)
}

/// Read `zip,hour_index,ghi_kwh_m2`.
pub fn read_irradiance_csv(path: &Path, calendar: &Calendar) -> Result<BTreeMap<String, HourlySeries>> {
    let mut grid = HourGrid::new(path, calendar);
    read_rows::<IrradianceRow, _, _>(path, open(path)?, |line, row| {
        if row.ghi_kwh_m2 < 0.0 {
            return Err(parse_err(path, line, "negative irradiance"));
        }
        grid.put(line, &row.zip, row.hour_index, row.ghi_kwh_m2)
    })?;
    grid.finish()?
        .into_iter()
        .map(|(k, v)| Ok((k, HourlySeries::new(Unit::KwhPerM2, v)?)))
        .collect()
}

/// Wholesale price as used internally: negatives set to zero, $/MWh to $/kWh.
pub fn lmp_to_kwh(usd_per_mwh: f64) -> f64 {
    usd_per_mwh.max(0.0) / 1000.0
}

/// Read `node_id,hour_index,usd_per_mwh`, clamping negatives to zero and
/// converting to $/kWh.
pub fn read_lmp_csv(path: &Path, calendar: &Calendar) -> Result<BTreeMap<String, HourlySeries>> {
    let mut grid = HourGrid::new(path, calendar);
    read_rows::<LmpRow, _, _>(path, open(path)?, |line, row| {
        grid.put(line, &row.node_id, row.hour_index, lmp_to_kwh(row.usd_per_mwh))
    })?;
    grid.finish()?
        .into_iter()
        .map(|(k, v)| Ok((k, HourlySeries::new(Unit::UsdPerKwh, v)?)))
        .collect()
}

/// Read `id,lat,lon` (first column may be named `zip` or `node_id`).
pub fn read_geo_csv(path: &Path) -> Result<Vec<GeoPoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_err(path, e)),
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: GeoRow = rec.deserialize(None).map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(GeoPoint::new(row.id, row.lat, row.lon).map_err(|e| parse_err(path, line, e.to_string()))?);
    }
    Ok(out)
}

/// Load nodes and their LMPs together.
pub fn read_node_prices(lmp: &Path, nodes: &Path, calendar: &Calendar) -> Result<NodePriceSet> {
    let prices = read_lmp_csv(lmp, calendar)?;
    let geo: BTreeMap<String, GeoPoint> = read_geo_csv(nodes)?.into_iter().map(|g| (g.id.clone(), g)).collect();
    if let Some(missing) = prices.keys().find(|k| !geo.contains_key(*k)) {
        return Err(Error::invalid(format!("node {missing} has prices but no location")));
    }
    Ok(NodePriceSet { prices, geo })
}

fn create(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_loads<W: Write>(w: W, traces: &[LoadTrace]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["household_id", "zip", "hour_index", "kwh"])?;
    let mut sorted: Vec<&LoadTrace> = traces.iter().collect();
    sorted.sort_by(|a, b| a.household_id.cmp(&b.household_id));
    for t in sorted {
        for (h, v) in t.series.values().iter().enumerate() {
            wtr.write_record([t.household_id.as_str(), t.zip.as_str(), &h.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<loads>", e))?;
    Ok(())
}

pub fn write_loads_csv(path: &Path, traces: &[LoadTrace]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_loads(std::io::BufWriter::new(f), traces)
}

pub fn write_irradiance_csv(path: &Path, irradiance: &BTreeMap<String, HourlySeries>) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["zip", "hour_index", "ghi_kwh_m2"])?;
    for (zip, s) in irradiance {
        for (h, v) in s.values().iter().enumerate() {
            wtr.write_record([zip.as_str(), &h.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write prices back in $/MWh.
pub fn write_lmp_csv(path: &Path, prices: &BTreeMap<String, HourlySeries>) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["node_id", "hour_index", "usd_per_mwh"])?;
    for (node, s) in prices {
        for (h, v) in s.values().iter().enumerate() {
            wtr.write_record([node.as_str(), &h.to_string(), &(v * 1000.0).to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write raw $/MWh values as they would arrive from the market operator.
pub fn write_raw_lmp_csv(path: &Path, usd_per_mwh: &BTreeMap<String, Vec<f64>>) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["node_id", "hour_index", "usd_per_mwh"])?;
    for (node, s) in usd_per_mwh {
        for (h, v) in s.iter().enumerate() {
            wtr.write_record([node.as_str(), &h.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `first_col` is `zip` or `node_id`.
pub fn write_geo_csv(path: &Path, first_col: &str, points: &[GeoPoint]) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record([first_col, "lat", "lon"])?;
    for p in points {
        wtr.write_record([p.id.as_str(), &p.lat.to_string(), &p.lon.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::default_calendar;

    fn loads_text(rows: &[(&str, &str, Vec<f64>)]) -> String {
        let mut s = String::from("household_id,zip,hour_index,kwh\n");
        for (id, zip, vals) in rows {
            for (h, v) in vals.iter().enumerate() {
                s.push_str(&format!("{id},{zip},{h},{v}\n"));
            }
        }
        s
    }

    #[test]
    fn filters_low_and_sparse_households() {
        let cal = default_calendar();
        let n = cal.n_hours();
        let sparse: Vec<f64> = (0..n).map(|h| if h % 10 < 6 { 0.0 } else { 2.0 }).collect();
        let text = loads_text(&[
            ("a", "94000", vec![0.5; n]),
            ("b", "94000", vec![0.05; n]),
            ("c", "94001", sparse),
            ("d", "94001", vec![1.5; n]),
        ]);
        let got = load_traces_from_reader(Path::new("loads.csv"), text.as_bytes(), &cal).unwrap();
        assert_eq!(got.traces.len(), 2);
        assert_eq!(got.dropped_low_consumption, 1);
        assert_eq!(got.dropped_zero_readings, 1);
        assert!(got.traces.iter().all(|t| t.series.len() == 24 * 366));
        assert_eq!(got.traces[0].household_id, "a");
    }

    #[test]
    fn malformed_row_reports_line() {
        let cal = default_calendar();
        let text = "household_id,zip,hour_index,kwh\na,1,0,0.5\na,1,1,abc\n";
        let err = load_traces_from_reader(Path::new("loads.csv"), text.as_bytes(), &cal).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("loads.csv:3"), "{msg}");
    }

    #[test]
    fn short_household_rejected() {
        let cal = default_calendar();
        let text = loads_text(&[("a", "1", vec![0.5; 100])]);
        let err = load_traces_from_reader(Path::new("l.csv"), text.as_bytes(), &cal).unwrap_err();
        assert!(err.to_string().contains("100 rows"), "{err}");
    }

    #[test]
    fn zip_mapping() {
        let z = |id: &str, lat, lon| GeoPoint::new(id, lat, lon).unwrap();
        let nodes = [z("n1", 37.0, -122.0), z("n2", 38.0, -121.0)];
        let m = map_zip_to_node(&[z("z", 37.0, -122.0)], &nodes).unwrap();
        assert_eq!(m["z"], "n1");

        let tied = [z("B", 0.0, -1.0), z("A", 0.0, 1.0)];
        let m = map_zip_to_node(&[z("z", 0.0, 0.0)], &tied).unwrap();
        assert_eq!(m["z"], "A");

        let zips = [z("1", 35.0, -120.0), z("2", 36.0, -119.0), z("3", 40.0, -123.0)];
        let m = map_zip_to_node(&zips, &nodes[..1]).unwrap();
        assert!(m.values().all(|n| n == "n1"));
        assert_eq!(m.len(), 3);

        assert!(map_zip_to_node(&zips, &[]).is_err());
        assert!(GeoPoint::new("x", 91.0, 0.0).is_err());
    }

    #[test]
    fn haversine_known_distance() {
        // one degree of latitude
        let a = GeoPoint::new("a", 0.0, 0.0).unwrap();
        let b = GeoPoint::new("b", 1.0, 0.0).unwrap();
        assert!((haversine_km(&a, &b) - 111.195).abs() < 0.01);
    }

    #[test]
    fn lmp_clamps_and_converts() {
        let dir = tempfile::tempdir().unwrap();
        let cal = default_calendar();
        let path = dir.path().join("lmp.csv");
        let mut text = String::from("node_id,hour_index,usd_per_mwh\n");
        for h in 0..cal.n_hours() {
            let v = if h == 5 { -12.0 } else { 35.0 };
            text.push_str(&format!("N,{h},{v}\n"));
        }
        std::fs::write(&path, text).unwrap();
        let got = read_lmp_csv(&path, &cal).unwrap();
        let s = got["N"].values();
        assert_eq!(s[5], 0.0);
        assert!((s[0] - 0.035).abs() < 1e-15);
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(8))]
        #[test]
        fn loads_roundtrip_losslessly(seed in 0u64..10_000) {
            use rand::Rng;
            let cal = default_calendar();
            let mut rng = crate::seed::SeedPath::root(seed).rng();
            let traces: Vec<LoadTrace> = (0..2)
                .map(|i| LoadTrace {
                    household_id: format!("h{i}"),
                    zip: "95000".into(),
                    series: HourlySeries::new(
                        Unit::Kwh,
                        (0..cal.n_hours()).map(|_| rng.random_range(0.1..3.0)).collect(),
                    )
                    .unwrap(),
                })
                .collect();
            let mut buf = Vec::new();
            write_loads(&mut buf, &traces).unwrap();
            let back = load_traces_from_reader(Path::new("mem"), buf.as_slice(), &cal).unwrap();
            proptest::prop_assert_eq!(back.traces, traces);
        }
    }
}
