// Success paths only: building a JsError needs a JS host.

use dervalue_wasm::{analytic_curve, dispatch_day, tariff_day};
use serde_json::Value;

fn parse(s: Result<String, wasm_bindgen::JsError>) -> Value {
    serde_json::from_str(&s.unwrap_or_else(|_| panic!("export failed"))).unwrap()
}

#[test]
fn curve_has_endpoints() {
    let v = parse(analytic_curve(2.0, 0.75, 1.0, 0.0, 100, 4));
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 5);
    assert_eq!(pts[0]["vca"].as_f64(), Some(0.0));
    assert!((pts[4]["vca"].as_f64().unwrap() - 25.0).abs() < 1e-12);
}

#[test]
fn battery_never_raises_the_bill() {
    let load: Vec<f64> = (0..24).map(|h| if (17..=21).contains(&h) { 1.5 } else { 0.5 }).collect();
    let pv: Vec<f64> = (0..24).map(|h| (std::f64::consts::PI * (h as f64 - 6.0) / 12.0).sin().max(0.0)).collect();
    let buy: Vec<f64> = (0..24).map(|h| if (16..=20).contains(&h) { 0.36 } else { 0.25 }).collect();
    let sell: Vec<f64> = buy.iter().map(|q| 0.3 * q).collect();
    let v = parse(dispatch_day(&load, &pv, &buy, &sell, 2.0));
    assert_eq!(v["state"].as_array().unwrap().len(), 24);
    assert!(v["cost"].as_f64().unwrap() < v["cost_pv_only"].as_f64().unwrap());
}

#[test]
fn summer_weekday_has_a_peak() {
    // 2012-07-11, a Wednesday
    let v = parse(tariff_day(253));
    assert_eq!(v["date"], "2012-07-11");
    assert_eq!(v["tou"][17].as_f64(), Some(0.35817));
    assert_eq!(v["flipped"][11].as_f64(), Some(0.15));
}
