use dervalue_core::calendar::default_calendar;
use dervalue_core::devices::{make_device, net_zero_size};
use dervalue_core::dispatch::{SolverOptions, YearInputs};
use dervalue_core::forecast::{voi_household, VoiOptions};
use dervalue_core::metrics::{bootstrap_ci, BootstrapOptions};
use dervalue_core::pipeline::{run_household, Population};
use dervalue_core::seed::SeedPath;
use dervalue_core::synth::{synth_world, SynthConfig};
use dervalue_core::tariffs::{PolicyId, RateConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn population(n: usize, seed: u64) -> Population {
    let cal = default_calendar();
    let cfg = SynthConfig { n_households: n, seed, ..Default::default() };
    let world = synth_world(&cfg, &cal).unwrap();
    Population::from_synth(&cal, &world, &RateConfig::default()).unwrap()
}

#[test]
fn synthetic_loads_stay_in_a_household_range() {
    let cal = default_calendar();
    let world = synth_world(&SynthConfig { n_households: 1000, ..Default::default() }, &cal).unwrap();
    for t in &world.traces {
        let m = t.mean_kw();
        assert!((0.1..=25.0).contains(&m), "{}: {m}", t.household_id);
        assert!(t.screen().is_none(), "{}", t.household_id);
    }
}

#[test]
fn net_zero_systems_cancel_annual_load() {
    let cal = default_calendar();
    let world = synth_world(&SynthConfig { n_households: 1000, seed: 21, ..Default::default() }, &cal).unwrap();
    let eta = make_device(1.0).unwrap().eta_inverter;
    for t in &world.traces {
        let v = &world.irradiance[&t.zip];
        let z = net_zero_size(&t.series, v, eta).unwrap();
        // naive sums, independent of the library's accumulation order
        let mut sl = 0.0;
        for x in t.series.values() {
            sl += x;
        }
        let mut sv = 0.0;
        for x in v.values() {
            sv += x;
        }
        assert!((sl - eta * z * sv).abs() <= 1e-9 * sl, "{}", t.household_id);
    }
}

#[test]
fn forecast_error_never_beats_perfect_foresight() {
    let pop = population(3, 5);
    let solver = SolverOptions::default();
    let voi = VoiOptions { cv_grid: vec![0.0, 20.0, 60.0, 100.0], replicates: 4, ..Default::default() };
    for h in &pop.households {
        let run = run_household(h, pop.prices(PolicyId::P1, &h.zip).unwrap(), &solver).unwrap();
        let m = &run.member;
        let r = voi_household(&h.id, &m.inputs(), &m.device, &solver, &voi, SeedPath::root(9)).unwrap();
        assert_eq!(r.perfect, m.bills.with_tech);
        assert_eq!(r.annual_cost[0], m.bills.with_tech);
        for row in &r.per_replicate {
            for b in row {
                assert!(*b >= m.bills.with_tech - 1e-6, "{}: {b} < {}", h.id, m.bills.with_tech);
            }
        }
    }
}

#[test]
fn doubling_prices_doubles_the_information_slope() {
    let pop = population(1, 6);
    let h = &pop.households[0];
    let voi = VoiOptions { cv_grid: vec![0.0, 50.0, 100.0], replicates: 3, ..Default::default() };
    let prices = pop.prices(PolicyId::P3, &h.zip).unwrap();
    let doubled = prices.scaled(2.0).unwrap();
    let solver = SolverOptions::default();
    let solver2 = SolverOptions { tie_break: 2.0 * solver.tie_break, ..solver };
    let a = voi_household(&h.id, &YearInputs::new(h.load.values(), h.pv.values(), &prices), &h.device, &solver, &voi, SeedPath::root(1))
        .unwrap();
    let b = voi_household(
        &h.id,
        &YearInputs::new(h.load.values(), h.pv.values(), &doubled),
        &h.device,
        &solver2,
        &voi,
        SeedPath::root(1),
    )
    .unwrap();
    assert!((b.slope - 2.0 * a.slope).abs() <= 1e-9 * a.slope.abs().max(1e-6), "{} vs {}", b.slope, a.slope);
}

#[test]
fn bootstrap_interval_covers_the_estimate_for_symmetric_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let dist = Normal::new(3.0, 1.0).unwrap();
    let opts = BootstrapOptions { replicates: 400, alpha: 0.05 };
    let trials = 200;
    let mut covered = 0;
    for k in 0..trials {
        let daily: Vec<f64> = (0..60).map(|_| dist.sample(&mut rng)).collect();
        let total: f64 = daily.iter().sum();
        let (lo, hi) = bootstrap_ci(&daily, &opts, SeedPath::root(k)).unwrap();
        if lo <= total && total <= hi {
            covered += 1;
        }
    }
    assert!(covered as f64 >= 0.95 * trials as f64, "{covered}/{trials}");
}
