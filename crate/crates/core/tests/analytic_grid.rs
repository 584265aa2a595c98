use dervalue_core::analytic::{
    toy_baseline, toy_brute, toy_cost_coordinated, toy_cost_separate, toy_vca, ToyParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_forms_match_enumeration_on_grid() {
    for e in [1.5, 2.0, 3.0] {
        for p_a in [0.6, 0.75, 0.9] {
            for ratio in [0.0, 0.5, 0.9] {
                for k in 0..=10 {
                    let p = ToyParams { e, p_a, q: 1.0, r: ratio, n: 1000, f: k as f64 / 10.0 };
                    let (cs, cc) = toy_brute(&p).unwrap();
                    let scale = toy_baseline(&p).unwrap();
                    assert!((cs - toy_cost_separate(&p).unwrap()).abs() <= 1e-12 * scale, "{p:?}");
                    assert!((cc - toy_cost_coordinated(&p).unwrap()).abs() <= 1e-12 * scale, "{p:?}");
                    assert!((cs - cc - toy_vca(&p).unwrap().vca).abs() <= 1e-12 * scale, "{p:?}");
                }
            }
        }
    }
}

#[test]
fn continuous_at_the_kink() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let q = rng.random_range(0.1..2.0);
        let base = ToyParams {
            e: rng.random_range(1.01..5.0),
            p_a: rng.random_range(0.51..1.0),
            q,
            r: q * rng.random_range(0.0..0.99),
            n: rng.random_range(1..1000),
            f: 0.0,
        };
        let fs = base.f_star();
        if fs > 1.0 {
            continue;
        }
        // evaluate both branches at the kink itself
        let n = base.n as f64;
        let below = fs * n * base.p_a * (base.q - base.r);
        let above = n * (base.q - base.r) * (1.0 + base.e - 2.0 * base.p_a - fs * (base.e - base.p_a));
        assert!((below - above).abs() <= 1e-12 * (1.0 + below.abs()), "{base:?}");
        assert!((toy_vca(&base.with_f(fs)).unwrap().vca - below).abs() <= 1e-12 * (1.0 + below.abs()));
    }
}

#[test]
fn rises_then_falls() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let p = ToyParams {
            e: rng.random_range(1.01..5.0),
            p_a: rng.random_range(0.51..0.99),
            q: 1.0,
            r: rng.random_range(0.0..0.9),
            n: 100,
            f: 0.0,
        };
        assert_eq!(toy_vca(&p).unwrap().vca, 0.0);
        let fs = p.f_star().min(1.0);
        let h = 1e-4;
        let v = |f: f64| toy_vca(&p.with_f(f)).unwrap().vca;
        assert!(v(fs / 2.0 + h) > v(fs / 2.0), "{p:?}");
        if fs < 1.0 - 2.0 * h {
            let mid = (fs + 1.0) / 2.0;
            assert!(v(mid + h) < v(mid), "{p:?}");
        }
    }
}

#[test]
fn normalized_value_ignores_price_level() {
    let p = ToyParams { e: 2.5, p_a: 0.7, q: 0.3, r: 0.1, n: 50, f: 0.4 };
    let doubled = ToyParams { q: 0.6, r: 0.2, ..p };
    let a = toy_vca(&p).unwrap();
    let b = toy_vca(&doubled).unwrap();
    assert!((a.fraction - b.fraction).abs() < 1e-12);
    assert!((b.vca - 2.0 * a.vca).abs() < 1e-12);
}
