//! One-period, two-type model of the value of coordinated action.
//!
//! Type A households (share `p_a`) consume `e - 1`, type B consume `e + 1`;
//! an adopter generates `e`. Adopters are drawn proportionally from both
//! types. Acting alone, surplus sells at `r`; a coordinator nets surplus
//! against its neighbours' demand first.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    /// Generation per adopter, > 1.
    pub e: f64,
    /// Share of type A households.
    pub p_a: f64,
    pub q: f64,
    pub r: f64,
    pub n: u32,
    /// Adoption fraction.
    pub f: f64,
}

impl ToyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 1.0 && self.e.is_finite()) {
            return Err(Error::invalid(format!("e must exceed 1, got {}", self.e)));
        }
        if !(0.0..=1.0).contains(&self.p_a) {
            return Err(Error::invalid(format!("p_a must lie in [0, 1], got {}", self.p_a)));
        }
        if !(self.q > self.r && self.r >= 0.0 && self.q.is_finite()) {
            return Err(Error::invalid(format!("need q > r >= 0, got q={} r={}", self.q, self.r)));
        }
        if !(0.0..=1.0).contains(&self.f) {
            return Err(Error::invalid(format!("f must lie in [0, 1], got {}", self.f)));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        Ok(())
    }

    /// The closed forms assume type A is the majority.
    pub fn in_closed_form_regime(&self) -> bool {
        self.p_a > 0.5
    }

    /// Adoption level at which the group's net position reaches zero.
    pub fn f_star(&self) -> f64 {
        (1.0 + self.e - 2.0 * self.p_a) / self.e
    }

    pub fn with_f(self, f: f64) -> Self {
        ToyParams { f, ..self }
    }

    fn n(&self) -> f64 {
        self.n as f64
    }
}

/// Cost with no technology.
pub fn toy_baseline(p: &ToyParams) -> Result<f64> {
    p.validate()?;
    Ok(p.n() * p.q * (1.0 + p.e - 2.0 * p.p_a))
}

pub fn toy_cost_separate(p: &ToyParams) -> Result<f64> {
    p.validate()?;
    let n = p.n();
    Ok((1.0 - p.f) * n * p.q * (p.e + 1.0 - 2.0 * p.p_a) + p.f * n * ((1.0 - p.p_a) * p.q - p.p_a * p.r))
}

pub fn toy_cost_coordinated(p: &ToyParams) -> Result<f64> {
    p.validate()?;
    let price = if p.f <= p.f_star() { p.q } else { p.r };
    Ok((1.0 + p.e - 2.0 * p.p_a - p.f * p.e) * p.n() * price)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyVca {
    pub vca: f64,
    /// Relative to the no-technology cost.
    pub fraction: f64,
    /// Whether the group is still a net buyer.
    pub below_f_star: bool,
}

pub fn toy_vca(p: &ToyParams) -> Result<ToyVca> {
    p.validate()?;
    let (n, e, pa, f) = (p.n(), p.e, p.p_a, p.f);
    let spread = p.q - p.r;
    let base = 1.0 + e - 2.0 * pa;
    let below = f <= p.f_star();
    let (vca, fraction) = if below {
        (f * n * pa * spread, (1.0 - p.r / p.q) * f * pa / base)
    } else {
        (n * spread * (base - f * (e - pa)), (1.0 - p.r / p.q) * (1.0 - f * (e - pa) / base))
    };
    Ok(ToyVca { vca, fraction, below_f_star: below })
}

fn whole(x: f64, what: &str) -> Result<u64> {
    let k = x.round();
    if (x - k).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} = {x} is not a whole number of households")));
    }
    Ok(k as u64)
}

/// Enumerate every household's bill: `(separate, coordinated)` totals.
pub fn toy_brute(p: &ToyParams) -> Result<(f64, f64)> {
    p.validate()?;
    let n_a = whole(p.n() * p.p_a, "N p_a")?;
    let n_b = p.n as u64 - n_a;
    let adopt_a = whole(p.f * p.n() * p.p_a, "f N p_a")?;
    let adopt_b = whole(p.f * p.n() * (1.0 - p.p_a), "f N (1 - p_a)")?;
    let mut separate = 0.0;
    let mut aggregate = 0.0;
    let mut add = |load: f64, generation: f64| {
        let net = load - generation;
        separate += if net >= 0.0 { p.q * net } else { p.r * net };
        aggregate += net;
    };
    for k in 0..n_a {
        add(p.e - 1.0, if k < adopt_a { p.e } else { 0.0 });
    }
    for k in 0..n_b {
        add(p.e + 1.0, if k < adopt_b { p.e } else { 0.0 });
    }
    let coordinated = if aggregate >= 0.0 { p.q * aggregate } else { p.r * aggregate };
    Ok((separate, coordinated))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyPoint {
    pub f: f64,
    pub vca: f64,
    pub vca_frac: f64,
    pub regime: &'static str,
}

/// VCA at `f = k / steps` for `k = 0..=steps`.
pub fn toy_curve(p: &ToyParams, steps: u32) -> Result<Vec<ToyPoint>> {
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    (0..=steps)
        .map(|k| {
            let f = k as f64 / steps as f64;
            let v = toy_vca(&p.with_f(f))?;
            Ok(ToyPoint {
                f,
                vca: v.vca,
                vca_frac: v.fraction,
                regime: if v.below_f_star { "net_buyer" } else { "net_seller" },
            })
        })
        .collect()
}

pub fn write_toy_curve<W: Write>(w: W, points: &[ToyPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["f", "vca", "vca_frac", "regime"])?;
    for pt in points {
        wtr.write_record([pt.f.to_string(), pt.vca.to_string(), pt.vca_frac.to_string(), pt.regime.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<analytic>", e))?;
    Ok(())
}
