//! Brute-force reference computations used by the test suites.
//!
//! Nothing here shares code with the solvers it checks.

/// Storage day problem restated in plain numbers.
#[derive(Debug, Clone)]
pub struct GridDay {
    pub net_load: Vec<f64>,
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
    pub capacity: f64,
    pub max_charge: f64,
    pub max_discharge: f64,
    /// 1 / (eta_C eta_I)
    pub charge_factor: f64,
    /// eta_D eta_I
    pub discharge_factor: f64,
    pub retention: f64,
    pub x0: f64,
}

fn cost_of(g: f64, q: f64, r: f64) -> f64 {
    if g > 0.0 {
        q * g
    } else {
        r * g
    }
}

impl GridDay {
    fn hour_cost(&self, h: usize, u: f64) -> f64 {
        let g = if u > 0.0 {
            self.net_load[h] + self.charge_factor * u
        } else {
            self.net_load[h] + self.discharge_factor * u
        };
        cost_of(g, self.buy[h], self.sell[h])
    }

    /// Exhaustive DP with the state restricted to multiples of `step`.
    ///
    /// Every grid path is feasible for the continuous problem, so the result
    /// bounds the true optimum from above. `x0` must be on the grid.
    pub fn solve(&self, step: f64) -> f64 {
        let n_states = (self.capacity / step).round() as usize + 1;
        let level = |k: usize| (k as f64 * step).min(self.capacity);
        let mut togo = vec![0.0; n_states];
        for h in (0..self.net_load.len()).rev() {
            let mut next = vec![f64::INFINITY; n_states];
            for (i, slot) in next.iter_mut().enumerate() {
                let base = self.retention * level(i);
                for (k, v) in togo.iter().enumerate() {
                    let u = level(k) - base;
                    if u > self.max_charge + 1e-12 || u < -self.max_discharge - 1e-12 {
                        continue;
                    }
                    let c = self.hour_cost(h, u) + v;
                    if c < *slot {
                        *slot = c;
                    }
                }
            }
            togo = next;
        }
        let start = (self.x0 / step).round() as usize;
        togo[start]
    }

    /// Worst-case gap between the grid optimum and the continuous one when
    /// there is no self-discharge and all limits are multiples of `step`:
    /// flooring an optimal path to the grid moves each action by under
    /// one step.
    pub fn discretization_bound(&self, step: f64) -> f64 {
        let slope = self.charge_factor.max(self.discharge_factor);
        self.buy.iter().map(|q| step * slope * q).sum()
    }
}

/// Plain loop for `sum_i a_i b_i`.
pub fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Average-rank Spearman by definition, via O(n^2) rank counting.
pub fn spearman_by_counting(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| **b < *a).count() as f64;
                let equal = v.iter().filter(|b| **b == *a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
