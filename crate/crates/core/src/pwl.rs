//! Convex piecewise-linear functions on a closed interval.
//!
//! Stored as a left endpoint, the value there, and segments `(length, slope)`
//! with nondecreasing slopes. Infimal convolution of two such functions is a
//! merge of their segment lists, which is what makes the storage recursion
//! exact and cheap.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub len: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvexPwl {
    start: f64,
    value: f64,
    segs: Vec<Segment>,
}

const SLOPE_EPS: f64 = 1e-15;

impl ConvexPwl {
    pub fn new(start: f64, value: f64, segs: Vec<Segment>, min_len: f64) -> Self {
        let mut out = ConvexPwl {
            start,
            value,
            segs: Vec::with_capacity(segs.len()),
        };
        for s in segs {
            out.push(s, min_len);
        }
        out
    }

    /// Zero on `[lo, hi]`.
    pub fn zero_on(lo: f64, hi: f64) -> Self {
        ConvexPwl::new(lo, 0.0, vec![Segment { len: hi - lo, slope: 0.0 }], 0.0)
    }

    fn push(&mut self, s: Segment, min_len: f64) {
        if s.len <= min_len {
            return;
        }
        debug_assert!(
            self.segs.last().is_none_or(|l| l.slope <= s.slope + 1e-9),
            "slopes must be nondecreasing"
        );
        match self.segs.last_mut() {
            Some(last) if (last.slope - s.slope).abs() <= SLOPE_EPS * (1.0 + s.slope.abs()) => last.len += s.len,
            _ => self.segs.push(s),
        }
    }

    #[cfg(test)]
    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.segs.iter().map(|s| s.len).sum::<f64>()
    }

    /// Value at `x`, extrapolating linearly beyond the domain ends.
    pub fn eval(&self, x: f64) -> f64 {
        let mut pos = self.start;
        let mut val = self.value;
        for s in &self.segs {
            if x <= pos + s.len {
                return val + s.slope * (x - pos);
            }
            pos += s.len;
            val += s.slope * s.len;
        }
        match self.segs.last() {
            Some(s) => val + s.slope * (x - pos),
            None => val,
        }
    }

    /// `(f □ g)(w) = min_x f(x) + g(w - x)`.
    pub fn inf_convolve(&self, other: &ConvexPwl, min_len: f64) -> ConvexPwl {
        let mut segs = Vec::with_capacity(self.segs.len() + other.segs.len());
        let (mut i, mut j) = (0, 0);
        while i < self.segs.len() || j < other.segs.len() {
            let take_self = match (self.segs.get(i), other.segs.get(j)) {
                (Some(a), Some(b)) => a.slope <= b.slope,
                (Some(_), None) => true,
                _ => false,
            };
            if take_self {
                segs.push(self.segs[i]);
                i += 1;
            } else {
                segs.push(other.segs[j]);
                j += 1;
            }
        }
        ConvexPwl::new(self.start + other.start, self.value + other.value, segs, min_len)
    }

    /// Restrict to `[lo, hi]`, which must lie inside the domain.
    pub fn restrict(&self, lo: f64, hi: f64, min_len: f64) -> ConvexPwl {
        let value = self.eval(lo);
        let mut segs = Vec::new();
        let mut pos = self.start;
        for s in &self.segs {
            let (a, b) = (pos.max(lo), (pos + s.len).min(hi));
            if b > a {
                segs.push(Segment { len: b - a, slope: s.slope });
            }
            pos += s.len;
            if pos >= hi {
                break;
            }
        }
        ConvexPwl::new(lo, value, segs, min_len)
    }

    /// `y -> f(k y)` for `k > 0`.
    pub fn compose_scale(&self, k: f64) -> ConvexPwl {
        ConvexPwl {
            start: self.start / k,
            value: self.value,
            segs: self
                .segs
                .iter()
                .map(|s| Segment {
                    len: s.len / k,
                    slope: s.slope * k,
                })
                .collect(),
        }
    }

    /// `v -> f(-v)`.
    pub fn reflect(&self) -> ConvexPwl {
        ConvexPwl {
            start: -self.end(),
            value: self.eval(self.end()),
            segs: self
                .segs
                .iter()
                .rev()
                .map(|s| Segment {
                    len: s.len,
                    slope: -s.slope,
                })
                .collect(),
        }
    }

    pub(crate) fn cursor(&self, shift: f64) -> Cursor<'_> {
        Cursor {
            f: self,
            idx: 0,
            seg_end: self.start + shift + self.segs.first().map_or(0.0, |s| s.len),
        }
    }
}

/// Left-to-right walk over `x -> f(x - shift)` reporting right-derivatives.
pub(crate) struct Cursor<'a> {
    f: &'a ConvexPwl,
    idx: usize,
    seg_end: f64,
}

impl Cursor<'_> {
    /// Right-derivative at `x` and the next breakpoint after `x`.
    pub fn at(&mut self, x: f64) -> (f64, f64) {
        while self.idx + 1 < self.f.segs.len() && x >= self.seg_end {
            self.idx += 1;
            self.seg_end += self.f.segs[self.idx].len;
        }
        match self.f.segs.get(self.idx) {
            Some(s) if x < self.seg_end => (s.slope, self.seg_end),
            Some(s) => (s.slope, f64::INFINITY),
            None => (0.0, f64::INFINITY),
        }
    }
}

/// Leftmost minimizer of `f(x - shift) + g(x)` over `[lo, hi]`.
pub(crate) fn argmin_sum(f: &ConvexPwl, shift: f64, g: &ConvexPwl, lo: f64, hi: f64, tol: f64) -> f64 {
    let mut cf = f.cursor(shift);
    let mut cg = g.cursor(0.0);
    let mut x = lo;
    while x < hi {
        let (sf, nf) = cf.at(x);
        let (sg, ng) = cg.at(x);
        if sf + sg >= -tol {
            return x;
        }
        x = nf.min(ng);
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pwl(start: f64, value: f64, segs: &[(f64, f64)]) -> ConvexPwl {
        ConvexPwl::new(
            start,
            value,
            segs.iter().map(|&(len, slope)| Segment { len, slope }).collect(),
            0.0,
        )
    }

    /// Brute-force inf-convolution on a fine grid.
    fn brute_infconv(a: &ConvexPwl, b: &ConvexPwl, w: f64) -> f64 {
        let n = 4000;
        (0..=n)
            .map(|k| a.start() + (a.end() - a.start()) * k as f64 / n as f64)
            .filter(|x| {
                let v = w - x;
                v >= b.start() - 1e-12 && v <= b.end() + 1e-12
            })
            .map(|x| a.eval(x) + b.eval(w - x))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn eval_and_reflect() {
        let f = pwl(-1.0, 2.0, &[(1.0, -1.0), (2.0, 3.0)]);
        assert_eq!(f.eval(-1.0), 2.0);
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(2.0), 7.0);
        assert_eq!(f.end(), 2.0);
        let r = f.reflect();
        for x in [-2.0, -1.0, 0.0, 0.5, 1.0] {
            assert!((r.eval(x) - f.eval(-x)).abs() < 1e-12);
        }
    }

    #[test]
    fn inf_convolution_matches_grid() {
        let a = pwl(0.0, 0.0, &[(1.0, -2.0), (0.5, 0.0), (1.0, 1.0)]);
        let b = pwl(-0.5, 1.0, &[(0.3, -1.0), (0.7, 0.5)]);
        let c = a.inf_convolve(&b, 0.0);
        assert!((c.start() - (-0.5)).abs() < 1e-12);
        assert!((c.end() - 3.0).abs() < 1e-12);
        for k in 0..=40 {
            let w = -0.5 + 3.5 * k as f64 / 40.0;
            let brute = brute_infconv(&a, &b, w);
            assert!((c.eval(w) - brute).abs() < 2e-3, "w={w}: {} vs {brute}", c.eval(w));
        }
    }

    #[test]
    fn restrict_and_scale() {
        let f = pwl(0.0, 1.0, &[(1.0, -1.0), (1.0, 2.0)]);
        let r = f.restrict(0.5, 1.5, 0.0);
        assert_eq!(r.start(), 0.5);
        assert!((r.end() - 1.5).abs() < 1e-12);
        assert!((r.eval(1.2) - f.eval(1.2)).abs() < 1e-12);
        let s = f.compose_scale(0.5);
        for y in [0.0, 1.0, 3.0, 4.0] {
            assert!((s.eval(y) - f.eval(0.5 * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn argmin_of_sum() {
        let f = pwl(-1.0, 0.0, &[(1.0, -1.0), (1.0, 1.0)]); // min at 0
        let g = pwl(0.0, 0.0, &[(3.0, 0.5)]);
        // f(x - 1) + g(x): slopes -1+0.5 on [0,1), 1+0.5 after -> min at 1
        assert!((argmin_sum(&f, 1.0, &g, 0.0, 3.0, 1e-12) - 1.0).abs() < 1e-12);
        let g2 = pwl(0.0, 0.0, &[(3.0, -2.0)]);
        assert!((argmin_sum(&f, 1.0, &g2, 0.0, 2.0, 1e-12) - 2.0).abs() < 1e-12);
    }
}
