//! Convex piecewise-linear functions on a closed interval.
//!
//! Stored as breakpoints with the slope of each segment. Slopes are
//! non-decreasing, which makes infimal convolution a merge of the two slope
//! lists.

/// Slopes closer than this (relative) are merged into one segment.
const SLOPE_TOL: f64 = 1e-12;
/// Segments shorter than this are dropped.
const LEN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPwl {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl ConvexPwl {
    pub fn point(x: f64, y: f64) -> Self {
        ConvexPwl {
            xs: vec![x],
            ys: vec![y],
            slopes: Vec::new(),
        }
    }

    pub fn constant(lo: f64, hi: f64, y: f64) -> Self {
        if hi - lo <= LEN_TOL {
            return Self::point(lo, y);
        }
        ConvexPwl {
            xs: vec![lo, hi],
            ys: vec![y, y],
            slopes: vec![0.0],
        }
    }

    /// Interpolates sampled values of a convex function. Samples must be
    /// sorted by `x` and include every kink.
    pub fn from_samples(samples: &[(f64, f64)]) -> Self {
        assert!(!samples.is_empty(), "need at least one sample");
        let (x0, y0) = samples[0];
        let segs = samples
            .windows(2)
            .filter(|w| w[1].0 - w[0].0 > LEN_TOL)
            .map(|w| {
                let len = w[1].0 - w[0].0;
                (len, (w[1].1 - w[0].1) / len)
            });
        let mut segs: Vec<(f64, f64)> = segs.collect();
        // fp noise only; the sampled function is convex
        segs.sort_by(|a, b| a.1.total_cmp(&b.1));
        Self::from_segments(x0, y0, segs)
    }

    fn from_segments(x0: f64, y0: f64, segs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (len, slope) in segs {
            if len <= LEN_TOL {
                continue;
            }
            if let Some(last) = merged.last_mut() {
                if (last.1 - slope).abs() <= SLOPE_TOL * (1.0 + slope.abs()) {
                    let total = last.0 + len;
                    last.1 = (last.0 * last.1 + len * slope) / total;
                    last.0 = total;
                    continue;
                }
            }
            merged.push((len, slope));
        }
        let mut xs = Vec::with_capacity(merged.len() + 1);
        let mut ys = Vec::with_capacity(merged.len() + 1);
        let mut slopes = Vec::with_capacity(merged.len());
        let (mut x, mut y) = (x0, y0);
        xs.push(x);
        ys.push(y);
        for (len, slope) in merged {
            x += len;
            y += len * slope;
            xs.push(x);
            ys.push(y);
            slopes.push(slope);
        }
        ConvexPwl { xs, ys, slopes }
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs
            .windows(2)
            .zip(&self.slopes)
            .map(|(w, &s)| (w[1] - w[0], s))
    }

    pub fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub fn hi(&self) -> f64 {
        *self.xs.last().expect("non-empty")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value at `x`, clamped into the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // first breakpoint strictly greater than x
        let i = self.xs.partition_point(|&b| b <= x);
        self.ys[i - 1] + self.slopes[i - 1] * (x - self.xs[i - 1])
    }

    /// `z -> f(-z)`.
    pub fn reflect(&self) -> Self {
        let n = self.xs.len();
        let segs: Vec<(f64, f64)> = self
            .segments()
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .map(|(len, s)| (len, -s))
            .collect();
        Self::from_segments(-self.xs[n - 1], self.ys[n - 1], segs)
    }

    /// Infimal convolution `x -> min_{a + b = x} f(a) + g(b)`.
    pub fn infconv(&self, other: &ConvexPwl) -> Self {
        let a: Vec<(f64, f64)> = self.segments().collect();
        let b: Vec<(f64, f64)> = other.segments().collect();
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].1 <= b[j].1) {
                merged.push(a[i]);
                i += 1;
            } else {
                merged.push(b[j]);
                j += 1;
            }
        }
        Self::from_segments(self.xs[0] + other.xs[0], self.ys[0] + other.ys[0], merged)
    }

    /// Restriction to `[lo, hi]`; `None` when the intersection is empty
    /// beyond `tol`.
    pub fn restrict(&self, lo: f64, hi: f64, tol: f64) -> Option<Self> {
        let new_lo = lo.max(self.lo());
        let new_hi = hi.min(self.hi());
        if new_lo > new_hi + tol {
            return None;
        }
        if new_hi - new_lo <= LEN_TOL {
            return Some(Self::point(new_lo, self.eval(new_lo)));
        }
        let segs: Vec<(f64, f64)> = self
            .xs
            .windows(2)
            .zip(&self.slopes)
            .filter_map(|(w, &s)| {
                let a = w[0].max(new_lo);
                let b = w[1].min(new_hi);
                (b > a).then_some((b - a, s))
            })
            .collect();
        let mut out = Self::from_segments(new_lo, self.eval(new_lo), segs);
        if let Some(last) = out.xs.last_mut() {
            if out.slopes.is_empty() {
                return Some(out);
            }
            *last = new_hi;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abs_fn(lo: f64, hi: f64) -> ConvexPwl {
        ConvexPwl::from_samples(&[(lo, lo.abs()), (0.0, 0.0), (hi, hi.abs())])
    }

    #[test]
    fn eval_and_reflect() {
        let f = ConvexPwl::from_samples(&[(-1.0, 2.0), (0.0, 0.0), (2.0, 1.0)]);
        assert_eq!(f.eval(-0.5), 1.0);
        assert_eq!(f.eval(1.0), 0.5);
        let g = f.reflect();
        assert_eq!(g.lo(), -2.0);
        assert_eq!(g.hi(), 1.0);
        assert!((g.eval(0.5) - 1.0).abs() < 1e-15);
        assert!((g.eval(-1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn infconv_of_abs_with_interval_indicator() {
        // min_{|b| <= 1} |x - b| = max(|x| - 1, 0)
        let f = abs_fn(-3.0, 3.0);
        let box1 = ConvexPwl::constant(-1.0, 1.0, 0.0);
        let h = f.infconv(&box1);
        assert_eq!(h.lo(), -4.0);
        assert_eq!(h.hi(), 4.0);
        for x in [-4.0, -2.5, -1.0, 0.0, 0.3, 1.0, 2.0, 4.0] {
            let expect = (f64::abs(x) - 1.0).max(0.0);
            assert!((h.eval(x) - expect).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn restrict_cuts_domain() {
        let f = abs_fn(-3.0, 3.0);
        let r = f.restrict(-1.0, 2.0, 1e-12).unwrap();
        assert_eq!(r.lo(), -1.0);
        assert_eq!(r.hi(), 2.0);
        assert_eq!(r.eval(-1.0), 1.0);
        assert_eq!(r.eval(2.0), 2.0);
        assert!(f.restrict(4.0, 5.0, 1e-12).is_none());
        let p = f.restrict(3.0, 5.0, 1e-12).unwrap();
        assert_eq!((p.lo(), p.hi(), p.eval(3.0)), (3.0, 3.0, 3.0));
    }

    fn convex_samples() -> impl Strategy<Value = Vec<(f64, f64)>> {
        (
            -5.0f64..0.0,
            proptest::collection::vec((0.01f64..2.0, -3.0f64..3.0), 1..8),
            -2.0f64..2.0,
        )
            .prop_map(|(x0, mut segs, y0)| {
                segs.sort_by(|a, b| a.1.total_cmp(&b.1));
                let mut out = vec![(x0, y0)];
                let (mut x, mut y) = (x0, y0);
                for (len, s) in segs {
                    x += len;
                    y += len * s;
                    out.push((x, y));
                }
                out
            })
    }

    proptest! {
        // brute-force min over a fine grid of splits
        #[test]
        fn infconv_matches_brute_force(a in convex_samples(), b in convex_samples(), t in 0.0f64..1.0) {
            let f = ConvexPwl::from_samples(&a);
            let g = ConvexPwl::from_samples(&b);
            let h = f.infconv(&g);
            let x = h.lo() + t * (h.hi() - h.lo());
            let mut best = f64::INFINITY;
            let n = 4000;
            for k in 0..=n {
                let u = f.lo() + (f.hi() - f.lo()) * k as f64 / n as f64;
                let v = x - u;
                if v >= g.lo() - 1e-12 && v <= g.hi() + 1e-12 {
                    best = best.min(f.eval(u) + g.eval(v));
                }
            }
            prop_assume!(best.is_finite());
            // grid error bounded by step * max slope
            let step = (f.hi() - f.lo()) / n as f64;
            prop_assert!(h.eval(x) <= best + 1e-9);
            prop_assert!(best - h.eval(x) <= step * 12.0 + 1e-9);
        }

        #[test]
        fn slopes_stay_sorted(a in convex_samples(), b in convex_samples()) {
            let h = ConvexPwl::from_samples(&a).infconv(&ConvexPwl::from_samples(&b).reflect());
            prop_assert!(h.slopes().windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
