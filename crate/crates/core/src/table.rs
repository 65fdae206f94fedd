//! Monotone tables: shape-preserving cubic interpolation in log-log
//! coordinates, power-law extrapolation at both ends and the generalized
//! inverse `inf{s : f(s) > t}`.

use crate::error::{Error, Result};
use crate::real::Real;

/// Decades beyond the first/last node where extrapolation is trusted.
pub const TRUST_DECADES: f64 = 3.0;

/// Bisection width (in `ln s`) before the final secant step of the inverse.
const INVERSE_BRACKET: f64 = 1e-9;

/// Non-decreasing positive function sampled on strictly increasing nodes.
#[derive(Debug, Clone)]
pub struct MonotoneTable<T> {
    x: Vec<T>,
    y: Vec<T>,
    lx: Vec<T>,
    ly: Vec<T>,
    /// derivative of `ln y` with respect to `ln x` at each node
    m: Vec<T>,
    left_exp: T,
    right_exp: T,
    trust: T,
}

impl<T: Real> MonotoneTable<T> {
    /// Builds a table from nodes and values. Values are clamped to their
    /// running maximum so the table is non-decreasing; the end power laws are
    /// the end secants, optionally clamped to `exp_clamp`.
    pub fn new(x: Vec<T>, mut y: Vec<T>, exp_clamp: Option<(T, T)>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::SpecInvalid("table needs at least two nodes and matching values".into()));
        }
        if x.iter().any(|v| !(*v > T::zero() && v.is_finite())) || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::SpecInvalid("table nodes must be positive and strictly increasing".into()));
        }
        if y.iter().any(|v| !(*v > T::zero() && v.is_finite())) {
            return Err(Error::SpecInvalid("table values must be positive and finite".into()));
        }
        for i in 1..n {
            if y[i] < y[i - 1] {
                y[i] = y[i - 1];
            }
        }
        let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
        let h: Vec<T> = lx.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|k| (ly[k + 1] - ly[k]) / h[k]).collect();
        let mut m = vec![T::zero(); n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        let uniform = |k: usize| (h[k] - h[k - 1]).abs() <= T::lit(1e-6) * h[k];
        for k in 1..n - 1 {
            let (d0, d1) = (delta[k - 1], delta[k]);
            if d0 <= T::zero() || d1 <= T::zero() {
                continue;
            }
            m[k] = if k >= 2 && k + 2 < n && uniform(k) && uniform(k - 1) && uniform(k + 1) {
                // fourth-order centred estimate on uniform stretches
                (T::lit(7.0) * (d0 + d1) - delta[k - 2] - delta[k + 1]) / T::lit(12.0)
            } else {
                let two = T::lit(2.0);
                let w1 = two * h[k] + h[k - 1];
                let w2 = h[k] + two * h[k - 1];
                (w1 + w2) / (w1 / d0 + w2 / d1)
            };
            // monotonicity filter
            m[k] = m[k].max(T::zero()).min(T::lit(3.0) * d0.min(d1));
        }
        let three = T::lit(3.0);
        m[0] = m[0].min(three * delta[0]);
        m[n - 1] = m[n - 1].min(three * delta[n - 2]);
        let clamp = |p: T| match exp_clamp {
            Some((lo, hi)) => p.max(lo).min(hi),
            None => p,
        };
        let left_exp = clamp(delta[0]);
        let right_exp = clamp(delta[n - 2]);
        Ok(Self { x, y, lx, ly, m, left_exp, right_exp, trust: T::lit(TRUST_DECADES * std::f64::consts::LN_10) })
    }

    /// Builds a table whose log-log derivatives at the nodes are known.
    /// The derivatives are passed through the same monotonicity filter and
    /// also define the end power laws.
    pub fn with_log_slopes(x: Vec<T>, y: Vec<T>, slopes: Vec<T>, exp_clamp: Option<(T, T)>) -> Result<Self> {
        if slopes.len() != x.len() || slopes.iter().any(|m| !m.is_finite()) {
            return Err(Error::SpecInvalid("one finite slope per node required".into()));
        }
        let mut table = Self::new(x, y, exp_clamp)?;
        let n = table.len();
        let delta: Vec<T> =
            (0..n - 1).map(|k| (table.ly[k + 1] - table.ly[k]) / (table.lx[k + 1] - table.lx[k])).collect();
        let three = T::lit(3.0);
        for k in 0..n {
            let left = if k > 0 { delta[k - 1] } else { delta[0] };
            let right = if k + 1 < n { delta[k] } else { delta[n - 2] };
            table.m[k] = slopes[k].max(T::zero()).min(three * left.min(right));
        }
        let clamp = |p: T| match exp_clamp {
            Some((lo, hi)) => p.max(lo).min(hi),
            None => p,
        };
        table.left_exp = clamp(slopes[0].max(T::zero()));
        table.right_exp = clamp(slopes[n - 1].max(T::zero()));
        Ok(table)
    }

    /// Samples `f` on the given nodes.
    pub fn from_fn(x: Vec<T>, f: impl Fn(T) -> T, exp_clamp: Option<(T, T)>) -> Result<Self> {
        let y = x.iter().map(|&v| f(v)).collect();
        Self::new(x, y, exp_clamp)
    }

    pub fn nodes(&self) -> &[T] {
        &self.x
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }

    /// Log-log derivatives used at the nodes.
    pub fn node_slopes(&self) -> &[T] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Exponents of the end power laws `(left, right)`.
    pub fn end_exponents(&self) -> (T, T) {
        (self.left_exp, self.right_exp)
    }

    /// Range where evaluation is trusted (three decades past the nodes).
    pub fn trusted_range(&self) -> (T, T) {
        let f = self.trust.exp();
        (self.x[0] / f, self.x[self.len() - 1] * f)
    }

    fn out_of_range(&self, v: T) -> Error {
        let (lo, hi) = self.trusted_range();
        Error::out_of_range(v.as_f64(), lo.as_f64(), hi.as_f64())
    }

    /// `ln f(e^u)` without the trust check.
    fn log_eval(&self, u: T) -> T {
        let n = self.len();
        if u <= self.lx[0] {
            return self.ly[0] + self.left_exp * (u - self.lx[0]);
        }
        if u >= self.lx[n - 1] {
            return self.ly[n - 1] + self.right_exp * (u - self.lx[n - 1]);
        }
        let k = self.lx.partition_point(|&v| v <= u) - 1;
        self.hermite(k, u)
    }

    #[inline]
    fn hermite(&self, k: usize, u: T) -> T {
        let h = self.lx[k + 1] - self.lx[k];
        let s = (u - self.lx[k]) / h;
        let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + one;
        let h10 = s3 - two * s2 + s;
        let h01 = three * s2 - two * s3;
        let h11 = s3 - s2;
        h00 * self.ly[k] + h10 * h * self.m[k] + h01 * self.ly[k + 1] + h11 * h * self.m[k + 1]
    }

    /// Evaluates the table; `x ≤ 0` gives the limit at the origin.
    pub fn eval(&self, x: T) -> Result<T> {
        if x <= T::zero() {
            return Ok(if self.left_exp > T::zero() { T::zero() } else { self.y[0] });
        }
        let u = x.ln();
        let n = self.len();
        if u < self.lx[0] - self.trust || u > self.lx[n - 1] + self.trust {
            return Err(self.out_of_range(x));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation that extrapolates the end power laws without limit.
    pub fn eval_unchecked(&self, x: T) -> T {
        if x <= T::zero() {
            return if self.left_exp > T::zero() { T::zero() } else { self.y[0] };
        }
        let u = x.ln();
        if let Ok(k) = self.x.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            return self.y[k];
        }
        self.log_eval(u).exp()
    }

    /// Local log-log slope at `x`.
    pub fn log_slope(&self, x: T) -> T {
        let u = x.ln();
        let n = self.len();
        if u <= self.lx[0] {
            return self.left_exp;
        }
        if u >= self.lx[n - 1] {
            return self.right_exp;
        }
        let k = self.lx.partition_point(|&v| v <= u) - 1;
        let eps = (self.lx[k + 1] - self.lx[k]) * T::lit(1e-4);
        let a = (u - eps).max(self.lx[k]);
        let b = (u + eps).min(self.lx[k + 1]);
        (self.hermite(k, b) - self.hermite(k, a)) / (b - a)
    }

    /// Generalized inverse `inf{s ≥ 0 : f(s) > t}`.
    pub fn gen_inverse(&self, t: T) -> Result<T> {
        let s = self.gen_inverse_unchecked(t)?;
        let (lo, hi) = self.trusted_range();
        if s > T::zero() && (s < lo || s > hi) {
            return Err(self.out_of_range(s));
        }
        Ok(s)
    }

    /// Generalized inverse with unlimited power-law extrapolation. Fails only
    /// when the right end is flat and `t` is at or above the plateau.
    pub fn gen_inverse_unchecked(&self, t: T) -> Result<T> {
        if t.is_nan() || t < T::zero() {
            return Err(Error::out_of_range(t.as_f64(), 0.0, f64::INFINITY));
        }
        let n = self.len();
        if t < self.y[0] {
            if t <= T::zero() || self.left_exp <= T::zero() {
                return Ok(T::zero());
            }
            let u = self.lx[0] + (t.ln() - self.ly[0]) / self.left_exp;
            return Ok(u.exp());
        }
        if t >= self.y[n - 1] {
            if self.right_exp <= T::zero() {
                return Err(Error::out_of_range(t.as_f64(), 0.0, self.y[n - 1].as_f64()));
            }
            let u = self.lx[n - 1] + (t.ln() - self.ly[n - 1]) / self.right_exp;
            return Ok(u.exp());
        }
        let j = self.y.partition_point(|&v| v <= t);
        let k = j - 1;
        let lt = t.ln();
        // f(e^lo) <= t < f(e^hi)
        let (mut lo, mut hi) = (self.lx[k], self.lx[j]);
        let width = T::lit(INVERSE_BRACKET) * (T::one() + lo.abs());
        while hi - lo > width {
            let mid = T::lit(0.5) * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hermite(k, mid) > lt {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (f_lo, f_hi) = (self.hermite(k, lo), self.hermite(k, hi));
        let u = if f_hi > f_lo { lo + (lt - f_lo) / (f_hi - f_lo) * (hi - lo) } else { lo };
        Ok(u.max(lo).min(hi).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::log_grid;
    use proptest::prelude::*;

    fn power_table(p: f64, c: f64) -> MonotoneTable<f64> {
        MonotoneTable::from_fn(log_grid(1e-3, 1e3, 64), |r| c * r.powf(p), None).unwrap()
    }

    #[test]
    fn nodes_are_reproduced_exactly() {
        let x = vec![1.0, 2.0, 5.0, 7.0];
        let y = vec![0.3, 0.9, 4.1, 4.1];
        let t = MonotoneTable::new(x.clone(), y.clone(), None).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(t.eval(*a).unwrap(), *b);
        }
    }

    #[test]
    fn inverse_of_power_table() {
        // Φ(r) = 0.25 r^1.5 gives Φ⁻¹(2) = 8^{2/3} = 4
        let t = power_table(1.5, 0.25);
        assert!((t.gen_inverse(2.0).unwrap() - 4.0).abs() < 1e-10);
        assert_eq!(t.gen_inverse(0.0).unwrap(), 0.0);
    }

    #[test]
    fn step_table_takes_right_edge_of_plateau() {
        let t = MonotoneTable::<f64>::new(vec![1.0, 1.5, 2.0, 3.0, 4.0], vec![1.0, 1.0, 1.0, 3.0, 3.0], None).unwrap();
        assert!((t.gen_inverse(1.0).unwrap() - 2.0).abs() < 1e-9);
        // strict inequality across the whole plateau
        for s in [1.0, 1.2, 1.7, 1.999] {
            assert!(t.eval(s).unwrap() <= 1.0);
        }
    }

    #[test]
    fn extrapolation_trust() {
        let t = power_table(1.5, 1.0);
        let v = t.eval(1e5).unwrap();
        assert!((v / 1e5f64.powf(1.5) - 1.0).abs() < 1e-9);
        assert!(t.eval(1e7).is_err());
        assert!(t.eval(1e-7).is_err());
        assert!(matches!(t.gen_inverse(1e20), Err(Error::OutOfRange { .. })));
        assert!(t.gen_inverse_unchecked(1e20).is_ok());
    }

    #[test]
    fn clamped_extrapolation_exponent() {
        let t = MonotoneTable::from_fn(log_grid(1.0, 100.0, 64), |r: f64| r * r * r, Some((1.0, 2.0))).unwrap();
        assert_eq!(t.end_exponents(), (2.0, 2.0));
        let v = t.eval(1000.0).unwrap();
        assert!((v - 1e6 * 100.0).abs() < 1e-3 * v);
    }

    #[test]
    fn exact_slopes_are_used() {
        let x = log_grid(1.0, 10.0, 4);
        let y: Vec<f64> = x.iter().map(|r| r * r + r).collect();
        let m: Vec<f64> = x.iter().map(|r| (2.0 * r * r + r) / (r * r + r)).collect();
        let t = MonotoneTable::with_log_slopes(x, y, m, None).unwrap();
        let v = t.eval(3.3).unwrap();
        assert!((v / (3.3 * 3.3 + 3.3) - 1.0).abs() < 1e-4);
        assert!((t.end_exponents().1 - 2.1 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn decreasing_noise_is_clamped() {
        let t = MonotoneTable::new(vec![1.0, 2.0, 3.0], vec![1.0, 0.999, 2.0], None).unwrap();
        assert_eq!(t.values(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn f32_table() {
        let x: Vec<f32> = (0..50).map(|i| 10f32.powf(-2.0 + i as f32 * 0.1)).collect();
        let t = MonotoneTable::from_fn(x, |r| r.powf(1.5), None).unwrap();
        let s = t.gen_inverse(8.0).unwrap();
        assert!((s - 4.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn round_trip(p in 0.3f64..2.5, lt in -3.0f64..3.0) {
            let t = power_table(p, 0.7);
            let v = 0.7 * 10f64.powf(lt * p);
            let s = t.gen_inverse(v).unwrap();
            let back = t.eval(s).unwrap();
            prop_assert!(((back - v) / v).abs() <= 1e-6);
        }

        #[test]
        fn interpolation_is_monotone(vals in proptest::collection::vec(0.0f64..1.0, 3..30),
                                     probes in proptest::collection::vec(0.0f64..1.0, 50)) {
            let n = vals.len();
            let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 + vals[i] * 0.5).collect();
            let mut acc = 1.0;
            let y: Vec<f64> = vals.iter().map(|v| { acc += if *v < 0.3 { 0.0 } else { *v }; acc }).collect();
            let t = MonotoneTable::new(x.clone(), y, None).unwrap();
            let mut pts: Vec<f64> = probes.iter().map(|u| x[0] + u * (x[n - 1] - x[0])).collect();
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in pts.windows(2) {
                prop_assert!(t.eval(w[0]).unwrap() <= t.eval(w[1]).unwrap() * (1.0 + 1e-12));
            }
            // inverse definition: f(s) <= t on nodes below the inverse
            let level = t.values()[n / 2];
            prop_assume!(level < t.values()[n - 1]);
            let s = t.gen_inverse(level).unwrap();
            for (xi, yi) in t.nodes().iter().zip(t.values()) {
                if *xi < s * (1.0 - 1e-9) {
                    prop_assert!(*yi <= level);
                }
            }
        }
    }
}
