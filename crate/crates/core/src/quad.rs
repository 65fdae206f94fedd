//! Adaptive Gauss–Kronrod quadrature, improper integrals with divergence
//! detection, and nested multi-dimensional integration.

use crate::error::{Error, Result};
use crate::real::Real;

// Gauss–Kronrod 7/15 nodes and weights (abscissae on [0, 1], symmetric).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Result of a definite integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// Tolerances and budget for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance<T> {
    pub rel: T,
    pub abs: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Self { rel: default_rel_tol(), abs: T::zero(), max_intervals: 400 }
    }
}

/// Relative tolerance appropriate for the scalar type: 1e-12 for `f64`.
pub fn default_rel_tol<T: Real>() -> T {
    (T::epsilon() * T::lit(1e4)).max(T::lit(1e-12))
}

fn kronrod_segment<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod += T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * pair;
        }
    }
    let value = kronrod * half_len;
    let err = ((kronrod - gauss) * half_len).abs();
    (value, err)
}

/// Globally adaptive G7K15 integration of `f` over `[a, b]`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: Tolerance<T>) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate { value: T::zero(), error: T::zero(), evaluations: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, T::one()) } else { (b, a, -T::one()) };
    let (v, e) = kronrod_segment(&f, lo, hi);
    let mut segments = vec![(lo, hi, v, e)];
    let mut evaluations = 15;
    loop {
        let total: T = segments.iter().map(|s| s.2).sum();
        let err: T = segments.iter().map(|s| s.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite integrand on [{}, {}]",
                lo.as_f64(),
                hi.as_f64()
            )));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) || err <= T::min_positive_value() {
            return Ok(Estimate { value: sign * total, error: err, evaluations });
        }
        if segments.len() >= tol.max_intervals {
            return Err(Error::QuadratureFailure(format!(
                "budget of {} intervals exhausted on [{}, {}] (error {:e} vs value {:e})",
                tol.max_intervals,
                lo.as_f64(),
                hi.as_f64(),
                err.as_f64(),
                total.as_f64()
            )));
        }
        let (worst, _) =
            segments.iter().enumerate().fold((0, -T::one()), |acc, (i, s)| if s.3 > acc.1 { (i, s.3) } else { acc });
        let (sa, sb, _, _) = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (sa + sb);
        if mid <= sa || mid >= sb {
            // interval cannot be split further at this precision
            return Ok(Estimate { value: sign * total, error: err, evaluations });
        }
        let (v1, e1) = kronrod_segment(&f, sa, mid);
        let (v2, e2) = kronrod_segment(&f, mid, sb);
        evaluations += 30;
        segments.push((sa, mid, v1, e1));
        segments.push((mid, sb, v2, e2));
    }
}

/// `∫_a^b g(s) ds` for `0 < a < b`, computed in the variable `u = ln s`.
pub fn integrate_log<T: Real, F: Fn(T) -> T>(g: F, a: T, b: T, tol: Tolerance<T>) -> Result<Estimate<T>> {
    let h = |u: T| {
        let s = u.exp();
        g(s) * s
    };
    integrate(h, a.ln(), b.ln(), tol)
}

/// Outcome of an improper integral towards 0 or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Improper<T> {
    /// Convergent, with the extrapolated contribution beyond the walked decades.
    Finite {
        value: T,
        tail: T,
    },
    Divergent,
}

impl<T: Real> Improper<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            Improper::Finite { value, .. } => Some(value),
            Improper::Divergent => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Improper::Finite { .. })
    }
}

/// Direction of an improper decade walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Walk {
    TowardZero,
    TowardInfinity,
}

/// Power-law exponent at or below which a polynomially decaying decade
/// sequence is declared divergent. `Σ k^{-1}` diverges; the band above 1
/// absorbs the bias of the two-point exponent estimate.
const DIVERGENCE_EXPONENT: f64 = 1.05;

fn walk_decades<T: Real, F: Fn(T) -> T>(g: F, r: T, walk: Walk) -> Result<Improper<T>> {
    let budget = T::decade_budget();
    let ten = T::lit(10.0);
    let tol = Tolerance::default();
    let mut decades: Vec<T> = Vec::with_capacity(budget);
    let mut sum = T::zero();
    let mut edge = r;
    for k in 0..budget {
        let next = match walk {
            Walk::TowardZero => edge / ten,
            Walk::TowardInfinity => edge * ten,
        };
        let (a, b) = if next < edge { (next, edge) } else { (edge, next) };
        let d = integrate_log(&g, a, b, tol)?.value;
        if d < T::zero() {
            return Err(Error::QuadratureFailure("negative integrand in improper integral".into()));
        }
        sum += d;
        decades.push(d);
        edge = next;
        if !sum.is_finite() {
            return Ok(Improper::Divergent);
        }
        // geometric convergence below machine resolution
        if k >= 3 && d <= sum * T::epsilon() {
            return Ok(Improper::Finite { value: sum, tail: T::zero() });
        }
    }
    classify_tail(&decades, sum)
}

fn classify_tail<T: Real>(decades: &[T], sum: T) -> Result<Improper<T>> {
    let n = decades.len();
    let last = decades[n - 1];
    let prev = decades[n - 2];
    let mid_idx = n / 2 - 1;
    let mid = decades[mid_idx];
    if last <= T::zero() {
        return Ok(Improper::Finite { value: sum, tail: T::zero() });
    }
    if mid <= T::zero() {
        return Err(Error::QuadratureFailure("decade contributions vanished then reappeared".into()));
    }
    let span = T::from_usize(n - 1 - mid_idx).unwrap();
    let log_rho_avg = (last / mid).ln() / span;
    let log_rho_local = (last / prev).ln();
    let geometric = log_rho_avg < T::lit(-1e-3)
        && (log_rho_local - log_rho_avg).abs() <= T::lit(0.1) * log_rho_avg.abs() + T::lit(1e-3);
    if geometric {
        let rho = log_rho_avg.exp();
        let tail = last * rho / (T::one() - rho);
        return Ok(Improper::Finite { value: sum + tail, tail });
    }
    // polynomial decay D_k ~ C (k + k0)^{-p}; the offset k0 is fitted from
    // three decades so that logarithmic integrands are extrapolated sharply
    let (k0, p) = fit_power_decay(decades).unwrap_or_else(|| {
        let k_last = T::from_usize(n).unwrap();
        let k_mid = T::from_usize(mid_idx + 1).unwrap();
        (T::lit(0.5), (mid / last).ln() / (k_last / k_mid).ln())
    });
    if p <= T::lit(DIVERGENCE_EXPONENT) {
        return Ok(Improper::Divergent);
    }
    // Σ_{k>=n} C (k + k0)^{-p} ≈ C (n + k0 - 1/2)^{1-p} / (p - 1)
    let x_last = T::from_usize(n - 1).unwrap() + k0;
    let tail = last * x_last.powf(p) * (x_last + T::lit(0.5)).powf(T::one() - p) / (p - T::one());
    Ok(Improper::Finite { value: sum + tail, tail })
}

/// Fits `D_i = C (i + k0)^{-p}` through three decades of the sequence.
fn fit_power_decay<T: Real>(decades: &[T]) -> Option<(T, T)> {
    let n = decades.len();
    if n < 6 || decades.iter().any(|d| *d <= T::zero()) {
        return None;
    }
    let idx = [(n - 1) / 3, 2 * (n - 1) / 3, n - 1];
    let d = idx.map(|i| decades[i]);
    let x = idx.map(|i| T::from_usize(i).unwrap());
    let slope = |k0: T, a: usize, b: usize| (d[a] / d[b]).ln() / ((x[b] + k0) / (x[a] + k0)).ln();
    let mismatch = |k0: T| slope(k0, 0, 1) - slope(k0, 1, 2);
    let mut lo = -x[0] + T::lit(0.25);
    let mut hi = T::lit(1e6);
    let (f_lo, f_hi) = (mismatch(lo), mismatch(hi));
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if mismatch(mid).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k0 = T::lit(0.5) * (lo + hi);
    let p = slope(k0, 1, 2);
    (p.is_finite() && k0 < T::lit(1e5)).then_some((k0, p))
}

/// `∫_0^r g(s) ds` by a decade walk towards the origin.
pub fn integrate_to_zero<T: Real, F: Fn(T) -> T>(g: F, r: T) -> Result<Improper<T>> {
    walk_decades(g, r, Walk::TowardZero)
}

/// `∫_r^∞ g(s) ds` by a decade walk towards infinity.
pub fn integrate_to_infinity<T: Real, F: Fn(T) -> T>(g: F, r: T) -> Result<Improper<T>> {
    walk_decades(g, r, Walk::TowardInfinity)
}

/// Integration limits of axis `k` given the coordinates fixed on `0..k`.
pub type AxisLimits<'a, T> = dyn Fn(usize, &[T]) -> (T, T) + 'a;

/// Iterated integral over a region described axis by axis: the limits of
/// axis `k` may depend on the coordinates already fixed on axes `0..k`.
pub fn integrate_nested<T: Real>(
    dim: usize,
    limits: &AxisLimits<T>,
    f: &dyn Fn(&[T]) -> T,
    tol: Tolerance<T>,
) -> Result<T> {
    let mut point = vec![T::zero(); dim];
    nested_level(0, dim, &mut point, limits, f, tol)
}

fn nested_level<T: Real>(
    axis: usize,
    dim: usize,
    point: &mut Vec<T>,
    limits: &AxisLimits<T>,
    f: &dyn Fn(&[T]) -> T,
    tol: Tolerance<T>,
) -> Result<T> {
    let (lo, hi) = limits(axis, &point[..axis]);
    if hi <= lo {
        return Ok(T::zero());
    }
    // the closure needs mutable access to the shared point buffer
    let cell = std::cell::RefCell::new(std::mem::take(point));
    let failure = std::cell::RefCell::new(None);
    let inner = |x: T| -> T {
        let mut p = cell.borrow_mut();
        p[axis] = x;
        if axis + 1 == dim {
            f(&p)
        } else {
            let mut local = p.clone();
            drop(p);
            match nested_level(axis + 1, dim, &mut local, limits, f, tol) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    T::zero()
                }
            }
        }
    };
    let est = integrate(inner, lo, hi, tol);
    *point = cell.into_inner();
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((est.value - 0.0).abs() < 1e-13);
        let est = integrate(|x: f64| x.powi(6), -1.0, 1.0, Tolerance::default()).unwrap();
        assert!((est.value - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let est = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9, "{}", est.value);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(|x: f64| x.exp(), 0.0, 1.0, Tolerance::default()).unwrap().value;
        let b = integrate(|x: f64| x.exp(), 1.0, 0.0, Tolerance::default()).unwrap().value;
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let tol = Tolerance { rel: 1e-15, abs: 0.0, max_intervals: 3 };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure(_)));
    }

    #[test]
    fn improper_power_towards_zero() {
        // ∫_0^1 s^{-1/2} ds = 2
        let res = integrate_to_zero(|s: f64| s.powf(-0.5), 1.0).unwrap();
        let v = res.value().unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        // ∫_0^1 ds/s diverges
        assert_eq!(integrate_to_zero(|s: f64| 1.0 / s, 1.0).unwrap(), Improper::Divergent);
    }

    #[test]
    fn improper_power_towards_infinity() {
        let v = integrate_to_infinity(|s: f64| s.powf(-1.5), 1.0).unwrap().value().unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        assert_eq!(integrate_to_infinity(|s: f64| s.powf(-0.9), 1.0).unwrap(), Improper::Divergent);
    }

    #[test]
    fn logarithmic_decay_classification() {
        // ∫_e^∞ ds/(s (ln s)^2) = 1, converges polynomially in decades
        let res = integrate_to_infinity(|s: f64| 1.0 / (s * s.ln().powi(2)), std::f64::consts::E).unwrap();
        let v = res.value().unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        // ∫ ds/(s ln s) diverges
        let res = integrate_to_infinity(|s: f64| 1.0 / (s * s.ln()), std::f64::consts::E).unwrap();
        assert_eq!(res, Improper::Divergent);
    }

    #[test]
    fn nested_disk_area() {
        // area of the unit disk via x in [-1,1], y in [-sqrt(1-x^2), sqrt(1-x^2)]
        let limits = |axis: usize, p: &[f64]| {
            if axis == 0 {
                (-1.0, 1.0)
            } else {
                let h = (1.0 - p[0] * p[0]).max(0.0).sqrt();
                (-h, h)
            }
        };
        let area =
            integrate_nested(2, &limits, &|_p: &[f64]| 1.0, Tolerance { rel: 1e-10, abs: 0.0, max_intervals: 400 })
                .unwrap();
        assert!((area - std::f64::consts::PI).abs() < 1e-8, "{area}");
    }

    #[test]
    fn f32_quadrature_runs() {
        let est = integrate(|x: f32| x * x, 0.0f32, 3.0, Tolerance::default()).unwrap();
        assert!((est.value - 9.0).abs() < 1e-4);
    }
}
