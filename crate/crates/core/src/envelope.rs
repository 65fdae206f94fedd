//! Heat kernel, Green function and tail envelopes as numeric functions of `(t, r)`.
//!
//! All bounds are comparability statements: the multiplicative constants
//! and exponential rates live in [`EnvelopeParams`] and are meant to be
//! fitted, not trusted.

use serde::{Deserialize, Serialize};

use crate::derived::{DerivedScales, KVariant};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scale::ScaleFunction;

/// Constants of the two-sided estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeParams {
    pub d: usize,
    pub c_up: f64,
    pub c_low: f64,
    /// Rate of the upper exponential term; must not exceed `a_l`.
    pub a_u: f64,
    pub a_l: f64,
    /// Near-diagonal fraction `δ₁` of `Φ⁻¹(t)`.
    pub delta1: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self { d: 1, c_up: 1.0, c_low: 1.0, a_u: 1.0, a_l: 1.0, delta1: 0.25 }
    }
}

impl EnvelopeParams {
    pub fn with_dim(d: usize) -> Self {
        Self { d, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d == 0 {
            return bad("dimension must be at least 1".into());
        }
        if !(self.c_up > 0.0 && self.c_low > 0.0 && self.a_u > 0.0 && self.a_l > 0.0) {
            return bad("envelope constants must be positive".into());
        }
        if self.a_u > self.a_l {
            return bad(format!("a_U = {} exceeds a_L = {}", self.a_u, self.a_l));
        }
        if !(self.delta1 > 0.0 && self.delta1 < 0.5) {
            return bad(format!("delta1 = {} must lie in (0, 1/2)", self.delta1));
        }
        Ok(())
    }
}

/// Which inverse running supremum the `𝒦`-form envelopes use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeVariant {
    K,
    KInf,
    /// `𝒦` up to `T_split = Φ(1)`, `𝒦_∞` afterwards, falling back to
    /// whichever table exists.
    #[default]
    Auto,
}

impl From<KVariant> for EnvelopeVariant {
    fn from(v: KVariant) -> Self {
        match v {
            KVariant::K => EnvelopeVariant::K,
            KVariant::KInf => EnvelopeVariant::KInf,
        }
    }
}

impl EnvelopeVariant {
    /// Picks the table used at time `t`.
    pub fn resolve<T: Real>(self, ds: &DerivedScales<T>, t: T) -> Result<KVariant> {
        match self {
            EnvelopeVariant::K => Ok(KVariant::K),
            EnvelopeVariant::KInf => Ok(KVariant::KInf),
            EnvelopeVariant::Auto => {
                let split = ds.phi(T::one())?;
                let (first, second) =
                    if t <= split { (KVariant::K, KVariant::KInf) } else { (KVariant::KInf, KVariant::K) };
                if ds.has(first) {
                    Ok(first)
                } else if ds.has(second) {
                    Ok(second)
                } else {
                    Err(Error::MissingTable("neither K nor K_inf was built".into()))
                }
            }
        }
    }
}

/// All envelopes at one `(t, r)`. The `𝒦`-form fields are `None` when the
/// kernel admits no running-supremum table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HKEnvelope {
    pub t: f64,
    pub r: f64,
    pub upper_exp: f64,
    pub lower_basic: f64,
    pub upper_k: Option<f64>,
    pub lower_k: Option<f64>,
    pub gaussian_lower: f64,
    pub gaussian_upper: f64,
    pub tail_upper: Option<f64>,
    pub tail_lower: f64,
    /// `(r/𝒦⁻¹(t/r)) / (r/Φ⁻¹(t))²`, the ratio of the two exponents.
    pub exp_ratio_f4: Option<f64>,
}

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// `Φ⁻¹(t)^{-d}`.
fn near_diagonal<T: Real>(ds: &DerivedScales<T>, d: usize, t: T) -> Result<T> {
    Ok(ds.phi_inv(t)?.powi(-(d as i32)))
}

/// `t / (r^d ψ(r))`; infinite at `r = 0`.
fn jump_term<T: Real>(ds: &DerivedScales<T>, d: usize, t: T, r: T) -> T {
    t / (r.powi(d as i32) * ds.psi(r))
}

/// `𝒦⁻¹(u)`, continued by the table's power-law extrapolation when `u`
/// maps outside the trusted range.
fn k_inv_saturated<T: Real>(ds: &DerivedScales<T>, which: KVariant, u: T) -> Result<T> {
    match ds.k_inv(which, u) {
        Err(Error::OutOfRange { value, .. }) => Ok(lit(value)),
        other => other,
    }
}

fn g_with_dim<T: Real>(ds: &DerivedScales<T>, d: usize, c: T, t: T, r: T, which: KVariant) -> Result<T> {
    let poly = jump_term(ds, d, t, r);
    if r <= T::zero() {
        return Ok(poly);
    }
    let s = k_inv_saturated(ds, which, t / r)?;
    let decay = if s > T::zero() { (-c * r / s).exp() } else { T::zero() };
    Ok(poly + near_diagonal(ds, d, t)? * decay)
}

/// `𝒢(c,t,r) = t/(r^dψ(r)) + Φ⁻¹(t)^{-d} exp(-c r / 𝒦⁻¹(t/r))`, with `𝒦_∞`
/// in place of `𝒦` for [`KVariant::KInf`]. Uses the dimension of `ds`.
pub fn envelope_g<T: Real>(ds: &DerivedScales<T>, c: T, t: T, r: T, which: KVariant) -> Result<T> {
    g_with_dim(ds, ds.d, c, t, r, which)
}

fn gaussian_one<T: Real>(ds: &DerivedScales<T>, d: usize, a: T, t: T, r: T) -> Result<T> {
    let n = near_diagonal(ds, d, t)?;
    let scale = ds.phi_inv(t)?;
    let x = r / scale;
    Ok(n.min(jump_term(ds, d, t, r) + n * (-a * x * x).exp()))
}

/// Upper estimate with the Gaussian-type exponential.
pub fn upper_exp<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, t: T, r: T) -> Result<T> {
    Ok(lit::<T>(p.c_up) * gaussian_one(ds, p.d, lit(p.a_u), t, r)?)
}

/// Near-diagonal lower bound inside `δ₁Φ⁻¹(t)`, jump-kernel lower bound outside.
pub fn lower_basic<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, t: T, r: T) -> Result<T> {
    let scale = ds.phi_inv(t)?;
    let v = if r <= lit::<T>(p.delta1) * scale { scale.powi(-(p.d as i32)) } else { jump_term(ds, p.d, t, r) };
    Ok(lit::<T>(p.c_low) * v)
}

fn k_form<T: Real>(ds: &DerivedScales<T>, d: usize, c: f64, a: f64, t: T, r: T, v: EnvelopeVariant) -> Result<T> {
    let which = v.resolve(ds, t)?;
    let n = near_diagonal(ds, d, t)?;
    Ok(lit::<T>(c) * n.min(g_with_dim(ds, d, lit(a), t, r, which)?))
}

/// `c_up (Φ⁻¹(t)^{-d} ∧ 𝒢(a_U, t, r))`.
pub fn upper_k<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, t: T, r: T, v: EnvelopeVariant) -> Result<T> {
    k_form(ds, p.d, p.c_up, p.a_u, t, r, v)
}

/// `c_low (Φ⁻¹(t)^{-d} ∧ 𝒢(a_L, t, r))`.
pub fn lower_k<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, t: T, r: T, v: EnvelopeVariant) -> Result<T> {
    k_form(ds, p.d, p.c_low, p.a_l, t, r, v)
}

/// Two-sided Gaussian-form envelope `(lower, upper)`. The caller vouches for
/// the subordinate Brownian motion hypothesis.
pub fn gaussian_form<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, t: T, r: T) -> Result<(T, T)> {
    let lower = lit::<T>(p.c_low) * gaussian_one(ds, p.d, lit(p.a_l), t, r)?;
    let upper = lit::<T>(p.c_up) * gaussian_one(ds, p.d, lit(p.a_u), t, r)?;
    Ok((lower, upper))
}

/// Green function envelope `Φ(r) r^{-d}` for transient processes.
pub fn green_envelope<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, r: T) -> Result<T> {
    let bound = ds.psi_cert.beta_upper.min(2.0);
    if (p.d as f64) <= bound {
        return Err(Error::DimensionTooSmall { d: p.d, bound });
    }
    Ok(ds.phi(r)? * r.powi(-(p.d as i32)))
}

/// Upper bound on `P(|X_t| > r)`, capped at 1.
pub fn tail_upper<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, t: T, r: T, v: EnvelopeVariant) -> Result<T> {
    let which = v.resolve(ds, t)?;
    if r <= T::zero() {
        return Ok(T::one());
    }
    let beta1: T = lit(ds.psi_cert.beta_lower);
    let power = (ds.psi.gen_inverse(t) / r).powf(beta1 / lit(2.0));
    let s = k_inv_saturated(ds, which, t / r)?;
    let decay = if s > T::zero() { (-lit::<T>(p.a_u) * r / s).exp() } else { T::zero() };
    Ok((lit::<T>(p.c_up) * (power + decay)).min(T::one()))
}

/// Lower bound on `P(|X_t| > r)`: `c_low t/ψ(r)` off the diagonal region,
/// 0 inside it, capped at 1.
pub fn tail_lower<T: Real>(ds: &DerivedScales<T>, p: &EnvelopeParams, t: T, r: T) -> Result<T> {
    if r < lit::<T>(p.delta1) * ds.phi_inv(t)? {
        return Ok(T::zero());
    }
    Ok((lit::<T>(p.c_low) * t / ds.psi(r)).min(T::one()))
}

/// Evaluates every envelope at `(t, r)`.
pub fn evaluate<T: Real>(
    ds: &DerivedScales<T>,
    p: &EnvelopeParams,
    t: T,
    r: T,
    v: EnvelopeVariant,
) -> Result<HKEnvelope> {
    let opt = |x: Result<T>| -> Result<Option<f64>> {
        match x {
            Ok(v) => Ok(Some(v.as_f64())),
            Err(Error::MissingTable(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let (gl, gu) = gaussian_form(ds, p, t, r)?;
    let exp_ratio = match v.resolve(ds, t) {
        Ok(which) if r > T::zero() => {
            let s = k_inv_saturated(ds, which, t / r)?;
            let x = r / ds.phi_inv(t)?;
            Some((r / s / (x * x)).as_f64())
        }
        Ok(_) => None,
        Err(Error::MissingTable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(HKEnvelope {
        t: t.as_f64(),
        r: r.as_f64(),
        upper_exp: upper_exp(ds, p, t, r)?.as_f64(),
        lower_basic: lower_basic(ds, p, t, r)?.as_f64(),
        upper_k: opt(upper_k(ds, p, t, r, v))?,
        lower_k: opt(lower_k(ds, p, t, r, v))?,
        gaussian_lower: gl.as_f64(),
        gaussian_upper: gu.as_f64(),
        tail_upper: opt(tail_upper(ds, p, t, r, v))?,
        tail_lower: tail_lower(ds, p, t, r)?.as_f64(),
        exp_ratio_f4: exp_ratio,
    })
}

/// Kernels with closed-form heat kernel estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "snake_case")]
pub enum OracleExample {
    /// `ψ(s) ≍ s² (log 1/s)^α` near 0, valid for `t < 1/2`, `α > 1`.
    LogZero { alpha: f64 },
    /// `ψ(s) ≍ s² (log s)^β` near infinity, valid for `t ≥ 16`.
    LogInf { beta: f64 },
}

impl OracleExample {
    /// The oracle matching a catalog kernel, if there is one.
    pub fn for_catalog(name: &str) -> Option<Self> {
        let (family, arg) = name.split_once(':')?;
        let x: f64 = arg.trim().parse().ok()?;
        match family.trim() {
            "logzero" => Some(OracleExample::LogZero { alpha: x }),
            "loginf" => Some(OracleExample::LogInf { beta: x }),
            _ => None,
        }
    }
}

/// Pieces of a closed-form estimate `N ∧ (J + N exp(-r²/s²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub near_diagonal: f64,
    pub jump: f64,
    /// Squared length scale of the Gaussian term.
    pub gaussian_scale_sq: f64,
    pub value: f64,
}

/// Evaluates the closed-form comparability estimate of `example` with unit
/// rate in the exponential.
pub fn closed_form_oracle(example: OracleExample, d: usize, t: f64, r: f64) -> Result<OracleValue> {
    closed_form_oracle_with_rate(example, d, t, r, 1.0)
}

/// [`closed_form_oracle`] with rate `a` in `exp(-a r²/s²)`.
pub fn closed_form_oracle_with_rate(example: OracleExample, d: usize, t: f64, r: f64, a: f64) -> Result<OracleValue> {
    let di = d as i32;
    let df = d as f64;
    let (near, jump, scale_sq) = match example {
        OracleExample::LogZero { alpha } => {
            if !(t > 0.0 && t < 0.5) || alpha <= 1.0 {
                return Err(Error::RegimeViolation(format!(
                    "logzero oracle needs 0 < t < 1/2 and alpha > 1, got t={t}, alpha={alpha}"
                )));
            }
            let l = (1.0 / t).ln();
            let psi = ScaleFunction::<f64>::from_catalog(&format!("logzero:{alpha}"))?;
            let near = t.powf(-df / 2.0) * l.powf(df * (alpha - 1.0) / 2.0);
            (near, t / (r.powi(di) * psi.eval(r)), t / l.powf(alpha - 1.0))
        }
        OracleExample::LogInf { beta } => {
            if !(t >= 16.0) {
                return Err(Error::RegimeViolation(format!("loginf oracle needs t >= 16, got t={t}")));
            }
            let l = t.ln();
            // the slowly varying correction carried by Φ⁻¹(t)²/t
            let corr = if (beta - 1.0).abs() < 1e-12 {
                l.ln()
            } else if beta < 1.0 {
                l.powf(1.0 - beta)
            } else {
                1.0
            };
            let near = t.powf(-df / 2.0) * corr.powf(-df / 2.0);
            let jump = t / (r.powi(di + 2) * (1.0 + r).ln().powf(beta));
            (near, jump, t * corr)
        }
    };
    let value = near.min(jump + near * (-a * r * r / scale_sq).exp());
    Ok(OracleValue { near_diagonal: near, jump, gaussian_scale_sq: scale_sq, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn stable15() -> &'static DerivedScales<f64> {
        static DS: OnceLock<DerivedScales<f64>> = OnceLock::new();
        DS.get_or_init(|| DerivedScales::new(&ScaleFunction::from_catalog("stable:1.5").unwrap(), 1).unwrap())
    }

    fn p1() -> EnvelopeParams {
        EnvelopeParams::default()
    }

    #[test]
    fn params_validation() {
        assert!(p1().validate().is_ok());
        assert!(EnvelopeParams { a_u: 2.0, ..p1() }.validate().is_err());
        assert!(EnvelopeParams { delta1: 0.5, ..p1() }.validate().is_err());
    }

    #[test]
    fn g_example_and_limits() {
        let ds = stable15();
        let g = envelope_g(ds, 1.0, 1.0, 10.0, KVariant::K).unwrap();
        // oracle: 1/(10·10^1.5) + 4^{-2/3} exp(-10/0.16)
        let oracle = 1.0 / (10.0 * 10f64.powf(1.5)) + 4f64.powf(-2.0 / 3.0) * (-62.5f64).exp();
        assert_relative_eq!(g, oracle, max_relative = 1e-8);
        assert_relative_eq!(g, 0.0031623, max_relative = 1e-4);
        let far = envelope_g(ds, 1e6, 1.0, 2.0, KVariant::K).unwrap();
        assert_relative_eq!(far, 1.0 / (2.0 * 2f64.powf(1.5)), max_relative = 1e-12);
        for (t, r) in [(1.0, 1.0), (0.01, 0.3), (10.0, 5.0)] {
            let mut prev = f64::INFINITY;
            for c in [0.5, 1.0, 2.0, 4.0] {
                let g = envelope_g(ds, c, t, r, KVariant::K).unwrap();
                assert!(g <= prev);
                prev = g;
            }
        }
    }

    #[test]
    fn basic_envelopes() {
        let ds = stable15();
        let p = p1();
        let n = 4f64.powf(-2.0 / 3.0);
        assert_relative_eq!(upper_exp(ds, &p, 1.0, 0.0).unwrap(), n, max_relative = 1e-8);
        assert_relative_eq!(lower_basic(ds, &p, 1.0, 0.1).unwrap(), 0.39685, max_relative = 1e-4);
        assert_relative_eq!(lower_basic(ds, &p, 1.0, 10.0).unwrap(), 0.0031623, max_relative = 1e-4);
        let q = EnvelopeParams { c_low: 0.3, ..p };
        assert_relative_eq!(lower_basic(ds, &q, 1.0, 10.0).unwrap(), 0.3 * 0.0031623, max_relative = 1e-4);
    }

    #[test]
    fn k_form_examples() {
        let ds = stable15();
        let p = p1();
        let u = upper_k(ds, &p, 1.0, 1.0, EnvelopeVariant::K).unwrap();
        assert_relative_eq!(u, 0.39685, max_relative = 1e-4);
        // exact pieces: 𝒦⁻¹(1) = 16, so 𝒢 = 1 + 4^{-2/3} e^{-1/16}
        let g = envelope_g(ds, 1.0, 1.0, 1.0, KVariant::K).unwrap();
        assert_relative_eq!(g, 1.0 + 4f64.powf(-2.0 / 3.0) * (-1.0f64 / 16.0).exp(), max_relative = 1e-8);
        assert_relative_eq!(g, 1.3728, max_relative = 1e-4);
        // far field is dominated by the jump term
        let r = 1e4;
        let ratio = upper_k(ds, &p, 1.0, r, EnvelopeVariant::K).unwrap() / (1.0 / (r * r.powf(1.5)));
        assert_relative_eq!(ratio, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn gaussian_example() {
        let ds = stable15();
        let p = p1();
        let (lo, up) = gaussian_form(ds, &p, 1.0, 5.0).unwrap();
        let n = 4f64.powf(-2.0 / 3.0);
        let oracle = 1.0 / (5.0 * 5f64.powf(1.5)) + n * (-25.0 * n * n).exp();
        assert_relative_eq!(up, oracle, max_relative = 1e-8);
        // frozen regression value
        assert_relative_eq!(up, 0.025628, max_relative = 1e-5);
        assert_eq!(lo, up);
        let (l0, u0) = gaussian_form(ds, &EnvelopeParams { c_low: 0.5, c_up: 2.0, ..p }, 1.0, 0.0).unwrap();
        assert_relative_eq!(l0, 0.5 * n, max_relative = 1e-8);
        assert_relative_eq!(u0, 2.0 * n, max_relative = 1e-8);
    }

    #[test]
    fn green_examples() {
        let psi = ScaleFunction::from_catalog("stable:1.5").unwrap();
        let ds = DerivedScales::<f64>::new(&psi, 2).unwrap();
        let g = green_envelope(&ds, &EnvelopeParams::with_dim(2), 2.0).unwrap();
        assert_relative_eq!(g, 0.25 * 2f64.powf(1.5) / 4.0, max_relative = 1e-8);
        assert_relative_eq!(g, 0.17678, max_relative = 1e-4);
        let err = green_envelope(stable15(), &p1(), 2.0).unwrap_err();
        assert!(matches!(err, Error::DimensionTooSmall { d: 1, .. }));

        let pw = ScaleFunction::from_catalog("piecewise:1.5,2.5@1").unwrap();
        let ds = DerivedScales::<f64>::new(&pw, 3).unwrap();
        let g = green_envelope(&ds, &EnvelopeParams::with_dim(3), 4.0).unwrap();
        assert_relative_eq!(g, 8.0 / 3.0 / 64.0, max_relative = 1e-7);
    }

    #[test]
    fn tail_examples() {
        let ds = stable15();
        let p = p1();
        assert_eq!(tail_upper(ds, &p, 1.0, 0.0, EnvelopeVariant::K).unwrap(), 1.0);
        assert_eq!(tail_upper(ds, &p, 1.0, 1e-9, EnvelopeVariant::K).unwrap(), 1.0);
        let far = tail_upper(ds, &p, 1.0, 1e3, EnvelopeVariant::K).unwrap();
        assert_relative_eq!(far, (1e-3f64).powf(0.75), max_relative = 1e-6);
        assert_eq!(tail_lower(ds, &p, 1.0, 0.1).unwrap(), 0.0);

        let lin = ScaleFunction::from_catalog("stable:1").unwrap();
        let ds1 = DerivedScales::<f64>::new(&lin, 1).unwrap();
        let q = EnvelopeParams { c_low: 0.7, ..p };
        assert_relative_eq!(tail_lower(&ds1, &q, 1.0, 10.0).unwrap(), 0.07, max_relative = 1e-12);
    }

    #[test]
    fn missing_table_is_reported() {
        let psi = ScaleFunction::from_catalog("stable:0.8").unwrap();
        let ds = DerivedScales::<f64>::new(&psi, 1).unwrap();
        let p = p1();
        assert!(matches!(upper_k(&ds, &p, 1.0, 1.0, EnvelopeVariant::K), Err(Error::MissingTable(_))));
        assert!(matches!(envelope_g(&ds, 1.0, 1.0, 1.0, KVariant::KInf), Err(Error::MissingTable(_))));
        let all = evaluate(&ds, &p, 1.0, 1.0, EnvelopeVariant::Auto).unwrap();
        assert!(all.upper_k.is_none() && all.tail_upper.is_none());
        assert!(all.upper_exp > 0.0);
    }

    #[test]
    fn oracle_examples() {
        // t^{-d/2} at t = 100 is 0.1 for d = 1 and 0.01 for d = 2
        let v = closed_form_oracle(OracleExample::LogInf { beta: 2.0 }, 1, 100.0, 0.0).unwrap();
        assert_relative_eq!(v.value, 0.1, max_relative = 1e-12);
        let v = closed_form_oracle(OracleExample::LogInf { beta: 2.0 }, 2, 100.0, 0.0).unwrap();
        assert_relative_eq!(v.value, 0.01, max_relative = 1e-12);
        let v = closed_form_oracle(OracleExample::LogZero { alpha: 2.0 }, 1, 0.01, 0.0).unwrap();
        assert_relative_eq!(v.value, 10.0 * 100f64.ln().sqrt(), max_relative = 1e-12);
        assert_relative_eq!(v.value, 21.46, max_relative = 1e-3);
        // Φ⁻¹(t) ≍ (t log log t)^{1/2} at β = 1, so the prefactor decays
        let v = closed_form_oracle(OracleExample::LogInf { beta: 1.0 }, 1, 100.0, 0.0).unwrap();
        assert_relative_eq!(v.value, 0.1 / 100f64.ln().ln().sqrt(), max_relative = 1e-12);
        assert_relative_eq!(v.value, 0.0809, max_relative = 1e-3);
        assert!(matches!(
            closed_form_oracle(OracleExample::LogInf { beta: 0.5 }, 1, 10.0, 1.0),
            Err(Error::RegimeViolation(_))
        ));
        assert!(matches!(
            closed_form_oracle(OracleExample::LogZero { alpha: 2.0 }, 1, 0.6, 1.0),
            Err(Error::RegimeViolation(_))
        ));
    }

    #[test]
    fn oracle_band_on_loginf_kernels() {
        // the Gaussian rate of the oracle is a free constant: take the best of a few
        for beta in [0.5, 1.0, 2.0] {
            let name = format!("loginf:{beta}");
            let ds = DerivedScales::<f64>::new(&ScaleFunction::from_catalog(&name).unwrap(), 1).unwrap();
            let ex = OracleExample::for_catalog(&name).unwrap();
            let mut best = f64::INFINITY;
            for a in [0.5, 1.0, 2.0, 4.0] {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for i in 0..=12 {
                    let t = 16.0 * (1e4f64 / 16.0).powf(i as f64 / 12.0);
                    let s = ds.phi_inv(t).unwrap();
                    for j in 0..=24 {
                        let r = s / 4.0 * (40.0 * t.ln()).powf(j as f64 / 24.0);
                        let u = upper_k(&ds, &p1(), t, r, EnvelopeVariant::Auto).unwrap();
                        let o = closed_form_oracle_with_rate(ex, 1, t, r, a).unwrap().value;
                        lo = lo.min(u / o);
                        hi = hi.max(u / o);
                    }
                }
                best = best.min(hi.max(1.0 / lo));
            }
            assert!(best < 10.0, "{name}: band {best}");
        }
    }

    #[test]
    fn f32_envelopes() {
        let psi = ScaleFunction::<f32>::from_catalog("stable:1.5").unwrap();
        let ds = DerivedScales::<f32>::new(&psi, 1).unwrap();
        let u = upper_k(&ds, &p1(), 1.0f32, 1.0, EnvelopeVariant::K).unwrap();
        assert!((u - 0.39685).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ordering_of_k_envelopes(lt in -3.0f64..3.0, lr in -3.0f64..3.0, a_u in 0.2f64..1.0, bump in 1.0f64..4.0) {
            let ds = stable15();
            let (t, r) = (10f64.powf(lt), 10f64.powf(lr));
            let same = p1();
            let up = upper_k(ds, &same, t, r, EnvelopeVariant::Auto).unwrap();
            let lo = lower_k(ds, &same, t, r, EnvelopeVariant::Auto).unwrap();
            prop_assert_eq!(up, lo);
            let p = EnvelopeParams { a_u, a_l: a_u * bump, ..same };
            let up = upper_k(ds, &p, t, r, EnvelopeVariant::Auto).unwrap();
            let lo = lower_k(ds, &p, t, r, EnvelopeVariant::Auto).unwrap();
            prop_assert!(lo <= up * (1.0 + 1e-12));
            let all = evaluate(ds, &p, t, r, EnvelopeVariant::Auto).unwrap();
            for v in [all.upper_exp, all.lower_basic, all.gaussian_lower, all.gaussian_upper, all.tail_lower] {
                prop_assert!(v.is_finite() && v >= 0.0);
            }
        }

        #[test]
        fn gaussian_and_k_forms_are_comparable(lt in -3.0f64..3.0, frac in 0.0f64..1.0) {
            // bounded ratio, not pointwise equality, on δ₁Φ⁻¹(t) ≤ r ≤ 10Φ⁻¹(t)
            let ds = stable15();
            let t = 10f64.powf(lt);
            let s = ds.phi_inv(t).unwrap();
            let r = s * 0.25 * 40f64.powf(frac);
            let g = gaussian_form(ds, &p1(), t, r).unwrap().1;
            let k = upper_k(ds, &p1(), t, r, EnvelopeVariant::K).unwrap();
            let ratio = g / k;
            prop_assert!(ratio > 0.05 && ratio < 20.0, "ratio {ratio} at t={t} r={r}");
        }
    }
}
