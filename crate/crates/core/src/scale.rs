//! Scale functions `ψ`, their catalog, integrability checks and the radial
//! jump density `j(r) = 1 / (r^d ψ(r))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Improper};
use crate::real::Real;

/// Default trusted evaluation range of catalog kernels.
pub const DEFAULT_R_MIN: f64 = 1e-8;
pub const DEFAULT_R_MAX: f64 = 1e8;

/// Exponent of the power-law extension attached to the log-corrected kernels.
pub const EXTENSION_EXPONENT: f64 = 1.5;

/// Threshold above which the `loginf` kernel follows `r² (log r)^β`.
pub const LOGINF_THRESHOLD: f64 = 16.0;

/// Shape of a scale function and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ScaleKind {
    /// `ψ(r) = r^α`.
    Power { alpha: f64 },
    /// `ψ(r) = c_k r^{α_k}` on the `k`-th piece. When `coefficients` is
    /// omitted they are chosen to make `ψ` continuous with `c_0 = 1`.
    PiecewisePower {
        exponents: Vec<f64>,
        breakpoints: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coefficients: Option<Vec<f64>>,
    },
    /// `ψ(s) = s² (log 1/s)^α` near the origin, power-law extension above.
    LogCorrectedZero { alpha: f64 },
    /// `ψ(s) = s² (log s)^β` above 16, power-law extension below.
    LogCorrectedInfty { beta: f64 },
    /// Tabulated `ψ`, interpolated linearly in log-log coordinates.
    Table { r: Vec<f64>, psi: Vec<f64> },
}

/// Serializable description of a scale function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    #[serde(flatten)]
    pub kind: ScaleKind,
    pub r_min: f64,
    pub r_max: f64,
}

impl ScaleSpec {
    pub fn new(kind: ScaleKind) -> Self {
        Self { kind, r_min: DEFAULT_R_MIN, r_max: DEFAULT_R_MAX }
    }

    pub fn power(alpha: f64) -> Self {
        Self::new(ScaleKind::Power { alpha })
    }

    pub fn piecewise(exponents: Vec<f64>, breakpoints: Vec<f64>) -> Self {
        Self::new(ScaleKind::PiecewisePower { exponents, breakpoints, coefficients: None })
    }

    pub fn log_zero(alpha: f64) -> Self {
        Self::new(ScaleKind::LogCorrectedZero { alpha })
    }

    pub fn log_infty(beta: f64) -> Self {
        Self::new(ScaleKind::LogCorrectedInfty { beta })
    }

    /// Parses a catalog name such as `stable:1.5`, `logzero:2.0`,
    /// `loginf:0.5` or `piecewise:1.5,2.5@1`.
    pub fn from_catalog(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownKernel(name.to_string());
        let (family, args) = name.split_once(':').ok_or_else(unknown)?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| unknown());
        let list = |s: &str| s.split(',').map(num).collect::<Result<Vec<f64>>>();
        let spec = match family.trim() {
            "stable" | "power" => Self::power(num(args)?),
            "logzero" => Self::log_zero(num(args)?),
            "loginf" => Self::log_infty(num(args)?),
            "piecewise" => {
                let (exps, bps) = args.split_once('@').ok_or_else(unknown)?;
                Self::piecewise(list(exps)?, list(bps)?)
            }
            _ => return Err(unknown()),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical catalog name, when the spec is a catalog member.
    pub fn catalog_name(&self) -> Option<String> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match &self.kind {
            ScaleKind::Power { alpha } => Some(format!("stable:{alpha}")),
            ScaleKind::LogCorrectedZero { alpha } => Some(format!("logzero:{alpha}")),
            ScaleKind::LogCorrectedInfty { beta } => Some(format!("loginf:{beta}")),
            ScaleKind::PiecewisePower { exponents, breakpoints, coefficients: None } => {
                Some(format!("piecewise:{}@{}", join(exponents), join(breakpoints)))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvalid(m));
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return bad(format!("trusted range [{}, {}] is not a positive interval", self.r_min, self.r_max));
        }
        match &self.kind {
            ScaleKind::Power { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return bad(format!("power exponent {alpha} must be positive"));
                }
            }
            ScaleKind::PiecewisePower { exponents, breakpoints, coefficients } => {
                if exponents.len() != breakpoints.len() + 1 {
                    return bad("piecewise spec needs one more exponent than breakpoints".into());
                }
                if let Some(&a) = exponents.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
                    return bad(format!("piece exponent {a} must be positive (piece would not increase)"));
                }
                if breakpoints.iter().any(|b| !(b.is_finite() && *b > 0.0))
                    || breakpoints.windows(2).any(|w| w[1] <= w[0])
                {
                    return bad("breakpoints must be positive and strictly increasing".into());
                }
                if let Some(c) = coefficients {
                    if c.len() != exponents.len() || c.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                        return bad("coefficients must be positive, one per piece".into());
                    }
                    for (k, &b) in breakpoints.iter().enumerate() {
                        let left = c[k] * b.powf(exponents[k]);
                        let right = c[k + 1] * b.powf(exponents[k + 1]);
                        if ((left - right) / left).abs() > 1e-9 {
                            return bad(format!("discontinuity at breakpoint {b}: {left} vs {right}"));
                        }
                    }
                }
            }
            ScaleKind::LogCorrectedZero { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return bad(format!("log power {alpha} must be positive"));
                }
            }
            ScaleKind::LogCorrectedInfty { beta } => {
                let floor = -2.0 * LOGINF_THRESHOLD.ln();
                if !(beta.is_finite() && *beta > floor) {
                    return bad(format!("log power {beta} must exceed {floor:.4} for monotonicity"));
                }
            }
            ScaleKind::Table { r, psi } => {
                if r.len() < 2 || r.len() != psi.len() {
                    return bad("table needs at least two (r, psi) pairs of equal length".into());
                }
                if r.iter().any(|x| !(*x > 0.0 && x.is_finite())) || r.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table abscissae must be positive and strictly increasing".into());
                }
                if psi.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return bad("table values must be positive".into());
                }
                if psi.windows(2).any(|w| w[1] < w[0]) {
                    return bad("table values decrease".into());
                }
                if psi[psi.len() - 1] <= psi[0] {
                    return bad("table is constant".into());
                }
            }
        }
        Ok(())
    }
}

impl FromStr for ScaleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_catalog(s)
    }
}

impl fmt::Display for ScaleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.catalog_name() {
            Some(name) => f.write_str(&name),
            None => write!(f, "{:?}", self.kind),
        }
    }
}

#[derive(Debug, Clone)]
enum Compiled<T> {
    /// `c_k r^{α_k}` on `[starts[k], starts[k+1])`, `starts[0] = 0`.
    Pieces {
        starts: Vec<T>,
        coeffs: Vec<T>,
        exps: Vec<T>,
    },
    LogZero {
        alpha: T,
        switch: T,
        psi_switch: T,
    },
    LogInf {
        beta: T,
        psi_threshold: T,
    },
    Table {
        log_r: Vec<T>,
        log_psi: Vec<T>,
        left_slope: T,
        right_slope: T,
    },
}

/// Evaluable non-decreasing scale function `ψ` on `(0, ∞)`.
#[derive(Debug, Clone)]
pub struct ScaleFunction<T> {
    spec: ScaleSpec,
    compiled: Compiled<T>,
    pub dim_hint: Option<usize>,
}

/// Builds a scale function from a validated spec.
pub fn make_scale<T: Real>(spec: &ScaleSpec) -> Result<ScaleFunction<T>> {
    ScaleFunction::new(spec.clone())
}

impl<T: Real> ScaleFunction<T> {
    pub fn new(spec: ScaleSpec) -> Result<Self> {
        spec.validate()?;
        let lit = T::lit;
        let compiled = match &spec.kind {
            ScaleKind::Power { alpha } => {
                Compiled::Pieces { starts: vec![T::zero()], coeffs: vec![T::one()], exps: vec![lit(*alpha)] }
            }
            ScaleKind::PiecewisePower { exponents, breakpoints, coefficients } => {
                let coeffs = match coefficients {
                    Some(c) => c.clone(),
                    None => {
                        let mut c = vec![1.0];
                        for (k, &b) in breakpoints.iter().enumerate() {
                            let prev = c[k] * b.powf(exponents[k]);
                            c.push(prev / b.powf(exponents[k + 1]));
                        }
                        c
                    }
                };
                let mut starts = vec![T::zero()];
                starts.extend(breakpoints.iter().map(|&b| lit(b)));
                Compiled::Pieces {
                    starts,
                    coeffs: coeffs.into_iter().map(lit).collect(),
                    exps: exponents.iter().map(|&a| lit(a)).collect(),
                }
            }
            ScaleKind::LogCorrectedZero { alpha } => {
                let switch = 0.5f64.min((-alpha / 2.0).exp());
                let psi_switch = switch * switch * (1.0 / switch).ln().powf(*alpha);
                Compiled::LogZero { alpha: lit(*alpha), switch: lit(switch), psi_switch: lit(psi_switch) }
            }
            ScaleKind::LogCorrectedInfty { beta } => {
                let th = LOGINF_THRESHOLD;
                Compiled::LogInf { beta: lit(*beta), psi_threshold: lit(th * th * th.ln().powf(*beta)) }
            }
            ScaleKind::Table { r, psi } => {
                let log_r: Vec<T> = r.iter().map(|&x| lit(x.ln())).collect();
                let log_psi: Vec<T> = psi.iter().map(|&x| lit(x.ln())).collect();
                let n = log_r.len();
                let slope = |i: usize, j: usize| (log_psi[j] - log_psi[i]) / (log_r[j] - log_r[i]);
                // extension exponents are kept positive so ψ stays increasing
                let floor = T::lit(1e-3);
                let left_slope = slope(0, 1).max(floor);
                let right_slope = slope(n - 2, n - 1).max(floor);
                Compiled::Table { log_r, log_psi, left_slope, right_slope }
            }
        };
        Ok(Self { spec, compiled, dim_hint: None })
    }

    pub fn from_catalog(name: &str) -> Result<Self> {
        Self::new(ScaleSpec::from_catalog(name)?)
    }

    pub fn with_dim(mut self, d: usize) -> Self {
        self.dim_hint = Some(d);
        self
    }

    pub fn spec(&self) -> &ScaleSpec {
        &self.spec
    }

    pub fn r_min(&self) -> T {
        T::lit(self.spec.r_min)
    }

    pub fn r_max(&self) -> T {
        T::lit(self.spec.r_max)
    }

    /// Points where `ψ` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.compiled {
            Compiled::Pieces { starts, .. } => starts[1..].iter().map(|b| b.as_f64()).collect(),
            Compiled::LogZero { switch, .. } => vec![switch.as_f64()],
            Compiled::LogInf { .. } => vec![LOGINF_THRESHOLD],
            Compiled::Table { log_r, .. } => log_r.iter().map(|u| u.exp().as_f64()).collect(),
        }
    }

    /// `ψ(r)`; returns 0 for `r <= 0`.
    #[inline]
    pub fn eval(&self, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        match &self.compiled {
            Compiled::Pieces { starts, coeffs, exps } => {
                let k = starts.partition_point(|&b| b < r).saturating_sub(1);
                coeffs[k] * r.powf(exps[k])
            }
            Compiled::LogZero { alpha, switch, psi_switch } => {
                if r <= *switch {
                    r * r * (-r.ln()).powf(*alpha)
                } else {
                    *psi_switch * (r / *switch).powf(T::lit(EXTENSION_EXPONENT))
                }
            }
            Compiled::LogInf { beta, psi_threshold } => {
                let th = T::lit(LOGINF_THRESHOLD);
                if r >= th {
                    r * r * r.ln().powf(*beta)
                } else {
                    *psi_threshold * (r / th).powf(T::lit(EXTENSION_EXPONENT))
                }
            }
            Compiled::Table { log_r, log_psi, left_slope, right_slope } => {
                let x = r.ln();
                let n = log_r.len();
                let y = if x <= log_r[0] {
                    log_psi[0] + *left_slope * (x - log_r[0])
                } else if x >= log_r[n - 1] {
                    log_psi[n - 1] + *right_slope * (x - log_r[n - 1])
                } else {
                    let i = log_r.partition_point(|&v| v <= x) - 1;
                    let w = (x - log_r[i]) / (log_r[i + 1] - log_r[i]);
                    log_psi[i] + w * (log_psi[i + 1] - log_psi[i])
                };
                y.exp()
            }
        }
    }

    /// Generalized inverse `inf{s > 0 : ψ(s) > t}`, by bisection in `log s`.
    pub fn gen_inverse(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let (mut lo, mut hi) = (T::lit(1e-3), T::lit(1e3));
        let floor = T::min_positive_value().sqrt();
        while self.eval(lo) > t && lo > floor {
            lo *= T::lit(1e-3);
        }
        let ceil = T::max_value().sqrt();
        while self.eval(hi) <= t && hi < ceil {
            hi *= T::lit(1e3);
        }
        let (mut a, mut b) = (lo.ln(), hi.ln());
        for _ in 0..200 {
            let m = T::lit(0.5) * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.eval(m.exp()) > t {
                b = m;
            } else {
                a = m;
            }
        }
        b.exp()
    }

    /// Closed form of `∫_0^r s/ψ(s) ds` when `r` lies in the analytic region
    /// next to the origin; `None` otherwise or when the integral diverges.
    pub fn origin_integral(&self, r: T) -> Option<T> {
        let two = T::lit(2.0);
        match &self.compiled {
            Compiled::Pieces { starts, coeffs, exps } => {
                let first_end = starts.get(1).copied().unwrap_or(T::infinity());
                (r <= first_end && exps[0] < two).then(|| r.powf(two - exps[0]) / ((two - exps[0]) * coeffs[0]))
            }
            Compiled::LogZero { alpha, switch, .. } => {
                (r <= *switch && *alpha > T::one()).then(|| (-r.ln()).powf(T::one() - *alpha) / (*alpha - T::one()))
            }
            Compiled::LogInf { psi_threshold, .. } => {
                let th = T::lit(LOGINF_THRESHOLD);
                let p = T::lit(EXTENSION_EXPONENT);
                (r <= th).then(|| th.powf(p) * r.powf(two - p) / ((two - p) * *psi_threshold))
            }
            Compiled::Table { log_r, log_psi, left_slope, .. } => {
                let r0 = log_r[0].exp();
                (r <= r0 && *left_slope < two).then(|| {
                    let psi0 = log_psi[0].exp();
                    r0.powf(*left_slope) * r.powf(two - *left_slope) / ((two - *left_slope) * psi0)
                })
            }
        }
    }

    /// Closed form of `∫_r^∞ ds/(s ψ(s))` when `r` lies in the analytic
    /// region at infinity.
    pub fn infinity_integral(&self, r: T) -> Option<T> {
        match &self.compiled {
            Compiled::Pieces { starts, exps, .. } => {
                let last = starts.len() - 1;
                (r >= starts[last]).then(|| T::one() / (exps[last] * self.eval(r)))
            }
            Compiled::LogZero { switch, .. } => {
                (r >= *switch).then(|| T::one() / (T::lit(EXTENSION_EXPONENT) * self.eval(r)))
            }
            Compiled::LogInf { .. } => None,
            Compiled::Table { log_r, right_slope, .. } => {
                (r.ln() >= log_r[log_r.len() - 1]).then(|| T::one() / (*right_slope * self.eval(r)))
            }
        }
    }

    /// `∫_0^r s/ψ(s) ds`: closed form next to the origin, decade walk otherwise.
    pub fn second_moment_head(&self, r: T) -> Result<T> {
        if let Some(v) = self.origin_integral(r) {
            return Ok(v);
        }
        match quad::integrate_to_zero(|s| s / self.eval(s), r)? {
            Improper::Finite { value, .. } => Ok(value),
            Improper::Divergent => {
                Err(Error::IntegrabilityViolation(format!("∫_0^{} s/ψ(s) ds diverges for {}", r.as_f64(), self.spec)))
            }
        }
    }

    /// `∫_r^∞ ds/(s ψ(s))`, the radial Lévy tail.
    pub fn levy_tail(&self, r: T) -> Result<T> {
        if let Some(v) = self.infinity_integral(r) {
            return Ok(v);
        }
        match quad::integrate_to_infinity(|s| T::one() / (s * self.eval(s)), r)? {
            Improper::Finite { value, .. } => Ok(value),
            Improper::Divergent => {
                Err(Error::IntegrabilityViolation(format!("∫_{}^∞ ds/(sψ(s)) diverges", r.as_f64())))
            }
        }
    }
}

/// Result of [`check_integrability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrability {
    pub near_zero_finite: bool,
    pub global_finite: bool,
    /// `∫_0^1 s/ψ(s) ds`, `None` when divergent.
    pub near_zero_value: Option<f64>,
    /// `∫_1^∞ s/ψ(s) ds`, `None` when divergent.
    pub infinity_value: Option<f64>,
    /// `∫_0^∞ s/ψ(s) ds`, `None` when divergent.
    pub total: Option<f64>,
}

/// Classifies convergence of `∫_0^1 s/ψ` and `∫_0^∞ s/ψ` numerically.
pub fn check_integrability<T: Real>(f: &ScaleFunction<T>) -> Result<Integrability> {
    let g = |s: T| s / f.eval(s);
    let head = quad::integrate_to_zero(g, T::one())?;
    let tail = quad::integrate_to_infinity(g, T::one())?;
    let near_zero_value = head.value().map(Real::as_f64);
    let infinity_value = tail.value().map(Real::as_f64);
    let total = near_zero_value.zip(infinity_value).map(|(a, b)| a + b);
    Ok(Integrability {
        near_zero_finite: head.is_finite(),
        global_finite: head.is_finite() && tail.is_finite(),
        near_zero_value,
        infinity_value,
        total,
    })
}

/// Representative radial jump density `1 / (r^d ψ(r))`.
pub fn jump_density<T: Real>(f: &ScaleFunction<T>, d: usize, r: T) -> T {
    T::one() / (r.powi(d as i32) * f.eval(r))
}

/// Surface area `c₀(d)` of the unit sphere in `R^d`.
pub fn unit_sphere_area<T: Real>(d: usize) -> T {
    assert!(d >= 1, "dimension must be positive");
    let two_pi = T::lit(2.0) * T::PI();
    let (mut area, mut k) = if d % 2 == 1 { (T::lit(2.0), 1) } else { (two_pi, 2) };
    while k < d {
        area = area * two_pi / T::from_usize(k).unwrap();
        k += 2;
    }
    area
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume<T: Real>(d: usize) -> T {
    unit_sphere_area::<T>(d) / T::from_usize(d).unwrap()
}

/// `∫_{|y| > r} |y|^{-d} ψ(|y|)^{-1} dy = c₀(d) ∫_r^∞ ds/(sψ(s))`.
pub fn exterior_integral<T: Real>(f: &ScaleFunction<T>, d: usize, r: T) -> Result<T> {
    Ok(unit_sphere_area::<T>(d) * f.levy_tail(r)?)
}
