//! Jump-size sampler for the radial Lévy density `1/(r^d ψ(r))`, split at a
//! cutoff `ε` into a compound Poisson part and a small-jump variance.

use crate::derived::{grid_with_kinks, DerivedConfig};
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::scale::{unit_sphere_area, ScaleFunction};

/// Grid density of the sampler tables.
const PER_DECADE: usize = 32;

/// Monotone cubic Hermite curve in log-log coordinates, extended linearly
/// beyond its ends. Both coordinates increase, so swapping them gives the
/// inverse curve.
#[derive(Debug, Clone)]
struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Curve {
    fn new(x: Vec<f64>, y: Vec<f64>, mut m: Vec<f64>) -> Self {
        let n = x.len();
        for i in 0..n {
            let left = (i > 0).then(|| (y[i] - y[i - 1]) / (x[i] - x[i - 1]));
            let right = (i + 1 < n).then(|| (y[i + 1] - y[i]) / (x[i + 1] - x[i]));
            let cap = 3.0 * left.unwrap_or(f64::INFINITY).min(right.unwrap_or(f64::INFINITY));
            m[i] = m[i].clamp(1e-12, cap.max(1e-12));
        }
        Self { x, y, m }
    }

    fn eval(&self, u: f64) -> f64 {
        let n = self.x.len();
        if u <= self.x[0] {
            return self.y[0] + self.m[0] * (u - self.x[0]);
        }
        if u >= self.x[n - 1] {
            return self.y[n - 1] + self.m[n - 1] * (u - self.x[n - 1]);
        }
        let i = self.x.partition_point(|&v| v <= u) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (u - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[i]
            + (s3 - 2.0 * s2 + s) * h * self.m[i]
            + (-2.0 * s3 + 3.0 * s2) * self.y[i + 1]
            + (s3 - s2) * h * self.m[i + 1]
    }

    fn inverse(&self) -> Self {
        Self { x: self.y.clone(), y: self.x.clone(), m: self.m.iter().map(|s| 1.0 / s).collect() }
    }
}

#[derive(Debug, Clone)]
struct Tables {
    /// `ln r ↦ ln(1/T(r))`.
    tail: Curve,
    tail_inv: Curve,
    /// `ln r ↦ ln Φ(r)`.
    phi: Curve,
    phi_inv: Curve,
}

/// Cutoff decomposition of the jump measure.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    pub d: usize,
    /// Base cutoff; the smallest `ε` the tables are built for.
    pub eps: f64,
    /// Large-jump intensity `c₀(d) T(ε)`.
    pub lambda_eps: f64,
    /// Per-coordinate small-jump variance rate `(c₀(d)/d) ∫_0^ε s/ψ(s) ds`.
    pub sigma2_eps: f64,
    pub compensate_small: bool,
    c0: f64,
    tables: Option<Tables>,
}

impl JumpSampler {
    /// Tabulates `T(r) = ∫_r^∞ ds/(sψ(s))` and `∫_0^r s/ψ(s) ds` from `eps` up
    /// to well beyond the trusted range of `psi`.
    pub fn build(psi: &ScaleFunction<f64>, d: usize, eps: f64, compensate_small: bool) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("cutoff {eps} must be positive")));
        }
        let r_hi = (psi.r_max() * 1e4).max(eps * 1e12);
        let cfg = DerivedConfig { r_lo: eps, r_hi, per_decade: PER_DECADE, ..DerivedConfig::default() };
        let grid: Vec<f64> = grid_with_kinks(&cfg, &psi.kinks());
        let n = grid.len();
        let tol = Tolerance::default();
        let inv_s_psi = |s: f64| 1.0 / (s * psi.eval(s));
        let s_over_psi = |s: f64| s / psi.eval(s);

        let mut tail = vec![0.0; n];
        tail[n - 1] = psi.levy_tail(grid[n - 1])?;
        for i in (0..n - 1).rev() {
            tail[i] = tail[i + 1] + quad::integrate_log(inv_s_psi, grid[i], grid[i + 1], tol)?.value;
        }
        let mut area = vec![psi.second_moment_head(grid[0])?; n];
        for i in 1..n {
            area[i] = area[i - 1] + quad::integrate_log(s_over_psi, grid[i - 1], grid[i], tol)?.value;
        }

        let lr: Vec<f64> = grid.iter().map(|r| r.ln()).collect();
        let tail_curve = Curve::new(
            lr.clone(),
            tail.iter().map(|t| -t.ln()).collect(),
            grid.iter().zip(&tail).map(|(&r, &t)| 1.0 / (psi.eval(r) * t)).collect(),
        );
        let phi_curve = Curve::new(
            lr,
            grid.iter().zip(&area).map(|(&r, &a)| (r * r / (2.0 * a)).ln()).collect(),
            grid.iter().zip(&area).map(|(&r, &a)| 2.0 - r * r / (psi.eval(r) * a)).collect(),
        );
        let c0 = unit_sphere_area::<f64>(d);
        Ok(Self {
            d,
            eps,
            lambda_eps: c0 * tail[0],
            sigma2_eps: if compensate_small { c0 / d as f64 * area[0] } else { 0.0 },
            compensate_small,
            c0,
            tables: Some(Tables {
                tail_inv: tail_curve.inverse(),
                tail: tail_curve,
                phi_inv: phi_curve.inverse(),
                phi: phi_curve,
            }),
        })
    }

    /// A process without jumps or diffusion; every path stays at the origin.
    pub fn degenerate(d: usize) -> Self {
        Self {
            d,
            eps: 1.0,
            lambda_eps: 0.0,
            sigma2_eps: 0.0,
            compensate_small: false,
            c0: unit_sphere_area::<f64>(d.max(1)),
            tables: None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.tables.is_none()
    }

    /// `T(r)` for `r ≥ ε`.
    pub fn tail(&self, r: f64) -> f64 {
        match &self.tables {
            Some(t) => (-t.tail.eval(r.ln())).exp(),
            None => 0.0,
        }
    }

    /// Large-jump intensity for cutoff `eps`.
    pub fn lambda(&self, eps: f64) -> f64 {
        self.c0 * self.tail(eps)
    }

    /// Small-jump variance rate per coordinate for cutoff `eps`; zero
    /// without compensation.
    pub fn sigma2(&self, eps: f64) -> f64 {
        match &self.tables {
            Some(t) if self.compensate_small => {
                // ∫_0^ε s/ψ = ε² / (2Φ(ε))
                let phi = t.phi.eval(eps.ln()).exp();
                self.c0 / self.d as f64 * eps * eps / (2.0 * phi)
            }
            _ => 0.0,
        }
    }

    /// `Φ(r)` from the sampler's own tables.
    pub fn phi(&self, r: f64) -> f64 {
        match &self.tables {
            Some(t) => t.phi.eval(r.ln()).exp(),
            None => f64::INFINITY,
        }
    }

    pub fn phi_inv(&self, s: f64) -> f64 {
        match &self.tables {
            Some(t) => t.phi_inv.eval(s.ln()).exp(),
            None => f64::INFINITY,
        }
    }

    /// Radius of a jump above the base cutoff: solves `T(R) = u T(ε)`.
    pub fn sample_jump_radius(&self, u: f64) -> Result<f64> {
        self.sample_radius_above(self.eps, u)
    }

    /// Radius of a jump above `eps ≥ self.eps`: solves `T(R) = u T(eps)`.
    pub fn sample_radius_above(&self, eps: f64, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Config(format!("uniform variate {u} outside (0, 1]")));
        }
        let t = self.tables.as_ref().ok_or_else(|| Error::MissingTable("degenerate sampler has no jumps".into()))?;
        let level = t.tail.eval(eps.ln()) - u.ln();
        let r = t.tail_inv.eval(level).exp();
        if !r.is_finite() {
            return Err(Error::out_of_range(r, self.eps, f64::MAX));
        }
        Ok(r.max(eps))
    }

    /// Same as [`Self::sample_radius_above`] with an `Exp(1)` variate `e = -ln u`,
    /// which keeps precision for huge jumps.
    #[inline]
    pub(crate) fn radius_from_exp(&self, eps_level: f64, e: f64) -> f64 {
        match &self.tables {
            Some(t) => t.tail_inv.eval(eps_level + e).exp(),
            None => 0.0,
        }
    }

    /// `ln(1/T(eps))`, the starting level for [`Self::radius_from_exp`].
    #[inline]
    pub(crate) fn tail_level(&self, eps: f64) -> f64 {
        match &self.tables {
            Some(t) => t.tail.eval(eps.ln()),
            None => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::MonotoneTable;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sampler(name: &str, d: usize, eps: f64) -> JumpSampler {
        JumpSampler::build(&ScaleFunction::from_catalog(name).unwrap(), d, eps, true).unwrap()
    }

    #[test]
    fn cauchy_intensities() {
        let s = sampler("stable:1", 1, 0.01);
        assert_relative_eq!(s.lambda_eps, 200.0, max_relative = 1e-8);
        assert_relative_eq!(s.sigma2_eps, 0.02, max_relative = 1e-8);
        assert_relative_eq!(s.sample_jump_radius(0.5).unwrap(), 0.02, max_relative = 1e-8);
        assert_relative_eq!(s.sample_jump_radius(1.0).unwrap(), 0.01, max_relative = 1e-10);
    }

    #[test]
    fn stable_intensities() {
        let s = sampler("stable:1.5", 2, 0.1);
        let oracle = 2.0 * std::f64::consts::PI * (2.0 / 3.0) * 10f64.powf(1.5);
        assert_relative_eq!(s.lambda_eps, oracle, max_relative = 1e-8);
        assert_relative_eq!(s.lambda_eps, 132.4, max_relative = 1e-3);
        let r = s.sample_jump_radius(0.25).unwrap();
        assert_relative_eq!(r, 0.1 * 0.25f64.powf(-2.0 / 3.0), max_relative = 1e-8);
        assert_relative_eq!(r, 0.2520, max_relative = 1e-3);
    }

    #[test]
    fn adaptive_cutoff_quantities() {
        let s = sampler("stable:1.5", 1, 1e-3);
        for eps in [1e-3, 0.37, 12.0, 5e4] {
            assert_relative_eq!(s.lambda(eps), 2.0 / 1.5 * eps.powf(-1.5), max_relative = 1e-8);
            assert_relative_eq!(s.sigma2(eps), 2.0 * 2.0 * eps.sqrt(), max_relative = 1e-8);
            assert_relative_eq!(s.phi(eps), 0.25 * eps.powf(1.5), max_relative = 1e-8);
            assert_relative_eq!(s.phi_inv(0.25 * eps.powf(1.5)), eps, max_relative = 1e-8);
        }
    }

    #[test]
    fn matches_bisection_on_monotone_table() {
        // independent reference: bisection inverse of 1/T on a monotone table
        let psi = ScaleFunction::from_catalog("piecewise:1.5,2.5@1").unwrap();
        let s = JumpSampler::build(&psi, 1, 0.01, true).unwrap();
        let x: Vec<f64> = crate::scaling::log_grid(0.01, 1e4, 64);
        let inv_tail: Vec<f64> = x.iter().map(|&r| 1.0 / psi.levy_tail(r).unwrap()).collect();
        let table = MonotoneTable::new(x, inv_tail, None).unwrap();
        let t_eps = psi.levy_tail(0.01).unwrap();
        for u in [0.9, 0.5, 0.1, 1e-3, 1e-6] {
            let reference = table.gen_inverse(1.0 / (u * t_eps)).unwrap();
            let r = s.sample_jump_radius(u).unwrap();
            assert_relative_eq!(r, reference, max_relative = 1e-6);
        }
    }

    #[test]
    fn tail_intensity_band_across_cutoffs() {
        for name in ["stable:0.5", "stable:1.5", "logzero:2", "loginf:0.5", "piecewise:1.5,2.5@1"] {
            let s = sampler(name, 1, 1e-4);
            let psi = ScaleFunction::<f64>::from_catalog(name).unwrap();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in 0..=40 {
                let eps = 10f64.powf(-4.0 + i as f64 / 10.0);
                let v = s.lambda(eps) * psi.eval(eps);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert!(hi / lo < 4.0, "{name}: band [{lo}, {hi}]");
        }
    }

    #[test]
    fn degenerate_has_no_jumps() {
        let s = JumpSampler::degenerate(2);
        assert_eq!(s.lambda(0.1), 0.0);
        assert_eq!(s.sigma2(0.1), 0.0);
        assert!(matches!(s.sample_jump_radius(0.5), Err(Error::MissingTable(_))));
    }

    #[test]
    fn rejects_divergent_kernel() {
        let psi = ScaleFunction::from_catalog("stable:2").unwrap();
        assert!(matches!(JumpSampler::build(&psi, 1, 0.01, true), Err(Error::IntegrabilityViolation(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sampled_radius_has_the_levy_tail(u in 1e-9f64..1.0, which in 0usize..3) {
            let names = ["stable:1.5", "logzero:2", "loginf:2"];
            let s = sampler(names[which], 1, 1e-3);
            let r = s.sample_jump_radius(u).unwrap();
            prop_assert!(r >= s.eps);
            prop_assert!((s.tail(r) / (u * s.tail(s.eps)) - 1.0).abs() < 1e-8);
        }
    }
}
