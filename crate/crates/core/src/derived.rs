//! Derived scale functions `Φ`, `Φ̃_a`, `𝒦`, `𝒦_∞` and their generalized
//! inverses, tabulated on a log grid.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::real::Real;
use crate::scale::ScaleFunction;
use crate::scaling::{estimate_scaling_with_nodes, log_grid, ScalingCertificate, ScalingMode};
use crate::table::MonotoneTable;

/// Grid and threshold used when building [`DerivedScales`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerivedConfig {
    pub r_lo: f64,
    pub r_hi: f64,
    pub per_decade: usize,
    /// Threshold `a` of `Φ̃_a` and `𝒦_∞`.
    pub a: f64,
    /// Grid density of the scaling certificates.
    pub cert_per_decade: usize,
}

impl Default for DerivedConfig {
    fn default() -> Self {
        Self { r_lo: 1e-8, r_hi: 1e8, per_decade: 64, a: 1.0, cert_per_decade: 16 }
    }
}

/// Log-log slope of `Φ` at the left grid edge at or below which `Φ(b)/b`
/// fails to vanish at the origin.
const MIN_LEFT_SLOPE: f64 = 1.0 + 1e-6;

/// Running supremum `s ↦ sup_{b ≤ s} g(b)` with `g` known in closed form
/// between the nodes. Below `head_end` the supremum is `head_slope · s`.
#[derive(Debug, Clone)]
pub struct RunningSup<T> {
    nodes: Vec<T>,
    prefix: Vec<T>,
    head: Option<(T, T)>,
}

impl<T: Real> RunningSup<T> {
    fn new(nodes: Vec<T>, g: impl Fn(T) -> T, head: Option<(T, T)>) -> Self {
        let mut prefix = Vec::with_capacity(nodes.len());
        let mut acc = T::zero();
        for &x in &nodes {
            acc = acc.max(g(x));
            prefix.push(acc);
        }
        Self { nodes, prefix, head }
    }

    fn eval(&self, s: T, g: impl Fn(T) -> Result<T>) -> Result<T> {
        if s <= T::zero() {
            return Ok(T::zero());
        }
        if let Some((end, slope)) = self.head {
            if s < end {
                return Ok(slope * s);
            }
        }
        if s < self.nodes[0] {
            // g is increasing to the left of the grid
            return g(s);
        }
        let j = self.nodes.partition_point(|&x| x <= s) - 1;
        Ok(self.prefix[j].max(g(s)?))
    }

    /// `inf{s : sup_{b≤s} g(b) > u}`; `g` must be a power law with
    /// exponent `left_exp`/`right_exp` outside the nodes.
    fn gen_inverse(&self, u: T, g: impl Fn(T) -> T, left_exp: T, right_exp: T) -> Result<T> {
        if u.is_nan() || u < T::zero() {
            return Err(Error::out_of_range(u.as_f64(), 0.0, f64::INFINITY));
        }
        if u == T::zero() {
            return Ok(T::zero());
        }
        if let Some((end, slope)) = self.head {
            if u < slope * end {
                return Ok(u / slope);
            }
        }
        let n = self.nodes.len();
        if u < self.prefix[0] {
            let x0 = self.nodes[0];
            return Ok(x0 * (u / self.prefix[0]).powf(T::one() / left_exp));
        }
        if u >= self.prefix[n - 1] {
            if right_exp <= T::zero() {
                return Err(Error::out_of_range(u.as_f64(), 0.0, self.prefix[n - 1].as_f64()));
            }
            let xn = self.nodes[n - 1];
            let gn = g(xn);
            // g(s) = g(x_n)(s/x_n)^p must exceed u
            return Ok(xn * (u / gn).powf(T::one() / right_exp));
        }
        let j = self.prefix.partition_point(|&v| v <= u);
        let (mut lo, mut hi) = (self.nodes[j - 1].ln(), self.nodes[j].ln());
        let width = T::lit(1e-9) * (T::one() + lo.abs());
        while hi - lo > width {
            let mid = T::lit(0.5) * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid.exp()) > u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (g_lo, g_hi) = (g(lo.exp()).ln(), g(hi.exp()).ln());
        let lu = u.ln();
        let x = if g_hi > g_lo { lo + (lu - g_lo) / (g_hi - g_lo) * (hi - lo) } else { lo };
        Ok(x.max(lo).min(hi).exp())
    }
}

/// Tables of `Φ`, `𝒦`, `𝒦_∞` for one scale function.
#[derive(Debug, Clone)]
pub struct DerivedScales<T> {
    pub psi: ScaleFunction<T>,
    pub d: usize,
    pub config: DerivedConfig,
    /// `A(r) = ∫_0^r s/ψ(s) ds` at the grid nodes.
    pub second_moment: Vec<T>,
    pub phi: MonotoneTable<T>,
    /// Global certificate of `ψ` over the grid.
    pub psi_cert: ScalingCertificate,
    /// Global lower scaling certificate `(δ, C̃_L)` of `Φ` over the grid.
    pub delta_cert: ScalingCertificate,
    /// Certificate of `Φ` on `[a, r_hi]`, the hypothesis behind `𝒦_∞`.
    pub delta_cert_inf: ScalingCertificate,
    k: std::result::Result<RunningSup<T>, Error>,
    k_inf: std::result::Result<RunningSup<T>, Error>,
    a: T,
    phi_a: T,
}

/// Tabulates `Φ(r) = r² / (2 A(r))` on the grid, accumulating `A` cell by cell.
pub fn build_phi<T: Real>(psi: &ScaleFunction<T>, cfg: &DerivedConfig) -> Result<(MonotoneTable<T>, Vec<T>)> {
    let grid = grid_with_kinks(cfg, &psi.kinks());
    let tol = Tolerance::default();
    let mut area = Vec::with_capacity(grid.len());
    let mut acc = psi.second_moment_head(grid[0])?;
    area.push(acc);
    for w in grid.windows(2) {
        acc += quad::integrate_log(|s| s / psi.eval(s), w[0], w[1], tol)?.value;
        area.push(acc);
    }
    let two = T::lit(2.0);
    let values = grid.iter().zip(&area).map(|(&r, &a)| r * r / (two * a)).collect();
    // d ln Φ / d ln r = 2 - r² / (ψ(r) A(r))
    let slopes = grid.iter().zip(&area).map(|(&r, &a)| two - r * r / (psi.eval(r) * a)).collect();
    Ok((MonotoneTable::with_log_slopes(grid, values, slopes, None)?, area))
}

/// Log grid of the config with the kinks of `ψ` inserted as nodes.
pub(crate) fn grid_with_kinks<T: Real>(cfg: &DerivedConfig, kinks: &[f64]) -> Vec<T> {
    let mut grid = log_grid(cfg.r_lo, cfg.r_hi, cfg.per_decade);
    for &k in kinks {
        if k > cfg.r_lo && k < cfg.r_hi && grid.iter().all(|&g| (g / k - 1.0).abs() > 1e-9) {
            grid.push(k);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.into_iter().map(T::lit).collect()
}

impl<T: Real> DerivedScales<T> {
    pub fn build(psi: &ScaleFunction<T>, d: usize, cfg: DerivedConfig) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if !(cfg.a > cfg.r_lo && cfg.a < cfg.r_hi) {
            return Err(Error::Config(format!("threshold a={} outside the grid", cfg.a)));
        }
        let (raw_phi, second_moment) = build_phi(psi, &cfg)?;
        let cpd = cfg.cert_per_decade;
        // extreme slopes of Φ sit next to the kinks of ψ, so both grids include them
        let kinks = psi.kinks();
        let delta_cert = estimate_scaling_with_nodes(
            |r| raw_phi.eval_unchecked(r),
            cfg.r_lo,
            cfg.r_hi,
            ScalingMode::Global,
            cpd,
            &kinks,
        )?;
        let psi_cert =
            estimate_scaling_with_nodes(|r| psi.eval(r), cfg.r_lo, cfg.r_hi, ScalingMode::Global, cpd, &kinks)?;
        let clamp = (T::lit(delta_cert.beta_lower), T::lit(delta_cert.beta_upper.min(2.0)));
        let slopes = raw_phi.node_slopes().to_vec();
        let phi =
            MonotoneTable::with_log_slopes(raw_phi.nodes().to_vec(), raw_phi.values().to_vec(), slopes, Some(clamp))?;
        let delta_cert_inf = estimate_scaling_with_nodes(
            |r| phi.eval_unchecked(r),
            cfg.r_lo,
            cfg.r_hi,
            ScalingMode::NearInfty(cfg.a),
            cpd,
            &kinks,
        )?;

        let a = T::lit(cfg.a);
        let phi_a = phi.eval(a)?;
        let g = |b: T| phi.eval_unchecked(b) / b;

        let k = {
            let nodes = phi.nodes();
            let decade = cfg.per_decade.min(nodes.len() - 1);
            let left_slope =
                (phi.values()[decade] / phi.values()[0]).ln().as_f64() / (nodes[decade] / nodes[0]).ln().as_f64();
            if left_slope <= MIN_LEFT_SLOPE {
                Err(Error::LowerIndexTooSmall(format!(
                    "Φ has log-log slope {left_slope:.4} at r={:e}, so Φ(b)/b does not vanish at 0",
                    cfg.r_lo
                )))
            } else {
                Ok(RunningSup::new(nodes.to_vec(), g, None))
            }
        };
        let k_inf = if delta_cert_inf.beta_lower <= 1.0 {
            Err(Error::LowerIndexTooSmall(format!(
                "Φ has lower index {:.4} ≤ 1 on [{}, {}]",
                delta_cert_inf.beta_lower, cfg.a, cfg.r_hi
            )))
        } else {
            let mut nodes = vec![a];
            nodes.extend(phi.nodes().iter().copied().filter(|&x| x > a));
            Ok(RunningSup::new(nodes, g, Some((a, phi_a / (a * a)))))
        };
        Ok(Self {
            psi: psi.clone(),
            d,
            config: cfg,
            second_moment,
            phi,
            psi_cert,
            delta_cert,
            delta_cert_inf,
            k,
            k_inf,
            a,
            phi_a,
        })
    }

    /// Builds with the default grid.
    pub fn new(psi: &ScaleFunction<T>, d: usize) -> Result<Self> {
        Self::build(psi, d, DerivedConfig::default())
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn psi(&self, r: T) -> T {
        self.psi.eval(r)
    }

    pub fn phi(&self, r: T) -> Result<T> {
        self.phi.eval(r)
    }

    pub fn phi_inv(&self, t: T) -> Result<T> {
        self.phi.gen_inverse(t)
    }

    /// `Φ̃_a(s)`: `Φ(a) s²/a²` below `a`, `Φ(s)` above.
    pub fn phi_tilde(&self, s: T) -> Result<T> {
        if s < self.a {
            Ok(self.phi_a * s * s / (self.a * self.a))
        } else {
            self.phi.eval(s)
        }
    }

    fn table(&self, which: KVariant) -> Result<&RunningSup<T>> {
        let (slot, name) = match which {
            KVariant::K => (&self.k, "K"),
            KVariant::KInf => (&self.k_inf, "K_inf"),
        };
        slot.as_ref().map_err(|e| Error::MissingTable(format!("{name} was not built: {e}")))
    }

    pub fn has(&self, which: KVariant) -> bool {
        self.table(which).is_ok()
    }

    /// Reason a table is absent, if it is.
    pub fn missing_reason(&self, which: KVariant) -> Option<&Error> {
        match which {
            KVariant::K => self.k.as_ref().err(),
            KVariant::KInf => self.k_inf.as_ref().err(),
        }
    }

    /// `𝒦(s) = sup_{b≤s} Φ(b)/b` or `𝒦_∞(s) = sup_{b≤s} Φ̃_a(b)/b`.
    pub fn k(&self, which: KVariant, s: T) -> Result<T> {
        let t = self.table(which)?;
        t.eval(s, |b| Ok(self.phi.eval(b)? / b))
    }

    /// Generalized inverse of [`Self::k`].
    pub fn k_inv(&self, which: KVariant, u: T) -> Result<T> {
        let t = self.table(which)?;
        let (le, re) = self.phi.end_exponents();
        let s = t.gen_inverse(u, |b| self.phi.eval_unchecked(b) / b, le - T::one(), re - T::one())?;
        let (lo, hi) = self.phi.trusted_range();
        if s > T::zero() && (s > hi || (which == KVariant::K && s < lo)) {
            return Err(Error::out_of_range(s.as_f64(), lo.as_f64(), hi.as_f64()));
        }
        Ok(s)
    }

    /// Writes the tables as CSV with columns
    /// `r, psi, phi, phi_inv_at_phi, K, K_inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,psi,phi,phi_inv_at_phi,K,K_inf\n");
        let cell = |v: Result<T>| v.map(|x| format!("{:.16e}", x.as_f64())).unwrap_or_default();
        for (&r, &p) in self.phi.nodes().iter().zip(self.phi.values()) {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{},{}",
                r.as_f64(),
                self.psi.eval(r).as_f64(),
                p.as_f64(),
                cell(self.phi_inv(p)),
                cell(self.k(KVariant::K, r)),
                cell(self.k(KVariant::KInf, r)),
            );
        }
        out
    }
}

/// Which running supremum to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KVariant {
    K,
    KInf,
}

/// Output of [`comparability_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparabilityReport {
    pub range: [f64; 2],
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    /// Upper scaling index of `ψ` on the range.
    pub upper_index: f64,
    /// Verdict from the behaviour of `Φ/ψ` at the relevant end.
    pub comparable: bool,
    /// Verdict from the upper index: `Some(true)` below 1.85, `Some(false)`
    /// at 2 or above, `None` in between.
    pub index_verdict: Option<bool>,
    pub consistent: bool,
    /// `"zero"` or `"infinity"`.
    pub end: &'static str,
    /// Least-squares log-log slope of `Φ` over the decade at that end.
    pub end_slope: f64,
}

/// Compares `Φ` and `ψ` on `[lo, hi]`.
pub fn comparability_report<T: Real>(ds: &DerivedScales<T>, lo: f64, hi: f64) -> Result<ComparabilityReport> {
    let grid = log_grid(lo, hi, 64);
    let ratio: Vec<f64> =
        grid.iter().map(|&r| Ok(ds.phi(T::lit(r))?.as_f64() / ds.psi(T::lit(r)).as_f64())).collect::<Result<_>>()?;
    let sup_ratio = ratio.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let inf_ratio = ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    let at_zero = if hi <= 1.0 {
        true
    } else if lo >= 1.0 {
        false
    } else {
        ratio[0] < ratio[ratio.len() - 1]
    };
    let n = grid.len();
    let span = 128.min(n - 1);
    let (i_end, i_in) = if at_zero { (0, span) } else { (n - 1, n - 1 - span) };
    // Φ/ψ decaying towards the end by more than 10% over two decades
    let decay = ratio[i_in] / ratio[i_end];
    let comparable = decay < 1.1;

    let cert = estimate_scaling_with_nodes(|r| ds.psi(r), lo, hi, ScalingMode::Global, 16, &ds.psi.kinks())?;
    let upper_index = cert.beta_upper;
    let index_verdict = if upper_index < 1.85 {
        Some(true)
    } else if upper_index >= 2.0 - 1e-3 {
        Some(false)
    } else {
        None
    };
    let consistent = index_verdict.is_none_or(|v| v == comparable);

    let fit_span = 64.min(n - 1);
    let idx: Vec<usize> = if at_zero { (0..=fit_span).collect() } else { (n - 1 - fit_span..n).collect() };
    let xs: Vec<f64> = idx.iter().map(|&i| grid[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| ds.phi(T::lit(grid[i])).map(|v| v.as_f64().ln())).collect::<Result<_>>()?;
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();

    Ok(ComparabilityReport {
        range: [lo, hi],
        sup_ratio,
        inf_ratio,
        upper_index,
        comparable,
        index_verdict,
        consistent,
        end: if at_zero { "zero" } else { "infinity" },
        end_slope: sxy / sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ds(name: &str) -> DerivedScales<f64> {
        DerivedScales::new(&ScaleFunction::from_catalog(name).unwrap(), 1).unwrap()
    }

    #[test]
    fn phi_closed_forms() {
        let s = ds("stable:1");
        assert_relative_eq!(s.phi(2.0).unwrap(), 1.0, max_relative = 1e-9);
        let p = ds("piecewise:1.5,2.5@1");
        assert_relative_eq!(p.phi(4.0).unwrap(), 16.0 / 6.0, max_relative = 1e-8);
        let l = ds("logzero:2");
        let r = (-2.0f64).exp();
        assert_relative_eq!(l.phi(r).unwrap(), (-4.0f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn phi_matches_power_oracle_across_decades() {
        for alpha in [0.5, 1.0, 1.5, 1.9] {
            let s = ds(&format!("stable:{alpha}"));
            for k in -60..=60 {
                let r = 10f64.powf(k as f64 / 10.0 + 0.0123);
                let exact = (2.0 - alpha) / 2.0 * r.powf(alpha);
                assert_relative_eq!(s.phi(r).unwrap(), exact, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn non_integrable_kernel_is_rejected() {
        let psi = ScaleFunction::<f64>::from_catalog("stable:2").unwrap();
        assert!(matches!(DerivedScales::new(&psi, 1), Err(Error::IntegrabilityViolation(_))));
    }

    #[test]
    fn phi_inverse_example() {
        let s = ds("stable:1.5");
        assert_relative_eq!(s.phi_inv(2.0).unwrap(), 4.0, max_relative = 1e-9);
        assert_eq!(s.phi_inv(0.0).unwrap(), 0.0);
    }

    #[test]
    fn k_examples() {
        let s = ds("stable:1.5");
        assert_relative_eq!(s.k(KVariant::K, 2.0).unwrap(), 0.25 * 2f64.sqrt(), max_relative = 1e-9);
        // 𝒦⁻¹(u) = (4u)² for this kernel
        assert_relative_eq!(s.k_inv(KVariant::K, 0.1).unwrap(), 0.16, max_relative = 1e-8);
        assert_relative_eq!(s.k_inv(KVariant::K, 1.0).unwrap(), 16.0, max_relative = 1e-8);
        let low = ScaleFunction::<f64>::from_catalog("stable:0.5").unwrap();
        let low = DerivedScales::new(&low, 1).unwrap();
        assert!(matches!(low.k(KVariant::K, 1.0), Err(Error::MissingTable(_))));
        assert!(matches!(low.missing_reason(KVariant::K), Some(Error::LowerIndexTooSmall(_))));
    }

    #[test]
    fn k_brute_force_on_piecewise() {
        let p = ds("piecewise:1.5,2.5@1");
        // oracle: sup over a 10⁴-point grid of the closed-form Φ(b)/b
        let phi = |b: f64| if b <= 1.0 { 0.25 * b.powf(1.5) } else { b * b / (2.0 * (4.0 - 2.0 / b.sqrt())) };
        let brute = (1..=10_000).map(|i| 4.0 * i as f64 / 10_000.0).map(|b| phi(b) / b).fold(0.0, f64::max);
        assert_relative_eq!(brute, 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(p.k(KVariant::K, 4.0).unwrap(), brute, max_relative = 1e-8);
        assert_relative_eq!(p.k(KVariant::KInf, 4.0).unwrap(), brute, max_relative = 1e-8);
    }

    #[test]
    fn k_inf_examples() {
        let s = ds("stable:1.5");
        assert_relative_eq!(s.phi_tilde(0.5).unwrap(), 0.0625, max_relative = 1e-9);
        assert_relative_eq!(s.k(KVariant::KInf, 0.5).unwrap(), 0.125, max_relative = 1e-9);
        assert_relative_eq!(s.k_inv(KVariant::KInf, 0.125).unwrap(), 0.5, max_relative = 1e-9);
        assert_eq!(s.k(KVariant::KInf, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn k_inverse_round_trip() {
        for name in ["stable:1.5", "logzero:2", "loginf:0.5", "piecewise:1.5,2.5@1"] {
            let s = ds(name);
            for which in [KVariant::K, KVariant::KInf] {
                for k in -40..40 {
                    let u = 10f64.powf(k as f64 / 8.0);
                    let Ok(x) = s.k_inv(which, u) else { continue };
                    let back = s.k(which, x).unwrap();
                    assert!(((back - u) / u).abs() < 1e-6, "{name} {which:?} u={u} back={back}");
                }
            }
        }
    }

    #[test]
    fn comparability_examples() {
        let s = ds("stable:1.5");
        let rep = comparability_report(&s, 1e-4, 1e4).unwrap();
        assert!(rep.comparable && rep.consistent);
        assert_relative_eq!(rep.inf_ratio, 0.25, max_relative = 1e-8);
        assert_relative_eq!(rep.sup_ratio, 0.25, max_relative = 1e-8);

        let p = ds("piecewise:1.5,2.5@1");
        let rep = comparability_report(&p, 10.0, 1e4).unwrap();
        assert!(!rep.comparable && rep.consistent);
        assert_eq!(rep.end, "infinity");
        // Φ(r) = r²/(2(4 - 2/√r)): slope 2 - r^{-1/2}/(4 - 2 r^{-1/2}) ≈ 1.9975 on the last decade
        assert!((rep.end_slope - 2.0).abs() < 5e-3, "{}", rep.end_slope);

        let l = ds("logzero:2");
        let rep = comparability_report(&l, 1e-8, 1e-2).unwrap();
        assert!(!rep.comparable && rep.consistent);
        assert_eq!(rep.end, "zero");
        // closed form: d log Φ / d log r = 2 - 1/log(1/r), averaged over [1e-8, 1e-7]
        let exact = |r: f64| 2.0 - 1.0 / (1.0 / r).ln();
        assert!(rep.end_slope > exact(1e-7) && rep.end_slope < exact(1e-8), "{}", rep.end_slope);
    }

    #[test]
    fn csv_export_shape() {
        let csv = ds("stable:1.5").to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "r,psi,phi,phi_inv_at_phi,K,K_inf");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 6);
        assert_eq!(row[0], "1.0000000000000000e-8");
    }

    #[test]
    fn f32_build() {
        let psi = ScaleFunction::<f32>::from_catalog("stable:1.5").unwrap();
        let cfg = DerivedConfig { r_lo: 1e-4, r_hi: 1e4, ..Default::default() };
        let s = DerivedScales::build(&psi, 1, cfg).unwrap();
        assert!((s.phi(4.0).unwrap() - 2.0).abs() < 1e-4);
    }
}
