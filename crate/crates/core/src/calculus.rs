//! Randomized checks of the inequalities relating `ψ`, `Φ`, `Φ̃_a`, `𝒦`
//! and `𝒦_∞`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::derived::{DerivedScales, KVariant};
use crate::error::Result;
use crate::real::Real;
use crate::scaling::ScalingCertificate;

/// Relative tolerance attributed to table interpolation.
pub const CALCULUS_TOLERANCE: f64 = 1e-6;

/// Sampling window (in `r`) of the checks, kept inside the table grid.
const SAMPLE_LO: f64 = 1e-7;
const SAMPLE_HI: f64 = 1e7;

/// Worst case of one inequality `lhs ≤ rhs` over random samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub samples: usize,
    /// Samples whose evaluation left the trusted table range.
    pub skipped: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` observed.
    pub worst_ratio: f64,
    pub worst_point: [f64; 2],
}

/// Result of [`check_scale_calculus`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalculusReport {
    pub kernel: String,
    pub tolerance: f64,
    pub checks: Vec<InequalityCheck>,
    /// Inequalities whose hypotheses fail for this kernel.
    pub not_applicable: Vec<String>,
    /// Smallest constant in the upper bound of the exponent comparison for `𝒦`.
    pub fitted_c3: Option<f64>,
    /// The bound `C̃_L^{-2/(δ-1)}` implied by the certificate.
    pub certified_c3: Option<f64>,
    /// Smallest two-sided constant in the exponent comparison for `𝒦_∞`.
    pub fitted_c4: Option<f64>,
}

impl CalculusReport {
    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn pass(&self) -> bool {
        self.total_violations() == 0
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
}

impl Sampler {
    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u: f64 = self.rng.gen();
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    }

    fn point(&mut self) -> f64 {
        self.log_uniform(self.lo, self.hi)
    }

    fn ordered_pair(&mut self) -> (f64, f64) {
        let (a, b) = (self.point(), self.point());
        (a.min(b), a.max(b))
    }
}

fn run_check(
    name: &str,
    n: usize,
    sampler: &mut Sampler,
    mut draw: impl FnMut(&mut Sampler) -> Option<(f64, f64, [f64; 2])>,
) -> InequalityCheck {
    let mut check = InequalityCheck {
        name: name.to_string(),
        samples: n,
        skipped: 0,
        violations: 0,
        worst_ratio: f64::NEG_INFINITY,
        worst_point: [f64::NAN; 2],
    };
    for _ in 0..n {
        match draw(sampler) {
            Some((lhs, rhs, point)) => {
                let ratio = lhs / rhs;
                if ratio > 1.0 + CALCULUS_TOLERANCE || !ratio.is_finite() {
                    check.violations += 1;
                }
                if ratio > check.worst_ratio || !ratio.is_finite() {
                    check.worst_ratio = ratio;
                    check.worst_point = point;
                }
            }
            None => check.skipped += 1,
        }
    }
    check
}

/// Certificate constants widened by the certificate's own residual.
fn widened(cert: &ScalingCertificate) -> (f64, f64, f64, f64) {
    let slack = 1.0 + cert.residual;
    (cert.beta_lower, cert.c_lower / slack, cert.beta_upper, cert.c_upper * slack)
}

/// Samples `n` admissible points per inequality and reports the worst
/// multiplicative slack of each.
pub fn check_scale_calculus<T: Real>(ds: &DerivedScales<T>, n: usize, seed: u64) -> Result<CalculusReport> {
    let mut s = Sampler { rng: ChaCha8Rng::seed_from_u64(seed), lo: SAMPLE_LO, hi: SAMPLE_HI };
    let lit = T::lit;
    let phi = |r: f64| ds.phi(lit(r)).ok().map(Real::as_f64);
    let phi_inv = |t: f64| ds.phi_inv(lit(t)).ok().map(Real::as_f64);
    let tilde = |r: f64| ds.phi_tilde(lit(r)).ok().map(Real::as_f64);
    let k = |w: KVariant, r: f64| ds.k(w, lit(r)).ok().map(Real::as_f64);
    let k_inv = |w: KVariant, u: f64| ds.k_inv(w, lit(u)).ok().map(Real::as_f64);
    let psi = |r: f64| ds.psi(lit(r)).as_f64();

    let mut checks = Vec::new();
    let mut not_applicable = Vec::new();

    checks.push(run_check("Φ ≤ ψ", n, &mut s, |s| {
        let r = s.point();
        Some((phi(r)?, psi(r), [r, 0.0]))
    }));
    checks.push(run_check("Φ non-decreasing", n, &mut s, |s| {
        let (r, big) = s.ordered_pair();
        Some((phi(r)?, phi(big)?, [r, big]))
    }));
    checks.push(run_check("Φ(R)/Φ(r) ≤ (R/r)²", n, &mut s, |s| {
        let (r, big) = s.ordered_pair();
        Some((phi(big)? / phi(r)?, (big / r).powi(2), [r, big]))
    }));

    let (delta, c_tilde, beta_up, c_up) = widened(&ds.delta_cert);
    checks.push(run_check("Φ⁻¹ upper scaling from L(δ)", n, &mut s, |s| {
        let (t, big) = s.ordered_pair();
        let (t, big) = (phi(t)?, phi(big)?);
        let rhs = c_tilde.powf(-1.0 / delta) * (big / t).powf(1.0 / delta);
        Some((phi_inv(big)? / phi_inv(t)?, rhs, [t, big]))
    }));
    checks.push(run_check("Φ⁻¹ lower scaling from U(β₂)", n, &mut s, |s| {
        let (t, big) = s.ordered_pair();
        let (t, big) = (phi(t)?, phi(big)?);
        let lhs = c_up.powf(-1.0 / beta_up) * (big / t).powf(1.0 / beta_up);
        Some((lhs, phi_inv(big)? / phi_inv(t)?, [t, big]))
    }));

    let mut fitted_c3 = None;
    let mut certified_c3 = None;
    if ds.has(KVariant::K) && delta > 1.0 {
        let kk = |r| k(KVariant::K, r);
        checks.push(run_check("𝒦 lower: Φ(t)/t ≤ 𝒦(t)", n, &mut s, |s| {
            let t = s.point();
            Some((phi(t)? / t, kk(t)?, [t, 0.0]))
        }));
        checks.push(run_check("𝒦 upper: 𝒦(t) ≤ C̃⁻¹Φ(t)/t", n, &mut s, |s| {
            let t = s.point();
            Some((kk(t)?, phi(t)? / (t * c_tilde), [t, 0.0]))
        }));
        checks.push(run_check("𝒦 weak scaling lower", n, &mut s, |s| {
            let (a, b) = s.ordered_pair();
            Some((c_tilde * c_tilde * (b / a).powf(delta - 1.0), kk(b)? / kk(a)?, [a, b]))
        }));
        checks.push(run_check("𝒦 weak scaling upper", n, &mut s, |s| {
            let (a, b) = s.ordered_pair();
            Some((kk(b)? / kk(a)?, b / (a * c_tilde), [a, b]))
        }));

        // exponent comparison for t < Φ(r)
        let c3 = c_tilde.powf(-2.0 / (delta - 1.0));
        certified_c3 = Some(c3);
        let expo = delta / (delta - 1.0);
        let draw_tr = |s: &mut Sampler| -> Option<(f64, f64, f64)> {
            let r = s.log_uniform(1e-4, 1e6);
            let t = s.log_uniform(phi((r * 1e-4).max(SAMPLE_LO))?, phi(r)?);
            let mid = r / k_inv(KVariant::K, t / r)?;
            Some((t, r, mid))
        };
        let mut fit = 0.0f64;
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            if let Some(p) = draw_tr(&mut s) {
                pts.push(p);
            }
        }
        let mut it = pts.iter();
        checks.push(run_check("exponent comparison lower", pts.len(), &mut s, |_| {
            let &(t, r, mid) = it.next()?;
            Some(((r / phi_inv(t)?).powi(2), mid, [t, r]))
        }));
        let mut it = pts.iter();
        checks.push(run_check("exponent comparison upper (C₃ = C̃^{-2/(δ-1)})", pts.len(), &mut s, |_| {
            let &(t, r, mid) = it.next()?;
            let base = (r / phi_inv(t)?).powf(expo);
            fit = fit.max(mid / base);
            Some((mid, c3 * base, [t, r]))
        }));
        fitted_c3 = Some(fit.max(1.0));
    } else {
        not_applicable.push("𝒦 bounds, 𝒦 weak scaling, exponent comparison (𝒦 unavailable or δ ≤ 1)".to_string());
    }

    checks.push(run_check("Φ̃_a ≤ Φ", n, &mut s, |s| {
        let r = s.point();
        Some((tilde(r)?, phi(r)?, [r, 0.0]))
    }));
    checks.push(run_check("Φ̃_a(t)/Φ̃_a(s) ≤ t²/s²", n, &mut s, |s| {
        let (a, b) = s.ordered_pair();
        Some((tilde(b)? / tilde(a)?, (b / a).powi(2), [a, b]))
    }));

    let mut fitted_c4 = None;
    let (delta_i, c_i, _, _) = widened(&ds.delta_cert_inf);
    if ds.has(KVariant::KInf) && delta_i > 1.0 && delta_i <= 2.0 {
        let ki = |r| k(KVariant::KInf, r);
        checks.push(run_check("Φ̃_a satisfies global L(δ, C̃)", n, &mut s, |s| {
            let (a, b) = s.ordered_pair();
            Some((c_i * (b / a).powf(delta_i), tilde(b)? / tilde(a)?, [a, b]))
        }));
        checks.push(run_check("𝒦_∞ lower", n, &mut s, |s| {
            let t = s.point();
            Some((tilde(t)? / t, ki(t)?, [t, 0.0]))
        }));
        checks.push(run_check("𝒦_∞ upper", n, &mut s, |s| {
            let t = s.point();
            Some((ki(t)?, tilde(t)? / (t * c_i), [t, 0.0]))
        }));
        checks.push(run_check("𝒦_∞ weak scaling lower", n, &mut s, |s| {
            let (a, b) = s.ordered_pair();
            Some((c_i * c_i * (b / a).powf(delta_i - 1.0), ki(b)? / ki(a)?, [a, b]))
        }));
        checks.push(run_check("𝒦_∞ weak scaling upper", n, &mut s, |s| {
            let (a, b) = s.ordered_pair();
            Some((ki(b)? / ki(a)?, b / (a * c_i), [a, b]))
        }));
        // two-sided constant of the exponent comparison for Φ(a) ≤ t ≤ Φ(r)
        let expo = delta_i / (delta_i - 1.0);
        let t_min = phi(ds.a().as_f64()).unwrap_or(f64::NAN);
        let mut c4 = 1.0f64;
        for _ in 0..n {
            let r = s.log_uniform(ds.a().as_f64(), 1e6);
            let Some(pr) = phi(r) else { continue };
            if pr <= t_min {
                continue;
            }
            let t = s.log_uniform(t_min, pr);
            let (Some(pi), Some(kv)) = (phi_inv(t), k_inv(KVariant::KInf, t / r)) else { continue };
            let mid = r / kv;
            c4 = c4.max((r / pi).powi(2) / mid).max(mid / (r / pi).powf(expo));
        }
        fitted_c4 = Some(c4);
    } else {
        not_applicable.push("𝒦_∞ bounds and weak scaling (𝒦_∞ unavailable or δ outside (1, 2])".to_string());
    }

    Ok(CalculusReport {
        kernel: ds.psi.spec().to_string(),
        tolerance: CALCULUS_TOLERANCE,
        checks,
        not_applicable,
        fitted_c3,
        certified_c3,
        fitted_c4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::ScaleFunction;

    fn report(name: &str) -> CalculusReport {
        let psi = ScaleFunction::<f64>::from_catalog(name).unwrap();
        let ds = DerivedScales::new(&psi, 1).unwrap();
        check_scale_calculus(&ds, 2000, 7).unwrap()
    }

    #[test]
    fn stable_kernel_has_exact_c3() {
        let r = report("stable:1.5");
        assert!(r.pass(), "{r:#?}");
        assert!((r.fitted_c3.unwrap() - 1.0).abs() < 1e-3, "{:?}", r.fitted_c3);
        assert!(r.not_applicable.is_empty());
    }

    #[test]
    fn e_f4_closed_form_example() {
        // ψ = r^1.5, t = 1, r = 10
        let psi = ScaleFunction::<f64>::from_catalog("stable:1.5").unwrap();
        let ds = DerivedScales::new(&psi, 1).unwrap();
        let pinv = ds.phi_inv(1.0).unwrap();
        assert!((pinv - 4f64.powf(2.0 / 3.0)).abs() < 1e-9);
        let lhs = (10.0 / pinv).powi(2);
        let mid = 10.0 / ds.k_inv(KVariant::K, 0.1).unwrap();
        assert!((lhs - 15.749).abs() < 1e-3);
        assert!((mid - 62.5).abs() < 1e-6);
        assert!(lhs <= mid && (mid - (10.0 / pinv).powf(3.0)).abs() < 1e-6);
    }

    #[test]
    fn piecewise_and_log_kernels_pass() {
        for name in ["piecewise:1.5,2.5@1", "logzero:2", "loginf:0.5"] {
            let r = report(name);
            assert!(r.pass(), "{name}: {r:#?}");
            assert!(r.fitted_c3.unwrap() <= r.certified_c3.unwrap() * (1.0 + 1e-6));
        }
    }

    #[test]
    fn small_index_kernel_skips_k_checks() {
        let r = report("stable:0.8");
        assert!(r.pass());
        assert_eq!(r.not_applicable.len(), 2);
    }
}
