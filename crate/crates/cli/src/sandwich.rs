//! Fitting the multiplicative constants of two-sided envelopes to Monte
//! Carlo estimates.

use hke_core::sim::MCEstimate;
use serde::Serialize;

/// One empirical value of the heat kernel at `(t, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichPoint {
    pub t: f64,
    pub r: f64,
    pub estimate: MCEstimate,
}

/// Smallest constants `c_low`, `c_up` with
/// `lower/c_low ≤ empirical ≤ c_up·upper` at every point, up to a slack of
/// a few standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichResult {
    pub fitted_c_low: f64,
    pub fitted_c_up: f64,
    pub n_points: usize,
    /// Point that determines the larger of the two constants.
    pub worst_point: (f64, f64),
    pub threshold: f64,
    pub pass: bool,
}

/// Fits both constants over `points`. Points where an envelope is not finite
/// are ignored.
pub fn sandwich_check(
    points: &[SandwichPoint],
    lower: impl Fn(f64, f64) -> f64,
    upper: impl Fn(f64, f64) -> f64,
    slack_sigma: f64,
    threshold: f64,
) -> SandwichResult {
    let (mut c_low, mut c_up) = (1.0f64, 1.0f64);
    let (mut worst_low, mut worst_up) = ((f64::NAN, f64::NAN), (f64::NAN, f64::NAN));
    let mut n_points = 0;
    for p in points {
        let (lo, up) = (lower(p.t, p.r), upper(p.t, p.r));
        if !lo.is_finite() || !up.is_finite() {
            continue;
        }
        n_points += 1;
        let slack = slack_sigma * p.estimate.stderr;
        let above = (p.estimate.value - slack).max(0.0);
        let below = p.estimate.value + slack;
        if up > 0.0 && above / up > c_up {
            c_up = above / up;
            worst_up = (p.t, p.r);
        }
        let need = if below > 0.0 {
            lo / below
        } else if lo > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if need > c_low {
            c_low = need;
            worst_low = (p.t, p.r);
        }
    }
    let worst_point = if c_low >= c_up { worst_low } else { worst_up };
    SandwichResult {
        fitted_c_low: c_low,
        fitted_c_up: c_up,
        n_points,
        worst_point,
        threshold,
        pass: c_low <= threshold && c_up <= threshold,
    }
}
