//! Weak scaling certificates: indices and constants in
//! `c_L (R/r)^β₁ ≤ f(R)/f(r) ≤ c_U (R/r)^β₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Minimum ratio `R/r` of the grid pairs used for the index extrema.
pub const INDEX_PAIR_RATIO: f64 = 2.0;

/// Smallest reported residual.
pub const RESIDUAL_FLOOR: f64 = 1e-9;

/// Region on which a scaling condition is asserted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "a", rename_all = "snake_case")]
pub enum ScalingMode {
    /// `r ≤ R ≤ a`.
    NearZero(f64),
    /// `a ≤ r ≤ R`.
    NearInfty(f64),
    Global,
}

/// Estimated weak scaling indices and constants over `range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCertificate {
    pub mode: ScalingMode,
    pub beta_lower: f64,
    pub beta_upper: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub range: [f64; 2],
    pub residual: f64,
}

impl ScalingCertificate {
    /// Largest relative violation of the certificate by the pair `(r, R)`.
    pub fn violation(&self, r: f64, big_r: f64, f_r: f64, f_big_r: f64) -> f64 {
        let x = big_r / r;
        let ratio = f_big_r / f_r;
        let lower = self.c_lower * x.powf(self.beta_lower);
        let upper = self.c_upper * x.powf(self.beta_upper);
        (lower / ratio - 1.0).max(ratio / upper - 1.0).max(0.0)
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.range[0] * (1.0 - 1e-12) && r <= self.range[1] * (1.0 + 1e-12)
    }
}

/// Log-spaced grid with `per_decade` points per decade covering `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64 - 1e-9).ceil() as usize).max(1);
    let (a, b) = (lo.ln(), hi.ln());
    (0..=n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n {
                hi
            } else {
                (a + (b - a) * i as f64 / n as f64).exp()
            }
        })
        .collect()
}

/// Estimates a scaling certificate for `f` on `[lo, hi]` restricted by `mode`.
///
/// Indices are the extreme log-log slopes over grid pairs with `R/r ≥ 2`;
/// the constants are then fitted over all pairs, and the residual is the
/// worst violation when the certificate is replayed on a staggered grid.
pub fn estimate_scaling<T: Real>(
    f: impl Fn(T) -> T,
    lo: f64,
    hi: f64,
    mode: ScalingMode,
    per_decade: usize,
) -> Result<ScalingCertificate> {
    estimate_scaling_with_nodes(f, lo, hi, mode, per_decade, &[])
}

/// [`estimate_scaling`] with extra grid nodes, typically the kinks of `f`.
pub fn estimate_scaling_with_nodes<T: Real>(
    f: impl Fn(T) -> T,
    lo: f64,
    hi: f64,
    mode: ScalingMode,
    per_decade: usize,
    extra: &[f64],
) -> Result<ScalingCertificate> {
    let (lo, hi) = match mode {
        ScalingMode::NearZero(a) => (lo, hi.min(a)),
        ScalingMode::NearInfty(a) => (lo.max(a), hi),
        ScalingMode::Global => (lo, hi),
    };
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::RangeTooNarrow(format!("empty range [{lo}, {hi}]")));
    }
    if mode != ScalingMode::Global && hi / lo < 100.0 {
        return Err(Error::RangeTooNarrow(format!(
            "[{lo}, {hi}] spans {:.2} decades, need at least 2",
            (hi / lo).log10()
        )));
    }
    let per_decade = per_decade.max(16);
    let eval = |r: f64| -> Result<f64> {
        let v = f(T::lit(r)).as_f64();
        if v > 0.0 && v.is_finite() {
            Ok(v.ln())
        } else {
            Err(Error::SpecInvalid(format!("function value {v} at r={r} is not positive and finite")))
        }
    };
    let mut grid = log_grid(lo, hi, per_decade);
    grid.extend(extra.iter().copied().filter(|&x| x > lo && x < hi));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let lx: Vec<f64> = grid.iter().map(|r| r.ln()).collect();
    let ly = grid.iter().map(|&r| eval(r)).collect::<Result<Vec<f64>>>()?;

    let min_gap = INDEX_PAIR_RATIO.ln() * (1.0 - 1e-12);
    let (mut b_lo, mut b_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..lx.len() {
        for j in i + 1..lx.len() {
            let gap = lx[j] - lx[i];
            if gap >= min_gap {
                let s = (ly[j] - ly[i]) / gap;
                b_lo = b_lo.min(s);
                b_hi = b_hi.max(s);
            }
        }
    }
    if !b_lo.is_finite() {
        // range shorter than the pair ratio: fall back to adjacent slopes
        for i in 0..lx.len() - 1 {
            let s = (ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i]);
            b_lo = b_lo.min(s);
            b_hi = b_hi.max(s);
        }
    }

    // The constants are extreme drawdowns of h = log f − β log r. Between
    // grid nodes h can overshoot its node values, so local extrema are
    // refined before the scan.
    let log_f = |x: f64| eval(x.exp()).unwrap_or(f64::NAN);
    let lower_gap = extreme_drawdown(&lx, &ly, b_lo, &log_f, Direction::Fall);
    let upper_gap = extreme_drawdown(&lx, &ly, b_hi, &log_f, Direction::Rise);
    let (c_lower, c_upper) = ((-lower_gap).exp(), upper_gap.exp());
    let mut cert = ScalingCertificate {
        mode,
        beta_lower: b_lo,
        beta_upper: b_hi,
        c_lower: c_lower.min(1.0),
        c_upper: c_upper.max(1.0),
        range: [lo, hi],
        residual: 0.0,
    };

    // replay on the grid refined by midpoints
    let mut fine: Vec<f64> = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        fine.push(w[0]);
        fine.push((0.5 * (w[0].ln() + w[1].ln())).exp());
    }
    fine.push(hi);
    let fy = fine.iter().map(|&r| eval(r).map(f64::exp)).collect::<Result<Vec<f64>>>()?;
    let mut worst = 0.0f64;
    for i in 0..fine.len() {
        for j in i + 1..fine.len() {
            worst = worst.max(cert.violation(fine[i], fine[j], fy[i], fy[j]));
        }
    }
    cert.residual = worst.max(RESIDUAL_FLOOR);
    Ok(cert)
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    /// Largest `h(r) − h(R)` over `r ≤ R`.
    Fall,
    /// Largest `h(R) − h(r)` over `r ≤ R`.
    Rise,
}

/// Golden-section search for the extreme of `g` on `[a, b]`.
fn golden_extreme(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, maximize: bool) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let better = |u: f64, v: f64| if maximize { u > v } else { u < v };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if better(gc, gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    if maximize {
        gc.max(gd)
    } else {
        gc.min(gd)
    }
}

/// Largest fall or rise of `h(x) = log_f(x) − β x` over ordered pairs,
/// with interior local extrema of the sampled `h` refined between their
/// neighbours. Always at least 0.
fn extreme_drawdown(lx: &[f64], ly: &[f64], beta: f64, log_f: &impl Fn(f64) -> f64, dir: Direction) -> f64 {
    let n = lx.len();
    let h: Vec<f64> = lx.iter().zip(ly).map(|(x, y)| y - beta * x).collect();
    let g = |x: f64| log_f(x) - beta * x;
    // start points want high values for a fall, low values for a rise
    let (mut start, mut end) = (h.clone(), h.clone());
    for i in 1..n.saturating_sub(1) {
        let is_max = h[i] >= h[i - 1] && h[i] >= h[i + 1];
        let is_min = h[i] <= h[i - 1] && h[i] <= h[i + 1];
        if is_max {
            let v = golden_extreme(&g, lx[i - 1], lx[i + 1], true).max(h[i]);
            if v.is_finite() {
                if dir == Direction::Fall {
                    start[i] = v;
                } else {
                    end[i] = v;
                }
            }
        }
        if is_min {
            let v = golden_extreme(&g, lx[i - 1], lx[i + 1], false).min(h[i]);
            if v.is_finite() {
                if dir == Direction::Fall {
                    end[i] = v;
                } else {
                    start[i] = v;
                }
            }
        }
    }
    let mut best = 0.0f64;
    let mut anchor = start[0];
    for j in 1..n {
        let gap = match dir {
            Direction::Fall => anchor - end[j],
            Direction::Rise => end[j] - anchor,
        };
        best = best.max(gap);
        anchor = match dir {
            Direction::Fall => anchor.max(start[j]),
            Direction::Rise => anchor.min(start[j]),
        };
    }
    best
}
