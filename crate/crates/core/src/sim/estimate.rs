//! Estimators over a finished [`SimRun`].

use serde::{Deserialize, Serialize};

use super::SimRun;
use crate::error::{Error, Result};
use crate::quad::{self, Improper};
use crate::scale::unit_ball_volume;

/// How an estimate was formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    HitFraction,
    TimeAverage,
    HistogramCell,
    SampleMean,
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub method: EstimateMethod,
}

impl MCEstimate {
    pub(crate) fn sample_mean(xs: impl Iterator<Item = f64>, method: EstimateMethod) -> Self {
        let v: Vec<f64> = xs.collect();
        let n = v.len();
        let mean = pairwise_sum(&v) / n as f64;
        let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&sq) / (n - 1) as f64 } else { 0.0 };
        Self { value: mean, stderr: (var / n as f64).sqrt(), n, method }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Order-fixed pairwise summation.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Hit fraction `k/n` with the half-width of the one-sigma Wilson interval
/// as its standard error.
pub fn wilson(k: usize, n: usize) -> MCEstimate {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = 1.0;
    let half = (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf);
    MCEstimate { value: p, stderr: half, n, method: EstimateMethod::HitFraction }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `P(|X_t| > r)` for each radius.
pub fn estimate_tail(run: &SimRun, t: f64, radii: &[f64]) -> Result<Vec<MCEstimate>> {
    let pos = run.positions_at(t)?;
    let norms: Vec<f64> = pos.iter().map(|p| norm(p)).collect();
    Ok(radii.iter().map(|&r| wilson(norms.iter().filter(|&&v| v > r).count(), norms.len())).collect())
}

/// Mean exit time from `B(0, r)` for one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeEstimate {
    pub radius: f64,
    pub estimate: MCEstimate,
    pub censored_fraction: f64,
}

/// Censoring fraction above which an exit-time estimate is rejected.
pub const MAX_CENSORED: f64 = 0.05;

/// Sample-mean exit times over the uncensored paths.
pub fn estimate_exit_time(run: &SimRun) -> Result<Vec<ExitTimeEstimate>> {
    run.config
        .exit_radii
        .iter()
        .enumerate()
        .map(|(k, &radius)| {
            let times: Vec<f64> = run.paths.iter().filter_map(|p| p.first_exit[k]).collect();
            let censored = 1.0 - times.len() as f64 / run.paths.len() as f64;
            if censored >= MAX_CENSORED || times.is_empty() {
                return Err(Error::HorizonTooShort { radius, censored });
            }
            Ok(ExitTimeEstimate {
                radius,
                estimate: MCEstimate::sample_mean(times.into_iter(), EstimateMethod::SampleMean),
                censored_fraction: censored,
            })
        })
        .collect()
}

/// Radial histogram of `X_t` as a density per unit volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialHistogram {
    pub t: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub cells: Vec<MCEstimate>,
    /// Mass inside the first edge and beyond the last edge.
    pub inner_mass: f64,
    pub outer_mass: f64,
    pub n: usize,
}

impl RadialHistogram {
    /// Volume of shell `i`.
    pub fn shell_volume(&self, i: usize, d: usize) -> f64 {
        unit_ball_volume::<f64>(d) * (self.edges[i + 1].powi(d as i32) - self.edges[i].powi(d as i32))
    }

    /// Geometric centre of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        (self.edges[i] * self.edges[i + 1]).sqrt()
    }
}

/// Histogram of `|X_t|` over the given increasing edges.
pub fn estimate_density_radial(run: &SimRun, t: f64, edges: &[f64]) -> Result<RadialHistogram> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || !(edges[0] >= 0.0) {
        return Err(Error::Config("histogram edges must be non-negative and increasing".into()));
    }
    let d = run.config.d;
    let pos = run.positions_at(t)?;
    let n = pos.len();
    let mut counts = vec![0usize; edges.len() - 1];
    let (mut inner, mut outer) = (0usize, 0usize);
    for p in &pos {
        let r = norm(p);
        if r < edges[0] {
            inner += 1;
        } else if r >= edges[edges.len() - 1] {
            outer += 1;
        } else {
            counts[edges.partition_point(|&e| e <= r) - 1] += 1;
        }
    }
    let vol = unit_ball_volume::<f64>(d);
    let cells = counts
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let shell = vol * (edges[i + 1].powi(d as i32) - edges[i].powi(d as i32));
            let f = wilson(k, n);
            MCEstimate { value: f.value / shell, stderr: f.stderr / shell, n, method: EstimateMethod::HistogramCell }
        })
        .collect();
    Ok(RadialHistogram {
        t,
        edges: edges.to_vec(),
        counts,
        cells,
        inner_mass: inner as f64 / n as f64,
        outer_mass: outer as f64 / n as f64,
        n,
    })
}

/// Total time spent in `B(0, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub radius: f64,
    pub estimate: MCEstimate,
    /// Mean occupation accumulated before the horizon.
    pub simulated: f64,
    /// Extrapolated occupation after the horizon.
    pub correction: f64,
}

/// Occupation time of `B(0, r)`, the horizon part simulated and the rest
/// extrapolated from the near-diagonal mass at the horizon, assuming
/// `p(s, 0) ∝ Φ⁻¹(s)^{-d}` beyond it.
pub fn occupation_time(run: &SimRun, radius: f64) -> Result<OccupationEstimate> {
    if radius <= 0.0 {
        let zero = MCEstimate { value: 0.0, stderr: 0.0, n: run.paths.len(), method: EstimateMethod::TimeAverage };
        return Ok(OccupationEstimate { radius, estimate: zero, simulated: 0.0, correction: 0.0 });
    }
    let k = run
        .config
        .occupation_radii
        .iter()
        .position(|&r| (r - radius).abs() <= 1e-12 * radius)
        .ok_or_else(|| Error::Config(format!("radius {radius} was not tracked")))?;
    let sim = MCEstimate::sample_mean(run.paths.iter().map(|p| p.occupation[k]), EstimateMethod::TimeAverage);
    if run.sampler.is_degenerate() {
        return Ok(OccupationEstimate { radius, estimate: sim, simulated: sim.value, correction: 0.0 });
    }
    let d = run.config.d;
    let di = d as i32;
    let horizon = run.config.horizon;
    let s = &run.sampler;
    let rho = s.phi_inv(horizon);
    let r0 = 0.5 * rho;
    let hits = run.paths.iter().filter(|p| norm(&p.final_position) < r0).count();
    let vol = unit_ball_volume::<f64>(d);
    let p0 = hits as f64 / (run.paths.len() as f64 * vol * r0.powi(di));
    // ∫_T^∞ (Φ⁻¹(T)/Φ⁻¹(s))^d ds = ρ^d d ∫_ρ^∞ u^{-d-1} Φ(u) du − T
    let tail = match quad::integrate_to_infinity(|u: f64| s.phi(u) * u.powi(-di - 1), rho)? {
        Improper::Finite { value, .. } => value,
        Improper::Divergent => return Err(Error::NotTransient { d, bound: f64::NAN }),
    };
    let weight = (rho.powi(di) * d as f64 * tail - horizon).max(0.0);
    let correction = vol * radius.powi(di) * p0 * weight;
    let rel = if hits > 0 { (1.0 / hits as f64).sqrt() } else { 1.0 };
    let stderr = (sim.stderr * sim.stderr + (correction * rel).powi(2)).sqrt();
    Ok(OccupationEstimate {
        radius,
        estimate: MCEstimate { value: sim.value + correction, stderr, n: sim.n, method: EstimateMethod::TimeAverage },
        simulated: sim.value,
        correction,
    })
}

/// Quantiles of the LIL statistic across paths at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilTrace {
    pub t: Vec<f64>,
    pub median: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

impl LilTrace {
    /// Median at checkpoint `t`.
    pub fn median_at(&self, t: f64) -> Result<f64> {
        self.t
            .iter()
            .position(|&c| (c - t).abs() <= 1e-12 * t)
            .map(|i| self.median[i])
            .ok_or(Error::CheckpointMissing(t))
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, w) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - w) + sorted[i + 1] * w
    } else {
        sorted[i]
    }
}

/// Median and quartiles of `max_{8≤s≤t} |X_s|/√(s log log s)` across paths.
pub fn lil_trace(run: &SimRun) -> Result<LilTrace> {
    if !run.config.track_lil {
        return Err(Error::Config("the run did not track the LIL statistic".into()));
    }
    let mut out = LilTrace { t: run.config.checkpoints.clone(), median: vec![], q25: vec![], q75: vec![] };
    for k in 0..out.t.len() {
        let mut v: Vec<f64> = run.paths.iter().map(|p| p.lil[k]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        out.median.push(quantile(&v, 0.5));
        out.q25.push(quantile(&v, 0.25));
        out.q75.push(quantile(&v, 0.75));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{run, CutoffSchedule, SimConfig};
    use super::*;
    use crate::scale::ScaleSpec;
    use std::f64::consts::PI;

    fn cauchy(n: usize, eps: f64, seed: u64) -> SimRun {
        run(&SimConfig {
            kernel: Some(ScaleSpec::power(1.0)),
            eps,
            schedule: CutoffSchedule::Fixed,
            n_paths: n,
            base_seed: seed,
            checkpoints: vec![1.0],
            ..SimConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn wilson_properties() {
        let e = wilson(50, 100);
        assert_eq!(e.value, 0.5);
        assert!((e.stderr - 0.05 / (1.01f64)).abs() < 1e-3);
        assert!(wilson(0, 10).stderr > 0.0);
    }

    #[test]
    fn cauchy_tail_and_symmetry() {
        let r = cauchy(20_000, 0.01, 7);
        let est = estimate_tail(&r, 1.0, &[0.0, PI, 10.0]).unwrap();
        assert_eq!(est[0].value, 1.0);
        assert!(est[1].within(0.5, 3.0), "{:?}", est[1]);
        // exact tail 1 − (2/π) arctan(r/π)
        let exact = 1.0 - 2.0 / PI * (10.0f64 / PI).atan();
        assert!(est[2].within(exact, 3.0), "{:?} vs {exact}", est[2]);
        assert!(matches!(estimate_tail(&r, 0.7, &[1.0]), Err(Error::CheckpointMissing(_))));
    }

    #[test]
    fn mean_position_is_zero() {
        let r = run(&SimConfig {
            kernel: Some(ScaleSpec::log_infty(2.0)),
            d: 2,
            n_paths: 4_000,
            horizon: 4.0,
            checkpoints: vec![1.0, 4.0],
            ..SimConfig::default()
        })
        .unwrap();
        for t in [1.0, 4.0] {
            for c in r.mean_position(t).unwrap() {
                assert!(c.within(0.0, 3.0), "{c:?}");
            }
        }
    }

    #[test]
    fn histogram_conserves_mass() {
        let r = cauchy(5_000, 0.02, 3);
        let edges: Vec<f64> = (0..=20).map(|i| 0.05 * 1.4f64.powi(i)).collect();
        let h = estimate_density_radial(&r, 1.0, &edges).unwrap();
        let mass: f64 = (0..h.cells.len()).map(|i| h.cells[i].value * h.shell_volume(i, 1)).sum();
        assert!((mass + h.inner_mass + h.outer_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halving_the_cutoff_is_invisible() {
        let a = cauchy(20_000, 0.02, 11);
        let b = cauchy(20_000, 0.01, 12);
        let radii = [2.0, 4.0, 8.0];
        let ea = estimate_tail(&a, 1.0, &radii).unwrap();
        let eb = estimate_tail(&b, 1.0, &radii).unwrap();
        for (x, y) in ea.iter().zip(&eb) {
            let s = (x.stderr.powi(2) + y.stderr.powi(2)).sqrt();
            assert!((x.value - y.value).abs() < 3.0 * s, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn exit_time_censoring() {
        let r = run(&SimConfig { n_paths: 50, horizon: 1.0, exit_radii: vec![1e3], ..SimConfig::default() }).unwrap();
        assert!(matches!(estimate_exit_time(&r), Err(Error::HorizonTooShort { .. })));
    }

    #[test]
    fn occupation_of_empty_ball_is_zero() {
        let r = run(&SimConfig {
            d: 2,
            n_paths: 20,
            horizon: 10.0,
            checkpoints: vec![],
            occupation_radii: vec![1.0],
            ..SimConfig::default()
        })
        .unwrap();
        assert_eq!(occupation_time(&r, 0.0).unwrap().estimate.value, 0.0);
        let o = occupation_time(&r, 1.0).unwrap();
        assert!(o.estimate.value > 0.0 && o.correction >= 0.0);
    }
}
