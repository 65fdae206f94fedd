//! Monte Carlo simulation of the isotropic pure-jump process with Lévy
//! density `1/(r^d ψ(r))`.
//!
//! Jumps above a cutoff `ε` form a compound Poisson process; jumps below it
//! are replaced by a Brownian motion with the same covariance. With the
//! adaptive schedule `ε` follows the length scale that matters at the
//! current state (distance to a watched sphere, `Φ⁻¹` of the next
//! checkpoint), which keeps the event count per path logarithmic in the
//! horizon.

mod estimate;
mod sampler;

pub use estimate::{
    estimate_density_radial, estimate_exit_time, estimate_tail, lil_trace, occupation_time, wilson, EstimateMethod,
    ExitTimeEstimate, LilTrace, MCEstimate, OccupationEstimate, RadialHistogram,
};
pub use sampler::JumpSampler;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::{ScaleFunction, ScaleSpec};
use crate::scaling::{estimate_scaling, ScalingMode};

/// Fixed-cutoff runs whose expected jump count per path exceeds this are rejected.
pub const MAX_EXPECTED_JUMPS: f64 = 1e6;

/// First time at which the LIL statistic `|X_s| / √(s log log s)` is tracked.
pub const LIL_START: f64 = 8.0;

/// How the small-jump cutoff evolves along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffSchedule {
    /// `ε` stays at the configured base cutoff.
    Fixed,
    /// `ε = max(eps, κ L)` with `L` the smallest watched length scale at the
    /// current state.
    Adaptive { kappa: f64 },
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// `None` simulates the degenerate process that never moves.
    pub kernel: Option<ScaleSpec>,
    pub d: usize,
    /// Base (smallest) cutoff.
    pub eps: f64,
    pub schedule: CutoffSchedule,
    pub horizon: f64,
    pub n_paths: usize,
    pub base_seed: u64,
    /// Absolute cap on the time between observations of a watched path.
    pub dt_bridge: Option<f64>,
    /// Observation gap as a fraction of `Φ(ε)`.
    pub gap_factor: f64,
    pub checkpoints: Vec<f64>,
    pub exit_radii: Vec<f64>,
    pub occupation_radii: Vec<f64>,
    pub track_lil: bool,
    pub compensate_small: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            kernel: Some(ScaleSpec::power(1.5)),
            d: 1,
            eps: 1e-3,
            schedule: CutoffSchedule::Adaptive { kappa: 0.05 },
            horizon: 1.0,
            n_paths: 1000,
            base_seed: 0,
            dt_bridge: None,
            gap_factor: 0.25,
            checkpoints: vec![1.0],
            exit_radii: Vec::new(),
            occupation_radii: Vec::new(),
            track_lil: false,
            compensate_small: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d == 0 {
            return bad("dimension must be positive".into());
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("cutoff eps = {} must lie in (0, 1)", self.eps));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon {} must be positive and finite", self.horizon));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if let CutoffSchedule::Adaptive { kappa } = self.schedule {
            if !(kappa > 0.0 && kappa <= 1.0) {
                return bad(format!("kappa = {kappa} must lie in (0, 1]"));
            }
        }
        if !(self.gap_factor > 0.0) || self.dt_bridge.is_some_and(|b| !(b > 0.0)) {
            return bad("observation gaps must be positive".into());
        }
        if self.checkpoints.iter().any(|&t| !(t > 0.0 && t <= self.horizon))
            || self.checkpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("checkpoints must be increasing and lie in (0, horizon]".into());
        }
        if self.exit_radii.iter().chain(&self.occupation_radii).any(|&r| !(r > 0.0 && r.is_finite())) {
            return bad("watched radii must be positive".into());
        }
        Ok(())
    }

    fn watched(&self) -> bool {
        !self.exit_radii.is_empty() || !self.occupation_radii.is_empty() || self.track_lil
    }
}

/// Everything recorded along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    /// Positions at the checkpoints, `d` coordinates each.
    pub positions: Vec<f64>,
    /// First exit time from `B(0, r)` per exit radius, `None` if censored.
    pub first_exit: Vec<Option<f64>>,
    /// Time spent in `B(0, r)` up to the horizon, per occupation radius.
    pub occupation: Vec<f64>,
    /// Running maximum of the LIL statistic at the checkpoints.
    pub lil: Vec<f64>,
    pub final_position: Vec<f64>,
    /// Number of simulation steps taken.
    pub events: u64,
}

/// Cached per-cutoff quantities.
struct Rates {
    eps: f64,
    lambda: f64,
    sigma: f64,
    cap: f64,
    level: f64,
}

fn rates(sampler: &JumpSampler, cfg: &SimConfig, eps: f64) -> Rates {
    let cap = if cfg.watched() {
        (cfg.gap_factor * sampler.phi(eps)).min(cfg.dt_bridge.unwrap_or(f64::INFINITY))
    } else {
        f64::INFINITY
    };
    Rates { eps, lambda: sampler.lambda(eps), sigma: sampler.sigma2(eps).sqrt(), cap, level: sampler.tail_level(eps) }
}

fn direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    match out.len() {
        1 => out[0] = if rng.gen::<bool>() { 1.0 } else { -1.0 },
        2 => {
            let th = rng.gen::<f64>() * std::f64::consts::TAU;
            out[0] = th.cos();
            out[1] = th.sin();
        }
        _ => loop {
            let mut n2 = 0.0;
            for v in out.iter_mut() {
                *v = rng.sample(StandardNormal);
                n2 += *v * *v;
            }
            if n2 > 1e-300 {
                let n = n2.sqrt();
                out.iter_mut().for_each(|v| *v /= n);
                break;
            }
        },
    }
}

/// Simulates path `path_id`; deterministic in `(cfg.base_seed, path_id)`.
pub fn simulate_path(sampler: &JumpSampler, cfg: &SimConfig, path_id: u64) -> PathRecord {
    let d = cfg.d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
    rng.set_stream(path_id);
    let n_ck = cfg.checkpoints.len();
    let mut rec = PathRecord {
        positions: Vec::with_capacity(n_ck * d),
        first_exit: vec![None; cfg.exit_radii.len()],
        occupation: vec![0.0; cfg.occupation_radii.len()],
        lil: Vec::with_capacity(if cfg.track_lil { n_ck } else { 0 }),
        final_position: Vec::new(),
        events: 0,
    };
    let mut x = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let mut t = 0.0f64;
    let mut ck = 0;
    let mut exits_left = cfg.exit_radii.len();
    let mut lil_max = 0.0f64;
    let mut ck_scale = cfg.checkpoints.first().map(|&s| sampler.phi_inv(s)).unwrap_or(f64::INFINITY);
    let mut cached = rates(sampler, cfg, cfg.eps);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();

    let note_exits = |rec: &mut PathRecord, exits_left: &mut usize, r: f64, at: f64| {
        for (slot, &radius) in rec.first_exit.iter_mut().zip(&cfg.exit_radii) {
            if slot.is_none() && r > radius {
                *slot = Some(at);
                *exits_left -= 1;
            }
        }
    };
    let lil_stat = |s: f64, r: f64| if s >= LIL_START { r / (s * s.ln().ln()).sqrt() } else { 0.0 };

    loop {
        let r_now = norm(&x);
        let eps = match cfg.schedule {
            CutoffSchedule::Fixed => cfg.eps,
            CutoffSchedule::Adaptive { kappa } => {
                let mut scale = if ck < n_ck { ck_scale } else { f64::INFINITY };
                for (slot, &radius) in rec.first_exit.iter().zip(&cfg.exit_radii) {
                    if slot.is_none() {
                        scale = scale.min(radius - r_now);
                    }
                }
                for &radius in &cfg.occupation_radii {
                    scale = scale.min((r_now - radius).abs());
                }
                if cfg.track_lil {
                    scale = scale.min(sampler.phi_inv(t.max(1.0)));
                }
                (kappa * scale).clamp(cfg.eps, 1e12)
            }
        };
        if eps != cached.eps {
            cached = rates(sampler, cfg, eps);
        }
        let t_ck = cfg.checkpoints.get(ck).copied().unwrap_or(f64::INFINITY);
        let stop = cfg.horizon.min(t_ck).min(t + cached.cap);
        let t_jump = if cached.lambda > 0.0 { t + rng.sample::<f64, _>(Exp1) / cached.lambda } else { f64::INFINITY };
        let jump = t_jump < stop;
        let t_next = if jump { t_jump } else { stop };
        let dt = t_next - t;
        if cached.sigma > 0.0 && dt > 0.0 {
            let s = cached.sigma * dt.sqrt();
            for v in x.iter_mut() {
                *v += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let r_mid = norm(&x);
        for (acc, &radius) in rec.occupation.iter_mut().zip(&cfg.occupation_radii) {
            *acc += 0.5 * dt * (f64::from(u8::from(r_now < radius)) + f64::from(u8::from(r_mid < radius)));
        }
        t = t_next;
        rec.events += 1;
        if exits_left > 0 {
            note_exits(&mut rec, &mut exits_left, r_mid, t - 0.5 * dt);
        }
        if cfg.track_lil {
            lil_max = lil_max.max(lil_stat(t, r_mid));
        }
        if jump {
            let e: f64 = rng.sample(Exp1);
            let radius = sampler.radius_from_exp(cached.level, e).max(cached.eps);
            direction(&mut rng, &mut theta);
            for (v, th) in x.iter_mut().zip(&theta) {
                *v += radius * th;
            }
            let r_new = norm(&x);
            if exits_left > 0 {
                note_exits(&mut rec, &mut exits_left, r_new, t);
            }
            if cfg.track_lil {
                lil_max = lil_max.max(lil_stat(t, r_new));
            }
        } else if t == t_ck {
            rec.positions.extend_from_slice(&x);
            if cfg.track_lil {
                rec.lil.push(lil_max);
            }
            ck += 1;
            if let Some(&next) = cfg.checkpoints.get(ck) {
                ck_scale = sampler.phi_inv(next);
            }
        }
        if t >= cfg.horizon {
            break;
        }
        if ck == n_ck && exits_left == 0 && cfg.occupation_radii.is_empty() && !cfg.track_lil {
            break;
        }
    }
    rec.final_position = x;
    rec
}

/// Paths of one simulation together with the sampler that produced them.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub config: SimConfig,
    pub sampler: JumpSampler,
    pub paths: Vec<PathRecord>,
}

impl SimRun {
    /// Average number of simulation steps per path.
    pub fn mean_events(&self) -> f64 {
        self.paths.iter().map(|p| p.events as f64).sum::<f64>() / self.paths.len() as f64
    }

    pub(crate) fn checkpoint_index(&self, t: f64) -> Result<usize> {
        self.config
            .checkpoints
            .iter()
            .position(|&c| (c - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::CheckpointMissing(t))
    }

    /// Position coordinates of every path at checkpoint `t`.
    pub fn positions_at(&self, t: f64) -> Result<Vec<&[f64]>> {
        let k = self.checkpoint_index(t)?;
        let d = self.config.d;
        Ok(self.paths.iter().map(|p| &p.positions[k * d..(k + 1) * d]).collect())
    }

    /// Per-coordinate sample mean of the position at checkpoint `t`.
    pub fn mean_position(&self, t: f64) -> Result<Vec<MCEstimate>> {
        let pos = self.positions_at(t)?;
        Ok((0..self.config.d)
            .map(|i| MCEstimate::sample_mean(pos.iter().map(|p| p[i]), EstimateMethod::SampleMean))
            .collect())
    }
}

/// Builds the sampler for `cfg`.
pub fn build_sampler(cfg: &SimConfig) -> Result<JumpSampler> {
    match &cfg.kernel {
        Some(spec) => {
            let psi = ScaleFunction::<f64>::new(spec.clone())?;
            JumpSampler::build(&psi, cfg.d, cfg.eps, cfg.compensate_small)
        }
        None => Ok(JumpSampler::degenerate(cfg.d)),
    }
}

/// Runs every path of `cfg` in parallel; the result does not depend on the
/// number of threads.
pub fn run(cfg: &SimConfig) -> Result<SimRun> {
    cfg.validate()?;
    if !cfg.occupation_radii.is_empty() {
        check_transient(cfg)?;
    }
    let sampler = build_sampler(cfg)?;
    if cfg.schedule == CutoffSchedule::Fixed {
        let expected = sampler.lambda_eps * cfg.horizon;
        if expected > MAX_EXPECTED_JUMPS {
            return Err(Error::Config(format!(
                "fixed cutoff {} gives {expected:.3e} expected jumps per path; raise eps or use the adaptive schedule",
                cfg.eps
            )));
        }
    }
    let paths = (0..cfg.n_paths as u64).into_par_iter().map(|i| simulate_path(&sampler, cfg, i)).collect();
    Ok(SimRun { config: cfg.clone(), sampler, paths })
}

/// Occupation times are finite only when `d > min(β₂, 2)`.
fn check_transient(cfg: &SimConfig) -> Result<()> {
    let Some(spec) = &cfg.kernel else {
        return Ok(());
    };
    let psi = ScaleFunction::<f64>::new(spec.clone())?;
    let cert = estimate_scaling(|r| psi.eval(r), 1e-4, 1e6, ScalingMode::Global, 16)?;
    let bound = cert.beta_upper.min(2.0);
    if cfg.d as f64 <= bound {
        return Err(Error::NotTransient { d: cfg.d, bound });
    }
    Ok(())
}
