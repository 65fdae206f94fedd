//! The subcommands. Each returns the report it wrote, so callers and tests
//! can inspect results without parsing files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hke_core::scaling::ScalingMode;
use hke_core::sim::{self, estimate_exit_time, estimate_tail, lil_trace, occupation_time};
use hke_core::{
    check_integrability, check_scale_calculus, comparability_report, estimate_scaling, estimate_scaling_with_nodes,
    evaluate_envelopes, DerivedScalesF64, EnvelopeVariant, KVariant, ScaleFunctionF64,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_kernel, Settings};
use crate::error::{CliError, CliResult};
use crate::verify::{lil_config, preset, CriterionOutcome};

pub const SCHEMA: &str = "hke-lab/1";

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: &'static str,
    pub kernel: String,
    pub d: usize,
    pub seed: u64,
    pub result: Value,
    /// Files written next to the report.
    pub files: Vec<String>,
}

/// Where the outputs of one invocation go.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, command: &'static str, s: &Settings, seed: u64, result: Value) -> CliResult<Report> {
        self.files.push("report.json".into());
        let report =
            Report { schema: SCHEMA, command, kernel: s.kernel.clone(), d: s.d, seed, result, files: self.files };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(self.dir.join("report.json"), text)?;
        Ok(report)
    }
}

/// Integrability, scaling certificates, comparability and the calculus checks.
pub fn analyze(s: &Settings, range: (f64, f64), out: Output) -> CliResult<Report> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Config(format!("range [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let psi = ScaleFunctionF64::from_catalog(s.analytic_kernel()?)?;
    let integrability = check_integrability(&psi)?;
    let ds = DerivedScalesF64::new(&psi, s.d)?;
    let psi_cert = estimate_scaling_with_nodes(|r: f64| psi.eval(r), lo, hi, ScalingMode::Global, 16, &psi.kinks())?;
    let phi_cert = estimate_scaling(|r: f64| ds.phi(r).unwrap_or(f64::NAN), lo, hi, ScalingMode::Global, 16)?;
    let comparability = comparability_report(&ds, lo, hi)?;
    let calculus = check_scale_calculus(&ds, 2_000, s.verify.seed)?;
    let table = |w: KVariant| match ds.missing_reason(w) {
        None => json!({ "available": true }),
        Some(e) => json!({ "available": false, "reason": e.to_string() }),
    };
    let result = json!({
        "integrability": integrability,
        "psi_scaling": psi_cert,
        "phi_scaling": phi_cert,
        "comparability": comparability,
        "delta_certificate": ds.delta_cert,
        "delta_certificate_infinity": ds.delta_cert_inf,
        "k_table": table(KVariant::K),
        "k_inf_table": table(KVariant::KInf),
        "calculus": calculus,
        "calculus_pass": calculus.pass(),
    });
    out.finish("analyze", s, s.verify.seed, result)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Envelope table over the grid `t × r`.
pub fn envelope(s: &Settings, ts: &[f64], rs: &[f64], variant: EnvelopeVariant, mut out: Output) -> CliResult<Report> {
    if ts.iter().any(|&t| !(t > 0.0)) || rs.iter().any(|&r| !(r >= 0.0)) {
        return Err(CliError::Config("t must be positive and r non-negative".into()));
    }
    let ds = DerivedScalesF64::new(&ScaleFunctionF64::from_catalog(s.analytic_kernel()?)?, s.d)?;
    let explicit = match variant {
        EnvelopeVariant::K => Some(KVariant::K),
        EnvelopeVariant::KInf => Some(KVariant::KInf),
        EnvelopeVariant::Auto => None,
    };
    if let Some(w) = explicit {
        if let Some(e) = ds.missing_reason(w) {
            let table = if w == KVariant::K { "𝒦" } else { "𝒦_∞" };
            return Err(hke_core::Error::MissingTable(format!("{table} certificate is absent: {e}")).into());
        }
    }
    let mut csv = String::from(
        "t,r,upper_exp,lower_basic,upper_K,lower_K,gaussian_lower,gaussian_upper,tail_upper,tail_lower,exp_ratio_F4\n",
    );
    for &t in ts {
        for &r in rs {
            let e = evaluate_envelopes(&ds, &s.envelope, t, r, variant)?;
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.t,
                e.r,
                e.upper_exp,
                e.lower_basic,
                cell(e.upper_k),
                cell(e.lower_k),
                e.gaussian_lower,
                e.gaussian_upper,
                cell(e.tail_upper),
                e.tail_lower,
                cell(e.exp_ratio_f4)
            )
            .unwrap();
        }
    }
    out.write("envelope.csv", &csv)?;
    let result = json!({ "rows": ts.len() * rs.len(), "variant": variant, "params": s.envelope });
    out.finish("envelope", s, s.verify.seed, result)
}

/// Monte Carlo run with checkpoint positions, tail fractions, exit times and
/// occupation times.
pub fn simulate(s: &Settings, tail_radii: &[f64], mut out: Output) -> CliResult<Report> {
    let cfg = &s.sim;
    let run = sim::run(cfg)?;
    let d = cfg.d;

    let mut csv = String::from("path_id,t");
    for i in 1..=d {
        write!(csv, ",x{i}").unwrap();
    }
    csv.push('\n');
    for (id, p) in run.paths.iter().enumerate() {
        for (k, t) in cfg.checkpoints.iter().enumerate() {
            write!(csv, "{id},{t}").unwrap();
            for x in &p.positions[k * d..(k + 1) * d] {
                write!(csv, ",{x}").unwrap();
            }
            csv.push('\n');
        }
    }
    out.write("checkpoints.csv", &csv)?;

    let mut csv = String::from("t,r,value,stderr\n");
    for &t in &cfg.checkpoints {
        for (r, e) in tail_radii.iter().zip(estimate_tail(&run, t, tail_radii)?) {
            writeln!(csv, "{t},{r},{},{}", e.value, e.stderr).unwrap();
        }
    }
    out.write("tails.csv", &csv)?;

    let mut exits = Vec::new();
    if !cfg.exit_radii.is_empty() {
        exits = estimate_exit_time(&run)?;
        let mut csv = String::from("radius,mean,stderr,censored_fraction\n");
        for e in &exits {
            writeln!(csv, "{},{},{},{}", e.radius, e.estimate.value, e.estimate.stderr, e.censored_fraction).unwrap();
        }
        out.write("exits.csv", &csv)?;
    }
    let mut occupation = Vec::new();
    if !cfg.occupation_radii.is_empty() {
        let mut csv = String::from("radius,value,stderr,simulated,correction\n");
        for &r in &cfg.occupation_radii {
            let o = occupation_time(&run, r)?;
            writeln!(csv, "{r},{},{},{},{}", o.estimate.value, o.estimate.stderr, o.simulated, o.correction).unwrap();
            occupation.push(o);
        }
        out.write("occupation.csv", &csv)?;
    }
    let result = json!({
        "config": cfg,
        "mean_events": run.mean_events(),
        "lambda_base": run.sampler.lambda(cfg.eps),
        "exits": exits,
        "occupation": occupation,
    });
    out.finish("simulate", s, cfg.base_seed, result)
}

/// Runs the criteria of a preset. Fails with [`CliError::CriteriaFailed`]
/// after writing the report if any criterion fails.
pub fn verify(s: &Settings, preset_name: &str, out: Output) -> CliResult<(Report, Vec<CriterionOutcome>)> {
    let criteria = preset(preset_name)?;
    let mut outcomes = Vec::new();
    for c in criteria {
        let o = c.run(&s.verify)?;
        println!("{}", o.line());
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    let result = json!({
        "preset": preset_name,
        "options": s.verify,
        "passed": outcomes.len() - failed,
        "failed": failed,
        "criteria": outcomes,
    });
    let report = out.finish("verify", s, s.verify.seed, result)?;
    if failed > 0 {
        return Err(CliError::CriteriaFailed { failed, total: outcomes.len() });
    }
    Ok((report, outcomes))
}

/// Median trace of the LIL statistic at `t = 2^k`.
pub fn lil(s: &Settings, k_max: i32, n_paths: usize, mut out: Output) -> CliResult<Report> {
    let cfg = lil_config(parse_kernel(&s.kernel)?, k_max, n_paths, s.sim.base_seed)?;
    let trace = lil_trace(&sim::run(&cfg)?)?;
    let mut csv = String::from("k,t,median_stat,q25,q75\n");
    for (i, t) in trace.t.iter().enumerate() {
        writeln!(csv, "{},{t},{},{},{}", 3 + i, trace.median[i], trace.q25[i], trace.q75[i]).unwrap();
    }
    out.write("lil.csv", &csv)?;
    let result = json!({ "k_max": k_max, "n_paths": n_paths, "trace": trace });
    out.finish("lil", s, cfg.base_seed, result)
}
