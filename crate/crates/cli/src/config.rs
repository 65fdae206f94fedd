//! Experiment configuration: a JSON file overlaid by command-line flags.

use std::path::Path;

use hke_core::sim::SimConfig;
use hke_core::{EnvelopeParams, ScaleSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::verify::VerifyOptions;

/// Name accepted in place of a catalog kernel for the process that never moves.
pub const DEGENERATE: &str = "degenerate";

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub kernel: Option<String>,
    pub d: Option<usize>,
    pub envelope_params: Option<EnvelopeParams>,
    pub sim: Option<SimConfig>,
    pub verify: Option<VerifyOptions>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

/// Flags shared by all subcommands; `None` leaves the file value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kernel: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub kernel: String,
    /// Whether the kernel was named explicitly rather than defaulted.
    pub kernel_given: bool,
    pub d: usize,
    pub envelope: EnvelopeParams,
    pub sim: SimConfig,
    pub verify: VerifyOptions,
}

impl Settings {
    pub fn resolve(file: FileConfig, flags: &Overrides) -> CliResult<Self> {
        let kernel_given = flags.kernel.is_some() || file.kernel.is_some();
        let kernel = flags.kernel.clone().or(file.kernel).unwrap_or_else(|| "stable:1.5".to_string());
        let mut sim = file.sim.unwrap_or_default();
        let d = file.d.unwrap_or(sim.d);
        sim.d = d;
        sim.kernel = parse_kernel(&kernel)?;
        let mut envelope = file.envelope_params.unwrap_or_default();
        envelope.d = d;
        envelope.validate()?;
        let mut verify = file.verify.unwrap_or_default();
        if let Some(seed) = flags.seed {
            sim.base_seed = seed;
            verify.seed = seed;
        }
        if let Some(n) = flags.paths {
            if n == 0 {
                return Err(CliError::Config("--paths must be at least 1".into()));
            }
            sim.n_paths = n;
            verify.paths = Some(n);
        }
        if kernel_given && kernel != DEGENERATE {
            verify.kernel = Some(kernel.clone());
        }
        Ok(Self { kernel, kernel_given, d, envelope, sim, verify })
    }

    /// The catalog kernel, rejecting the degenerate process.
    pub fn analytic_kernel(&self) -> CliResult<&str> {
        if self.kernel == DEGENERATE {
            return Err(CliError::Config("the degenerate kernel has no scale function to analyze".into()));
        }
        Ok(&self.kernel)
    }
}

/// Catalog name or `degenerate`.
pub fn parse_kernel(name: &str) -> CliResult<Option<ScaleSpec>> {
    if name == DEGENERATE {
        Ok(None)
    } else {
        Ok(Some(ScaleSpec::from_catalog(name)?))
    }
}

/// Comma-separated list of numbers.
pub fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Config(format!("`{x}` is not a number"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig =
            serde_json::from_str(r#"{"kernel": "loginf:2", "d": 2, "sim": {"n_paths": 50, "base_seed": 3}}"#).unwrap();
        let flags = Overrides { seed: Some(9), ..Overrides::default() };
        let s = Settings::resolve(file, &flags).unwrap();
        assert_eq!(s.kernel, "loginf:2");
        assert_eq!((s.d, s.sim.d, s.envelope.d), (2, 2, 2));
        assert_eq!(s.sim.n_paths, 50);
        assert_eq!(s.sim.base_seed, 9);
        assert_eq!(s.verify.kernel.as_deref(), Some("loginf:2"));
    }

    #[test]
    fn defaults_and_degenerate() {
        let s = Settings::resolve(FileConfig::default(), &Overrides::default()).unwrap();
        assert_eq!(s.kernel, "stable:1.5");
        assert!(!s.kernel_given && s.verify.kernel.is_none());
        let flags = Overrides { kernel: Some("degenerate".into()), ..Overrides::default() };
        let s = Settings::resolve(FileConfig::default(), &flags).unwrap();
        assert!(s.sim.kernel.is_none());
        assert!(s.analytic_kernel().is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_lists() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"kernal": "x"}"#).is_err());
        assert_eq!(parse_list("1, 2.5,0").unwrap(), vec![1.0, 2.5, 0.0]);
        assert!(parse_list("1,a").is_err());
    }
}
