//! TOML configuration files for the command-line tool.
//!
//! ```toml
//! [experiment]
//! mode = "wdm_delayed"
//! power_dbm = 10.0
//! detuning_ghz = -25.0
//!
//! [experiment.cavity]
//! tau_thermal_s = 65e-9
//!
//! [sweep]
//! grid = "9x9"
//! workers = 4
//! beta_grid = [0.1, 0.25, 0.5, 1.0]
//! ```
//!
//! Omitted keys take their defaults; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::sweep::{parse_grid_shape, GridAxis, SweepSpec};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// `RxC` over the standard ranges; ignored when both axes are given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<GridAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_ghz: Option<GridAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// When set, a global β is chosen from these candidates before the sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Vec<f64>>,
    pub allow_out_of_range: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfigFile {
    pub experiment: ExperimentConfig,
    pub sweep: SweepSection,
}

impl CliConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Sweep description with the grid resolved. Explicit axes win over
    /// `grid`; without either the 9 × 9 default applies.
    pub fn sweep_spec(&self, out_dir: Option<PathBuf>, resume: bool) -> Result<SweepSpec> {
        let (r, c) = match &self.sweep.grid {
            Some(g) => parse_grid_shape(g)?,
            None => (9, 9),
        };
        let mut spec = SweepSpec::with_shape(self.experiment.clone(), r, c)?;
        if let Some(a) = self.sweep.power_dbm {
            spec.power_dbm = a;
        }
        if let Some(a) = self.sweep.detuning_ghz {
            spec.detuning_ghz = a;
        }
        spec.workers = self.sweep.workers.unwrap_or(1);
        spec.allow_out_of_range = self.sweep.allow_out_of_range;
        spec.out_dir = out_dir;
        spec.resume = resume;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Mode;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(CliConfigFile::parse("").unwrap(), CliConfigFile::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = CliConfigFile::parse("[experiment]\npower_mw = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("power_mw"), "{err}");
        assert!(CliConfigFile::parse("[experiment.cavity]\ntau_thermal = 1e-9\n").is_err());
    }

    #[test]
    fn partial_file() {
        let cfg = CliConfigFile::parse(
            "[experiment]\nmode = \"single_feedback\"\ndetuning_ghz = -25\n\n[experiment.feedback]\nphase_rad = 1.5\n\n[sweep]\ngrid = \"3x5\"\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment.mode, Mode::SingleFeedback);
        assert_eq!(cfg.experiment.detuning_ghz, -25.0);
        assert_eq!(cfg.experiment.feedback.phase, 1.5);
        assert_eq!(cfg.experiment.feedback.attenuation, 0.99);
        assert_eq!(cfg.sweep_spec(None, false).unwrap().shape(), (3, 5));
    }

    #[test]
    fn printed_config_reproduces_fingerprint() {
        let mut cfg = CliConfigFile::default();
        cfg.experiment.power_dbm = 7.5;
        cfg.experiment.cavity.tau_carrier = 2e-9;
        cfg.sweep.beta_grid = Some(vec![0.1, 0.2]);
        let text = cfg.to_toml().unwrap();
        let back = CliConfigFile::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.experiment.fingerprint(), cfg.experiment.fingerprint());
    }

    #[test]
    fn missing_file_names_path() {
        let err = CliConfigFile::load(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.toml"));
    }
}
