//! Run configuration: one JSON document, units spelled out in key names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dissipation::{LifetimeConvention, RateOptions};
use crate::error::{Error, Result};
use crate::field::{make_train, subpulse_spacing_fs, PulseTrain, SigmaFraction};
use crate::propagator::{Flags, IntegratorConfig};
use crate::structure::EdgeRule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_nm: f64,
    pub n_pulses: usize,
    pub sigma_fraction: SigmaFraction,
    pub e0_au: f64,
    pub omega_ev: f64,
    #[serde(default = "default_polarization")]
    pub polarization: [f64; 3],
    /// Center of the first subpulse; defaults to 6σ so the train starts
    /// from zero field.
    #[serde(default)]
    pub t_first_fs: Option<f64>,
}

fn default_polarization() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl TrainConfig {
    pub fn sigma_fs(&self) -> f64 {
        self.sigma_fraction.value() * 2.0 * subpulse_spacing_fs(self.lambda_nm)
    }

    pub fn t_first(&self) -> f64 {
        self.t_first_fs.unwrap_or(6.0 * self.sigma_fs())
    }

    /// Center of the last subpulse, fs.
    pub fn t_last(&self) -> f64 {
        self.t_first() + self.n_pulses.saturating_sub(1) as f64 * subpulse_spacing_fs(self.lambda_nm)
    }

    pub fn build(&self) -> Result<PulseTrain> {
        make_train(
            self.lambda_nm,
            self.n_pulses,
            self.sigma_fraction,
            self.e0_au,
            self.omega_ev,
            self.polarization,
            self.t_first(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugerConfig {
    pub gamma_l3_ev: f64,
    pub gamma_l2_ev: f64,
    pub edge_rule: EdgeRule,
}

impl Default for AugerConfig {
    fn default() -> Self {
        Self {
            gamma_l3_ev: 0.4,
            gamma_l2_ev: 1.04,
            edge_rule: EdgeRule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// SOC-state indices whose populations go to `observables.csv`.
    pub selected_states: Vec<usize>,
    /// Adds the K states with the largest total outgoing relaxation rate.
    pub top_k_by_rate: usize,
    /// Dump full ρ every this many records to `snapshots.bin`.
    pub snapshot_stride: Option<usize>,
    /// Fractions of I₁ at which the yield ratio is also sampled.
    pub first_pulse_fractions: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            selected_states: Vec::new(),
            top_k_by_rate: 0,
            snapshot_stride: None,
            first_pulse_fractions: Vec::new(),
        }
    }
}

/// Starting density matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// Boltzmann populations of the SOC energies at `temperature_k`.
    #[default]
    Thermal,
    /// Explicit SOC-state populations.
    Populations(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub structure_path: PathBuf,
    /// Required when `flags.vib` is set.
    #[serde(default)]
    pub bath_path: Option<PathBuf>,
    pub train: TrainConfig,
    #[serde(default)]
    pub t_start_fs: f64,
    /// Defaults to one subpulse spacing after the last center.
    #[serde(default)]
    pub t_end_fs: Option<f64>,
    /// Overrides the bath file temperature.
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub lifetime_convention: LifetimeConvention,
    #[serde(default)]
    pub auger: AugerConfig,
    #[serde(default)]
    pub rates: RateOptions,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed of the generated model, carried for provenance.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_temperature() -> f64 {
    300.0
}

impl RunConfig {
    /// Read a run configuration, or the `config` entry of a run's
    /// `meta.json`. Relative paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let context = || format!("config {}", path.display());
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: context(),
            source,
        })?;
        if value.get("constants").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|source| Error::Json {
            context: context(),
            source,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.structure_path);
        if let Some(b) = self.bath_path.as_mut() {
            fix(b);
        }
        fix(&mut self.output.dir);
    }

    /// Fill every defaulted quantity so the config fully describes the run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.train.t_first_fs = Some(self.train.t_first());
        c.t_end_fs = Some(self.t_end());
        c
    }

    pub fn t_end(&self) -> f64 {
        self.t_end_fs
            .unwrap_or_else(|| self.train.t_last() + subpulse_spacing_fs(self.train.lambda_nm))
    }

    /// Checks that need no model data. Runs before any computation.
    pub fn validate(&self) -> Result<()> {
        if !self.structure_path.is_file() {
            return Err(Error::invalid(format!(
                "structure file {} does not exist",
                self.structure_path.display()
            )));
        }
        match &self.bath_path {
            Some(b) if !b.is_file() => {
                return Err(Error::invalid(format!("bath file {} does not exist", b.display())));
            }
            None if self.flags.vib => {
                return Err(Error::invalid("flags.vib is set but no bath_path is given"));
            }
            _ => {}
        }
        if !(self.temperature_k >= 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::invalid(format!("temperature {} K must be >= 0", self.temperature_k)));
        }
        if !self.t_start_fs.is_finite() || !(self.t_end() > self.t_start_fs) {
            return Err(Error::invalid(format!(
                "t_end_fs {} must exceed t_start_fs {}",
                self.t_end(),
                self.t_start_fs
            )));
        }
        self.integrator.validate()?;
        self.train.build()?;
        if self.auger.gamma_l3_ev < 0.0 || self.auger.gamma_l2_ev < 0.0 {
            return Err(Error::invalid("Auger widths must be non-negative"));
        }
        if !(self.rates.degeneracy_ha >= 0.0) || !(self.rates.threshold_au >= 0.0) {
            return Err(Error::invalid("rate options must be non-negative"));
        }
        if let Some(f) = self
            .output
            .first_pulse_fractions
            .iter()
            .find(|f| !(**f > 0.0 && **f < 1.0))
        {
            return Err(Error::invalid(format!("first-pulse fraction {f} must lie in (0, 1)")));
        }
        if self.output.snapshot_stride == Some(0) {
            return Err(Error::invalid("snapshot_stride must be positive"));
        }
        if let InitialState::Populations(p) = &self.initial_state {
            if p.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::invalid("initial populations must be non-negative"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "structure_path": "model.es",
        "bath_path": "model.bath",
        "train": {"lambda_nm": 800, "n_pulses": 10, "sigma_fraction": "1/14",
                  "e0_au": 0.25, "omega_ev": 708.4}
    }"#;

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.json");
        std::fs::write(&cfg_path, MINIMAL).unwrap();
        let cfg = RunConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.structure_path, dir.path().join("model.es"));
        assert_eq!(cfg.output.dir, dir.path().join("out"));
        assert_eq!(cfg.temperature_k, 300.0);
        assert_eq!(cfg.flags, Flags::default());
        assert_eq!(cfg.integrator, IntegratorConfig::default());
        assert_eq!(cfg.auger.gamma_l3_ev, 0.4);
        assert_eq!(cfg.train.sigma_fraction, SigmaFraction::Fourteenth);
        let sigma = 800.0 / 299.792458 / 14.0;
        assert!((cfg.train.t_first() - 6.0 * sigma).abs() < 1e-12);
        let r = cfg.resolved();
        assert!((r.t_end_fs.unwrap() - (6.0 * sigma + 10.0 * 800.0 / 299.792458 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn missing_files_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.json");
        std::fs::write(&cfg_path, MINIMAL).unwrap();
        let cfg = RunConfig::load(&cfg_path).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("model.es"));
        std::fs::write(dir.path().join("model.es"), "").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("model.bath"));
        let mut no_bath = cfg.clone();
        no_bath.bath_path = None;
        assert!(no_bath.validate().is_err());
        no_bath.flags.vib = false;
        assert!(no_bath.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.json");
        std::fs::write(&cfg_path, MINIMAL.replace("\"e0_au\"", "\"e0\"")).unwrap();
        assert!(matches!(RunConfig::load(&cfg_path), Err(Error::Json { .. })));
    }

    #[test]
    fn meta_json_unwraps_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        let meta = serde_json::json!({"constants": {}, "config": cfg});
        let path = dir.path().join("meta.json");
        std::fs::write(&path, meta.to_string()).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(back.train.n_pulses, 10);
    }

    #[test]
    fn serde_round_trip() {
        let mut cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.auger.edge_rule = EdgeRule::ByEnergyThreshold { e_split_ev: 711.0 };
        cfg.initial_state = InitialState::Populations(vec![1.0, 0.0]);
        let text = serde_json::to_string_pretty(&cfg.resolved()).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg.resolved());
    }
}
