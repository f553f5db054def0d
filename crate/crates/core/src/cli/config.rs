use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::rom::{ContinuationOptions, IntegrateOptions};

/// Declarative run description, stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    #[serde(default)]
    pub subspace: SubspaceConfig,
    #[serde(default)]
    pub ssm: SsmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("ssm-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Built-in model id (see `ssm model list`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalModel>,
}

/// Matrices from Matrix Market files plus a black box served over the
/// evaluation protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalModel {
    pub mass: PathBuf,
    pub damping: PathBuf,
    pub stiffness: PathBuf,
    /// `host:port` of a TCP server.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Program and arguments of a stdio server.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceConfig {
    pub dim: usize,
    /// `nearest`, `pairs` or `window`.
    pub selection: String,
    #[serde(default)]
    pub shift: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            selection: "nearest".into(),
            shift: [0.0, 0.0],
            pairs: Vec::new(),
            window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsmConfig {
    pub max_order: u32,
    pub style: String,
    pub rho_rel: f64,
    pub structural_rule: bool,
    pub conjugate_symmetry: bool,
    pub skip_zero: bool,
    pub autoscale_threshold: f64,
}

impl Default for SsmConfig {
    fn default() -> Self {
        Self {
            max_order: 5,
            style: "normal_form".into(),
            rho_rel: 0.05,
            structural_rule: true,
            conjugate_symmetry: true,
            skip_zero: true,
            autoscale_threshold: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub epsilon: f64,
    /// `[dof, amplitude]` pairs of a load `amplitude · cos Ωt`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<(usize, f64)>,
    /// Uniform distributed load (pipe model only).
    #[serde(default)]
    pub distributed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backbone: Option<BackboneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frc: Option<FrcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub rho_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub pair: usize,
    #[serde(default)]
    pub output: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_points() -> usize {
    50
}

fn default_samples() -> usize {
    128
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionMode {
    Ti,
    Tv,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrcConfig {
    pub omega: [f64; 2],
    #[serde(default)]
    pub forced_pair: usize,
    #[serde(default)]
    pub output: usize,
    #[serde(default = "default_mode")]
    pub mode: SolutionMode,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Re-check each flagged bifurcation at `Ω ± verify_delta`; 0 disables.
    #[serde(default = "default_delta")]
    pub verify_delta: f64,
    #[serde(default)]
    pub continuation: ContinuationTuning,
}

fn default_mode() -> SolutionMode {
    SolutionMode::Both
}

fn default_delta() -> f64 {
    1e-4
}

/// Continuation settings other than the frequency range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationTuning {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub detect_bifurcations: bool,
}

impl Default for ContinuationTuning {
    fn default() -> Self {
        let d = ContinuationOptions::default();
        Self {
            ds: d.ds,
            ds_min: d.ds_min,
            ds_max: d.ds_max,
            max_steps: d.max_steps,
            newton_tol: d.newton_tol,
            newton_max: d.newton_max,
            detect_bifurcations: d.detect_bifurcations,
        }
    }
}

impl FrcConfig {
    pub fn continuation(&self) -> ContinuationOptions {
        let c = &self.continuation;
        ContinuationOptions {
            omega_min: self.omega[0],
            omega_max: self.omega[1],
            ds: c.ds,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_steps: c.max_steps,
            newton_tol: c.newton_tol,
            newton_max: c.newton_max,
            detect_bifurcations: c.detect_bifurcations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub omega: f64,
    pub t_end: f64,
    pub dt_out: f64,
    #[serde(default)]
    pub forced_pair: usize,
    #[serde(default)]
    pub output: usize,
    /// Initial reduced coordinates `[Re p, Im p]` per positive-frequency pair.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<f64>,
    #[serde(default = "yes")]
    pub rom: bool,
    #[serde(default)]
    pub full: bool,
    #[serde(default)]
    pub integrator: IntegrateOptions,
}

fn yes() -> bool {
    true
}

fn config_err(field: &str, message: impl Into<String>) -> SsmError {
    SsmError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err("<file>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.model.builtin, &self.model.external) {
            (Some(_), Some(_)) => return Err(config_err("model", "give either `builtin` or `external`, not both")),
            (None, None) => return Err(config_err("model", "one of `builtin` or `external` is required")),
            (None, Some(ext)) => {
                if ext.endpoint.is_some() == !ext.command.is_empty() {
                    return Err(config_err("model.external", "give exactly one of `endpoint` or `command`"));
                }
                if !self.model.params.is_empty() {
                    return Err(config_err("model.params", "parameters apply to built-in models only"));
                }
            }
            (Some(_), None) => {}
        }
        let s = &self.subspace;
        if s.dim == 0 {
            return Err(config_err("subspace.dim", "must be positive"));
        }
        match s.selection.as_str() {
            "nearest" => {}
            "pairs" if s.pairs.is_empty() => return Err(config_err("subspace.pairs", "required for `pairs`")),
            "pairs" => {}
            "window" => match s.window {
                Some([lo, hi]) if lo < hi => {}
                _ => return Err(config_err("subspace.window", "need [lo, hi] with lo < hi")),
            },
            other => {
                return Err(config_err(
                    "subspace.selection",
                    format!("unknown selection `{other}` (nearest, pairs, window)"),
                ))
            }
        }
        let o = &self.ssm;
        if o.max_order == 0 {
            return Err(config_err("ssm.max_order", "must be at least 1"));
        }
        if o.style != "normal_form" {
            return Err(config_err("ssm.style", "only `normal_form` is supported"));
        }
        if !(o.rho_rel > 0.0) {
            return Err(config_err("ssm.rho_rel", "must be positive"));
        }
        if !(o.autoscale_threshold > 0.0) {
            return Err(config_err("ssm.autoscale_threshold", "must be positive"));
        }
        if let Some(f) = &self.forcing {
            if !(f.epsilon >= 0.0) {
                return Err(config_err("forcing.epsilon", "must be non-negative"));
            }
            if f.loads.is_empty() && !f.distributed {
                return Err(config_err("forcing.loads", "give `loads` or set `distributed = true`"));
            }
        }
        if let Some(b) = &self.analysis.backbone {
            if !(b.rho_max > 0.0) || b.points < 2 || b.samples == 0 {
                return Err(config_err("analysis.backbone", "need rho_max > 0, points >= 2, samples >= 1"));
            }
        }
        if let Some(f) = &self.analysis.frc {
            if self.forcing.is_none() {
                return Err(config_err("forcing", "an FRC needs a [forcing] section"));
            }
            if !(f.omega[0] > 0.0 && f.omega[1] > f.omega[0]) {
                return Err(config_err("analysis.frc.omega", "need 0 < lo < hi"));
            }
            if f.samples == 0 {
                return Err(config_err("analysis.frc.samples", "must be positive"));
            }
            f.continuation()
                .validate()
                .map_err(|e| config_err("analysis.frc.continuation", e.to_string()))?;
        }
        if let Some(s) = &self.analysis.simulate {
            if self.forcing.is_none() {
                return Err(config_err("forcing", "a simulation needs a [forcing] section"));
            }
            if !(s.omega > 0.0 && s.t_end > 0.0 && s.dt_out > 0.0) {
                return Err(config_err("analysis.simulate", "omega, t_end and dt_out must be positive"));
            }
            if !s.rom && !s.full {
                return Err(config_err("analysis.simulate", "enable `rom`, `full`, or both"));
            }
        }
        Ok(())
    }
}
