//! Scenario files.
//!
//! A scenario is a TOML document whose keys mirror [`ScenarioConfig`]. Unknown
//! keys are rejected at every level. Everything except the agent count, the
//! stage list, the leader script and the filter switch has a default taken
//! from the reference Rosbot setup.

use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::controller::{ControlInput, ControllerGains, FormationSetpoint, InputBounds};
use crate::dynamics::{IntegratorConfig, Scheme};
use crate::error::{Error, Result};
use crate::geometry::VehicleGeometry;
use crate::perception::{BearingClassifierModel, DepthEstimatorModel};
use crate::safety::SafetySet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub stages: Vec<Stage>,
    pub leader_script: Vec<LeaderSegment>,
    pub safety_filter_enabled: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub gains: ControllerGains,
    #[serde(default)]
    pub safety: SafetySet,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub qp: QpSection,
    #[serde(default)]
    pub communication: CommunicationSection,
    /// Per-step decay of the held speed while the leader is not visible.
    #[serde(default = "default_blind_decay")]
    pub blind_decay: f64,
    #[serde(default)]
    pub leader_start: Pose,
    /// Initial `(L, alpha)` of each pair; defaults to the first stage setpoints.
    #[serde(default)]
    pub initial_pairs: Option<Vec<PairInit>>,
}

fn default_blind_decay() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub duration: f64,
    /// One setpoint per pair, or a single setpoint shared by every pair.
    pub setpoints: Vec<FormationSetpoint>,
}

/// Piecewise-constant leader command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSegment {
    pub duration: f64,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceptionMode {
    /// Exact bearing and distance while the leader is in view.
    Ideal,
    /// Quantized classifier, depth patch and temporal filters.
    #[default]
    Modeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BearingSection {
    pub n_classes_in_fov: usize,
    pub misclass_rate: f64,
    pub misclass_spread: usize,
}

impl Default for BearingSection {
    fn default() -> Self {
        let m = BearingClassifierModel::default();
        Self {
            n_classes_in_fov: m.n_classes_in_fov,
            misclass_rate: m.misclass_rate,
            misclass_spread: m.misclass_spread,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    #[serde(default)]
    pub mode: PerceptionMode,
    #[serde(default = "default_k_f")]
    pub k_f: f64,
    #[serde(default)]
    pub bearing: BearingSection,
    #[serde(default)]
    pub depth: DepthEstimatorModel,
}

fn default_k_f() -> f64 {
    0.55
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            mode: PerceptionMode::default(),
            k_f: default_k_f(),
            bearing: BearingSection::default(),
            depth: DepthEstimatorModel::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub scheme: Scheme,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        Self {
            dt: c.dt,
            scheme: c.scheme,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub d: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            d: VehicleGeometry::default().d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpSection {
    /// Row-major cost matrix `P`.
    pub cost: [[f64; 2]; 2],
    pub bounds: InputBounds,
}

impl Default for QpSection {
    fn default() -> Self {
        Self {
            cost: [[1.0, 0.0], [0.0, 1.0]],
            bounds: InputBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunicationSection {
    pub delay_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairInit {
    pub l: f64,
    pub alpha: f64,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_value(value: toml::Value) -> Result<Self> {
        let cfg: ScenarioConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn n_pairs(&self) -> usize {
        self.n_agents.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::config("a formation needs at least two agents"));
        }
        if self.stages.is_empty() {
            return Err(Error::config("at least one stage is required"));
        }
        for (k, stage) in self.stages.iter().enumerate() {
            if !(stage.duration > 0.0 && stage.duration.is_finite()) {
                return Err(Error::config(format!("stage {k} has non-positive duration")));
            }
            if stage.setpoints.len() != 1 && stage.setpoints.len() != self.n_pairs() {
                return Err(Error::config(format!(
                    "stage {k} lists {} setpoints for {} pairs",
                    stage.setpoints.len(),
                    self.n_pairs()
                )));
            }
            for sp in &stage.setpoints {
                sp.validate()?;
            }
        }
        if self.leader_script.is_empty() {
            return Err(Error::config("leader_script needs at least one segment"));
        }
        for seg in &self.leader_script {
            if !(seg.duration > 0.0) || !seg.v.is_finite() || !seg.omega.is_finite() {
                return Err(Error::config(format!("invalid leader segment {seg:?}")));
            }
        }
        if let Some(init) = &self.initial_pairs {
            if init.len() != self.n_pairs() {
                return Err(Error::config("initial_pairs must list one entry per pair"));
            }
            if init.iter().any(|p| !(p.l > 0.0) || !p.alpha.is_finite()) {
                return Err(Error::config("initial pair distances must be positive"));
            }
        }
        if !(self.blind_decay >= 0.0 && self.blind_decay <= 1.0) {
            return Err(Error::config("blind_decay must lie in [0, 1]"));
        }
        self.integrator()?;
        self.gains.validate()?;
        self.safety.validate()?;
        self.vehicle()?;
        self.qp.bounds.validate()?;
        self.bearing_model().validate()?;
        self.perception.depth.validate()?;
        crate::perception::TemporalFilter::new(self.perception.k_f)?;
        Ok(())
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        IntegratorConfig::new(self.integrator.dt, self.integrator.scheme)
    }

    pub fn vehicle(&self) -> Result<VehicleGeometry> {
        VehicleGeometry::new(self.geometry.d)
    }

    pub fn cost_matrix(&self) -> Matrix2<f64> {
        let c = self.qp.cost;
        Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1])
    }

    /// The classifier partitions the same sector the safety set protects.
    pub fn bearing_model(&self) -> BearingClassifierModel {
        BearingClassifierModel {
            n_classes_in_fov: self.perception.bearing.n_classes_in_fov,
            psi_max: self.safety.psi_max,
            misclass_rate: self.perception.bearing.misclass_rate,
            misclass_spread: self.perception.bearing.misclass_spread,
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// Index of the stage active at time `t`; the last stage extends forever.
    pub fn stage_index(&self, t: f64) -> usize {
        let mut end = 0.0;
        for (k, stage) in self.stages.iter().enumerate() {
            end += stage.duration;
            if t < end - 1e-9 {
                return k;
            }
        }
        self.stages.len() - 1
    }

    pub fn setpoint(&self, stage: usize, pair: usize) -> FormationSetpoint {
        let sps = &self.stages[stage].setpoints;
        if sps.len() == 1 {
            sps[0]
        } else {
            sps[pair]
        }
    }

    pub fn leader_command(&self, t: f64) -> ControlInput {
        let mut end = 0.0;
        for seg in &self.leader_script {
            end += seg.duration;
            if t < end - 1e-9 {
                return ControlInput::new(seg.v, seg.omega);
            }
        }
        let last = self.leader_script.last().expect("validated non-empty");
        ControlInput::new(last.v, last.omega)
    }

    /// The three-stage two-robot scenario used in the reproduction runs:
    /// straight following, a lateral bearing that conflicts with the camera
    /// sector, then back to straight following.
    pub fn three_stage(n_agents: usize, safety_filter_enabled: bool) -> Self {
        let straight = FormationSetpoint { l_d: 1.5, alpha_d: 0.0 };
        let lateral = FormationSetpoint { l_d: 1.5, alpha_d: 0.6 };
        Self {
            n_agents,
            stages: vec![
                Stage {
                    duration: 20.0,
                    setpoints: vec![straight],
                },
                Stage {
                    duration: 30.0,
                    setpoints: vec![lateral],
                },
                Stage {
                    duration: 20.0,
                    setpoints: vec![straight],
                },
            ],
            leader_script: vec![LeaderSegment {
                duration: 70.0,
                v: 0.5,
                omega: 0.0,
            }],
            safety_filter_enabled,
            seed: 2025,
            perception: PerceptionConfig::default(),
            integrator: IntegratorSection::default(),
            gains: ControllerGains::default(),
            safety: SafetySet::default(),
            geometry: GeometrySection::default(),
            qp: QpSection::default(),
            communication: CommunicationSection::default(),
            blind_decay: default_blind_decay(),
            leader_start: Pose::default(),
            initial_pairs: None,
        }
    }
}
