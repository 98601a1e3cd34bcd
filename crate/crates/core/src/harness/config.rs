use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{DesignGrid, Range1D};
use crate::error::{DaisError, Result};
use crate::model::LinkModel;
use crate::scene::{Scene, ShiftPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Bounds,
    Design,
    Average,
    Leakage,
    Subarray,
    PseudoTrue,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Design => "design",
            ExperimentKind::Average => "average",
            ExperimentKind::Leakage => "leakage",
            ExperimentKind::Subarray => "subarray",
            ExperimentKind::PseudoTrue => "pseudo-true",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub pilot: u64,
    pub shift: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageSettings {
    pub realizations: usize,
    /// Extra direct-path delay of the comparison baseline, µs. Skipped when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_tau_obf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubarraySettings {
    pub n_rx: usize,
    /// Eve's array orientation, radians.
    pub orientation: f64,
    pub delta_tau: Vec<f64>,
    pub delta_theta: Range1D,
}

/// One experiment: scene, operating point(s), seeds and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Output directory.
    pub output: PathBuf,
    pub reflection_loss: f64,
    pub shift: ShiftPair,
    /// `[lo, hi, step]` in dB.
    pub snr_sweep: Range1D,
    pub seeds: Seeds,
    pub scene: Scene,
    pub design: DesignGrid,
    pub average: AverageSettings,
    pub subarray: SubarraySettings,
}

impl ExperimentConfig {
    /// Reference scene, shift `(T_s, π/4)`, SNR −20…40 dB in 5 dB steps.
    pub fn reference(experiment: ExperimentKind) -> Self {
        let scene = Scene::reference();
        let model = LinkModel::reference(1);
        let ts = scene.sampling_period();
        ExperimentConfig {
            experiment,
            output: PathBuf::from("results"),
            reflection_loss: 1.0,
            shift: ShiftPair::new(ts, 0.25 * std::f64::consts::PI),
            snr_sweep: Range1D::new(-20.0, 40.0, 5.0),
            seeds: Seeds { pilot: 1, shift: 7 },
            design: DesignGrid::for_model(&model),
            average: AverageSettings { realizations: 1000, baseline_tau_obf: Some(0.0279) },
            subarray: SubarraySettings {
                n_rx: 16,
                orientation: 0.0,
                delta_tau: vec![0.0],
                delta_theta: Range1D::new(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, 0.01),
            },
            scene,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| DaisError::Config {
            field: e.span().map(|s| format!("bytes {}..{}", s.start, s.end)).unwrap_or_else(|| "<document>".into()),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DaisError::Config { field: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Scene invariants plus the experiment-specific ranges. Errors name the
    /// offending field.
    pub fn validate(&self) -> Result<Vec<String>> {
        let field = |field: &str, message: String| DaisError::Config { field: field.into(), message };
        let warnings = self.scene.validate().map_err(|e| field("scene", e.to_string()))?;
        if !(self.reflection_loss > 0.0 && self.reflection_loss.is_finite()) {
            return Err(field("reflection_loss", format!("must be positive, got {}", self.reflection_loss)));
        }
        if !(self.shift.delta_tau.is_finite() && self.shift.delta_theta.is_finite()) {
            return Err(field("shift", "shift components must be finite".into()));
        }
        self.snr_sweep.validate("snr_sweep").map_err(|e| field("snr_sweep", e.to_string()))?;
        self.design.validate().map_err(|e| field("design", e.to_string()))?;
        if self.average.realizations == 0 {
            return Err(field("average.realizations", "must be at least 1".into()));
        }
        if let Some(t) = self.average.baseline_tau_obf {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(field("average.baseline_tau_obf", format!("must be non-negative, got {t}")));
            }
        }
        if self.subarray.n_rx < 2 {
            return Err(field("subarray.n_rx", "need at least 2 receive antennas".into()));
        }
        self.subarray.delta_theta.validate("subarray.delta_theta").map_err(|e| field("subarray.delta_theta", e.to_string()))?;
        if self.subarray.delta_tau.is_empty() || self.subarray.delta_tau.iter().any(|t| !t.is_finite()) {
            return Err(field("subarray.delta_tau", "need at least one finite delay shift".into()));
        }
        Ok(warnings)
    }

    pub fn link_model(&self) -> Result<LinkModel> {
        LinkModel::new(self.scene.clone(), self.reflection_loss, self.seeds.pilot)
    }
}
