use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tofhair_core::crf::{CrfParams, ExtraFeature, MeanFieldOptions, ParamGrid, DEFAULT_ENERGY_CAP};
use tofhair_core::geomfeat::CameraModel;
use tofhair_core::noisemap::RegionLabel;
use tofhair_core::synth::{synthetic_tof_config, HeadSceneConfig, View};
use tofhair_core::tofsim::ToFConfig;

use crate::error::{CliError, CliResult};

/// One synthetic subject: a view of the head scene with its own seed offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectSpec {
    pub name: String,
    #[serde(default)]
    pub view: View,
    #[serde(default)]
    pub seed_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub scene: HeadSceneConfig,
    pub subjects: Vec<SubjectSpec>,
    /// Equivalent depth noise of the sensor (m) on a unit-attenuation pixel;
    /// ignored when `tof` is given.
    pub depth_noise: f64,
    pub tof: Option<ToFConfig>,
    /// Synthetic six-class unary: confidence of the (noisy) guessed label.
    pub unary_confidence: f64,
    pub unary_flip_fraction: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            scene: HeadSceneConfig::default(),
            subjects: vec![
                SubjectSpec {
                    name: "front".into(),
                    view: View::Front,
                    seed_offset: 0,
                },
                SubjectSpec {
                    name: "back".into(),
                    view: View::Back,
                    seed_offset: 1,
                },
            ],
            depth_noise: 1e-3,
            tof: None,
            unary_confidence: 0.8,
            unary_flip_fraction: 0.05,
        }
    }
}

impl SimulateConfig {
    pub fn tof_config(&self) -> ToFConfig {
        self.tof
            .clone()
            .unwrap_or_else(|| synthetic_tof_config(self.depth_noise))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeConfig {
    pub bins: usize,
    /// Only pixels whose (2r+1)² neighborhood lies in one region are
    /// compared, so silhouette depth jumps do not count as noise.
    pub interior_radius: usize,
    /// Gaussian σ shared by all scales; `None` uses window/4.
    pub sigma: Option<f64>,
    pub plots: bool,
    /// Regions that must be analyzable; others present in the mask are
    /// analyzed when they have interior pixels.
    pub regions: Vec<String>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            bins: 64,
            interior_radius: 5,
            sigma: None,
            plots: true,
            regions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturesConfig {
    /// Hole-filling σ in pixels.
    pub fill_sigma: f64,
    /// Gradients at or below this magnitude get no direction.
    pub direction_min_magnitude: f64,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            fill_sigma: 1.5,
            direction_min_magnitude: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub params: CrfParams,
    pub extra: ExtraFeature,
    pub inference: MeanFieldOptions,
    /// Merge the four hair regions into one label before refinement.
    pub merge_hair: bool,
    /// Instances above this many pixels are rejected.
    pub max_pixels: usize,
    /// Energies are logged only up to this many pixels.
    pub energy_cap: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            params: CrfParams::default(),
            extra: ExtraFeature::Hva,
            inference: MeanFieldOptions::default(),
            merge_hair: true,
            max_pixels: 1 << 16,
            energy_cap: DEFAULT_ENERGY_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSearchConfig {
    pub grid: ParamGrid,
    /// Subjects used for validation; empty means all.
    pub validation: Vec<String>,
    pub target_label: String,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            grid: ParamGrid {
                w1: vec![1.0, 2.0, 4.0],
                theta_alpha: vec![4.0, 8.0],
                theta_beta: vec![25.0],
                theta_gamma: vec![0.5, 1.0],
                w2: vec![0.0, 1.0],
                theta_delta: vec![1.0],
            },
            validation: Vec::new(),
            target_label: "hair".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Dataset root; `--out` overrides it.
    pub dataset: PathBuf,
    /// Defaults to the synthetic camera matching the scene size.
    pub camera: Option<CameraModel>,
    pub simulate: SimulateConfig,
    pub analyze: AnalyzeConfig,
    pub features: FeaturesConfig,
    pub refine: RefineConfig,
    pub gridsearch: GridSearchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: PathBuf::from("dataset"),
            camera: None,
            simulate: SimulateConfig::default(),
            analyze: AnalyzeConfig::default(),
            features: FeaturesConfig::default(),
            refine: RefineConfig::default(),
            gridsearch: GridSearchConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.simulate.subjects.is_empty() {
            return bad("at least one subject is required".into());
        }
        let mut names: Vec<&str> = self
            .simulate
            .subjects
            .iter()
            .map(|s| s.name.as_str())
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("subject names must be unique".into());
        }
        if let Some(n) = names
            .iter()
            .find(|n| n.is_empty() || n.contains(['/', '\\']) || n.starts_with('.'))
        {
            return bad(format!("invalid subject name {n:?}"));
        }
        if self.analyze.bins < 2 {
            return bad("analyze.bins must be >= 2".into());
        }
        for r in &self.analyze.regions {
            RegionLabel::from_name(r).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !(self.simulate.depth_noise >= 0.0) {
            return bad("simulate.depth_noise must be >= 0".into());
        }
        self.simulate
            .tof_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.refine
            .params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.gridsearch
            .grid
            .points()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(cam) = &self.camera {
            cam.validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn camera_for(&self, width: usize, height: usize) -> CameraModel {
        self.camera
            .clone()
            .unwrap_or_else(|| CameraModel::synthetic((width, height), (width, height)))
    }
}
