use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corruption::{CorruptionKind, SeverityProfile};
use crate::denoise::BilateralParams;
use crate::error::{Error, Result};
use crate::eval::KITTI_SEGMENT_LENGTHS;
use crate::odometry::OdometryConfig;

/// Where frames and ground truth come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic {
        scene: String,
        frames: usize,
        seed: u64,
    },
    /// A directory of `NNNNNN.bin` scans plus a KITTI pose file.
    Kitti {
        velodyne_dir: PathBuf,
        poses: PathBuf,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic {
            scene: "corridor".into(),
            frames: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub corruptions: Vec<CorruptionKind>,
    pub severities: Vec<u8>,
    pub seeds: Vec<u64>,
    /// Run only the clean baseline rows.
    pub baseline_only: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            corruptions: vec![CorruptionKind::BgNoise],
            severities: vec![1, 3, 5],
            seeds: vec![0],
            baseline_only: false,
        }
    }
}

/// The system whose trajectories are evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SubjectConfig {
    Odometry(OdometryConfig),
    /// Poses produced elsewhere. `{kind}`, `{severity}` and `{seed}` in the
    /// template are substituted per row; the baseline uses kind `clean` and
    /// severity `0`.
    External {
        poses: String,
    },
}

impl Default for SubjectConfig {
    fn default() -> Self {
        SubjectConfig::Odometry(OdometryConfig::default())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DefenseConfig {
    #[default]
    None,
    /// Bilateral-filter every frame, baseline included, before the subject runs.
    Denoise(BilateralParams),
    /// Write corrupted copies of the dataset for training-set augmentation.
    Augment { out_dir: PathBuf },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MetricsConfig {
    /// RPE over consecutive frames; drift is the end-point error over the
    /// ground-truth path length.
    #[default]
    Consecutive,
    /// RPE over consecutive frames; drift averages KITTI-style segments.
    KittiSegments { lengths: Vec<f64> },
}

impl MetricsConfig {
    pub fn kitti() -> Self {
        MetricsConfig::KittiSegments {
            lengths: KITTI_SEGMENT_LENGTHS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub format: ReportFormat,
    pub plot_data: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            report: None,
            format: ReportFormat::Csv,
            plot_data: None,
        }
    }
}

/// A full corruption sweep. Every field has a default, so a config file only
/// needs the sections it changes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub sweep: SweepConfig,
    pub subject: SubjectConfig,
    pub defense: DefenseConfig,
    pub metrics: MetricsConfig,
    pub output: OutputConfig,
    pub profile: SeverityProfile,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, msg),
            other => other,
        })
    }

    /// Every setting, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config is always serializable")
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.corruptions.is_empty() && !self.sweep.baseline_only {
            return Err(Error::Config(
                "sweep.corruptions is empty; list kinds or set baseline_only = true".into(),
            ));
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::Config("sweep.seeds must not be empty".into()));
        }
        if !self.sweep.baseline_only {
            if self.sweep.severities.is_empty() {
                return Err(Error::Config("sweep.severities must not be empty".into()));
            }
            if let Some(s) = self.sweep.severities.iter().find(|s| !(1..=5).contains(*s)) {
                return Err(Error::InvalidSeverity(*s));
            }
        }
        match &self.dataset {
            DatasetConfig::Synthetic { scene, frames, .. } => {
                if !crate::synth::SCENES.contains(&scene.as_str()) {
                    return Err(Error::UnknownScene(scene.clone()));
                }
                if *frames < 2 {
                    return Err(Error::Config("dataset.frames must be at least 2".into()));
                }
            }
            DatasetConfig::Kitti { .. } => {}
        }
        match &self.subject {
            SubjectConfig::Odometry(cfg) => cfg.validate()?,
            SubjectConfig::External { poses } => {
                if poses.is_empty() {
                    return Err(Error::Config("subject.poses must not be empty".into()));
                }
            }
        }
        if let DefenseConfig::Denoise(params) = &self.defense {
            params.validate()?;
        }
        if let MetricsConfig::KittiSegments { lengths } = &self.metrics {
            if lengths.is_empty() || lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(Error::Config("metrics.lengths must be positive".into()));
            }
        }
        self.profile.validate()
    }
}
