//! Corruption sweeps: load a dataset, corrupt it for every
//! `(kind, severity, seed)` cell, optionally defend, run the subject and
//! evaluate it against ground truth.

mod augment;
mod config;
mod report;

use std::borrow::Cow;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

pub use augment::{export_augmentation, Manifest, ManifestEntry, MANIFEST_FILE};
pub use config::{
    DatasetConfig, DefenseConfig, ExperimentConfig, MetricsConfig, OutputConfig, ReportFormat,
    SubjectConfig, SweepConfig,
};
pub use report::{
    emit_plot_data, read_report_json, write_report, ExperimentReport, ReportMetadata, ReportRow,
    CSV_HEADER,
};

use crate::cloud::PointCloud;
use crate::corruption::{corrupt, CorruptionKind, CorruptionSpec, SeverityProfile};
use crate::denoise::bilateral_filter;
use crate::error::{Error, Result};
use crate::eval::{kitti_drift, rpe_consecutive};
use crate::io::{read_poses, read_velodyne_dir};
use crate::odometry::run_odometry;
use crate::pose::Trajectory;
use crate::sampling::derive_frame_seed;
use crate::synth::{generate_synthetic_sequence, split_sequence};

/// Frames plus ground-truth poses keyed by frame id.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub frames: Vec<PointCloud>,
    pub ground_truth: Trajectory,
}

impl Dataset {
    pub fn load(cfg: &DatasetConfig) -> Result<Self> {
        match cfg {
            DatasetConfig::Synthetic {
                scene,
                frames,
                seed,
            } => {
                let (frames, ground_truth) =
                    split_sequence(generate_synthetic_sequence(scene, *frames, *seed)?);
                Ok(Dataset {
                    frames,
                    ground_truth,
                })
            }
            DatasetConfig::Kitti {
                velodyne_dir,
                poses,
            } => {
                let frames = read_velodyne_dir(velodyne_dir)?;
                let ground_truth = read_poses(poses)?;
                if let Some(f) = frames
                    .iter()
                    .find(|f| ground_truth.get(f.frame_id).is_none())
                {
                    return Err(Error::MissingFrame(f.frame_id));
                }
                Ok(Dataset {
                    frames,
                    ground_truth,
                })
            }
        }
    }

    /// Ground truth restricted to the loaded frames.
    fn frame_ground_truth(&self) -> Trajectory {
        let mut gt = Trajectory::default();
        for f in &self.frames {
            if let Some(p) = self.ground_truth.get(f.frame_id) {
                gt.push(f.frame_id, *p);
            }
        }
        gt
    }
}

/// Corrupts every frame with its own seed derived from
/// `(seed, frame_id, kind)`. Frames are processed in parallel; the result
/// does not depend on scheduling.
pub fn corrupt_frames(
    frames: &[PointCloud],
    kind: CorruptionKind,
    severity: u8,
    seed: u64,
    profile: &SeverityProfile,
) -> Result<Vec<PointCloud>> {
    frames
        .par_iter()
        .map(|frame| {
            let spec = CorruptionSpec::new(
                kind,
                severity,
                derive_frame_seed(seed, frame.frame_id, kind.ordinal()),
            );
            corrupt(frame, &spec, profile)
        })
        .collect()
}

fn external_pose_path(
    template: &str,
    kind: Option<CorruptionKind>,
    severity: u8,
    seed: u64,
) -> PathBuf {
    PathBuf::from(
        template
            .replace("{kind}", kind.map_or("clean", |k| k.name()))
            .replace("{severity}", &severity.to_string())
            .replace("{seed}", &seed.to_string()),
    )
}

/// End-point translation error over the ground-truth path length, percent.
fn end_point_drift(est: &Trajectory, gt: &Trajectory) -> Result<f64> {
    let (first, last) = match (gt.entries().first(), gt.entries().last()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::TooFewFrames {
                required: 2,
                actual: 0,
            })
        }
    };
    let length = gt.path_length();
    if length <= 0.0 {
        return Err(Error::TrajectoryTooShort {
            length,
            segment: 0.0,
        });
    }
    let lookup = |id| est.get(id).ok_or(Error::MissingFrame(id));
    let e = crate::eval::pair_error_pose(lookup(first.0)?, lookup(last.0)?, &first.1, &last.1);
    Ok(100.0 * e.translation.norm() / length)
}

struct Outcome {
    rpe_trans: f64,
    rpe_rot: f64,
    drift_percent: f64,
    flagged: usize,
}

fn evaluate_cell(
    dataset: &Dataset,
    gt: &Trajectory,
    cfg: &ExperimentConfig,
    kind: Option<CorruptionKind>,
    severity: u8,
    seed: u64,
) -> Result<Outcome> {
    let mut frames: Cow<[PointCloud]> = match kind {
        None => Cow::Borrowed(&dataset.frames),
        Some(kind) => Cow::Owned(corrupt_frames(
            &dataset.frames,
            kind,
            severity,
            seed,
            &cfg.profile,
        )?),
    };
    if let DefenseConfig::Denoise(params) = &cfg.defense {
        frames = Cow::Owned(
            frames
                .par_iter()
                .map(|f| bilateral_filter(f, params).unwrap_or_else(|_| f.clone()))
                .collect(),
        );
    }
    let est = match &cfg.subject {
        SubjectConfig::Odometry(odometry) => run_odometry(&frames, odometry)?,
        SubjectConfig::External { poses } => {
            read_poses(external_pose_path(poses, kind, severity, seed))?
        }
    };
    let report = rpe_consecutive(&est, gt)?;
    let drift_percent = match &cfg.metrics {
        MetricsConfig::Consecutive => end_point_drift(&est, gt)?,
        MetricsConfig::KittiSegments { lengths } => kitti_drift(&est, gt, lengths)?,
    };
    Ok(Outcome {
        rpe_trans: report.rpe_trans,
        rpe_rot: report.rpe_rot,
        drift_percent,
        flagged: est.flagged().len(),
    })
}

fn run_cell(
    dataset: &Dataset,
    gt: &Trajectory,
    cfg: &ExperimentConfig,
    kind: Option<CorruptionKind>,
    severity: u8,
    seed: u64,
) -> ReportRow {
    let start = Instant::now();
    let outcome = evaluate_cell(dataset, gt, cfg, kind, severity, seed);
    let wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => ReportRow {
            kind,
            severity,
            seed,
            rpe_trans: Some(o.rpe_trans),
            rpe_rot: Some(o.rpe_rot),
            drift_percent: Some(o.drift_percent),
            flagged_frames: o.flagged,
            wall_time_s,
            failure: None,
        },
        Err(e) => ReportRow {
            kind,
            severity,
            seed,
            rpe_trans: None,
            rpe_rot: None,
            drift_percent: None,
            flagged_frames: 0,
            wall_time_s,
            failure: Some(e.to_string()),
        },
    }
}

/// Sweep cells in report order: one baseline per seed, then every
/// `(kind, severity, seed)`.
pub fn sweep_cells(sweep: &SweepConfig) -> Vec<(Option<CorruptionKind>, u8, u64)> {
    let mut cells: Vec<_> = sweep.seeds.iter().map(|&s| (None, 0, s)).collect();
    if !sweep.baseline_only {
        for &kind in &sweep.corruptions {
            for &severity in &sweep.severities {
                for &seed in &sweep.seeds {
                    cells.push((Some(kind), severity, seed));
                }
            }
        }
    }
    cells.sort_by_key(|&(k, s, seed)| (k.map_or(0, |k| k.ordinal() + 1), s, seed));
    cells.dedup();
    cells
}

/// Runs the sweep on an already loaded dataset.
pub fn run_on_dataset(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    if let DefenseConfig::Augment { out_dir } = &cfg.defense {
        if !cfg.sweep.baseline_only {
            for &severity in &cfg.sweep.severities {
                for &seed in &cfg.sweep.seeds {
                    let dir = out_dir.join(format!("severity_{severity}_seed_{seed}"));
                    export_augmentation(
                        &dataset.frames,
                        &cfg.sweep.corruptions,
                        severity,
                        seed,
                        &cfg.profile,
                        dir,
                    )?;
                }
            }
        }
    }
    let gt = dataset.frame_ground_truth();
    let mut rows: Vec<ReportRow> = sweep_cells(&cfg.sweep)
        .into_par_iter()
        .map(|(kind, severity, seed)| run_cell(dataset, &gt, cfg, kind, severity, seed))
        .collect();
    rows.sort_by_key(ReportRow::sort_key);
    Ok(ExperimentReport {
        metadata: ReportMetadata {
            config_hash: cfg.hash(),
            version: crate::VERSION.to_string(),
        },
        rows,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dataset = Dataset::load(&cfg.dataset)?;
    run_on_dataset(cfg, &dataset)
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

/// Writes the report and plot tables requested in `output`.
pub fn write_outputs(report: &ExperimentReport, output: &OutputConfig) -> Result<()> {
    if let Some(path) = &output.report {
        write_report(report, path, &output.format)?;
    }
    if let Some(path) = &output.plot_data {
        emit_plot_data(report, path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odometry::OdometryConfig;

    fn tiny(kinds: Vec<CorruptionKind>, severities: Vec<u8>, seeds: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetConfig::Synthetic {
                scene: "corridor".into(),
                frames: 3,
                seed: 1,
            },
            sweep: SweepConfig {
                corruptions: kinds,
                severities,
                seeds,
                baseline_only: false,
            },
            subject: SubjectConfig::Odometry(OdometryConfig {
                voxel_size: 1.0,
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    #[test]
    fn row_count_is_baselines_plus_cells() {
        let cfg = tiny(
            vec![CorruptionKind::GauNoise, CorruptionKind::BeamDel],
            vec![1, 5],
            vec![7],
        );
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 5);
        assert!(report.rows[0].is_baseline());
        assert!(report.rows.iter().all(|r| r.failure.is_none()));
        assert_eq!(report.metadata.config_hash, cfg.hash());
    }

    #[test]
    fn cells_are_sorted_and_unique() {
        let sweep = SweepConfig {
            corruptions: vec![
                CorruptionKind::Cutout,
                CorruptionKind::Rain,
                CorruptionKind::Rain,
            ],
            severities: vec![5, 1],
            seeds: vec![2, 0],
            baseline_only: false,
        };
        let cells = sweep_cells(&sweep);
        assert_eq!(cells.len(), 2 + 2 * 2 * 2);
        assert_eq!(cells[0], (None, 0, 0));
        assert_eq!(cells[2], (Some(CorruptionKind::Rain), 1, 0));
        assert_eq!(cells.last(), Some(&(Some(CorruptionKind::Cutout), 5, 2)));
    }

    #[test]
    fn frame_seeds_differ_across_frames() {
        let dataset = Dataset::load(&DatasetConfig::Synthetic {
            scene: "corridor".into(),
            frames: 2,
            seed: 0,
        })
        .unwrap();
        let profile = SeverityProfile::default();
        let a = corrupt_frames(&dataset.frames, CorruptionKind::GauNoise, 3, 4, &profile).unwrap();
        let b = corrupt_frames(&dataset.frames, CorruptionKind::GauNoise, 3, 4, &profile).unwrap();
        assert_eq!(a, b);
        let offsets = |k: usize| -> Vec<f64> {
            a[k].iter()
                .zip(dataset.frames[k].iter())
                .take(50)
                .map(|(p, q)| p.x - q.x)
                .collect()
        };
        assert_ne!(offsets(0), offsets(1));
    }

    #[test]
    fn external_subject_failures_become_rows() {
        let mut cfg = tiny(vec![CorruptionKind::Fog], vec![2], vec![0]);
        cfg.subject = SubjectConfig::External {
            poses: "/nonexistent/{kind}_{severity}_{seed}.txt".into(),
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report
            .rows
            .iter()
            .all(|r| r.failure.is_some() && r.rpe_trans.is_none()));
        assert_eq!(
            external_pose_path("p/{kind}-{severity}-{seed}.txt", None, 0, 3),
            PathBuf::from("p/clean-0-3.txt")
        );
    }
}
