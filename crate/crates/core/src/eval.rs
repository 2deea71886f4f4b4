//! Relative pose error and KITTI-style segment drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Pose, Trajectory};

pub use crate::pose::rotation_angle;

/// Motion from `a` to `b`: `a⁻¹ ∘ b`.
pub fn rel(a: &Pose, b: &Pose) -> Pose {
    a.inverse().compose(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub i: u64,
    pub j: u64,
    /// Meters.
    pub trans_err: f64,
    /// Radians.
    pub rot_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RpeReport {
    /// Mean translation error in meters.
    pub rpe_trans: f64,
    /// Mean rotation error in radians.
    pub rpe_rot: f64,
    pub per_pair: Vec<PairError>,
    pub drift_percent: Option<f64>,
}

/// Consecutive frame pairs of `trajectory`.
pub fn consecutive_pairs(trajectory: &Trajectory) -> Vec<(u64, u64)> {
    trajectory
        .entries()
        .windows(2)
        .map(|w| (w[0].0, w[1].0))
        .collect()
}

fn lookup(t: &Trajectory, id: u64) -> Result<&Pose> {
    t.get(id).ok_or(Error::MissingFrame(id))
}

/// Error pose between the estimated and true relative motion of one pair.
pub fn pair_error_pose(est_i: &Pose, est_j: &Pose, gt_i: &Pose, gt_j: &Pose) -> Pose {
    rel(&rel(gt_i, gt_j), &rel(est_i, est_j))
}

/// Mean translation and rotation error over `pairs`.
pub fn rpe(est: &Trajectory, gt: &Trajectory, pairs: &[(u64, u64)]) -> Result<RpeReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let mut per_pair = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let e = pair_error_pose(
            lookup(est, i)?,
            lookup(est, j)?,
            lookup(gt, i)?,
            lookup(gt, j)?,
        );
        per_pair.push(PairError {
            i,
            j,
            trans_err: e.translation.norm(),
            rot_err: e.angle(),
        });
    }
    let n = per_pair.len() as f64;
    Ok(RpeReport {
        rpe_trans: per_pair.iter().map(|p| p.trans_err).sum::<f64>() / n,
        rpe_rot: per_pair.iter().map(|p| p.rot_err).sum::<f64>() / n,
        per_pair,
        drift_percent: None,
    })
}

/// [`rpe`] over consecutive frames of `gt`.
pub fn rpe_consecutive(est: &Trajectory, gt: &Trajectory) -> Result<RpeReport> {
    rpe(est, gt, &consecutive_pairs(gt))
}

pub const KITTI_SEGMENT_LENGTHS: [f64; 8] =
    [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

/// Average translation error per traveled meter over all segments whose
/// length is in `lengths`, in percent. Segments start at every frame and end
/// at the first frame whose accumulated ground-truth distance from the start
/// reaches the segment length.
pub fn kitti_drift(est: &Trajectory, gt: &Trajectory, lengths: &[f64]) -> Result<f64> {
    let shortest = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    if lengths.is_empty() || shortest.is_nan() || shortest <= 0.0 {
        return Err(Error::InvalidParameter(
            "segment lengths must be positive".into(),
        ));
    }
    let entries = gt.entries();
    let mut dist = Vec::with_capacity(entries.len());
    let mut acc = 0.0;
    for (k, (_, pose)) in entries.iter().enumerate() {
        if k > 0 {
            acc += (pose.translation - entries[k - 1].1.translation).norm();
        }
        dist.push(acc);
    }
    if acc < shortest {
        return Err(Error::TrajectoryTooShort {
            length: acc,
            segment: shortest,
        });
    }
    let est_poses = entries
        .iter()
        .map(|(id, _)| lookup(est, *id))
        .collect::<Result<Vec<_>>>()?;

    let mut total = 0.0;
    let mut count = 0usize;
    for start in 0..entries.len() {
        for &len in lengths {
            let Some(end) = (start..entries.len()).find(|&e| dist[e] - dist[start] >= len) else {
                continue;
            };
            let e = pair_error_pose(
                est_poses[start],
                est_poses[end],
                &entries[start].1,
                &entries[end].1,
            );
            total += e.translation.norm() / len;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::TrajectoryTooShort {
            length: acc,
            segment: shortest,
        });
    }
    Ok(100.0 * total / count as f64)
}
