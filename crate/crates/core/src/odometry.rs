//! Frame-to-frame point-to-point ICP odometry.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{voxel_downsample, PointCloud};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::pose::{project_to_rotation, Pose, Trajectory};

const MIN_POINTS: usize = 10;
const MIN_CORRESPONDENCES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryConfig {
    /// Source downsampling voxel edge in meters.
    pub voxel_size: f64,
    /// Correspondences farther apart than this are ignored (meters).
    pub max_corr_dist: f64,
    pub max_iterations: usize,
    /// Stop once an update moves less than this (meters, and radians for
    /// the rotation part).
    pub convergence_eps: f64,
    /// Huber kernel threshold in meters.
    pub robust_delta: f64,
    pub use_constant_velocity: bool,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        OdometryConfig {
            voxel_size: 0.5,
            max_corr_dist: 1.0,
            max_iterations: 50,
            convergence_eps: 1e-4,
            robust_delta: 0.5,
            use_constant_velocity: true,
        }
    }
}

impl OdometryConfig {
    /// Defaults for real KITTI scans.
    pub fn kitti() -> Self {
        OdometryConfig {
            voxel_size: 1.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("voxel_size", self.voxel_size),
            ("max_corr_dist", self.max_corr_dist),
            ("convergence_eps", self.convergence_eps),
            ("robust_delta", self.robust_delta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn huber_weight(residual: f64, delta: f64) -> f64 {
    if residual <= delta {
        1.0
    } else {
        delta / residual
    }
}

/// Weighted least-squares rigid transform mapping `src[i]` onto `dst[i]`.
fn weighted_kabsch(src: &[Vector3<f64>], dst: &[Vector3<f64>], w: &[f64]) -> Pose {
    let total: f64 = w.iter().sum();
    let mut cs = Vector3::zeros();
    let mut cd = Vector3::zeros();
    for ((s, d), wi) in src.iter().zip(dst).zip(w) {
        cs += s * *wi;
        cd += d * *wi;
    }
    cs /= total;
    cd /= total;
    let mut h = Matrix3::zeros();
    for ((s, d), wi) in src.iter().zip(dst).zip(w) {
        h += (d - cd) * (s - cs).transpose() * *wi;
    }
    let r = project_to_rotation(&h);
    Pose::new(r, cd - r * cs)
}

fn coords(cloud: &PointCloud) -> Vec<[f64; 3]> {
    cloud.iter().map(|p| [p.x, p.y, p.z]).collect()
}

struct Target {
    tree: KdTree,
    points: Vec<Vector3<f64>>,
}

impl Target {
    fn new(cloud: &PointCloud) -> Self {
        let c = coords(cloud);
        Target {
            points: c.iter().map(|p| Vector3::from(*p)).collect(),
            tree: KdTree::from_coords(c),
        }
    }
}

fn too_few(cloud: &PointCloud) -> Error {
    Error::TooFewPoints {
        required: MIN_POINTS,
        actual: cloud.len(),
    }
}

/// Voxel-downsampled source positions.
fn prepare_source(cloud: &PointCloud, cfg: &OdometryConfig) -> Result<Vec<Vector3<f64>>> {
    let reduced = voxel_downsample(cloud, cfg.voxel_size)?;
    if reduced.len() < MIN_POINTS {
        return Err(too_few(&reduced));
    }
    Ok(reduced.iter().map(|p| p.position()).collect())
}

fn prepare_target(cloud: &PointCloud) -> Result<Target> {
    if cloud.len() < MIN_POINTS {
        return Err(too_few(cloud));
    }
    Ok(Target::new(cloud))
}

fn icp(
    source: &[Vector3<f64>],
    target: &Target,
    init: &Pose,
    cfg: &OdometryConfig,
) -> Result<Pose> {
    let max_d2 = cfg.max_corr_dist * cfg.max_corr_dist;
    let mut pose = *init;
    for _ in 0..cfg.max_iterations {
        let matches: Vec<(Vector3<f64>, Vector3<f64>, f64)> = source
            .par_iter()
            .filter_map(|s| {
                let moved = pose.rotation * s + pose.translation;
                target
                    .tree
                    .nearest_within(&[moved.x, moved.y, moved.z], max_d2)
                    .map(|nb| {
                        let t = target.points[nb.index];
                        (
                            moved,
                            t,
                            huber_weight(nb.distance_squared.sqrt(), cfg.robust_delta),
                        )
                    })
            })
            .collect();
        if matches.len() < MIN_CORRESPONDENCES {
            return Err(Error::RegistrationFailed {
                last_pose: Box::new(pose),
                correspondences: matches.len(),
            });
        }
        let (src, rest): (Vec<_>, Vec<_>) =
            matches.into_iter().map(|(s, t, w)| (s, (t, w))).unzip();
        let (dst, w): (Vec<_>, Vec<_>) = rest.into_iter().unzip();
        let update = weighted_kabsch(&src, &dst, &w);
        pose = update.compose(&pose);
        if !pose.is_valid() {
            pose = pose.orthonormalized();
        }
        if update.translation.norm() < cfg.convergence_eps && update.angle() < cfg.convergence_eps {
            break;
        }
    }
    Ok(pose)
}

/// Pose mapping `source` into the frame of `target`, found by point-to-point
/// ICP starting from `init`. Only the source is downsampled.
pub fn register(
    source: &PointCloud,
    target: &PointCloud,
    init: &Pose,
    cfg: &OdometryConfig,
) -> Result<Pose> {
    cfg.validate()?;
    let src = prepare_source(source, cfg)?;
    icp(&src, &prepare_target(target)?, init, cfg)
}

/// Estimates the pose of every frame relative to the first one by registering
/// each frame against its predecessor. A failed registration falls back to
/// the motion prediction and flags the frame.
pub fn run_odometry(frames: &[PointCloud], cfg: &OdometryConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            actual: frames.len(),
        });
    }
    let mut trajectory = Trajectory::default();
    let mut poses = vec![Pose::identity()];
    let mut ids = vec![frames[0].frame_id];
    let mut flagged = Vec::new();
    let mut velocity = Pose::identity();

    let mut target = prepare_target(&frames[0]);
    for (k, frame) in frames.iter().enumerate().skip(1) {
        let init = if cfg.use_constant_velocity {
            velocity
        } else {
            Pose::identity()
        };
        let relative = match (prepare_source(frame, cfg), &target) {
            (Ok(src), Ok(tgt)) => icp(&src, tgt, &init, cfg).ok(),
            _ => None,
        };
        let relative = match relative {
            Some(p) => p,
            None => {
                flagged.push(k);
                init
            }
        };
        let pose = poses[k - 1].compose(&relative);
        poses.push(if pose.is_valid() {
            pose
        } else {
            pose.orthonormalized()
        });
        ids.push(frame.frame_id);
        velocity = relative;
        target = prepare_target(frame);
    }
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        ids = (0..frames.len() as u64).collect();
    }
    for k in flagged {
        trajectory.flag(ids[k]);
    }
    for (id, pose) in ids.into_iter().zip(poses) {
        trajectory.push(id, pose);
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point;
    use crate::sampling::rng;
    use rand::Rng;

    /// Three orthogonal textured planes plus a few boxes.
    fn structured(seed: u64) -> PointCloud {
        let mut r = rng(seed, 0);
        let mut pts = Vec::new();
        for _ in 0..1500 {
            pts.push(Point::new(
                r.random_range(-10.0..10.0),
                r.random_range(-10.0..10.0),
                -1.5,
            ));
            pts.push(Point::new(
                r.random_range(-10.0..10.0),
                6.0,
                r.random_range(-1.5..3.0),
            ));
            pts.push(Point::new(
                8.0,
                r.random_range(-10.0..6.0),
                r.random_range(-1.5..3.0),
            ));
        }
        for c in [(2.0, 2.0), (-4.0, -3.0), (5.0, -6.0)] {
            for _ in 0..300 {
                let (a, b) = (r.random_range(-0.5..0.5), r.random_range(-1.5..1.0));
                pts.push(Point::new(c.0 + a, c.1 - 0.5, b));
                pts.push(Point::new(c.0 - 0.5, c.1 + a, b));
            }
        }
        PointCloud::new(pts)
    }

    fn close(a: &Pose, b: &Pose, tol: f64) -> bool {
        (a.translation - b.translation).norm() < tol && a.inverse().compose(b).angle() < tol
    }

    #[test]
    fn identical_clouds_register_to_identity() {
        let cloud = structured(1);
        let p = register(
            &cloud,
            &cloud,
            &Pose::identity(),
            &OdometryConfig::default(),
        )
        .unwrap();
        assert!(close(&p, &Pose::identity(), 1e-6));
    }

    #[test]
    fn recovers_known_transform() {
        let source = structured(2);
        let truth = Pose::from_yaw(3f64.to_radians(), Vector3::new(0.2, 0.1, 0.0));
        let target = truth.transform_cloud(&source);
        let p = register(
            &source,
            &target,
            &Pose::identity(),
            &OdometryConfig::default(),
        )
        .unwrap();
        assert!(close(&p, &truth, 1e-4), "{p:?}");
    }

    #[test]
    fn equivariant_under_global_motion() {
        let source = structured(3);
        let truth = Pose::from_yaw(0.02, Vector3::new(0.1, -0.05, 0.0));
        let target = truth.transform_cloud(&source);
        let cfg = OdometryConfig {
            convergence_eps: 1e-10,
            max_iterations: 200,
            ..Default::default()
        };
        let p = register(&source, &target, &Pose::identity(), &cfg).unwrap();
        let g = Pose::from_axis_angle(
            &Vector3::new(0.2, 0.1, 1.0),
            0.6,
            Vector3::new(4.0, -2.0, 0.5),
        );
        let init = g.compose(&g.inverse());
        let q = register(
            &g.transform_cloud(&source),
            &g.transform_cloud(&target),
            &init,
            &cfg,
        )
        .unwrap();
        assert!(close(&q, &g.compose(&p).compose(&g.inverse()), 1e-6));
    }

    #[test]
    fn disjoint_clouds_fail_with_last_pose() {
        let a = structured(4);
        let b = Pose::from_translation(Vector3::new(500.0, 0.0, 0.0)).transform_cloud(&a);
        match register(&a, &b, &Pose::identity(), &OdometryConfig::default()) {
            Err(Error::RegistrationFailed {
                correspondences, ..
            }) => assert!(correspondences < 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn static_sequence_stays_at_identity() {
        let cloud = structured(5);
        let frames: Vec<_> = (0..4).map(|k| cloud.clone().with_frame_id(k)).collect();
        let t = run_odometry(&frames, &OdometryConfig::default()).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.poses().all(|p| close(p, &Pose::identity(), 1e-6)));
        assert!(t.flagged().is_empty());
    }

    #[test]
    fn failures_are_flagged_and_counted() {
        let cloud = structured(6);
        let empty_ish = PointCloud::new(cloud.points[..3].to_vec()).with_frame_id(2);
        let frames = vec![
            cloud.clone().with_frame_id(0),
            cloud.clone().with_frame_id(1),
            empty_ish,
        ];
        let t = run_odometry(&frames, &OdometryConfig::default()).unwrap();
        assert_eq!(t.flagged().iter().copied().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn needs_two_frames() {
        assert!(matches!(
            run_odometry(&[structured(7)], &OdometryConfig::default()),
            Err(Error::TooFewFrames { .. })
        ));
    }
}
