//! SE(3) rigid transforms and pose sequences.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};

/// Rigid transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Pose::new(Matrix3::identity(), t)
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length),
    /// followed by `translation`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
        Pose::new(*rot.matrix(), translation)
    }

    /// Yaw-only pose in the xy plane.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Pose::from_axis_angle(&Vector3::z(), yaw, translation)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.translation))
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v + self.translation
    }

    pub fn transform_point(&self, p: &Point) -> Point {
        p.moved_to(&self.transform_vector(&p.position()))
    }

    pub fn transform_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.with_points(
            cloud
                .points
                .iter()
                .map(|p| self.transform_point(p))
                .collect(),
        )
    }

    /// Largest entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity())
            .abs()
            .max()
    }

    pub fn is_valid(&self) -> bool {
        self.orthonormality_error() < 1e-9
            && (self.rotation.determinant() - 1.0).abs() <= 1e-9
            && self.translation.iter().all(|v| v.is_finite())
    }

    /// Projects the rotation back onto SO(3) through its SVD.
    pub fn orthonormalized(&self) -> Pose {
        Pose::new(project_to_rotation(&self.rotation), self.translation)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }
}

/// Nearest rotation matrix in the Frobenius sense.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Matrix3::identity(),
    };
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// `arccos(clamp((trace(R) − 1) / 2, −1, 1))`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Ordered `(frame_id, pose)` sequence plus the frames whose pose is a
/// fallback rather than a successful estimate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    entries: Vec<(u64, Pose)>,
    flagged: BTreeSet<u64>,
}

impl Trajectory {
    /// Panics if frame ids are not strictly increasing.
    pub fn new(entries: Vec<(u64, Pose)>) -> Self {
        assert!(
            entries.windows(2).all(|w| w[0].0 < w[1].0),
            "trajectory frame ids must be strictly increasing"
        );
        Trajectory {
            entries,
            flagged: BTreeSet::new(),
        }
    }

    /// Poses numbered `0..n`.
    pub fn from_poses(poses: impl IntoIterator<Item = Pose>) -> Self {
        Trajectory::new(
            poses
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as u64, p))
                .collect(),
        )
    }

    pub fn push(&mut self, frame_id: u64, pose: Pose) {
        if let Some(&(last, _)) = self.entries.last() {
            assert!(frame_id > last, "frame ids must be strictly increasing");
        }
        self.entries.push((frame_id, pose));
    }

    pub fn flag(&mut self, frame_id: u64) {
        self.flagged.insert(frame_id);
    }

    pub fn flagged(&self) -> &BTreeSet<u64> {
        &self.flagged
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(u64, Pose)> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[(u64, Pose)] {
        &self.entries
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> {
        self.entries.iter().map(|(_, p)| p)
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(id, _)| *id)
    }

    pub fn get(&self, frame_id: u64) -> Option<&Pose> {
        self.entries
            .binary_search_by_key(&frame_id, |(id, _)| *id)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    /// Left-multiplies every pose by `g`.
    pub fn transformed(&self, g: &Pose) -> Trajectory {
        Trajectory {
            entries: self
                .entries
                .iter()
                .map(|(id, p)| (*id, g.compose(p)))
                .collect(),
            flagged: self.flagged.clone(),
        }
    }

    /// Sum of distances between consecutive positions.
    pub fn path_length(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| (w[1].1.translation - w[0].1.translation).norm())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn max_abs_diff(a: &Pose, b: &Pose) -> f64 {
        (a.rotation - b.rotation)
            .abs()
            .max()
            .max((a.translation - b.translation).abs().max())
    }

    #[test]
    fn identity_composition() {
        let i = Pose::identity();
        assert_eq!(i.compose(&i), i);
    }

    #[test]
    fn pure_translation_inverse() {
        let t = Vector3::new(1.0, -2.0, 3.5);
        let inv = Pose::from_translation(t).inverse();
        assert_eq!(inv, Pose::from_translation(-t));
    }

    #[test]
    fn quarter_turn_angle() {
        let p = Pose::from_yaw(FRAC_PI_2, Vector3::zeros());
        assert!((p.angle() - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(Pose::identity().angle(), 0.0);
    }

    #[test]
    fn angle_clamps_jitter_above_trace_three() {
        let mut r = Matrix3::identity();
        r[(0, 0)] += 1e-12;
        r[(1, 1)] += 1e-12;
        let a = rotation_angle(&r);
        assert_eq!(a, 0.0);
        assert!(!a.is_nan());
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let mut p = Pose::from_axis_angle(&Vector3::new(1.0, 2.0, 0.5), 0.7, Vector3::zeros());
        p.rotation[(0, 1)] += 1e-6;
        assert!(!p.is_valid());
        assert!(p.orthonormalized().is_valid());
    }

    #[test]
    fn trajectory_lookup() {
        let t = Trajectory::new(vec![
            (2, Pose::identity()),
            (5, Pose::from_translation(Vector3::x())),
        ]);
        assert!(t.get(5).is_some());
        assert!(t.get(3).is_none());
        assert!((t.path_length() - 1.0).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn trajectory_rejects_unordered_ids() {
        Trajectory::new(vec![(2, Pose::identity()), (2, Pose::identity())]);
    }

    pub(crate) fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
            -3.1f64..3.1,
            (-50.0f64..50.0, -50.0f64..50.0, -5.0f64..5.0),
        )
            .prop_filter("axis must be non-zero", |(a, _, _)| {
                a.0.abs() + a.1.abs() + a.2.abs() > 1e-3
            })
            .prop_map(|(a, angle, t)| {
                Pose::from_axis_angle(
                    &Vector3::new(a.0, a.1, a.2),
                    angle,
                    Vector3::new(t.0, t.1, t.2),
                )
            })
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(p in arb_pose()) {
            prop_assert!(max_abs_diff(&p.compose(&p.inverse()), &Pose::identity()) < 1e-9);
            prop_assert!(max_abs_diff(&p.inverse().compose(&p), &Pose::identity()) < 1e-9);
            prop_assert!(p.is_valid());
        }

        #[test]
        fn composition_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(max_abs_diff(&left, &right) < 1e-9);
        }
    }
}
