//! Bilateral point-cloud filter.
//!
//! Each point moves along its estimated normal by a weighted mean of the
//! normal offsets of its radius neighbors. Spatial and offset weights are
//! Gaussian. Updates inside an iteration read only the previous positions, so
//! the result does not depend on evaluation order.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BilateralParams {
    /// Neighborhood radius in meters.
    pub radius: f64,
    /// Spatial weight scale in meters.
    pub sigma_d: f64,
    /// Normal-offset weight scale in meters.
    pub sigma_n: f64,
    pub iterations: usize,
    /// Neighbors used for normal estimation.
    pub normal_k: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        BilateralParams {
            radius: 0.5,
            sigma_d: 0.25,
            sigma_n: 0.05,
            iterations: 1,
            normal_k: 20,
        }
    }
}

impl BilateralParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("radius", self.radius)?;
        positive("sigma_d", self.sigma_d)?;
        positive("sigma_n", self.sigma_n)?;
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        if self.normal_k < 3 {
            return Err(Error::InvalidParameter(
                "normal_k must be at least 3".into(),
            ));
        }
        Ok(())
    }
}

fn coords(cloud: &PointCloud) -> Vec<[f64; 3]> {
    cloud.iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Unit normal from the covariance of `neighbors`, pointing toward the origin
/// as seen from `at`.
fn normal_from(
    at: &Vector3<f64>,
    neighbors: impl Iterator<Item = Vector3<f64>> + Clone,
) -> Result<Vector3<f64>> {
    let n = neighbors.clone().count() as f64;
    let mean = neighbors.clone().fold(Vector3::zeros(), |acc, v| acc + v) / n;
    let cov = neighbors.fold(Matrix3::zeros(), |acc, v| {
        let d = v - mean;
        acc + d * d.transpose()
    }) / n;
    let scale = cov.trace();
    if scale.is_nan() || scale <= 1e-24 {
        return Err(Error::DegenerateNeighborhood);
    }
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imin();
    let mut normal: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
    normal /= normal.norm();
    if normal.dot(&(-at)) < 0.0 {
        normal = -normal;
    }
    Ok(normal)
}

fn normal_at(tree: &KdTree, pts: &[[f64; 3]], index: usize, k: usize) -> Result<Vector3<f64>> {
    let neighbors = tree.knn(&pts[index], k);
    let at = Vector3::from(pts[index]);
    normal_from(&at, neighbors.iter().map(|nb| Vector3::from(pts[nb.index])))
}

/// Smallest-eigenvalue eigenvector of the covariance of the `k` nearest
/// neighbors of point `index` (the point itself included), oriented toward
/// the sensor at the origin.
pub fn estimate_normal(cloud: &PointCloud, index: usize, k: usize) -> Result<Vector3<f64>> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 3, got {k}"
        )));
    }
    if cloud.len() < k {
        return Err(Error::TooFewPoints {
            required: k,
            actual: cloud.len(),
        });
    }
    if index >= cloud.len() {
        return Err(Error::InvalidParameter(format!(
            "index {index} out of range for {} points",
            cloud.len()
        )));
    }
    let pts = coords(cloud);
    let tree = KdTree::from_coords(pts.clone());
    normal_at(&tree, &pts, index, k)
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp()
}

/// Signed displacement along `normal` for the point at `p`.
fn offset(
    p: &Vector3<f64>,
    normal: &Vector3<f64>,
    neighbors: &[Vector3<f64>],
    params: &BilateralParams,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for q in neighbors {
        let d = q - p;
        let h = normal.dot(&d);
        let w = gaussian(d.norm(), params.sigma_d) * gaussian(h, params.sigma_n);
        num += w * h;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn filter_once(pts: &[[f64; 3]], params: &BilateralParams) -> Vec<[f64; 3]> {
    let tree = KdTree::from_coords(pts.to_vec());
    let k = params.normal_k.min(pts.len());
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let p = Vector3::from(pts[i]);
            let neighbors: Vec<Vector3<f64>> = tree
                .within_radius(&pts[i], params.radius)
                .into_iter()
                .filter(|nb| nb.index != i)
                .map(|nb| Vector3::from(pts[nb.index]))
                .collect();
            if neighbors.is_empty() {
                return pts[i];
            }
            let normal = match normal_at(&tree, pts, i, k) {
                Ok(n) => n,
                Err(_) => return pts[i],
            };
            let moved = p + normal * offset(&p, &normal, &neighbors, params);
            [moved.x, moved.y, moved.z]
        })
        .collect()
}

/// Runs `params.iterations` rounds of the bilateral filter. Count, order,
/// intensity and layer of every point are preserved; points without radius
/// neighbors or with a degenerate normal neighborhood stay put.
pub fn bilateral_filter(cloud: &PointCloud, params: &BilateralParams) -> Result<PointCloud> {
    params.validate()?;
    if cloud.len() < 4 {
        return Err(Error::TooFewPoints {
            required: 4,
            actual: cloud.len(),
        });
    }
    let mut pts = coords(cloud);
    for _ in 0..params.iterations {
        pts = filter_once(&pts, params);
    }
    let points = cloud
        .iter()
        .zip(&pts)
        .map(|(p, c)| p.moved_to(&Vector3::from(*c)))
        .collect();
    Ok(cloud.with_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point;
    use crate::sampling::rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn plane_z0(n: usize, seed: u64) -> PointCloud {
        let mut r = rng(seed, 0);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), 0.0)
                        .with_intensity(0.3)
                })
                .collect(),
        )
    }

    #[test]
    fn plane_normals_are_oriented_to_the_origin() {
        let mut cloud = plane_z0(200, 1);
        for p in &mut cloud.points {
            p.z = -1.5;
        }
        let n = estimate_normal(&cloud, 0, 20).unwrap();
        assert!((n - Vector3::z()).norm() < 1e-9);

        let wall = PointCloud::new(cloud.iter().map(|p| Point::new(5.0, p.x, p.y)).collect());
        let n = estimate_normal(&wall, 7, 20).unwrap();
        assert!((n + Vector3::x()).norm() < 1e-9);
        assert!((n.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn jittered_tilted_plane_normal() {
        let truth = Vector3::new(0.3, -0.2, 1.0).normalize();
        let u = truth.cross(&Vector3::x()).normalize();
        let v = truth.cross(&u);
        let mut r = rng(2, 0);
        let jitter = Normal::new(0.0, 1e-3).unwrap();
        let origin = Vector3::new(0.0, 0.0, -3.0);
        let pts = (0..500)
            .map(|_| {
                let c = origin
                    + u * r.random_range(-2.0..2.0)
                    + v * r.random_range(-2.0..2.0)
                    + truth * jitter.sample(&mut r);
                Point::new(c.x, c.y, c.z)
            })
            .collect();
        let cloud = PointCloud::new(pts);
        for i in [0, 100, 499] {
            assert!(estimate_normal(&cloud, i, 20).unwrap().dot(&truth).abs() > 0.99);
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let cloud = PointCloud::new(vec![Point::new(1.0, 1.0, 1.0); 10]);
        assert!(matches!(
            estimate_normal(&cloud, 0, 5),
            Err(Error::DegenerateNeighborhood)
        ));
    }

    #[test]
    fn exact_plane_is_fixed_point() {
        let cloud = plane_z0(2_000, 3);
        let out = bilateral_filter(&cloud, &BilateralParams::default()).unwrap();
        for (a, b) in cloud.iter().zip(out.iter()) {
            assert!((a.position() - b.position()).norm() < 1e-9);
        }
    }

    #[test]
    fn isolated_point_unchanged() {
        let mut cloud = plane_z0(500, 4);
        cloud
            .points
            .push(Point::new(40.0, 40.0, 3.0).with_intensity(0.9));
        let out = bilateral_filter(&cloud, &BilateralParams::default()).unwrap();
        assert_eq!(out.points.last(), cloud.points.last());
    }

    fn noisy_plane(seed: u64) -> PointCloud {
        let mut cloud = plane_z0(5_000, seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut r = rng(seed, 1);
        for (i, p) in cloud.points.iter_mut().enumerate() {
            p.z = -2.0 + noise.sample(&mut r);
            p.layer = Some((i % 64) as u16);
        }
        cloud
    }

    fn plane_rmse(c: &PointCloud) -> f64 {
        (c.iter().map(|p| (p.z + 2.0).powi(2)).sum::<f64>() / c.len() as f64).sqrt()
    }

    #[test]
    fn single_pass_approaches_the_gaussian_shrinkage_limit() {
        // With exact normals and dense neighbors one pass leaves a residual
        // fraction sigma^2 / (sigma^2 + sigma_n^2) of the noise: 0.5 here.
        let cloud = noisy_plane(5);
        let out = bilateral_filter(&cloud, &BilateralParams::default()).unwrap();
        let ratio = plane_rmse(&out) / plane_rmse(&cloud);
        assert!(ratio > 0.5 && ratio < 0.6, "{ratio}");
    }

    #[test]
    fn two_passes_halve_noisy_plane_rmse_and_keep_attributes() {
        let cloud = noisy_plane(5);
        let params = BilateralParams {
            iterations: 2,
            ..Default::default()
        };
        let out = bilateral_filter(&cloud, &params).unwrap();
        assert!(plane_rmse(&out) <= 0.5 * plane_rmse(&cloud));
        for (a, b) in cloud.iter().zip(out.iter()) {
            assert_eq!(a.intensity, b.intensity);
            assert_eq!(a.layer, b.layer);
            assert!((a.position() - b.position()).norm() <= 2.0 * params.radius);
        }
    }

    #[test]
    fn displacement_is_along_normal_and_bounded_by_radius() {
        let cloud = noisy_plane(8);
        let params = BilateralParams::default();
        let out = bilateral_filter(&cloud, &params).unwrap();
        for i in (0..cloud.len()).step_by(97) {
            let n = estimate_normal(&cloud, i, params.normal_k).unwrap();
            let d = out.points[i].position() - cloud.points[i].position();
            assert!(d.norm() <= params.radius + 1e-12);
            assert!((d - n * n.dot(&d)).norm() < 1e-9);
        }
    }

    #[test]
    fn second_pass_on_plane_barely_moves() {
        let cloud = plane_z0(1_000, 6);
        let once = bilateral_filter(&cloud, &BilateralParams::default()).unwrap();
        let twice = bilateral_filter(&once, &BilateralParams::default()).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((a.position() - b.position()).norm() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_params_and_tiny_clouds() {
        let cloud = plane_z0(100, 7);
        let bad = BilateralParams {
            radius: 0.0,
            ..Default::default()
        };
        assert!(bilateral_filter(&cloud, &bad).is_err());
        let tiny = PointCloud::new(cloud.points[..3].to_vec());
        assert!(bilateral_filter(&tiny, &BilateralParams::default()).is_err());
    }
}
