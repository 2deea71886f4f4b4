//! Point-cloud data model, coordinate conversions and subsampling.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Beam count of the HDL-64E sensor used for KITTI.
pub const DEFAULT_BEAM_COUNT: u16 = 64;

/// One LiDAR return in the sensor Cartesian frame.
///
/// Missing intensity is stored as `0.0`. `layer` is the beam (ring) index when
/// known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
    pub layer: Option<u16>,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point {
            x,
            y,
            z,
            intensity: 0.0,
            layer: None,
        }
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.intensity = intensity;
        self
    }

    pub fn with_layer(mut self, layer: u16) -> Self {
        self.layer = Some(layer);
        self
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Same attributes, new coordinates.
    pub fn moved_to(&self, position: &Vector3<f64>) -> Self {
        Point {
            x: position.x,
            y: position.y,
            z: position.z,
            ..*self
        }
    }

    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance_squared(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_spherical(&self) -> SphericalPoint {
        to_spherical(self)
    }
}

/// A point in the sensor spherical frame. `polar` is measured from +z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalPoint {
    pub range: f64,
    pub azimuth: f64,
    pub polar: f64,
}

/// Cartesian to spherical. The origin maps to zero range with both angles 0.
pub fn to_spherical(p: &Point) -> SphericalPoint {
    let range = p.range();
    if range == 0.0 {
        return SphericalPoint {
            range: 0.0,
            azimuth: 0.0,
            polar: 0.0,
        };
    }
    let mut azimuth = p.y.atan2(p.x);
    // atan2 yields [-pi, pi]; fold -pi onto pi.
    if azimuth <= -PI {
        azimuth = PI;
    }
    let polar = (p.x.hypot(p.y)).atan2(p.z);
    SphericalPoint {
        range,
        azimuth,
        polar,
    }
}

/// Spherical to Cartesian. Intensity and layer are left unset.
pub fn to_cartesian(s: &SphericalPoint) -> Point {
    let (sin_polar, cos_polar) = s.polar.sin_cos();
    let (sin_az, cos_az) = s.azimuth.sin_cos();
    Point::new(
        s.range * sin_polar * cos_az,
        s.range * sin_polar * sin_az,
        s.range * cos_polar,
    )
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl BoundingBox {
    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|axis| {
            let v = p.position()[axis];
            v >= self.min[axis] && v <= self.max[axis]
        })
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }
}

/// One LiDAR frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame_id: u64,
    pub beam_count: u16,
}

impl Default for PointCloud {
    fn default() -> Self {
        PointCloud {
            points: Vec::new(),
            frame_id: 0,
            beam_count: DEFAULT_BEAM_COUNT,
        }
    }
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud {
            points,
            ..Default::default()
        }
    }

    pub fn with_frame_id(mut self, frame_id: u64) -> Self {
        self.frame_id = frame_id;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    /// A cloud with the same metadata and different points.
    pub fn with_points(&self, points: Vec<Point>) -> Self {
        PointCloud {
            points,
            frame_id: self.frame_id,
            beam_count: self.beam_count,
        }
    }

    /// Keeps the points whose index is not flagged in `remove`, in order.
    pub fn without(&self, remove: &[bool]) -> Self {
        debug_assert_eq!(remove.len(), self.len());
        let points = self
            .points
            .iter()
            .zip(remove)
            .filter(|(_, &drop)| !drop)
            .map(|(p, _)| *p)
            .collect();
        self.with_points(points)
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let first = self.points.first()?.position();
        let (min, max) = self.points.iter().fold((first, first), |(min, max), p| {
            let v = p.position();
            (min.inf(&v), max.sup(&v))
        });
        Some(BoundingBox { min, max })
    }

    pub fn has_layers(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.layer.is_some())
    }

    pub fn mean_intensity(&self) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().map(|p| p.intensity).sum::<f64>() / self.len() as f64)
    }
}

fn voxel_key(p: &Point, voxel_size: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

/// Keeps one point per occupied voxel: the one closest to the voxel centroid.
///
/// Voxels are emitted in order of their first point, so the output order is a
/// deterministic function of the input order.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    if voxel_size.is_nan() || voxel_size <= 0.0 || !voxel_size.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "voxel size must be positive, got {voxel_size}"
        )));
    }

    struct Voxel {
        sum: Vector3<f64>,
        count: usize,
        best: usize,
        best_dist: f64,
    }

    let mut slots: HashMap<(i64, i64, i64), usize> = HashMap::with_capacity(cloud.len() / 2);
    let mut voxels: Vec<Voxel> = Vec::new();
    let mut owner = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let slot = *slots.entry(voxel_key(p, voxel_size)).or_insert_with(|| {
            voxels.push(Voxel {
                sum: Vector3::zeros(),
                count: 0,
                best: usize::MAX,
                best_dist: f64::INFINITY,
            });
            voxels.len() - 1
        });
        voxels[slot].sum += p.position();
        voxels[slot].count += 1;
        owner.push(slot);
    }

    for (i, (p, &slot)) in cloud.points.iter().zip(&owner).enumerate() {
        let voxel = &mut voxels[slot];
        let centroid = voxel.sum / voxel.count as f64;
        let d = (p.position() - centroid).norm_squared();
        if d < voxel.best_dist {
            voxel.best_dist = d;
            voxel.best = i;
        }
    }

    let points = voxels.iter().map(|v| cloud.points[v.best]).collect();
    Ok(cloud.with_points(points))
}

/// Elevation angle above the sensor's horizontal plane, radians.
pub fn elevation(p: &Point) -> f64 {
    p.z.atan2(p.x.hypot(p.y))
}

/// Assigns layers by binning elevation uniformly between the cloud's minimum
/// and maximum elevation into `beam_count` bins.
pub fn infer_layers(cloud: &PointCloud, beam_count: u16) -> Result<PointCloud> {
    if beam_count == 0 {
        return Err(Error::InvalidParameter(
            "beam count must be at least 1".into(),
        ));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let elevations: Vec<f64> = cloud.points.iter().map(elevation).collect();
    let lo = elevations.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = elevations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let bins = f64::from(beam_count);

    let points = cloud
        .points
        .iter()
        .zip(&elevations)
        .map(|(p, &e)| {
            let layer = if span > 0.0 {
                (((e - lo) / span * bins).floor() as i64).clamp(0, i64::from(beam_count) - 1) as u16
            } else {
                0
            };
            Point {
                layer: Some(layer),
                ..*p
            }
        })
        .collect();
    Ok(PointCloud {
        points,
        frame_id: cloud.frame_id,
        beam_count,
    })
}
