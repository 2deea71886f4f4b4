//! Noise corruptions: Gaussian, uniform and impulse displacement in the
//! Cartesian (CCS) and spherical (SCS) frames, background noise and upsampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{CorruptionKind, CorruptionSpec, SeverityProfile, DRAW_STREAM};
use crate::cloud::{to_cartesian, to_spherical, Point, PointCloud};
use crate::error::{Error, Result};
use crate::sampling::{random_subset, rng, Selector};

use CorruptionKind::*;

fn unit_uniform() -> Uniform<f64> {
    Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds")
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Adds `scale * draw()` to each coordinate of every point.
fn displace_all(cloud: &PointCloud, scale: f64, mut draw: impl FnMut() -> f64) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| Point {
            x: p.x + draw() * scale,
            y: p.y + draw() * scale,
            z: p.z + draw() * scale,
            ..*p
        })
        .collect();
    cloud.with_points(points)
}

pub fn gaussian_noise_ccs(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[GauNoise])?;
    let sigma = profile.gaussian(spec)?.scale;
    let mut r = rng(spec.seed, DRAW_STREAM);
    Ok(displace_all(cloud, sigma, || StandardNormal.sample(&mut r)))
}

pub fn uniform_noise_ccs(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[UniNoise])?;
    let amplitude = profile.uniform(spec)?.scale;
    let mut r = rng(spec.seed, DRAW_STREAM);
    let dist = unit_uniform();
    Ok(displace_all(cloud, amplitude, || dist.sample(&mut r)))
}

/// Displaces `round(f·N)` seeded points by `±C` on every axis.
pub fn impulse_noise_ccs(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[ImpNoise])?;
    let params = profile.impulse(spec)?;
    let chosen = random_subset(cloud.len(), Selector::Fraction(params.fraction), spec.seed)?;
    let mut r = rng(spec.seed, DRAW_STREAM);
    let mut points = cloud.points.clone();
    for i in chosen {
        let p = &mut points[i];
        p.x += sign(&mut r) * params.constant;
        p.y += sign(&mut r) * params.constant;
        p.z += sign(&mut r) * params.constant;
    }
    Ok(cloud.with_points(points))
}

/// Moves a point along its ray by `offset` meters (range clamped at 0),
/// converting through the spherical frame so both angles are kept.
fn shift_range(p: &Point, offset: f64) -> Point {
    let mut s = to_spherical(p);
    s.range = (s.range + offset).max(0.0);
    let q = to_cartesian(&s);
    Point {
        x: q.x,
        y: q.y,
        z: q.z,
        ..*p
    }
}

/// Adds `offset` to the range of each listed point, leaving the others
/// untouched. Building block of the SCS noise kinds.
pub fn offset_ranges(cloud: &PointCloud, offsets: &[(usize, f64)]) -> PointCloud {
    let mut points = cloud.points.clone();
    for &(i, offset) in offsets {
        points[i] = shift_range(&points[i], offset);
    }
    cloud.with_points(points)
}

fn shift_all_ranges(cloud: &PointCloud, scale: f64, mut draw: impl FnMut() -> f64) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| shift_range(p, draw() * scale))
        .collect();
    cloud.with_points(points)
}

pub fn gaussian_noise_scs(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[GauNoiseRad])?;
    let sigma = profile.gaussian(spec)?.scale;
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let mut r = rng(spec.seed, DRAW_STREAM);
    Ok(shift_all_ranges(cloud, sigma, || {
        StandardNormal.sample(&mut r)
    }))
}

pub fn uniform_noise_scs(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[UniNoiseRad])?;
    let amplitude = profile.uniform(spec)?.scale;
    if amplitude == 0.0 {
        return Ok(cloud.clone());
    }
    let mut r = rng(spec.seed, DRAW_STREAM);
    let dist = unit_uniform();
    Ok(shift_all_ranges(cloud, amplitude, || dist.sample(&mut r)))
}

pub fn impulse_noise_scs(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[ImpNoiseRad])?;
    let params = profile.impulse(spec)?;
    let chosen = random_subset(cloud.len(), Selector::Fraction(params.fraction), spec.seed)?;
    let mut r = rng(spec.seed, DRAW_STREAM);
    let offsets: Vec<(usize, f64)> = chosen
        .into_iter()
        .map(|i| (i, sign(&mut r) * params.constant))
        .collect();
    Ok(offset_ranges(cloud, &offsets))
}

/// Appends points drawn uniformly inside the cloud's bounding box.
pub fn background_noise(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[BgNoise])?;
    let bbox = cloud.bounding_box().ok_or(Error::EmptyCloud)?;
    let count = profile.background_count(spec, cloud.len())?;
    let mut r = rng(spec.seed, DRAW_STREAM);
    let axes: Vec<Uniform<f64>> = (0..3)
        .map(|a| Uniform::new_inclusive(bbox.min[a], bbox.max[a]).expect("min <= max"))
        .collect();
    let mut points = Vec::with_capacity(cloud.len() + count);
    points.extend_from_slice(&cloud.points);
    for _ in 0..count {
        let x = axes[0].sample(&mut r);
        let y = axes[1].sample(&mut r);
        let z = axes[2].sample(&mut r);
        points.push(Point::new(x, y, z));
    }
    Ok(cloud.with_points(points))
}

/// Appends one jittered copy of each of `round(f·N)` seeded source points.
pub fn upsample(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[Upsample])?;
    let (fraction, jitter) = profile.upsample_params(spec)?;
    let sources = random_subset(cloud.len(), Selector::Fraction(fraction), spec.seed)?;
    if !sources.is_empty() && cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut r = rng(spec.seed, DRAW_STREAM);
    let dist = unit_uniform();
    let mut points = Vec::with_capacity(cloud.len() + sources.len());
    points.extend_from_slice(&cloud.points);
    for i in sources {
        let p = cloud.points[i];
        points.push(Point {
            x: p.x + dist.sample(&mut r) * jitter,
            y: p.y + dist.sample(&mut r) * jitter,
            z: p.z + dist.sample(&mut r) * jitter,
            ..p
        });
    }
    Ok(cloud.with_points(points))
}
