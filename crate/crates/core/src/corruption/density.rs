//! Density corruptions: local density increase/decrease, cutout, beam deletion
//! and layer deletion.

use std::collections::BTreeSet;

use rand::Rng;

use super::{CorruptionKind, CorruptionSpec, SeverityProfile, DRAW_STREAM};
use crate::cloud::{infer_layers, Point, PointCloud};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::sampling::{random_subset, rng, sample_indices, Selector};

use CorruptionKind::*;

fn require_points(cloud: &PointCloud, required: usize) -> Result<()> {
    if cloud.len() < required {
        return Err(Error::TooFewPoints {
            required,
            actual: cloud.len(),
        });
    }
    Ok(())
}

/// Seed points and their `k`-nearest neighborhoods (each includes its seed).
fn seeded_neighborhoods(
    cloud: &PointCloud,
    clusters: usize,
    k: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let centers = random_subset(
        cloud.len(),
        Selector::Count(clusters.min(cloud.len())),
        seed,
    )
    .expect("count clamped to cloud size");
    if centers.is_empty() {
        return Vec::new();
    }
    let tree = KdTree::new(cloud);
    centers
        .into_iter()
        .map(|c| {
            let p = &cloud.points[c];
            tree.knn(&[p.x, p.y, p.z], k)
                .into_iter()
                .map(|n| n.index)
                .collect()
        })
        .collect()
}

/// Neighborhoods of the seed points `local_density_decrease` and `cutout`
/// use for `spec`; exposed so callers can audit which points were eligible.
pub fn corruption_neighborhoods(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<Vec<Vec<usize>>> {
    let p = match spec.kind {
        LocalInc => profile.local_inc_params(spec)?,
        LocalDec => profile.local_dec_params(spec)?,
        Cutout => profile.cutout_params(spec)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "{other} has no neighborhoods"
            )));
        }
    };
    Ok(seeded_neighborhoods(
        cloud,
        p.clusters,
        p.neighbors,
        spec.seed,
    ))
}

/// Adds midpoints of random point pairs inside the k-NN neighborhoods of
/// seeded cluster centers.
pub fn local_density_increase(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[LocalInc])?;
    let params = profile.local_inc_params(spec)?;
    require_points(cloud, params.neighbors)?;
    let neighborhoods = seeded_neighborhoods(cloud, params.clusters, params.neighbors, spec.seed);
    let mut r = rng(spec.seed, DRAW_STREAM);
    let mut points = Vec::with_capacity(cloud.len() + neighborhoods.len() * params.per_cluster);
    points.extend_from_slice(&cloud.points);
    for hood in &neighborhoods {
        for _ in 0..params.per_cluster {
            let a = r.random_range(0..hood.len());
            let mut b = r.random_range(0..hood.len() - 1);
            if b >= a {
                b += 1;
            }
            let (p, q) = (&cloud.points[hood[a]], &cloud.points[hood[b]]);
            points.push(Point {
                x: 0.5 * (p.x + q.x),
                y: 0.5 * (p.y + q.y),
                z: 0.5 * (p.z + q.z),
                intensity: 0.5 * (p.intensity + q.intensity),
                layer: if p.layer == q.layer { p.layer } else { None },
            });
        }
    }
    Ok(cloud.with_points(points))
}

/// Removes a random `remove`-sized subset of each seeded k-NN neighborhood.
pub fn local_density_decrease(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[LocalDec])?;
    let params = profile.local_dec_params(spec)?;
    require_points(cloud, params.neighbors)?;
    let neighborhoods = seeded_neighborhoods(cloud, params.clusters, params.neighbors, spec.seed);
    let mut r = rng(spec.seed, DRAW_STREAM);
    let mut remove = vec![false; cloud.len()];
    for hood in &neighborhoods {
        for j in sample_indices(&mut r, hood.len(), params.per_cluster.min(hood.len())) {
            remove[hood[j]] = true;
        }
    }
    Ok(cloud.without(&remove))
}

/// Removes the whole k-NN neighborhood of each seeded center.
pub fn cutout(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[Cutout])?;
    let params = profile.cutout_params(spec)?;
    require_points(cloud, params.neighbors)?;
    let mut remove = vec![false; cloud.len()];
    for hood in seeded_neighborhoods(cloud, params.clusters, params.neighbors, spec.seed) {
        for i in hood {
            remove[i] = true;
        }
    }
    Ok(cloud.without(&remove))
}

/// Keeps a uniform random subset of `round((1 − d)·N)` points, in order.
pub fn beam_deletion(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[BeamDel])?;
    let fraction = profile.beam_del_fraction(spec)?;
    let n = cloud.len();
    let keep_count = ((1.0 - fraction) * n as f64).round() as usize;
    let keep = random_subset(n, Selector::Count(keep_count.min(n)), spec.seed)?;
    Ok(cloud.with_points(keep.into_iter().map(|i| cloud.points[i]).collect()))
}

/// Layers removed by `layer_deletion` for this spec.
pub fn deleted_layers(spec: &CorruptionSpec, profile: &SeverityProfile) -> Result<BTreeSet<u16>> {
    let (layers, beam_count) = profile.layer_del_params(spec)?;
    Ok(
        random_subset(usize::from(beam_count), Selector::Count(layers), spec.seed)?
            .into_iter()
            .map(|l| l as u16)
            .collect(),
    )
}

/// Removes every point whose layer is in a seeded random set of layers.
/// Layers are inferred from elevation when the cloud does not carry them.
pub fn layer_deletion(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[LayerDel])?;
    let (_, beam_count) = profile.layer_del_params(spec)?;
    let inferred;
    let source = if cloud.has_layers() {
        cloud
    } else {
        inferred = infer_layers(cloud, beam_count)?;
        &inferred
    };
    let deleted = deleted_layers(spec, profile)?;
    let remove: Vec<bool> = source
        .points
        .iter()
        .map(|p| p.layer.is_some_and(|l| deleted.contains(&l)))
        .collect();
    Ok(source.without(&remove))
}
