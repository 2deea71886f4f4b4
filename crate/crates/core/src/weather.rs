//! Parametric weather corruptions: rain, snow, fog and wet ground.
//!
//! These are deliberately simple stand-ins for full optical simulators:
//!
//! * two-way exponential attenuation `I ← I·exp(−2αR)` with a detection floor,
//! * Bernoulli loss of returns,
//! * Bernoulli replacement of a return by a droplet echo on the same ray,
//! * a wet-ground band that loses returns and darkens the rest.
//!
//! Each point consumes a fixed number of random draws whatever the
//! parameters, so for a fixed seed a higher severity drops a superset of the
//! points a lower one drops.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{Point, PointCloud};
use crate::corruption::profile::{WeatherParams, WetGroundParams};
use crate::corruption::{CorruptionKind, CorruptionSpec, SeverityProfile};
use crate::error::Result;
use crate::sampling::rng;

use CorruptionKind::*;

const PRECIPITATION_STREAM: u64 = 11;
const FOG_STREAM: u64 = 12;
const WET_GROUND_STREAM: u64 = 13;

/// Attenuation, loss and echo replacement shared by rain, snow and fog.
fn scatter(cloud: &PointCloud, params: &WeatherParams, mut r: ChaCha8Rng) -> PointCloud {
    let mut points = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let u_drop: f64 = r.random();
        let u_scatter: f64 = r.random();
        let u_range: f64 = r.random();

        let range = p.range();
        let intensity = p.intensity * (-2.0 * params.attenuation * range).exp();
        if intensity < params.intensity_floor || u_drop < params.drop_prob {
            continue;
        }
        let echo_max = range.min(params.scatter_range_max);
        if u_scatter < params.scatter_prob && echo_max > 0.0 {
            // (0, echo_max]: u_range lies in [0, 1).
            let echo_range = (1.0 - u_range) * echo_max;
            let k = echo_range / range;
            points.push(Point {
                x: p.x * k,
                y: p.y * k,
                z: p.z * k,
                intensity,
                layer: p.layer,
            });
        } else {
            points.push(Point { intensity, ..*p });
        }
    }
    cloud.with_points(points)
}

/// Rain or snow (selected by the spec's kind; `rain_wg`/`snow_wg` use the
/// matching precipitation rows).
pub fn simulate_precipitation(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[Rain, Snow, RainWg, SnowWg])?;
    let params = profile.precipitation(spec)?;
    Ok(scatter(
        cloud,
        &params,
        rng(spec.seed, PRECIPITATION_STREAM),
    ))
}

/// Fog: stronger attenuation, echoes confined to a halo near the sensor.
pub fn simulate_fog(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[Fog])?;
    let params = profile.fog_params(spec)?;
    Ok(scatter(cloud, &params, rng(spec.seed, FOG_STREAM)))
}

fn apply_wet_ground(cloud: &PointCloud, params: &WetGroundParams, mut r: ChaCha8Rng) -> PointCloud {
    let mut points = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        if (p.z - params.ground_z).abs() > params.band {
            points.push(*p);
            continue;
        }
        let u: f64 = r.random();
        if u < params.wet_drop_prob {
            continue;
        }
        points.push(Point {
            intensity: p.intensity * params.reflectance,
            ..*p
        });
    }
    cloud.with_points(points)
}

/// Wet ground: points within `band` of `ground_z` are dropped with
/// `wet_drop_prob`, survivors have their intensity scaled by `reflectance`.
pub fn wet_ground(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[RainWg, SnowWg])?;
    let params = profile.wet_ground_params(spec)?;
    Ok(apply_wet_ground(
        cloud,
        &params,
        rng(spec.seed, WET_GROUND_STREAM),
    ))
}

/// `rain_wg` / `snow_wg`: precipitation followed by wet ground.
pub fn precipitation_with_wet_ground(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.expect_kind(&[RainWg, SnowWg])?;
    let wet = simulate_precipitation(cloud, spec, profile)?;
    wet_ground(&wet, spec, profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::corrupt;
    use rand_distr::{Distribution, Uniform};

    fn scene(n: usize, seed: u64) -> PointCloud {
        let mut r = rng(seed, 3);
        let az = Uniform::new(-3.1, 3.1).unwrap();
        let dist = Uniform::new(2.0, 60.0).unwrap();
        let pts = (0..n)
            .map(|i| {
                let a: f64 = az.sample(&mut r);
                let d: f64 = dist.sample(&mut r);
                // Half the points on the ground plane, half on elevated structure.
                let z = if i % 2 == 0 {
                    -1.73
                } else {
                    r.random_range(-1.0..3.0)
                };
                Point::new(d * a.cos(), d * a.sin(), z).with_intensity(r.random_range(0.1..0.9))
            })
            .collect();
        PointCloud::new(pts)
    }

    fn zeroed(kind: CorruptionKind) -> CorruptionSpec {
        let spec = CorruptionSpec::new(kind, 3, 5);
        let keys: &[(&str, f64)] = match kind {
            Fog => &[
                ("attenuation", 0.0),
                ("scatter_prob", 0.0),
                ("drop_prob", 0.0),
                ("intensity_floor", 0.0),
            ],
            Rain | Snow => &[
                ("attenuation", 0.0),
                ("scatter_prob", 0.0),
                ("drop_prob", 0.0),
                ("intensity_floor", 0.0),
            ],
            _ => &[
                ("attenuation", 0.0),
                ("scatter_prob", 0.0),
                ("drop_prob", 0.0),
                ("intensity_floor", 0.0),
                ("wet_drop_prob", 0.0),
                ("reflectance", 1.0),
            ],
        };
        keys.iter().fold(spec, |s, (k, v)| s.with_override(k, *v))
    }

    #[test]
    fn zero_parameters_are_identity() {
        let cloud = scene(2_000, 1);
        let profile = SeverityProfile::default();
        for kind in [Rain, Snow, Fog, RainWg, SnowWg] {
            assert_eq!(
                corrupt(&cloud, &zeroed(kind), &profile).unwrap(),
                cloud,
                "{kind}"
            );
        }
    }

    #[test]
    fn echoes_stay_on_the_ray() {
        let cloud = scene(5_000, 2);
        let profile = SeverityProfile::default();
        let spec = CorruptionSpec::new(Rain, 5, 3).with_override("scatter_prob", 0.5);
        let out = simulate_precipitation(&cloud, &spec, &profile).unwrap();
        // Survivors keep order; match each output to its source by direction.
        let mut j = 0;
        let mut echoes = 0;
        for p in &cloud.points {
            if j >= out.len() {
                break;
            }
            let q = out.points[j];
            let dp = p.position() / p.range();
            let dq = q.position() / q.range();
            if (dp - dq).norm() < 1e-9 {
                assert!(q.range() <= p.range() + 1e-9);
                if q.range() < p.range() - 1e-12 {
                    echoes += 1;
                    assert!(q.range() <= 20.0 + 1e-9);
                }
                assert!(q.intensity <= p.intensity);
                j += 1;
            }
        }
        assert_eq!(j, out.len());
        assert!(echoes > 1_000, "{echoes}");
    }

    #[test]
    fn attenuation_lowers_mean_intensity() {
        let cloud = scene(3_000, 4);
        let profile = SeverityProfile::default();
        for kind in [Rain, Snow] {
            let spec = CorruptionSpec::new(kind, 2, 1)
                .with_override("intensity_floor", 0.0)
                .with_override("drop_prob", 0.0);
            let out = simulate_precipitation(&cloud, &spec, &profile).unwrap();
            assert!(out.len() <= cloud.len());
            assert!(out.mean_intensity().unwrap() < cloud.mean_intensity().unwrap());
        }
    }

    #[test]
    fn fog_echoes_within_halo_and_survival_monotone() {
        let cloud = scene(5_000, 5);
        let profile = SeverityProfile::default();
        let spec = CorruptionSpec::new(Fog, 5, 2).with_override("scatter_prob", 1.0);
        let out = simulate_fog(&cloud, &spec, &profile).unwrap();
        assert!(out.iter().all(|p| p.range() <= 15.0 + 1e-9));

        let mut last = usize::MAX;
        for severity in 1..=5 {
            let n = simulate_fog(&cloud, &CorruptionSpec::new(Fog, severity, 2), &profile)
                .unwrap()
                .len();
            assert!(n <= last, "severity {severity}: {n} > {last}");
            last = n;
        }
        assert!(last < cloud.len());
    }

    #[test]
    fn wet_ground_only_touches_ground_band() {
        let cloud = scene(4_000, 6);
        let profile = SeverityProfile::default();
        let spec = CorruptionSpec::new(RainWg, 5, 9);
        let out = wet_ground(&cloud, &spec, &profile).unwrap();
        let off_ground: Vec<&Point> = cloud.iter().filter(|p| (p.z + 1.73).abs() > 0.2).collect();
        let out_off: Vec<&Point> = out.iter().filter(|p| (p.z + 1.73).abs() > 0.2).collect();
        assert_eq!(off_ground, out_off);
        let ground_in = cloud.len() - off_ground.len();
        let ground_out = out.len() - out_off.len();
        assert!(ground_out < ground_in);
        for p in out.iter().filter(|p| (p.z + 1.73).abs() <= 0.2) {
            assert!(cloud.iter().any(|q| q.x == p.x
                && q.y == p.y
                && (q.intensity * 0.5 - p.intensity).abs() < 1e-15));
        }
    }

    #[test]
    fn wet_kinds_compose() {
        let cloud = scene(3_000, 7);
        let profile = SeverityProfile::default();
        for (kind, base) in [(RainWg, Rain), (SnowWg, Snow)] {
            let spec = CorruptionSpec::new(kind, 4, 12);
            let combined = corrupt(&cloud, &spec, &profile).unwrap();
            let precipitated =
                corrupt(&cloud, &CorruptionSpec::new(base, 4, 12), &profile).unwrap();
            assert_eq!(
                combined,
                wet_ground(&precipitated, &spec, &profile).unwrap()
            );
        }
    }

    #[test]
    fn weather_never_adds_points_or_brightens() {
        let cloud = scene(3_000, 8);
        let profile = SeverityProfile::default();
        for kind in [Rain, Snow, Fog, RainWg, SnowWg] {
            for severity in [1, 5] {
                let out =
                    corrupt(&cloud, &CorruptionSpec::new(kind, severity, 4), &profile).unwrap();
                assert!(out.len() <= cloud.len());
                let max_in = cloud.iter().map(|p| p.intensity).fold(0.0, f64::max);
                assert!(out.iter().all(|p| p.intensity <= max_in));
            }
        }
    }
}
