//! Procedural scan sequences for desk-scale experiments.
//!
//! The only scene is `corridor`: a ground plane, two long side walls with
//! regularly spaced pillars, closed ends and seeded boxes scattered near the
//! walls. A 64-beam spinning sensor mounted 1.73 m above the ground drives
//! down the corridor at constant speed while its heading sways gently.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::pose::{Pose, Trajectory};
use crate::sampling::rng;

pub const SCENES: [&str; 1] = ["corridor"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorConfig {
    pub beams: u16,
    pub azimuth_steps: usize,
    /// Elevation of the highest beam, degrees.
    pub elevation_max_deg: f64,
    /// Elevation of the lowest beam, degrees.
    pub elevation_min_deg: f64,
    pub sensor_height: f64,
    pub max_range: f64,
    pub half_width: f64,
    pub wall_height: f64,
    pub pillar_spacing: f64,
    pub pillar_radius: f64,
    pub boxes_per_10m: usize,
    /// Forward motion per frame, meters.
    pub speed: f64,
    /// Peak heading change per frame, degrees.
    pub yaw_amplitude_deg: f64,
    /// Frames per heading oscillation.
    pub yaw_period: f64,
    /// Standard deviation of the range noise, meters.
    pub range_noise: f64,
    /// Peak body pitch and roll, degrees.
    pub wobble_deg: f64,
    /// Start each revolution at a random azimuth within one step.
    pub random_phase: bool,
    /// Perturb every ray by up to half a beam spacing in elevation and half
    /// an azimuth step, uniformly.
    pub ray_jitter: bool,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        CorridorConfig {
            beams: 64,
            azimuth_steps: 360,
            elevation_max_deg: 2.0,
            elevation_min_deg: -24.8,
            sensor_height: 1.73,
            max_range: 50.0,
            half_width: 6.0,
            wall_height: 6.0,
            pillar_spacing: 4.0,
            pillar_radius: 0.3,
            boxes_per_10m: 3,
            speed: 1.0,
            yaw_amplitude_deg: 0.5,
            yaw_period: 20.0,
            range_noise: 0.005,
            wobble_deg: 0.0,
            random_phase: false,
            ray_jitter: true,
        }
    }
}

impl CorridorConfig {
    /// Rays per scan; every frame's point count stays close to this.
    pub fn nominal_points(&self) -> usize {
        usize::from(self.beams) * self.azimuth_steps
    }

    /// Sensor motion between frames `k - 1` and `k`.
    pub fn step(&self, k: usize) -> Pose {
        let phase = 2.0 * std::f64::consts::PI * k as f64 / self.yaw_period;
        let yaw = self.yaw_amplitude_deg.to_radians() * phase.cos();
        Pose::from_yaw(yaw, Vector3::new(self.speed, 0.0, 0.0))
    }

    /// Body attitude at frame `k`, a slow pitch and roll oscillation.
    pub fn attitude(&self, k: usize) -> Pose {
        let a = self.wobble_deg.to_radians();
        let t = k as f64;
        let pitch = Pose::from_axis_angle(&Vector3::y(), a * (0.9 * t).sin(), Vector3::zeros());
        let roll =
            Pose::from_axis_angle(&Vector3::x(), a * (1.3 * t + 0.5).sin(), Vector3::zeros());
        pitch.compose(&roll)
    }

    /// Sensor poses in the world frame, before the mounting height.
    fn world_poses(&self, frames: usize) -> Vec<Pose> {
        let mut base = Pose::identity();
        let mut poses = Vec::with_capacity(frames);
        for k in 0..frames {
            if k > 0 {
                base = base.compose(&self.step(k));
            }
            poses.push(base.compose(&self.attitude(k)));
        }
        poses
    }

    /// Poses of frames `0..frames` relative to frame 0.
    pub fn trajectory(&self, frames: usize) -> Vec<Pose> {
        let world = self.world_poses(frames);
        let origin = world.first().map_or(Pose::identity(), Pose::inverse);
        world.iter().map(|p| origin.compose(p)).collect()
    }
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    /// Horizontal plane `z = height`.
    Floor { height: f64 },
    /// Vertical plane `axis = offset` with the given axis index (0 = x, 1 = y).
    Wall { axis: usize, offset: f64, top: f64 },
    Pillar {
        x: f64,
        y: f64,
        radius: f64,
        top: f64,
    },
    Cuboid {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
}

#[derive(Clone, Copy, Debug)]
struct Surface {
    shape: Shape,
    intensity: f64,
}

impl Surface {
    /// Smallest positive ray parameter at which `origin + t·dir` hits.
    fn hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        const EPS: f64 = 1e-9;
        match self.shape {
            Shape::Floor { height } => {
                if dir.z.abs() < EPS {
                    return None;
                }
                let t = (height - origin.z) / dir.z;
                (t > EPS).then_some(t)
            }
            Shape::Wall { axis, offset, top } => {
                if dir[axis].abs() < EPS {
                    return None;
                }
                let t = (offset - origin[axis]) / dir[axis];
                let z = origin.z + t * dir.z;
                (t > EPS && (0.0..=top).contains(&z)).then_some(t)
            }
            Shape::Pillar { x, y, radius, top } => {
                let (ox, oy) = (origin.x - x, origin.y - y);
                let a = dir.x * dir.x + dir.y * dir.y;
                if a < EPS {
                    return None;
                }
                let b = ox * dir.x + oy * dir.y;
                let c = ox * ox + oy * oy - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / a;
                let z = origin.z + t * dir.z;
                (t > EPS && (0.0..=top).contains(&z)).then_some(t)
            }
            Shape::Cuboid { min, max } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for i in 0..3 {
                    if dir[i].abs() < EPS {
                        if origin[i] < min[i] || origin[i] > max[i] {
                            return None;
                        }
                        continue;
                    }
                    let (a, b) = ((min[i] - origin[i]) / dir[i], (max[i] - origin[i]) / dir[i]);
                    t_near = t_near.max(a.min(b));
                    t_far = t_far.min(a.max(b));
                }
                (t_near <= t_far && t_near > EPS).then_some(t_near)
            }
        }
    }
}

struct World {
    surfaces: Vec<Surface>,
}

impl World {
    fn corridor(cfg: &CorridorConfig, length: f64, seed: u64) -> World {
        let mut r = rng(seed, 0);
        let (w, top) = (cfg.half_width, cfg.wall_height);
        let x_start = -20.0;
        let x_end = length + 30.0;
        let mut surfaces = vec![
            Surface {
                shape: Shape::Floor { height: 0.0 },
                intensity: 0.2,
            },
            Surface {
                shape: Shape::Wall {
                    axis: 1,
                    offset: w,
                    top,
                },
                intensity: 0.5,
            },
            Surface {
                shape: Shape::Wall {
                    axis: 1,
                    offset: -w,
                    top,
                },
                intensity: 0.45,
            },
            Surface {
                shape: Shape::Wall {
                    axis: 0,
                    offset: x_start,
                    top,
                },
                intensity: 0.55,
            },
            Surface {
                shape: Shape::Wall {
                    axis: 0,
                    offset: x_end,
                    top,
                },
                intensity: 0.55,
            },
        ];
        let mut x = x_start + cfg.pillar_spacing / 2.0;
        let mut left = true;
        while x < x_end {
            let jitter = r.random_range(-0.5..0.5);
            let side = if left { 1.0 } else { -1.0 };
            surfaces.push(Surface {
                shape: Shape::Pillar {
                    x: x + jitter,
                    y: side * (w - cfg.pillar_radius - 0.2),
                    radius: cfg.pillar_radius,
                    top,
                },
                intensity: 0.7,
            });
            left = !left;
            x += cfg.pillar_spacing / 2.0;
        }
        let boxes = ((x_end - x_start) / 10.0 * cfg.boxes_per_10m as f64).round() as usize;
        for _ in 0..boxes {
            let cx = r.random_range(x_start..x_end);
            let side = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            let cy = side * r.random_range(0.4 * w..w - 1.0);
            let (hx, hy) = (r.random_range(0.25..0.75), r.random_range(0.25..0.6));
            let h = r.random_range(0.4..2.0);
            surfaces.push(Surface {
                shape: Shape::Cuboid {
                    min: Vector3::new(cx - hx, cy - hy, 0.0),
                    max: Vector3::new(cx + hx, cy + hy, h),
                },
                intensity: r.random_range(0.3..0.9),
            });
        }
        World { surfaces }
    }

    fn cast(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        max_range: f64,
    ) -> Option<(f64, f64)> {
        self.surfaces
            .iter()
            .filter_map(|s| s.hit(origin, dir).map(|t| (t, s.intensity)))
            .filter(|(t, _)| *t <= max_range)
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

fn scan(world: &World, cfg: &CorridorConfig, sensor: &Pose, frame: usize, seed: u64) -> PointCloud {
    let mut r = rng(seed, 1 + frame as u64);
    let noise = Normal::new(0.0, cfg.range_noise.max(0.0)).expect("finite noise scale");
    let beams = usize::from(cfg.beams);
    let step = 2.0 * std::f64::consts::PI / cfg.azimuth_steps as f64;
    let beam_spacing = if beams > 1 {
        (cfg.elevation_max_deg - cfg.elevation_min_deg).to_radians() / (beams - 1) as f64
    } else {
        0.0
    };
    let phase = if cfg.random_phase {
        r.random_range(0.0..step)
    } else {
        0.0
    };
    let mut points = Vec::with_capacity(cfg.nominal_points());
    for beam in 0..beams {
        let frac = if beams > 1 {
            beam as f64 / (beams - 1) as f64
        } else {
            0.0
        };
        let elev0 = (cfg.elevation_min_deg
            + frac * (cfg.elevation_max_deg - cfg.elevation_min_deg))
            .to_radians();
        for col in 0..cfg.azimuth_steps {
            let mut az = step * col as f64 + phase - std::f64::consts::PI;
            let mut elev = elev0;
            if cfg.ray_jitter {
                az += step * r.random_range(-0.5..0.5);
                elev += beam_spacing * r.random_range(-0.5..0.5);
            }
            let local = Vector3::new(elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin());
            let dir = sensor.rotation * local;
            let eps: f64 = noise.sample(&mut r);
            if let Some((t, intensity)) = world.cast(&sensor.translation, &dir, cfg.max_range) {
                let range = (t + eps).max(0.0);
                let p = local * range;
                points.push(
                    Point::new(p.x, p.y, p.z)
                        .with_intensity(intensity)
                        .with_layer(beam as u16),
                );
            }
        }
    }
    let mut cloud = PointCloud::new(points).with_frame_id(frame as u64);
    cloud.beam_count = cfg.beams;
    cloud
}

/// Frames in the sensor frame together with ground-truth poses relative to
/// the first frame.
pub fn corridor_sequence(
    cfg: &CorridorConfig,
    frames: usize,
    seed: u64,
) -> Result<Vec<(PointCloud, Pose)>> {
    if frames < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            actual: frames,
        });
    }
    let world_poses = cfg.world_poses(frames);
    let length = world_poses.last().map_or(0.0, |p| p.translation.x.max(0.0));
    let world = World::corridor(cfg, length, seed);
    let mount = Pose::from_translation(Vector3::new(0.0, 0.0, cfg.sensor_height));
    Ok(world_poses
        .iter()
        .zip(cfg.trajectory(frames))
        .enumerate()
        .map(|(k, (w, pose))| (scan(&world, cfg, &mount.compose(w), k, seed), pose))
        .collect())
}

/// Named scene with default settings.
pub fn generate_synthetic_sequence(
    name: &str,
    frames: usize,
    seed: u64,
) -> Result<Vec<(PointCloud, Pose)>> {
    match name {
        "corridor" => corridor_sequence(&CorridorConfig::default(), frames, seed),
        other => Err(Error::UnknownScene(other.to_string())),
    }
}

/// Splits a generated sequence into frames and a ground-truth trajectory.
pub fn split_sequence(sequence: Vec<(PointCloud, Pose)>) -> (Vec<PointCloud>, Trajectory) {
    let mut frames = Vec::with_capacity(sequence.len());
    let mut gt = Trajectory::default();
    for (cloud, pose) in sequence {
        gt.push(cloud.frame_id, pose);
        frames.push(cloud);
    }
    (frames, gt)
}
