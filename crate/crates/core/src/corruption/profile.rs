//! Severity profile: the mapping from severity level 1-5 to concrete
//! corruption parameters, serialisable as a TOML document with one table per
//! corruption kind.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorruptionKind, CorruptionSpec};
use crate::error::{Error, Result};

/// One value per severity level, index 0 = severity 1.
pub type Levels<T> = [T; 5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianLevels {
    /// Standard deviation, meters.
    pub sigma: Levels<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformLevels {
    /// Half-width of the uniform displacement, meters.
    pub amplitude: Levels<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulseLevels {
    /// Fraction of points displaced.
    pub fraction: Levels<f64>,
    /// Displacement magnitude, meters.
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundLevels {
    /// Added points as a percentage of the frame size.
    pub percent: Levels<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpsampleLevels {
    pub fraction: Levels<f64>,
    /// Per-axis jitter half-width, meters.
    pub jitter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalIncLevels {
    pub clusters: Levels<usize>,
    pub neighbors: usize,
    /// Interpolated points added per cluster.
    pub interp_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDecLevels {
    pub clusters: Levels<usize>,
    pub neighbors: usize,
    /// Points removed from each neighborhood.
    pub remove: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoutLevels {
    pub clusters: Levels<usize>,
    pub neighbors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamDelLevels {
    /// Fraction of points deleted.
    pub fraction: Levels<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDelLevels {
    /// Number of layers deleted.
    pub layers: Levels<usize>,
    /// Layer count assumed when layers have to be inferred.
    pub beam_count: u16,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecipitationLevels {
    /// Extinction coefficient, 1/m.
    pub attenuation: Levels<f64>,
    pub scatter_prob: Levels<f64>,
    pub drop_prob: Levels<f64>,
    /// Farthest droplet echo, meters.
    pub scatter_range_max: f64,
    pub intensity_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FogLevels {
    pub attenuation: Levels<f64>,
    pub scatter_prob: Levels<f64>,
    pub drop_prob: Levels<f64>,
    /// Farthest fog echo, meters.
    pub halo_max: f64,
    pub intensity_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WetGroundLevels {
    /// Ground height in the sensor frame, meters.
    pub ground_z: f64,
    /// Half-height of the ground band around `ground_z`, meters.
    pub band: f64,
    pub wet_drop_prob: Levels<f64>,
    /// Intensity factor applied to surviving ground points.
    pub reflectance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeverityProfile {
    pub gau_noise: GaussianLevels,
    pub uni_noise: UniformLevels,
    pub imp_noise: ImpulseLevels,
    pub gau_noise_rad: GaussianLevels,
    pub uni_noise_rad: UniformLevels,
    pub imp_noise_rad: ImpulseLevels,
    pub bg_noise: BackgroundLevels,
    pub upsample: UpsampleLevels,
    pub local_inc: LocalIncLevels,
    pub local_dec: LocalDecLevels,
    pub cutout: CutoutLevels,
    pub beam_del: BeamDelLevels,
    pub layer_del: LayerDelLevels,
    pub rain: PrecipitationLevels,
    pub snow: PrecipitationLevels,
    pub fog: FogLevels,
    pub wet_ground: WetGroundLevels,
}

const NOISE_SCALE: Levels<f64> = [0.02, 0.04, 0.06, 0.08, 0.10];
const CLUSTERS: Levels<usize> = [10, 20, 30, 40, 50];
const RAIN_ATTENUATION: Levels<f64> = [0.003, 0.006, 0.009, 0.012, 0.015];

fn scaled(levels: Levels<f64>, factor: f64) -> Levels<f64> {
    levels.map(|v| v * factor)
}

fn linear(step: f64) -> Levels<f64> {
    [1.0, 2.0, 3.0, 4.0, 5.0].map(|s| s * step)
}

impl Default for SeverityProfile {
    fn default() -> Self {
        let impulse = ImpulseLevels {
            fraction: [0.05, 0.10, 0.15, 0.20, 0.25],
            constant: 0.10,
        };
        let rain = PrecipitationLevels {
            attenuation: RAIN_ATTENUATION,
            scatter_prob: linear(0.0005),
            drop_prob: linear(0.01),
            scatter_range_max: 20.0,
            intensity_floor: 0.02,
        };
        SeverityProfile {
            gau_noise: GaussianLevels { sigma: NOISE_SCALE },
            uni_noise: UniformLevels {
                amplitude: NOISE_SCALE,
            },
            imp_noise: impulse.clone(),
            gau_noise_rad: GaussianLevels { sigma: NOISE_SCALE },
            uni_noise_rad: UniformLevels {
                amplitude: NOISE_SCALE,
            },
            imp_noise_rad: impulse,
            bg_noise: BackgroundLevels {
                percent: linear(1.0),
            },
            upsample: UpsampleLevels {
                fraction: [0.02, 0.04, 0.06, 0.08, 0.10],
                jitter: 0.1,
            },
            local_inc: LocalIncLevels {
                clusters: CLUSTERS,
                neighbors: 100,
                interp_points: 80,
            },
            local_dec: LocalDecLevels {
                clusters: CLUSTERS,
                neighbors: 100,
                remove: 75,
            },
            cutout: CutoutLevels {
                clusters: CLUSTERS,
                neighbors: 20,
            },
            beam_del: BeamDelLevels {
                fraction: [0.10, 0.20, 0.30, 0.40, 0.50],
            },
            layer_del: LayerDelLevels {
                layers: [8, 16, 24, 32, 40],
                beam_count: 64,
            },
            snow: PrecipitationLevels {
                attenuation: scaled(RAIN_ATTENUATION, 1.5),
                scatter_prob: linear(0.001),
                drop_prob: linear(0.015),
                ..rain.clone()
            },
            rain,
            fog: FogLevels {
                attenuation: [0.01, 0.02, 0.03, 0.045, 0.06],
                scatter_prob: linear(0.002),
                drop_prob: [0.0; 5],
                halo_max: 15.0,
                intensity_floor: 0.02,
            },
            wet_ground: WetGroundLevels {
                ground_z: -1.73,
                band: 0.2,
                wet_drop_prob: linear(0.1),
                reflectance: 0.5,
            },
        }
    }
}

fn non_decreasing<T: PartialOrd + Copy>(levels: &Levels<T>) -> bool {
    levels.windows(2).all(|w| w[0] <= w[1])
}

impl SeverityProfile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let profile: SeverityProfile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("severity profile always serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Checks ranges and that every table is non-decreasing in severity.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check_f = |name: &str, levels: &Levels<f64>, lo: f64, hi: f64| {
            if !non_decreasing(levels) {
                problems.push(format!("{name} must be non-decreasing in severity"));
            }
            if levels.iter().any(|v| !(lo..=hi).contains(v)) {
                problems.push(format!("{name} must lie in [{lo}, {hi}]"));
            }
        };
        let inf = f64::INFINITY;
        check_f("gau_noise.sigma", &self.gau_noise.sigma, 0.0, inf);
        check_f("uni_noise.amplitude", &self.uni_noise.amplitude, 0.0, inf);
        check_f("imp_noise.fraction", &self.imp_noise.fraction, 0.0, 1.0);
        check_f("gau_noise_rad.sigma", &self.gau_noise_rad.sigma, 0.0, inf);
        check_f(
            "uni_noise_rad.amplitude",
            &self.uni_noise_rad.amplitude,
            0.0,
            inf,
        );
        check_f(
            "imp_noise_rad.fraction",
            &self.imp_noise_rad.fraction,
            0.0,
            1.0,
        );
        check_f("bg_noise.percent", &self.bg_noise.percent, 0.0, inf);
        check_f("upsample.fraction", &self.upsample.fraction, 0.0, 1.0);
        check_f("beam_del.fraction", &self.beam_del.fraction, 0.0, 1.0);
        for (name, p) in [("rain", &self.rain), ("snow", &self.snow)] {
            check_f(&format!("{name}.attenuation"), &p.attenuation, 0.0, inf);
            check_f(&format!("{name}.scatter_prob"), &p.scatter_prob, 0.0, 1.0);
            check_f(&format!("{name}.drop_prob"), &p.drop_prob, 0.0, 1.0);
        }
        check_f("fog.attenuation", &self.fog.attenuation, 0.0, inf);
        check_f("fog.scatter_prob", &self.fog.scatter_prob, 0.0, 1.0);
        check_f("fog.drop_prob", &self.fog.drop_prob, 0.0, 1.0);
        check_f(
            "wet_ground.wet_drop_prob",
            &self.wet_ground.wet_drop_prob,
            0.0,
            1.0,
        );

        for (name, levels) in [
            ("local_inc.clusters", &self.local_inc.clusters),
            ("local_dec.clusters", &self.local_dec.clusters),
            ("cutout.clusters", &self.cutout.clusters),
            ("layer_del.layers", &self.layer_del.layers),
        ] {
            if !non_decreasing(levels) {
                problems.push(format!("{name} must be non-decreasing in severity"));
            }
        }
        if self.local_dec.remove > self.local_dec.neighbors {
            problems.push("local_dec.remove cannot exceed local_dec.neighbors".into());
        }
        if self.local_inc.neighbors < 2 {
            problems.push("local_inc.neighbors must be at least 2".into());
        }
        if self.layer_del.beam_count == 0
            || self
                .layer_del
                .layers
                .iter()
                .any(|&l| l > usize::from(self.layer_del.beam_count))
        {
            problems.push("layer_del.layers must not exceed layer_del.beam_count (> 0)".into());
        }
        if !(0.0..=1.0).contains(&self.wet_ground.reflectance) {
            problems.push("wet_ground.reflectance must lie in [0, 1]".into());
        }
        for (name, v) in [
            ("upsample.jitter", self.upsample.jitter),
            ("imp_noise.constant", self.imp_noise.constant),
            ("imp_noise_rad.constant", self.imp_noise_rad.constant),
            ("rain.scatter_range_max", self.rain.scatter_range_max),
            ("snow.scatter_range_max", self.snow.scatter_range_max),
            ("fog.halo_max", self.fog.halo_max),
            ("wet_ground.band", self.wet_ground.band),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be a finite non-negative number"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Parameter names accepted in [`CorruptionSpec::overrides`] for each kind.
pub fn override_keys(kind: CorruptionKind) -> &'static [&'static str] {
    use CorruptionKind::*;
    const PRECIP: &[&str] = &[
        "attenuation",
        "scatter_prob",
        "drop_prob",
        "scatter_range_max",
        "intensity_floor",
    ];
    const PRECIP_WET: &[&str] = &[
        "attenuation",
        "scatter_prob",
        "drop_prob",
        "scatter_range_max",
        "intensity_floor",
        "ground_z",
        "band",
        "wet_drop_prob",
        "reflectance",
    ];
    match kind {
        Rain | Snow => PRECIP,
        RainWg | SnowWg => PRECIP_WET,
        Fog => &[
            "attenuation",
            "scatter_prob",
            "drop_prob",
            "halo_max",
            "intensity_floor",
        ],
        GauNoise | GauNoiseRad => &["sigma"],
        UniNoise | UniNoiseRad => &["amplitude"],
        ImpNoise | ImpNoiseRad => &["fraction", "constant"],
        BgNoise => &["percent", "count"],
        Upsample => &["fraction", "jitter"],
        LocalInc => &["clusters", "neighbors", "interp_points"],
        LocalDec => &["clusters", "neighbors", "remove"],
        Cutout => &["clusters", "neighbors"],
        BeamDel => &["fraction"],
        LayerDel => &["layers", "beam_count"],
    }
}

fn count_param(spec: &CorruptionSpec, key: &str, default: usize) -> Result<usize> {
    let v = spec.param(key, default as f64);
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "`{key}` must be a non-negative integer, got {v}"
        )));
    }
    Ok(v as usize)
}

fn unit_param(spec: &CorruptionSpec, key: &str, default: f64) -> Result<f64> {
    let v = spec.param(key, default);
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!(
            "`{key}` must lie in [0, 1], got {v}"
        )));
    }
    Ok(v)
}

fn non_negative_param(spec: &CorruptionSpec, key: &str, default: f64) -> Result<f64> {
    let v = spec.param(key, default);
    if v < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "`{key}` must be non-negative, got {v}"
        )));
    }
    Ok(v)
}

/// Parameters of one corruption at one severity, after overrides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ScaleParams {
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ImpulseParams {
    pub fraction: f64,
    pub constant: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ClusterParams {
    pub clusters: usize,
    pub neighbors: usize,
    /// Interpolated points per cluster (local_inc) or removals per cluster (local_dec).
    pub per_cluster: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeatherParams {
    pub attenuation: f64,
    pub scatter_prob: f64,
    /// Farthest echo range: droplet range for rain/snow, halo for fog.
    pub scatter_range_max: f64,
    pub drop_prob: f64,
    pub intensity_floor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WetGroundParams {
    pub ground_z: f64,
    pub band: f64,
    pub wet_drop_prob: f64,
    pub reflectance: f64,
}

impl SeverityProfile {
    pub(crate) fn gaussian(&self, spec: &CorruptionSpec) -> Result<ScaleParams> {
        let table = match spec.kind {
            CorruptionKind::GauNoiseRad => &self.gau_noise_rad,
            _ => &self.gau_noise,
        };
        Ok(ScaleParams {
            scale: non_negative_param(spec, "sigma", table.sigma[spec.level()])?,
        })
    }

    pub(crate) fn uniform(&self, spec: &CorruptionSpec) -> Result<ScaleParams> {
        let table = match spec.kind {
            CorruptionKind::UniNoiseRad => &self.uni_noise_rad,
            _ => &self.uni_noise,
        };
        Ok(ScaleParams {
            scale: non_negative_param(spec, "amplitude", table.amplitude[spec.level()])?,
        })
    }

    pub(crate) fn impulse(&self, spec: &CorruptionSpec) -> Result<ImpulseParams> {
        let table = match spec.kind {
            CorruptionKind::ImpNoiseRad => &self.imp_noise_rad,
            _ => &self.imp_noise,
        };
        Ok(ImpulseParams {
            fraction: unit_param(spec, "fraction", table.fraction[spec.level()])?,
            constant: non_negative_param(spec, "constant", table.constant)?,
        })
    }

    /// Number of background points to add to a frame of `n` points.
    pub(crate) fn background_count(&self, spec: &CorruptionSpec, n: usize) -> Result<usize> {
        if spec.overrides.contains_key("count") {
            return count_param(spec, "count", 0);
        }
        let percent = non_negative_param(spec, "percent", self.bg_noise.percent[spec.level()])?;
        Ok((percent / 100.0 * n as f64).round() as usize)
    }

    pub(crate) fn upsample_params(&self, spec: &CorruptionSpec) -> Result<(f64, f64)> {
        Ok((
            unit_param(spec, "fraction", self.upsample.fraction[spec.level()])?,
            non_negative_param(spec, "jitter", self.upsample.jitter)?,
        ))
    }

    pub(crate) fn local_inc_params(&self, spec: &CorruptionSpec) -> Result<ClusterParams> {
        let t = &self.local_inc;
        let neighbors = count_param(spec, "neighbors", t.neighbors)?;
        if neighbors < 2 {
            return Err(Error::InvalidParameter(
                "`neighbors` must be at least 2".into(),
            ));
        }
        Ok(ClusterParams {
            clusters: count_param(spec, "clusters", t.clusters[spec.level()])?,
            neighbors,
            per_cluster: count_param(spec, "interp_points", t.interp_points)?,
        })
    }

    pub(crate) fn local_dec_params(&self, spec: &CorruptionSpec) -> Result<ClusterParams> {
        let t = &self.local_dec;
        let p = ClusterParams {
            clusters: count_param(spec, "clusters", t.clusters[spec.level()])?,
            neighbors: count_param(spec, "neighbors", t.neighbors)?,
            per_cluster: count_param(spec, "remove", t.remove)?,
        };
        if p.per_cluster > p.neighbors {
            return Err(Error::InvalidParameter(
                "`remove` cannot exceed `neighbors`".into(),
            ));
        }
        Ok(p)
    }

    pub(crate) fn cutout_params(&self, spec: &CorruptionSpec) -> Result<ClusterParams> {
        let neighbors = count_param(spec, "neighbors", self.cutout.neighbors)?;
        Ok(ClusterParams {
            clusters: count_param(spec, "clusters", self.cutout.clusters[spec.level()])?,
            neighbors,
            per_cluster: neighbors,
        })
    }

    pub(crate) fn beam_del_fraction(&self, spec: &CorruptionSpec) -> Result<f64> {
        unit_param(spec, "fraction", self.beam_del.fraction[spec.level()])
    }

    pub(crate) fn layer_del_params(&self, spec: &CorruptionSpec) -> Result<(usize, u16)> {
        let beam_count = count_param(spec, "beam_count", usize::from(self.layer_del.beam_count))?;
        let beam_count = u16::try_from(beam_count)
            .ok()
            .filter(|&b| b > 0)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("`beam_count` out of range: {beam_count}"))
            })?;
        let layers = count_param(spec, "layers", self.layer_del.layers[spec.level()])?;
        if layers > usize::from(beam_count) {
            return Err(Error::InvalidParameter(format!(
                "cannot delete {layers} of {beam_count} layers"
            )));
        }
        Ok((layers, beam_count))
    }

    /// Rain or snow rows, chosen by the spec's kind.
    pub fn precipitation(&self, spec: &CorruptionSpec) -> Result<WeatherParams> {
        let t = match spec.kind {
            CorruptionKind::Snow | CorruptionKind::SnowWg => &self.snow,
            _ => &self.rain,
        };
        let l = spec.level();
        Ok(WeatherParams {
            attenuation: non_negative_param(spec, "attenuation", t.attenuation[l])?,
            scatter_prob: unit_param(spec, "scatter_prob", t.scatter_prob[l])?,
            scatter_range_max: non_negative_param(spec, "scatter_range_max", t.scatter_range_max)?,
            drop_prob: unit_param(spec, "drop_prob", t.drop_prob[l])?,
            intensity_floor: non_negative_param(spec, "intensity_floor", t.intensity_floor)?,
        })
    }

    pub fn fog_params(&self, spec: &CorruptionSpec) -> Result<WeatherParams> {
        let t = &self.fog;
        let l = spec.level();
        Ok(WeatherParams {
            attenuation: non_negative_param(spec, "attenuation", t.attenuation[l])?,
            scatter_prob: unit_param(spec, "scatter_prob", t.scatter_prob[l])?,
            scatter_range_max: non_negative_param(spec, "halo_max", t.halo_max)?,
            drop_prob: unit_param(spec, "drop_prob", t.drop_prob[l])?,
            intensity_floor: non_negative_param(spec, "intensity_floor", t.intensity_floor)?,
        })
    }

    pub fn wet_ground_params(&self, spec: &CorruptionSpec) -> Result<WetGroundParams> {
        let t = &self.wet_ground;
        Ok(WetGroundParams {
            ground_z: spec.param("ground_z", t.ground_z),
            band: non_negative_param(spec, "band", t.band)?,
            wet_drop_prob: unit_param(spec, "wet_drop_prob", t.wet_drop_prob[spec.level()])?,
            reflectance: unit_param(spec, "reflectance", t.reflectance)?,
        })
    }
}
