//! The 18 corruption kinds and the dispatcher over them.
//!
//! Noise and density corruptions live in [`noise`] and [`density`]; weather
//! kinds are delegated to [`crate::weather`]. Every operation takes the input
//! cloud by reference, returns a new cloud and is a pure function of
//! `(cloud, spec, profile)`.

pub mod density;
pub mod noise;
pub mod profile;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::weather;

pub use density::{
    beam_deletion, cutout, layer_deletion, local_density_decrease, local_density_increase,
};
pub use noise::{
    background_noise, gaussian_noise_ccs, gaussian_noise_scs, impulse_noise_ccs, impulse_noise_scs,
    uniform_noise_ccs, uniform_noise_scs, upsample,
};
pub use profile::SeverityProfile;

/// RNG stream used for per-point draws (stream 0 belongs to subset selection).
pub(crate) const DRAW_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Rain,
    Snow,
    RainWg,
    SnowWg,
    Fog,
    BgNoise,
    Upsample,
    UniNoise,
    GauNoise,
    ImpNoise,
    UniNoiseRad,
    GauNoiseRad,
    ImpNoiseRad,
    LocalInc,
    LocalDec,
    BeamDel,
    LayerDel,
    Cutout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Weather,
    Noise,
    Density,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 18] = [
        CorruptionKind::Rain,
        CorruptionKind::Snow,
        CorruptionKind::RainWg,
        CorruptionKind::SnowWg,
        CorruptionKind::Fog,
        CorruptionKind::BgNoise,
        CorruptionKind::Upsample,
        CorruptionKind::UniNoise,
        CorruptionKind::GauNoise,
        CorruptionKind::ImpNoise,
        CorruptionKind::UniNoiseRad,
        CorruptionKind::GauNoiseRad,
        CorruptionKind::ImpNoiseRad,
        CorruptionKind::LocalInc,
        CorruptionKind::LocalDec,
        CorruptionKind::BeamDel,
        CorruptionKind::LayerDel,
        CorruptionKind::Cutout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::Rain => "rain",
            CorruptionKind::Snow => "snow",
            CorruptionKind::RainWg => "rain_wg",
            CorruptionKind::SnowWg => "snow_wg",
            CorruptionKind::Fog => "fog",
            CorruptionKind::BgNoise => "bg_noise",
            CorruptionKind::Upsample => "upsample",
            CorruptionKind::UniNoise => "uni_noise",
            CorruptionKind::GauNoise => "gau_noise",
            CorruptionKind::ImpNoise => "imp_noise",
            CorruptionKind::UniNoiseRad => "uni_noise_rad",
            CorruptionKind::GauNoiseRad => "gau_noise_rad",
            CorruptionKind::ImpNoiseRad => "imp_noise_rad",
            CorruptionKind::LocalInc => "local_inc",
            CorruptionKind::LocalDec => "local_dec",
            CorruptionKind::BeamDel => "beam_del",
            CorruptionKind::LayerDel => "layer_del",
            CorruptionKind::Cutout => "cutout",
        }
    }

    /// Position in [`CorruptionKind::ALL`]; feeds per-frame seed derivation.
    pub fn ordinal(self) -> u64 {
        CorruptionKind::ALL
            .iter()
            .position(|&k| k == self)
            .unwrap_or(0) as u64
    }

    pub fn category(self) -> Category {
        use CorruptionKind::*;
        match self {
            Rain | Snow | RainWg | SnowWg | Fog => Category::Weather,
            BgNoise | Upsample | UniNoise | GauNoise | ImpNoise | UniNoiseRad | GauNoiseRad
            | ImpNoiseRad => Category::Noise,
            LocalInc | LocalDec | BeamDel | LayerDel | Cutout => Category::Density,
        }
    }

    /// Kinds that only move existing points.
    pub fn preserves_count(self) -> bool {
        use CorruptionKind::*;
        matches!(
            self,
            UniNoise | GauNoise | ImpNoise | UniNoiseRad | GauNoiseRad | ImpNoiseRad
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Which corruption to apply, how strongly, and with which seed.
///
/// `overrides` replaces individual profile parameters for this severity, e.g.
/// `sigma = 0.0` for `gau_noise` or `count = 100` for `bg_noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Self {
        CorruptionSpec {
            kind,
            severity,
            seed,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.severity) {
            return Err(Error::InvalidSeverity(self.severity));
        }
        let allowed = profile::override_keys(self.kind);
        for (key, value) in &self.overrides {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "`{key}` is not a parameter of {} (expected one of {allowed:?})",
                    self.kind
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("`{key}` must be finite")));
            }
        }
        Ok(())
    }

    /// Zero-based row into the five-level profile tables.
    pub(crate) fn level(&self) -> usize {
        usize::from(self.severity - 1)
    }

    pub(crate) fn param(&self, key: &str, default: f64) -> f64 {
        self.overrides.get(key).copied().unwrap_or(default)
    }

    pub(crate) fn expect_kind(&self, expected: &[CorruptionKind]) -> Result<()> {
        self.validate()?;
        if expected.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "operation expects kind {expected:?}, spec has {}",
                self.kind
            )))
        }
    }
}

/// Applies `spec` to `cloud`, dispatching on the corruption kind.
pub fn corrupt(
    cloud: &PointCloud,
    spec: &CorruptionSpec,
    profile: &SeverityProfile,
) -> Result<PointCloud> {
    spec.validate()?;
    use CorruptionKind::*;
    match spec.kind {
        Rain | Snow => weather::simulate_precipitation(cloud, spec, profile),
        RainWg | SnowWg => weather::precipitation_with_wet_ground(cloud, spec, profile),
        Fog => weather::simulate_fog(cloud, spec, profile),
        BgNoise => background_noise(cloud, spec, profile),
        Upsample => upsample(cloud, spec, profile),
        UniNoise => uniform_noise_ccs(cloud, spec, profile),
        GauNoise => gaussian_noise_ccs(cloud, spec, profile),
        ImpNoise => impulse_noise_ccs(cloud, spec, profile),
        UniNoiseRad => uniform_noise_scs(cloud, spec, profile),
        GauNoiseRad => gaussian_noise_scs(cloud, spec, profile),
        ImpNoiseRad => impulse_noise_scs(cloud, spec, profile),
        LocalInc => local_density_increase(cloud, spec, profile),
        LocalDec => local_density_decrease(cloud, spec, profile),
        BeamDel => beam_deletion(cloud, spec, profile),
        LayerDel => layer_deletion(cloud, spec, profile),
        Cutout => cutout(cloud, spec, profile),
    }
}

/// Parses a comma-separated kind list, or `all`.
pub fn parse_kind_list(s: &str) -> Result<Vec<CorruptionKind>> {
    if s.trim() == "all" {
        return Ok(CorruptionKind::ALL.to_vec());
    }
    s.split(',').map(|k| k.trim().parse()).collect()
}
