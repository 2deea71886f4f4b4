use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::corruption::{CorruptionKind, SeverityProfile};
use crate::error::{Error, Result};
use crate::io::{frame_file_name, write_kitti_bin};

use super::corrupt_frames;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frame: u64,
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
    /// Relative to the export directory.
    pub path: PathBuf,
    pub points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Writes a corrupted copy of every frame to `out_dir/<kind>/NNNNNN.bin`,
/// keeping frame numbers, and a `manifest.json` describing each file.
/// Frames get the same per-frame seeds as in a sweep, so an exported file
/// decodes to exactly what the sweep evaluated, up to `f32` storage.
pub fn export_augmentation(
    frames: &[PointCloud],
    kinds: &[CorruptionKind],
    severity: u8,
    seed: u64,
    profile: &SeverityProfile,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let mut manifest = Manifest::default();
    for &kind in kinds {
        let dir = out_dir.join(kind.name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let corrupted = corrupt_frames(frames, kind, severity, seed, profile)?;
        for cloud in &corrupted {
            let relative = PathBuf::from(kind.name()).join(frame_file_name(cloud.frame_id));
            write_kitti_bin(cloud, out_dir.join(&relative))?;
            manifest.entries.push(ManifestEntry {
                frame: cloud.frame_id,
                kind,
                severity,
                seed,
                path: relative,
                points: cloud.len(),
            });
        }
    }
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is always serializable");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
