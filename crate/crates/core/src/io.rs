//! KITTI velodyne `.bin` scans and KITTI pose text files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::pose::{Pose, Trajectory};

const RECORD_BYTES: usize = 16;

/// Decodes little-endian `(x, y, z, reflectance)` float32 records.
pub fn decode_kitti_bin(bytes: &[u8]) -> std::result::Result<PointCloud, String> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(format!(
            "length {} is not a multiple of {RECORD_BYTES} bytes (truncated record)",
            bytes.len()
        ));
    }
    let points = bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            let f = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
            let p = Point {
                x: f64::from(f(0)),
                y: f64::from(f(4)),
                z: f64::from(f(8)),
                intensity: f64::from(f(12)),
                layer: None,
            };
            if p.is_finite() && p.intensity.is_finite() {
                Ok(p)
            } else {
                Err(format!("record {i} has a non-finite value"))
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PointCloud::new(points))
}

/// Encodes a cloud as float32 records. Values are rounded to `f32`.
pub fn encode_kitti_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_kitti_bin(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cloud = decode_kitti_bin(&bytes).map_err(|m| Error::format(path, m))?;
    if let Some(id) = frame_id_from_path(path) {
        cloud.frame_id = id;
    }
    Ok(cloud)
}

pub fn write_kitti_bin(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_kitti_bin(cloud)).map_err(|e| Error::io(path, e))
}

/// `000123.bin` -> 123.
pub fn frame_id_from_path(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.parse().ok()
}

/// KITTI-style file name for a frame, e.g. `000042.bin`.
pub fn frame_file_name(frame_id: u64) -> String {
    format!("{frame_id:06}.bin")
}

/// Sorted `.bin` files of a velodyne directory.
pub fn list_velodyne_dir(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "bin"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_velodyne_dir(dir: impl AsRef<Path>) -> Result<Vec<PointCloud>> {
    list_velodyne_dir(dir)?
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let mut cloud = read_kitti_bin(path)?;
            if frame_id_from_path(path).is_none() {
                cloud.frame_id = i as u64;
            }
            Ok(cloud)
        })
        .collect()
}

/// Parses one line of 12 row-major `[R|t]` values.
pub fn parse_pose_line(line: &str) -> std::result::Result<Pose, String> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| format!("bad number `{tok}`: {e}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != 12 {
        return Err(format!("expected 12 values, found {}", values.len()));
    }
    let rotation = Matrix3::new(
        values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9],
        values[10],
    );
    let translation = Vector3::new(values[3], values[7], values[11]);
    Ok(Pose::new(rotation, translation))
}

pub fn format_pose_line(pose: &Pose) -> String {
    let r = &pose.rotation;
    let t = &pose.translation;
    let values = [
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        t.x,
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        t.y,
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
        t.z,
    ];
    values
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads a KITTI pose file; frame ids are the zero-based line numbers of
/// non-empty lines.
pub fn read_poses(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text).map_err(|m| Error::format(path, m))
}

pub fn parse_poses(text: &str) -> std::result::Result<Trajectory, String> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pose = parse_pose_line(line).map_err(|m| format!("line {}: {m}", lineno + 1))?;
        entries.push((entries.len() as u64, pose));
    }
    Ok(Trajectory::new(entries))
}

/// Writes poses in trajectory order, one line per frame.
pub fn write_poses(trajectory: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (_, pose) in trajectory.iter() {
        writeln!(w, "{}", format_pose_line(pose)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_record() {
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = decode_kitti_bin(&bytes).unwrap();
        assert_eq!(cloud.len(), 1);
        let p = cloud.points[0];
        assert_eq!((p.x, p.y, p.z, p.intensity), (1.0, 2.0, 3.0, 0.5));
    }

    #[test]
    fn empty_and_truncated() {
        assert!(decode_kitti_bin(&[]).unwrap().is_empty());
        assert!(decode_kitti_bin(&[0u8; 15]).is_err());
        assert!(decode_kitti_bin(&[0u8; 33]).is_err());
        let nan: Vec<u8> = [f32::NAN, 0.0, 0.0, 0.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert!(decode_kitti_bin(&nan).is_err());
    }

    #[test]
    fn file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000007.bin");
        let cloud = PointCloud::new(vec![Point::new(1.5, -2.25, 0.125).with_intensity(0.25)]);
        write_kitti_bin(&cloud, &path).unwrap();
        let back = read_kitti_bin(&path).unwrap();
        assert_eq!(back.frame_id, 7);
        assert_eq!(back.points, cloud.points);

        fs::write(dir.path().join("bad.bin"), [0u8; 20]).unwrap();
        assert!(matches!(
            read_kitti_bin(dir.path().join("bad.bin")),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            read_kitti_bin(dir.path().join("missing.bin")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn pose_lines() {
        let pose = parse_pose_line("1 0 0 1.5 0 1 0 -2 0 0 1 0.25").unwrap();
        assert_eq!(pose.translation, Vector3::new(1.5, -2.0, 0.25));
        assert_eq!(pose.rotation, Matrix3::identity());
        assert!(parse_pose_line("1 0 0").is_err());
        assert!(parse_pose_line("1 0 0 x 0 1 0 0 0 0 1 0").is_err());
        let back = parse_pose_line(&format_pose_line(&pose)).unwrap();
        assert_eq!(back, pose);
    }

    proptest! {
        #[test]
        fn bin_bytes_round_trip(raw in prop::collection::vec(prop::array::uniform4(prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO), 0..200)) {
            let bytes: Vec<u8> = raw.iter().flatten().flat_map(|v| v.to_le_bytes()).collect();
            let cloud = decode_kitti_bin(&bytes).unwrap();
            prop_assert_eq!(encode_kitti_bin(&cloud), bytes);
        }
    }
}
