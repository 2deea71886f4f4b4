use std::ffi::{CStr, CString};
use std::ptr;

use lidar_robust::io::{format_pose_line, read_kitti_bin};
use lidar_robust::sampling::derive_frame_seed;
use lidar_robust::{
    corrupt, CorruptionKind, CorruptionSpec, Point, PointCloud, Pose, SeverityProfile,
};
use lidar_robust_ffi::*;
use nalgebra::Vector3;

fn grid() -> Vec<f64> {
    let mut v = Vec::new();
    for i in 0..40 {
        for j in 0..40 {
            v.extend_from_slice(&[
                i as f64 * 0.1,
                j as f64 * 0.1,
                -1.5 + 0.001 * ((i * j) % 7) as f64,
                0.5,
            ]);
        }
    }
    v
}

fn cloud_from(values: &[f64]) -> *mut LrCloud {
    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { lr_cloud_new(values.as_ptr(), values.len() / 4, &mut c) },
        LrStatus::Ok
    );
    c
}

fn copy_out(c: *const LrCloud) -> Vec<f64> {
    let n = unsafe { lr_cloud_len(c) };
    let mut out = vec![0.0; n * 4];
    assert_eq!(
        unsafe { lr_cloud_copy_xyzi(c, out.as_mut_ptr(), n) },
        LrStatus::Ok
    );
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(lr_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn cloud_round_trips_through_handles() {
    let values = grid();
    let c = cloud_from(&values);
    assert_eq!(unsafe { lr_cloud_len(c) }, 1600);
    assert_eq!(copy_out(c), values);

    let mut small = vec![0.0; 4];
    assert_eq!(
        unsafe { lr_cloud_copy_xyzi(c, small.as_mut_ptr(), 1) },
        LrStatus::BufferTooSmall
    );
    unsafe { lr_cloud_free(c) };
    unsafe { lr_cloud_free(ptr::null_mut()) };
}

#[test]
fn corruption_matches_the_library() {
    let values = grid();
    let c = cloud_from(&values);
    let mut out = ptr::null_mut();
    let kind = CString::new("gau_noise").unwrap();
    assert_eq!(
        unsafe { lr_corrupt(c, kind.as_ptr(), 3, 42, ptr::null(), &mut out) },
        LrStatus::Ok
    );

    let points = values
        .chunks_exact(4)
        .map(|v| Point::new(v[0], v[1], v[2]).with_intensity(v[3]))
        .collect();
    let direct = corrupt(
        &PointCloud::new(points),
        &CorruptionSpec::new(CorruptionKind::GauNoise, 3, 42),
        &SeverityProfile::default(),
    )
    .unwrap();
    let flat: Vec<f64> = direct
        .iter()
        .flat_map(|p| [p.x, p.y, p.z, p.intensity])
        .collect();
    assert_eq!(copy_out(out), flat);

    let bad = CString::new("hail").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { lr_corrupt(c, bad.as_ptr(), 3, 42, ptr::null(), &mut none) },
        LrStatus::UnknownKind
    );
    assert!(none.is_null());
    assert!(last_error().contains("hail"));
    assert_eq!(
        unsafe { lr_corrupt(c, kind.as_ptr(), 9, 42, ptr::null(), &mut none) },
        LrStatus::InvalidArgument
    );
    unsafe {
        lr_cloud_free(out);
        lr_cloud_free(c);
    }
}

#[test]
fn profiles_parse_from_toml() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lr_profile_default(&mut p) }, LrStatus::Ok);
    unsafe { lr_profile_free(p) };

    let text = CString::new("[gau_noise]\nsigma = [0.0, 0.0, 0.0, 0.0, 0.0]\n").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { lr_profile_from_toml(text.as_ptr(), &mut p) },
        LrStatus::Ok,
        "{}",
        last_error()
    );
    let values = grid();
    let c = cloud_from(&values);
    let kind = CString::new("gau_noise").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { lr_corrupt(c, kind.as_ptr(), 5, 1, p, &mut out) },
        LrStatus::Ok
    );
    assert_eq!(copy_out(out), values);

    let junk = CString::new("[[[").unwrap();
    let mut q = ptr::null_mut();
    assert_eq!(
        unsafe { lr_profile_from_toml(junk.as_ptr(), &mut q) },
        LrStatus::Format
    );
    unsafe {
        lr_cloud_free(out);
        lr_cloud_free(c);
        lr_profile_free(p);
    }
}

#[test]
fn kitti_files_and_filter() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("000007.bin").to_str().unwrap()).unwrap();
    let c = cloud_from(&grid());
    assert_eq!(
        unsafe { lr_cloud_write_kitti(c, path.as_ptr()) },
        LrStatus::Ok
    );
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { lr_cloud_read_kitti(path.as_ptr(), &mut back) },
        LrStatus::Ok
    );
    let direct = read_kitti_bin(dir.path().join("000007.bin")).unwrap();
    let flat: Vec<f64> = direct
        .iter()
        .flat_map(|p| [p.x, p.y, p.z, p.intensity])
        .collect();
    assert_eq!(copy_out(back), flat);

    let params = lr_bilateral_params_default();
    assert_eq!(params.iterations, 1);
    let mut filtered = ptr::null_mut();
    assert_eq!(
        unsafe { lr_bilateral_filter(c, params, &mut filtered) },
        LrStatus::Ok
    );
    assert_eq!(unsafe { lr_cloud_len(filtered) }, 1600);
    let bad = LrBilateralParams {
        radius: -1.0,
        ..params
    };
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { lr_bilateral_filter(c, bad, &mut none) },
        LrStatus::InvalidArgument
    );

    let missing = CString::new(dir.path().join("nope.bin").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { lr_cloud_read_kitti(missing.as_ptr(), &mut none) },
        LrStatus::Io
    );
    unsafe {
        lr_cloud_free(c);
        lr_cloud_free(back);
        lr_cloud_free(filtered);
    }
}

#[test]
fn trajectories_and_rpe() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, offset: f64| {
        let lines: Vec<String> = (0..5)
            .map(|k| {
                format_pose_line(&Pose::from_translation(Vector3::new(
                    k as f64 * (1.0 + offset),
                    0.0,
                    0.0,
                )))
            })
            .collect();
        let p = dir.path().join(name);
        std::fs::write(&p, lines.join("\n") + "\n").unwrap();
        CString::new(p.to_str().unwrap()).unwrap()
    };
    let (gt_path, est_path) = (write("gt.txt", 0.0), write("est.txt", 0.01));
    let (mut gt, mut est) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { lr_trajectory_read(gt_path.as_ptr(), &mut gt) },
        LrStatus::Ok
    );
    assert_eq!(
        unsafe { lr_trajectory_read(est_path.as_ptr(), &mut est) },
        LrStatus::Ok
    );
    assert_eq!(unsafe { lr_trajectory_len(gt) }, 5);
    let (mut t, mut r) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { lr_rpe(est, gt, &mut t, &mut r) }, LrStatus::Ok);
    assert!((t - 0.01).abs() < 1e-12, "{t}");
    assert_eq!(r, 0.0);
    assert_eq!(
        unsafe { lr_rpe(est, gt, ptr::null_mut(), &mut r) },
        LrStatus::NullPointer
    );
    unsafe {
        lr_trajectory_free(gt);
        lr_trajectory_free(est);
    }
}

#[test]
fn seeds_and_version() {
    assert_eq!(lr_derive_frame_seed(0, 0, 0), 0x4926_FA3E_FA58_CA0B);
    assert_eq!(lr_derive_frame_seed(7, 3, 2), derive_frame_seed(7, 3, 2));
    assert!(!unsafe { CStr::from_ptr(lr_version()) }
        .to_str()
        .unwrap()
        .is_empty());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/lidar_robust.h"
    ))
    .unwrap();
    for name in [
        "lr_version",
        "lr_last_error_message",
        "lr_derive_frame_seed",
        "lr_cloud_new",
        "lr_cloud_free",
        "lr_cloud_len",
        "lr_cloud_copy_xyzi",
        "lr_cloud_read_kitti",
        "lr_cloud_write_kitti",
        "lr_profile_default",
        "lr_profile_from_toml",
        "lr_profile_free",
        "lr_corrupt",
        "lr_bilateral_params_default",
        "lr_bilateral_filter",
        "lr_trajectory_read",
        "lr_trajectory_free",
        "lr_trajectory_len",
        "lr_rpe",
        "typedef struct LrCloud LrCloud",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
