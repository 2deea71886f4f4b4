//! C ABI over `lidar-robust`.
//!
//! Objects cross the boundary as opaque handles created by `lr_*_new`,
//! `lr_*_read` or an operation and released with the matching `lr_*_free`.
//! Every fallible call returns an [`LrStatus`]; on failure
//! [`lr_last_error_message`] describes the error on the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lidar_robust::denoise::{bilateral_filter, BilateralParams};
use lidar_robust::eval::rpe_consecutive;
use lidar_robust::io::{read_kitti_bin, read_poses, write_kitti_bin};
use lidar_robust::sampling::derive_frame_seed;
use lidar_robust::{
    corrupt, CorruptionKind, CorruptionSpec, Error, Point, PointCloud, SeverityProfile, Trajectory,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    UnknownKind = 5,
    TooFewPoints = 6,
    RegistrationFailed = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

/// Point cloud handle.
pub struct LrCloud {
    inner: PointCloud,
}

/// Severity profile handle.
pub struct LrProfile {
    inner: SeverityProfile,
}

/// Trajectory handle.
pub struct LrTrajectory {
    inner: Trajectory,
}

/// Bilateral filter parameters; see `lr_bilateral_params_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LrBilateralParams {
    pub radius: f64,
    pub sigma_d: f64,
    pub sigma_n: f64,
    pub iterations: usize,
    pub normal_k: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(error: &Error) -> LrStatus {
    match error {
        Error::Io { .. } => LrStatus::Io,
        Error::Format { .. } | Error::Config(_) => LrStatus::Format,
        Error::UnknownKind(_) => LrStatus::UnknownKind,
        Error::EmptyCloud | Error::TooFewPoints { .. } | Error::TooFewFrames { .. } => {
            LrStatus::TooFewPoints
        }
        Error::RegistrationFailed { .. } => LrStatus::RegistrationFailed,
        Error::InvalidParameter(_)
        | Error::InvalidSeverity(_)
        | Error::SelectorOutOfRange { .. }
        | Error::MissingFrame(_)
        | Error::EmptyPairSet
        | Error::TrajectoryTooShort { .. } => LrStatus::InvalidArgument,
        _ => LrStatus::Other,
    }
}

fn fail(status: LrStatus, message: &str) -> LrStatus {
    set_last_error(message);
    status
}

/// Runs `body`, turning core errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), LrStatus>) -> LrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LrStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(LrStatus::Panic, "internal panic"),
    }
}

fn check<T>(result: lidar_robust::Result<T>) -> Result<T, LrStatus> {
    result.map_err(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, LrStatus> {
    p.as_ref()
        .ok_or_else(|| fail(LrStatus::NullPointer, "null pointer argument"))
}

unsafe fn as_str<'a>(p: *const c_char) -> Result<&'a str, LrStatus> {
    if p.is_null() {
        return Err(fail(LrStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LrStatus::InvalidArgument, "string is not valid UTF-8"))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), LrStatus> {
    if out.is_null() {
        return Err(fail(LrStatus::NullPointer, "null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or "" if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Per-frame corruption seed used by sweeps and augmentation exports.
#[no_mangle]
pub extern "C" fn lr_derive_frame_seed(global_seed: u64, frame_id: u64, kind: u64) -> u64 {
    derive_frame_seed(global_seed, frame_id, kind)
}

/// Builds a cloud from `count` interleaved `x, y, z, intensity` values.
#[no_mangle]
pub unsafe extern "C" fn lr_cloud_new(
    xyzi: *const f64,
    count: usize,
    out: *mut *mut LrCloud,
) -> LrStatus {
    guard(|| {
        if xyzi.is_null() && count > 0 {
            return Err(fail(LrStatus::NullPointer, "null point buffer"));
        }
        let values = if count == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(xyzi, count * 4)
        };
        let points = values
            .chunks_exact(4)
            .map(|v| Point::new(v[0], v[1], v[2]).with_intensity(v[3]))
            .collect();
        emit(
            out,
            LrCloud {
                inner: PointCloud::new(points),
            },
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn lr_cloud_free(cloud: *mut LrCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Number of points, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lr_cloud_len(cloud: *const LrCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.inner.len())
}

/// Copies the points as interleaved `x, y, z, intensity` into `out`, which
/// must hold `capacity` points.
#[no_mangle]
pub unsafe extern "C" fn lr_cloud_copy_xyzi(
    cloud: *const LrCloud,
    out: *mut f64,
    capacity: usize,
) -> LrStatus {
    guard(|| {
        let cloud = &as_ref(cloud)?.inner;
        if cloud.len() > capacity {
            return Err(fail(
                LrStatus::BufferTooSmall,
                "output buffer holds fewer points than the cloud",
            ));
        }
        if cloud.is_empty() {
            return Ok(());
        }
        if out.is_null() {
            return Err(fail(LrStatus::NullPointer, "null output buffer"));
        }
        let dst = std::slice::from_raw_parts_mut(out, cloud.len() * 4);
        for (d, p) in dst.chunks_exact_mut(4).zip(cloud.iter()) {
            d.copy_from_slice(&[p.x, p.y, p.z, p.intensity]);
        }
        Ok(())
    })
}

/// Reads a KITTI velodyne `.bin` scan.
#[no_mangle]
pub unsafe extern "C" fn lr_cloud_read_kitti(
    path: *const c_char,
    out: *mut *mut LrCloud,
) -> LrStatus {
    guard(|| {
        let inner = check(read_kitti_bin(as_str(path)?))?;
        emit(out, LrCloud { inner })
    })
}

/// Writes a KITTI velodyne `.bin` scan (coordinates stored as `float`).
#[no_mangle]
pub unsafe extern "C" fn lr_cloud_write_kitti(
    cloud: *const LrCloud,
    path: *const c_char,
) -> LrStatus {
    guard(|| check(write_kitti_bin(&as_ref(cloud)?.inner, as_str(path)?)))
}

#[no_mangle]
pub unsafe extern "C" fn lr_profile_default(out: *mut *mut LrProfile) -> LrStatus {
    guard(|| {
        emit(
            out,
            LrProfile {
                inner: SeverityProfile::default(),
            },
        )
    })
}

/// Parses a severity profile from TOML text; missing fields keep defaults.
#[no_mangle]
pub unsafe extern "C" fn lr_profile_from_toml(
    text: *const c_char,
    out: *mut *mut LrProfile,
) -> LrStatus {
    guard(|| {
        let inner = check(SeverityProfile::from_toml_str(as_str(text)?))?;
        emit(out, LrProfile { inner })
    })
}

#[no_mangle]
pub unsafe extern "C" fn lr_profile_free(profile: *mut LrProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Applies the corruption named `kind` (e.g. "gau_noise") at `severity`
/// 1..=5. A null `profile` means the default profile.
#[no_mangle]
pub unsafe extern "C" fn lr_corrupt(
    cloud: *const LrCloud,
    kind: *const c_char,
    severity: u8,
    seed: u64,
    profile: *const LrProfile,
    out: *mut *mut LrCloud,
) -> LrStatus {
    guard(|| {
        let cloud = &as_ref(cloud)?.inner;
        let kind: CorruptionKind = check(as_str(kind)?.parse())?;
        let default_profile;
        let profile = match profile.as_ref() {
            Some(p) => &p.inner,
            None => {
                default_profile = SeverityProfile::default();
                &default_profile
            }
        };
        let inner = check(corrupt(
            cloud,
            &CorruptionSpec::new(kind, severity, seed),
            profile,
        ))?;
        emit(out, LrCloud { inner })
    })
}

#[no_mangle]
pub extern "C" fn lr_bilateral_params_default() -> LrBilateralParams {
    let d = BilateralParams::default();
    LrBilateralParams {
        radius: d.radius,
        sigma_d: d.sigma_d,
        sigma_n: d.sigma_n,
        iterations: d.iterations,
        normal_k: d.normal_k,
    }
}

#[no_mangle]
pub unsafe extern "C" fn lr_bilateral_filter(
    cloud: *const LrCloud,
    params: LrBilateralParams,
    out: *mut *mut LrCloud,
) -> LrStatus {
    guard(|| {
        let params = BilateralParams {
            radius: params.radius,
            sigma_d: params.sigma_d,
            sigma_n: params.sigma_n,
            iterations: params.iterations,
            normal_k: params.normal_k,
        };
        let inner = check(bilateral_filter(&as_ref(cloud)?.inner, &params))?;
        emit(out, LrCloud { inner })
    })
}

/// Reads a KITTI pose file (one 3×4 row-major matrix per line).
#[no_mangle]
pub unsafe extern "C" fn lr_trajectory_read(
    path: *const c_char,
    out: *mut *mut LrTrajectory,
) -> LrStatus {
    guard(|| {
        let inner = check(read_poses(as_str(path)?))?;
        emit(out, LrTrajectory { inner })
    })
}

#[no_mangle]
pub unsafe extern "C" fn lr_trajectory_free(trajectory: *mut LrTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lr_trajectory_len(trajectory: *const LrTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.inner.len())
}

/// Consecutive-frame relative pose error: mean translation error in meters
/// and mean rotation error in radians.
#[no_mangle]
pub unsafe extern "C" fn lr_rpe(
    estimate: *const LrTrajectory,
    ground_truth: *const LrTrajectory,
    rpe_trans: *mut f64,
    rpe_rot: *mut f64,
) -> LrStatus {
    guard(|| {
        let report = check(rpe_consecutive(
            &as_ref(estimate)?.inner,
            &as_ref(ground_truth)?.inner,
        ))?;
        if rpe_trans.is_null() || rpe_rot.is_null() {
            return Err(fail(LrStatus::NullPointer, "null output pointer"));
        }
        *rpe_trans = report.rpe_trans;
        *rpe_rot = report.rpe_rot;
        Ok(())
    })
}
