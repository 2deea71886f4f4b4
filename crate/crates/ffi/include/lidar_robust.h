#ifndef LIDAR_ROBUST_H
#define LIDAR_ROBUST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LrStatus {
  LR_STATUS_OK = 0,
  LR_STATUS_NULL_POINTER = 1,
  LR_STATUS_INVALID_ARGUMENT = 2,
  LR_STATUS_IO = 3,
  LR_STATUS_FORMAT = 4,
  LR_STATUS_UNKNOWN_KIND = 5,
  LR_STATUS_TOO_FEW_POINTS = 6,
  LR_STATUS_REGISTRATION_FAILED = 7,
  LR_STATUS_BUFFER_TOO_SMALL = 8,
  LR_STATUS_PANIC = 9,
  LR_STATUS_OTHER = 10,
} LrStatus;

/**
 * Point cloud handle.
 */
typedef struct LrCloud LrCloud;

/**
 * Severity profile handle.
 */
typedef struct LrProfile LrProfile;

/**
 * Trajectory handle.
 */
typedef struct LrTrajectory LrTrajectory;

/**
 * Bilateral filter parameters; see `lr_bilateral_params_default`.
 */
typedef struct LrBilateralParams {
  double radius;
  double sigma_d;
  double sigma_n;
  uintptr_t iterations;
  uintptr_t normal_k;
} LrBilateralParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lr_version(void);

/**
 * Message for the last failed call on this thread, or "" if none. Valid
 * until the next failing call on the same thread.
 */
const char *lr_last_error_message(void);

/**
 * Per-frame corruption seed used by sweeps and augmentation exports.
 */
uint64_t lr_derive_frame_seed(uint64_t global_seed, uint64_t frame_id, uint64_t kind);

/**
 * Builds a cloud from `count` interleaved `x, y, z, intensity` values.
 */
enum LrStatus lr_cloud_new(const double *xyzi, uintptr_t count, struct LrCloud **out);

void lr_cloud_free(struct LrCloud *cloud);

/**
 * Number of points, or 0 for a null handle.
 */
uintptr_t lr_cloud_len(const struct LrCloud *cloud);

/**
 * Copies the points as interleaved `x, y, z, intensity` into `out`, which
 * must hold `capacity` points.
 */
enum LrStatus lr_cloud_copy_xyzi(const struct LrCloud *cloud, double *out, uintptr_t capacity);

/**
 * Reads a KITTI velodyne `.bin` scan.
 */
enum LrStatus lr_cloud_read_kitti(const char *path, struct LrCloud **out);

/**
 * Writes a KITTI velodyne `.bin` scan (coordinates stored as `float`).
 */
enum LrStatus lr_cloud_write_kitti(const struct LrCloud *cloud, const char *path);

enum LrStatus lr_profile_default(struct LrProfile **out);

/**
 * Parses a severity profile from TOML text; missing fields keep defaults.
 */
enum LrStatus lr_profile_from_toml(const char *text, struct LrProfile **out);

void lr_profile_free(struct LrProfile *profile);

/**
 * Applies the corruption named `kind` (e.g. "gau_noise") at `severity`
 * 1..=5. A null `profile` means the default profile.
 */
enum LrStatus lr_corrupt(const struct LrCloud *cloud,
                         const char *kind,
                         uint8_t severity,
                         uint64_t seed,
                         const struct LrProfile *profile,
                         struct LrCloud **out);

struct LrBilateralParams lr_bilateral_params_default(void);

enum LrStatus lr_bilateral_filter(const struct LrCloud *cloud,
                                  struct LrBilateralParams params,
                                  struct LrCloud **out);

/**
 * Reads a KITTI pose file (one 3×4 row-major matrix per line).
 */
enum LrStatus lr_trajectory_read(const char *path, struct LrTrajectory **out);

void lr_trajectory_free(struct LrTrajectory *trajectory);

uintptr_t lr_trajectory_len(const struct LrTrajectory *trajectory);

/**
 * Consecutive-frame relative pose error: mean translation error in meters
 * and mean rotation error in radians.
 */
enum LrStatus lr_rpe(const struct LrTrajectory *estimate,
                     const struct LrTrajectory *ground_truth,
                     double *rpe_trans,
                     double *rpe_rot);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIDAR_ROBUST_H */
