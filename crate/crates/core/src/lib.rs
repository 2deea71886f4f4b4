//! Corrupt LiDAR point clouds, run a small ICP odometry over them and measure
//! how far the estimated trajectory drifts from ground truth.
//!
//! The crate is organised around the evaluation loop:
//!
//! * [`cloud`], [`kdtree`], [`sampling`] and [`io`] hold the point-cloud data
//!   model, spatial queries, seeded sampling and KITTI file formats.
//! * [`corruption`] implements the 13 noise and density corruptions and
//!   dispatches all 18 corruption kinds; [`weather`] provides the parametric
//!   rain, snow, fog and wet-ground models.
//! * [`denoise`] is the bilateral filter used as a defense.
//! * [`pose`], [`odometry`] and [`eval`] are the subject system and the
//!   relative pose error metrics.
//! * [`synth`] and [`experiment`] generate desk-scale sequences and run
//!   corruption sweeps end to end.

pub mod cloud;
pub mod corruption;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod kdtree;
pub mod odometry;
pub mod pose;
pub mod sampling;
pub mod synth;
pub mod weather;

pub use cloud::{BoundingBox, Point, PointCloud, SphericalPoint};
pub use corruption::{corrupt, CorruptionKind, CorruptionSpec, SeverityProfile};
pub use error::{Error, Result};
pub use pose::{Pose, Trajectory};

/// Toolkit version recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
