//! Maritime traffic pattern mining and trajectory anomaly scoring.
//!
//! The pipeline learns "normal" behavior from AIS reports and scores new
//! trajectories against it:
//!
//! 1. [`ingest`] parses AIS CSV exports into [`TrackPoint`]s and groups them
//!    into [`Trajectory`]s.
//! 2. [`clustering`] runs DBSCAN over stationary reports and DBSCANSD (DBSCAN
//!    with additional speed and course bounds) over moving reports.
//! 3. [`patterns`] condenses moving clusters into gravity vectors and
//!    stationary clusters into sampling points.
//! 4. [`metrics`] measures how far a point deviates from those patterns
//!    (ADD, RDD, CDD).
//! 5. [`scoring`] calibrates the deviation distributions on held-out data and
//!    produces two trajectory statistics: the threshold-count score and the
//!    rank-based z-score.
//! 6. [`simulation`] checks the null distributions of both statistics by Monte
//!    Carlo.

pub mod clustering;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod patterns;
pub mod run_info;
pub mod scoring;
pub mod simulation;

pub use error::{Error, Result};
pub use run_info::RunInfo;
pub use model::{
    classify_motion, course_diff, euclid_dist, CourseMode, MotionClass, TrackPoint, Trajectory,
};

/// Version tag written into every serialized model file.
pub const FORMAT_VERSION: &str = "1";
