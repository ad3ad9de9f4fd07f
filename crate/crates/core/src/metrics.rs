//! Point deviations from a [`PatternModel`].
//!
//! * ADD: distance from a stationary point to the nearest sampling point.
//! * RDD: distance from a moving point to a gravity vector divided by that
//!   vector's median spread, minimized over all vectors.
//! * CDD: `cos(course difference) * min(speed)/max(speed)` against the vector
//!   that minimizes RDD. Small or negative values are anomalous.
//!
//! [`cdd_liu_metric`] is the location-blind variant that maximizes the same
//! expression over every vector; it is kept for comparison only.

use serde::{Deserialize, Serialize};

use crate::model::{classify_motion, course_diff, euclid_dist, CourseMode, MotionClass, TrackPoint};
use crate::patterns::{GravityVector, PatternModel};
use crate::{Error, Result};

/// Lower bound on a gravity vector's median spread in the RDD denominator.
pub const D_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GravityRef {
    pub cluster_id: usize,
    pub band_index: usize,
}

impl From<&GravityVector> for GravityRef {
    fn from(g: &GravityVector) -> Self {
        Self {
            cluster_id: g.cluster_id,
            band_index: g.band_index,
        }
    }
}

/// ADD for stationary points, RDD and CDD for moving ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDeviation {
    pub motion: MotionClass,
    pub add: Option<f64>,
    pub rdd: Option<f64>,
    pub cdd: Option<f64>,
    pub nearest_gravity: Option<GravityRef>,
}

impl PointDeviation {
    pub fn stationary(add: f64) -> Self {
        Self {
            motion: MotionClass::Stationary,
            add: Some(add),
            rdd: None,
            cdd: None,
            nearest_gravity: None,
        }
    }

    pub fn moving(rdd: f64, cdd: f64, nearest: Option<GravityRef>) -> Self {
        Self {
            motion: MotionClass::Moving,
            add: None,
            rdd: Some(rdd),
            cdd: Some(cdd),
            nearest_gravity: nearest,
        }
    }
}

pub fn add_metric(p: &TrackPoint, model: &PatternModel) -> Result<f64> {
    model
        .sampling_points
        .iter()
        .map(|s| euclid_dist(p, &s.as_point()))
        .min_by(f64::total_cmp)
        .ok_or(Error::ModelIncomplete("no stationary sampling points"))
}

/// Minimum normalized distance and the vector attaining it.
///
/// Ties go to the lowest `(cluster_id, band_index)`.
pub fn rdd_metric<'m>(p: &TrackPoint, model: &'m PatternModel) -> Result<(f64, &'m GravityVector)> {
    let mut best: Option<(f64, &GravityVector)> = None;
    for g in &model.gravity_vectors {
        let d = (p.lat - g.lat).hypot(p.lon - g.lon) / g.med_dist.max(D_FLOOR);
        let better = match best {
            None => true,
            Some((bd, bg)) => d < bd || (d == bd && (g.cluster_id, g.band_index) < (bg.cluster_id, bg.band_index)),
        };
        if better {
            best = Some((d, g));
        }
    }
    best.ok_or(Error::ModelIncomplete("no gravity vectors"))
}

fn cosine_speed_ratio(course_a: f64, speed_a: f64, course_b: f64, speed_b: f64, mode: CourseMode) -> f64 {
    let alpha = course_diff(course_a, course_b, mode).to_radians();
    let hi = speed_a.max(speed_b);
    let ratio = if hi == 0.0 { 1.0 } else { speed_a.min(speed_b) / hi };
    alpha.cos() * ratio
}

pub fn cdd_metric(p: &TrackPoint, nearest: &GravityVector, mode: CourseMode) -> f64 {
    cosine_speed_ratio(nearest.course, nearest.speed, p.course, p.speed, mode)
}

pub fn cdd_liu_metric(p: &TrackPoint, model: &PatternModel, mode: CourseMode) -> Result<f64> {
    model
        .gravity_vectors
        .iter()
        .map(|g| cdd_metric(p, g, mode))
        .max_by(f64::total_cmp)
        .ok_or(Error::ModelIncomplete("no gravity vectors"))
}

/// Deviation of one point according to its motion class.
pub fn point_deviation(p: &TrackPoint, model: &PatternModel, mode: CourseMode) -> Result<PointDeviation> {
    match classify_motion(p) {
        MotionClass::Stationary => Ok(PointDeviation::stationary(add_metric(p, model)?)),
        MotionClass::Moving => {
            let (rdd, g) = rdd_metric(p, model)?;
            Ok(PointDeviation::moving(rdd, cdd_metric(p, g, mode), Some(g.into())))
        }
    }
}

/// Deviations of one trajectory, optionally with the location-blind CDD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDeviations {
    pub id: String,
    pub points: Vec<PointDeviation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdd_liu: Option<Vec<Option<f64>>>,
}

/// Writes per-point deviations as CSV, one row per point.
///
/// The `cdd_liu` column appears only when the first track carries it.
pub fn write_deviations_csv<W: std::io::Write>(tracks: &[TrackDeviations], out: W) -> Result<()> {
    let with_liu = tracks.first().is_some_and(|t| t.cdd_liu.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trajectory", "index", "motion", "add", "rdd", "cdd", "cluster_id", "band_index"];
    if with_liu {
        header.push("cdd_liu");
    }
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in tracks {
        for (i, d) in t.points.iter().enumerate() {
            let mut row = vec![
                t.id.clone(),
                i.to_string(),
                d.motion.as_str().to_string(),
                opt(d.add),
                opt(d.rdd),
                opt(d.cdd),
                d.nearest_gravity.map(|g| g.cluster_id.to_string()).unwrap_or_default(),
                d.nearest_gravity.map(|g| g.band_index.to_string()).unwrap_or_default(),
            ];
            if with_liu {
                row.push(opt(t.cdd_liu.as_ref().and_then(|v| v.get(i).copied().flatten())));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
