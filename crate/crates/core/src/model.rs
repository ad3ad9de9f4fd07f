//! Domain types and the flat-earth geometry shared by every stage.
//!
//! Positions are raw decimal degrees and distances are Euclidean in
//! (lat, lon) space. The clustering radii are expressed in the same units, so
//! no projection or geodesic correction is applied anywhere.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reports slower than this many knots are stationary.
pub const STATIONARY_SPEED_KNOTS: f64 = 0.5;

/// One AIS observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub lat: f64,
    pub lon: f64,
    /// Speed over ground, knots.
    pub speed: f64,
    /// Course over ground, degrees clockwise from north in `[0, 360)`.
    pub course: f64,
    #[serde(default, rename = "ts", skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default, rename = "id", skip_serializing_if = "Option::is_none")]
    pub vessel_id: Option<String>,
}

impl TrackPoint {
    pub fn new(lat: f64, lon: f64, speed: f64, course: f64) -> Self {
        Self {
            lat,
            lon,
            speed,
            course,
            timestamp: None,
            vessel_id: None,
        }
    }

    pub fn with_timestamp(mut self, ts: DateTime<Utc>) -> Self {
        self.timestamp = Some(ts);
        self
    }

    pub fn with_vessel(mut self, id: impl Into<String>) -> Self {
        self.vessel_id = Some(id.into());
        self
    }

    /// Checks the coordinate, speed and course ranges.
    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::InvalidPoint(format!("latitude {} out of range", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidPoint(format!("longitude {} out of range", self.lon)));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::InvalidPoint(format!("speed {} is negative or not finite", self.speed)));
        }
        if !(0.0..360.0).contains(&self.course) {
            return Err(Error::InvalidPoint(format!("course {} outside [0, 360)", self.course)));
        }
        Ok(())
    }

    pub fn motion(&self) -> MotionClass {
        classify_motion(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionClass {
    Stationary,
    Moving,
}

impl MotionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionClass::Stationary => "stationary",
            MotionClass::Moving => "moving",
        }
    }
}

/// How two courses are compared.
///
/// `Plain` is the literal absolute difference `|c1 - c2|`. `Circular` takes the
/// shorter way around the compass, so 359 and 1 are 2 degrees apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CourseMode {
    Plain,
    #[default]
    Circular,
}

impl std::str::FromStr for CourseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(CourseMode::Plain),
            "circular" => Ok(CourseMode::Circular),
            other => Err(Error::InvalidParams(format!("unknown course mode `{other}`"))),
        }
    }
}

/// An ordered sequence of reports from one vessel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub points: Vec<TrackPoint>,
}

impl Trajectory {
    /// Builds a trajectory, rejecting timestamps that go backwards.
    pub fn new(id: impl Into<String>, points: Vec<TrackPoint>) -> Result<Self> {
        let mut last = None;
        for p in &points {
            if let Some(ts) = p.timestamp {
                if last.is_some_and(|prev| ts < prev) {
                    return Err(Error::InvalidPoint(format!(
                        "timestamp {ts} precedes an earlier report"
                    )));
                }
                last = Some(ts);
            }
        }
        Ok(Self {
            id: id.into(),
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Euclidean distance between the (lat, lon) pairs of two points, in degrees.
pub fn euclid_dist(a: &TrackPoint, b: &TrackPoint) -> f64 {
    (a.lat - b.lat).hypot(a.lon - b.lon)
}

pub fn course_diff(c1: f64, c2: f64, mode: CourseMode) -> f64 {
    let d = (c1 - c2).abs();
    match mode {
        CourseMode::Plain => d,
        CourseMode::Circular => d.min(360.0 - d),
    }
}

pub fn classify_motion(p: &TrackPoint) -> MotionClass {
    if p.speed < STATIONARY_SPEED_KNOTS {
        MotionClass::Stationary
    } else {
        MotionClass::Moving
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(lat: f64, lon: f64) -> TrackPoint {
        TrackPoint::new(lat, lon, 1.0, 0.0)
    }

    #[test]
    fn distance_examples() {
        let a = at(39.0, -74.0);
        assert_eq!(euclid_dist(&a, &a), 0.0);
        assert_eq!(euclid_dist(&at(0.0, 0.0), &at(3.0, 4.0)), 5.0);
        let d = euclid_dist(&a, &at(39.01, -74.02));
        assert!((d - 0.022_360_679_8).abs() < 1e-9, "{d}");
    }

    #[test]
    fn course_diff_examples() {
        assert_eq!(course_diff(90.0, 90.0, CourseMode::Plain), 0.0);
        assert_eq!(course_diff(90.0, 90.0, CourseMode::Circular), 0.0);
        assert_eq!(course_diff(350.0, 10.0, CourseMode::Circular), 20.0);
        assert_eq!(course_diff(350.0, 10.0, CourseMode::Plain), 340.0);
    }

    #[test]
    fn motion_boundary() {
        let p = |s| TrackPoint::new(0.0, 0.0, s, 0.0);
        assert_eq!(classify_motion(&p(0.0)), MotionClass::Stationary);
        assert_eq!(classify_motion(&p(0.49)), MotionClass::Stationary);
        assert_eq!(classify_motion(&p(0.5)), MotionClass::Moving);
    }

    #[test]
    fn validate_rejects_out_of_range() {
        assert!(TrackPoint::new(91.0, 0.0, 1.0, 0.0).validate().is_err());
        assert!(TrackPoint::new(0.0, -181.0, 1.0, 0.0).validate().is_err());
        assert!(TrackPoint::new(0.0, 0.0, -1.0, 0.0).validate().is_err());
        assert!(TrackPoint::new(0.0, 0.0, 1.0, 360.0).validate().is_err());
        assert!(TrackPoint::new(0.0, 0.0, 1.0, 359.9).validate().is_ok());
    }

    #[test]
    fn trajectory_rejects_backwards_time() {
        let t0 = DateTime::from_timestamp(1_000, 0).unwrap();
        let t1 = DateTime::from_timestamp(2_000, 0).unwrap();
        let ok = vec![at(0.0, 0.0).with_timestamp(t0), at(0.0, 0.0).with_timestamp(t1)];
        assert!(Trajectory::new("a", ok).is_ok());
        let bad = vec![at(0.0, 0.0).with_timestamp(t1), at(0.0, 0.0).with_timestamp(t0)];
        assert!(Trajectory::new("a", bad).is_err());
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(
            a in (-90.0..90.0f64, -180.0..180.0f64),
            b in (-90.0..90.0f64, -180.0..180.0f64),
            c in (-90.0..90.0f64, -180.0..180.0f64),
        ) {
            let (a, b, c) = (at(a.0, a.1), at(b.0, b.1), at(c.0, c.1));
            prop_assert_eq!(euclid_dist(&a, &b), euclid_dist(&b, &a));
            prop_assert!(euclid_dist(&a, &c) <= euclid_dist(&a, &b) + euclid_dist(&b, &c) + 1e-9);
        }

        #[test]
        fn circular_diff_at_most_half_turn(c1 in 0.0..360.0f64, c2 in 0.0..360.0f64) {
            let d = course_diff(c1, c2, CourseMode::Circular);
            prop_assert!((0.0..=180.0).contains(&d));
            prop_assert_eq!(course_diff(c1, c1, CourseMode::Circular), 0.0);
            prop_assert_eq!(course_diff(c1, c1, CourseMode::Plain), 0.0);
        }

        #[test]
        fn motion_partitions(speeds in prop::collection::vec(0.0..20.0f64, 0..50)) {
            let pts: Vec<_> = speeds.iter().map(|&s| TrackPoint::new(0.0, 0.0, s, 0.0)).collect();
            let st = pts.iter().filter(|p| classify_motion(p) == MotionClass::Stationary).count();
            let mv = pts.iter().filter(|p| classify_motion(p) == MotionClass::Moving).count();
            prop_assert_eq!(st + mv, pts.len());
        }
    }
}
