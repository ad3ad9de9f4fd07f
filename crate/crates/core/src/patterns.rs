//! Gravity vectors and stationary sampling points.
//!
//! A moving cluster is cut into bands of width `delta` perpendicular to its
//! mean course. Each band collapses into one gravity vector: the mean
//! position, speed and course of its members plus the median member distance
//! from that mean position. A stationary cluster is summarized by a random
//! subset of its members that are pairwise at least `eps_dist` apart, sized by
//! the area of the cluster's bounding box.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, ClusterParams, Clustering};
use crate::ingest::split_by_motion;
use crate::model::{euclid_dist, CourseMode, TrackPoint};
use crate::run_info::RunInfo;
use crate::{Error, Result, FORMAT_VERSION};

/// Resultant lengths below this make the circular mean undefined.
const MIN_RESULTANT: f64 = 1e-12;

/// Sampling gives up after this many candidates per requested point.
const ATTEMPTS_PER_SAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCourse {
    pub value: f64,
    pub mode: CourseMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GravityVector {
    pub lat: f64,
    pub lon: f64,
    pub speed: f64,
    pub course: f64,
    /// Median distance of band members from (lat, lon), degrees.
    pub med_dist: f64,
    pub band_index: usize,
    pub cluster_id: usize,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySamplingPoint {
    pub lat: f64,
    pub lon: f64,
    pub speed: f64,
    pub course: f64,
    pub cluster_id: usize,
}

impl StationarySamplingPoint {
    pub fn as_point(&self) -> TrackPoint {
        TrackPoint::new(self.lat, self.lon, self.speed, self.course)
    }
}

/// Banding of one moving cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityBands {
    pub mean_course: MeanCourse,
    pub min_projection: f64,
    /// Extent of the member projections along the mean course.
    pub length: f64,
    /// `ceil(length / delta)`, or 1 when the extent is zero.
    pub band_count: usize,
    /// One vector per non-empty band, ordered by band index.
    pub vectors: Vec<GravityVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub clustering: ClusterParams,
    pub delta: f64,
    pub seed: u64,
}

/// The trained summary handed from training to scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternModel {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
    pub build_params: BuildParams,
    pub gravity_vectors: Vec<GravityVector>,
    pub sampling_points: Vec<StationarySamplingPoint>,
}

impl PatternModel {
    pub fn check_version(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION.into(),
                found: self.version.clone(),
            });
        }
        Ok(())
    }
}

pub fn mean_course<'a>(
    members: impl IntoIterator<Item = &'a TrackPoint>,
    mode: CourseMode,
) -> Result<MeanCourse> {
    let (mut n, mut sum, mut sin, mut cos) = (0usize, 0.0, 0.0, 0.0);
    for p in members {
        n += 1;
        sum += p.course;
        let r = p.course.to_radians();
        sin += r.sin();
        cos += r.cos();
    }
    if n == 0 {
        return Err(Error::InvalidParams("mean course of an empty cluster".into()));
    }
    let value = match mode {
        CourseMode::Plain => sum / n as f64,
        CourseMode::Circular => {
            let (s, c) = (sin / n as f64, cos / n as f64);
            if s.hypot(c) < MIN_RESULTANT {
                return Err(Error::DegenerateDirection);
            }
            normalize_degrees(s.atan2(c).to_degrees())
        }
    };
    Ok(MeanCourse { value, mode })
}

fn normalize_degrees(d: f64) -> f64 {
    let v = d.rem_euclid(360.0);
    if v >= 360.0 {
        0.0
    } else {
        v
    }
}

/// Scalar projection of (lat, lon) onto the unit vector of a compass course.
///
/// Course 0 points along +lat (north), course 90 along +lon (east).
pub fn project_along_course(p: &TrackPoint, course: MeanCourse) -> f64 {
    let r = course.value.to_radians();
    p.lat * r.cos() + p.lon * r.sin()
}

pub fn gravity_vectors(
    members: &[&TrackPoint],
    cluster_id: usize,
    delta: f64,
    mode: CourseMode,
) -> Result<GravityBands> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("band width must be positive, got {delta}")));
    }
    let course = mean_course(members.iter().copied(), mode)?;
    let proj: Vec<f64> = members.iter().map(|p| project_along_course(p, course)).collect();
    let min = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let max = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let length = max - min;
    let band_count = if length > 0.0 {
        ((length / delta).ceil() as usize).max(1)
    } else {
        1
    };

    let mut bands: Vec<Vec<&TrackPoint>> = vec![Vec::new(); band_count];
    for (p, x) in members.iter().zip(&proj) {
        let b = (((x - min) / delta).floor() as usize).min(band_count - 1);
        bands[b].push(p);
    }

    let vectors = bands
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(band_index, band)| band_vector(band, band_index, cluster_id, mode))
        .collect::<Result<Vec<_>>>()?;

    Ok(GravityBands {
        mean_course: course,
        min_projection: min,
        length,
        band_count,
        vectors,
    })
}

fn band_vector(band: &[&TrackPoint], band_index: usize, cluster_id: usize, mode: CourseMode) -> Result<GravityVector> {
    let n = band.len() as f64;
    let lat = band.iter().map(|p| p.lat).sum::<f64>() / n;
    let lon = band.iter().map(|p| p.lon).sum::<f64>() / n;
    let speed = band.iter().map(|p| p.speed).sum::<f64>() / n;
    let course = mean_course(band.iter().copied(), mode)?.value;
    let centre = TrackPoint::new(lat, lon, speed, course);
    let mut dists: Vec<f64> = band.iter().map(|p| euclid_dist(p, &centre)).collect();
    Ok(GravityVector {
        lat,
        lon,
        speed,
        course,
        med_dist: lower_median(&mut dists),
        band_index,
        cluster_id,
        member_count: band.len(),
    })
}

/// Lower-middle element for even lengths.
fn lower_median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Number of sampling points a stationary cluster asks for.
pub fn sample_size(members: &[&TrackPoint], eps_dist: f64) -> usize {
    let area = bounding_area(members);
    if area == 0.0 {
        1
    } else {
        (area / (std::f64::consts::PI * eps_dist * eps_dist)).ceil() as usize
    }
}

fn bounding_area(members: &[&TrackPoint]) -> f64 {
    let (mut lat0, mut lat1, mut lon0, mut lon1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in members {
        lat0 = lat0.min(p.lat);
        lat1 = lat1.max(p.lat);
        lon0 = lon0.min(p.lon);
        lon1 = lon1.max(p.lon);
    }
    ((lat1 - lat0) * (lon1 - lon0)).abs()
}

/// Randomly picks members that are pairwise at least `eps_dist` apart.
///
/// Candidates are drawn without replacement. The search stops once
/// [`sample_size`] points are chosen, the members run out, or
/// `100 * sample_size` candidates have been tried; the last two return a short
/// sample.
pub fn stationary_sampling_points<R: rand::Rng>(
    members: &[&TrackPoint],
    cluster_id: usize,
    eps_dist: f64,
    rng: &mut R,
) -> Vec<StationarySamplingPoint> {
    if members.is_empty() {
        return Vec::new();
    }
    let chosen = sample_far_points(members, sample_size(members, eps_dist), eps_dist, rng);
    chosen
        .into_iter()
        .map(|p| StationarySamplingPoint {
            lat: p.lat,
            lon: p.lon,
            speed: p.speed,
            course: p.course,
            cluster_id,
        })
        .collect()
}

/// Draws up to `target` members, without replacement, keeping only those at
/// least `eps_dist` from every point already kept.
pub fn sample_far_points<'a, R: rand::Rng>(
    members: &[&'a TrackPoint],
    target: usize,
    eps_dist: f64,
    rng: &mut R,
) -> Vec<&'a TrackPoint> {
    let cap = target.saturating_mul(ATTEMPTS_PER_SAMPLE);
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.shuffle(rng);

    let mut chosen: Vec<&'a TrackPoint> = Vec::with_capacity(target);
    for &i in order.iter().take(cap) {
        if chosen.len() == target {
            break;
        }
        let cand = members[i];
        if chosen.iter().all(|s| euclid_dist(s, cand) >= eps_dist) {
            chosen.push(cand);
        }
    }
    if chosen.len() < target {
        log::warn!("short stationary sample: {} of {target} points", chosen.len());
    }
    chosen
}

/// Independent random stream for one cluster.
pub fn cluster_rng(seed: u64, cluster_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cluster_id as u64);
    rng
}

/// Clusterings of the stationary and moving subsets of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingClusters {
    pub stationary_points: Vec<TrackPoint>,
    pub moving_points: Vec<TrackPoint>,
    pub stationary: Option<Clustering>,
    pub moving: Option<Clustering>,
}

/// Splits by motion, then runs DBSCAN on the stationary part and DBSCANSD on
/// the moving part. An empty part yields `None`.
pub fn cluster_training_set(points: &[TrackPoint], params: &ClusterParams) -> Result<TrainingClusters> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (stationary_points, moving_points) = split_by_motion(points);
    let stationary = (!stationary_points.is_empty())
        .then(|| clustering::dbscan(&stationary_points, params.eps_dist, params.n_min))
        .transpose()?;
    let moving = (!moving_points.is_empty())
        .then(|| clustering::dbscansd(&moving_points, params))
        .transpose()?;
    Ok(TrainingClusters {
        stationary_points,
        moving_points,
        stationary,
        moving,
    })
}

/// Summarizes clustered training data into a [`PatternModel`].
pub fn build_pattern_model(training: &TrainingClusters, params: &ClusterParams, delta: f64, seed: u64) -> Result<PatternModel> {
    let gravity_vectors = match &training.moving {
        Some(c) => c
            .clusters
            .par_iter()
            .map(|cl| gravity_vectors(&cl.members(&training.moving_points), cl.id, delta, params.course_mode))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flat_map(|b| b.vectors)
            .collect(),
        None => Vec::new(),
    };
    let sampling_points = match &training.stationary {
        Some(c) => c
            .clusters
            .par_iter()
            .map(|cl| {
                let mut rng = cluster_rng(seed, cl.id);
                stationary_sampling_points(&cl.members(&training.stationary_points), cl.id, params.eps_dist, &mut rng)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect(),
        None => Vec::new(),
    };
    Ok(PatternModel {
        version: FORMAT_VERSION.into(),
        run: None,
        build_params: BuildParams {
            clustering: *params,
            delta,
            seed,
        },
        gravity_vectors,
        sampling_points,
    })
}
