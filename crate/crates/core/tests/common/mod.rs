#![allow(dead_code)]

use ais_anomaly::clustering::ClusterParams;
use ais_anomaly::{CourseMode, TrackPoint, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Neighbor predicate written out independently of the library.
pub fn oracle_neighbor(a: &TrackPoint, b: &TrackPoint, p: &ClusterParams) -> bool {
    let dist = ((a.lat - b.lat).powi(2) + (a.lon - b.lon).powi(2)).sqrt();
    let raw = (a.course - b.course).abs();
    let crs = match p.course_mode {
        CourseMode::Plain => raw,
        CourseMode::Circular => raw.min(360.0 - raw),
    };
    dist < p.eps_dist
        && p.eps_crs.map_or(true, |e| crs < e)
        && p.eps_spd.map_or(true, |e| (a.speed - b.speed).abs() < e)
}

pub fn oracle_core_flags(points: &[TrackPoint], p: &ClusterParams) -> Vec<bool> {
    points
        .iter()
        .map(|a| points.iter().filter(|b| oracle_neighbor(a, b, p)).count() >= p.n_min)
        .collect()
}

/// Core-point partition by exhaustive transitive closure of direct density
/// reachability between core points: O(n^3).
pub fn oracle_core_partition(points: &[TrackPoint], p: &ClusterParams) -> Vec<Vec<usize>> {
    let n = points.len();
    let core = oracle_core_flags(points, p);
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = core[i] && core[j] && oracle_neighbor(&points[i], &points[j], p);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut parts = Vec::new();
    for i in 0..n {
        if core[i] && !seen[i] {
            let part: Vec<usize> = (0..n).filter(|&j| reach[i][j]).collect();
            for &j in &part {
                seen[j] = true;
            }
            parts.push(part);
        }
    }
    parts.sort();
    parts
}

/// Full membership: each non-core point joins the component of its
/// lowest-indexed core neighbor, if any.
pub fn oracle_member_partition(points: &[TrackPoint], p: &ClusterParams) -> Vec<Vec<usize>> {
    let core = oracle_core_flags(points, p);
    let mut parts = oracle_core_partition(points, p);
    let owner = |i: usize| parts.iter().position(|c| c.contains(&i));
    let mut extra: Vec<(usize, usize)> = Vec::new();
    for i in 0..points.len() {
        if core[i] {
            continue;
        }
        if let Some(j) = (0..points.len()).find(|&j| core[j] && oracle_neighbor(&points[i], &points[j], p)) {
            extra.push((owner(j).unwrap(), i));
        }
    }
    for (c, i) in extra {
        parts[c].push(i);
    }
    for part in &mut parts {
        part.sort();
    }
    parts.sort();
    parts
}

/// Clumpy random points in a unit box with random clustering parameters.
pub fn random_instance(r: &mut ChaCha8Rng, n: usize) -> (Vec<TrackPoint>, ClusterParams) {
    let centers: Vec<(f64, f64, f64, f64)> = (0..r.gen_range(1..=4))
        .map(|_| (r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), r.gen_range(0.0..12.0), r.gen_range(0.0..360.0)))
        .collect();
    let spread = r.gen_range(0.05..0.3);
    let points = (0..n)
        .map(|_| {
            let (clat, clon, cs, cc) = centers[r.gen_range(0..centers.len())];
            let lat = clat + r.gen_range(-spread..spread);
            let lon = clon + r.gen_range(-spread..spread);
            let speed = (cs + r.gen_range(-3.0..3.0f64)).max(0.0);
            let course = (cc + r.gen_range(-120.0..120.0f64)).rem_euclid(360.0);
            TrackPoint::new(lat, lon, speed, course)
        })
        .collect();
    let params = ClusterParams {
        eps_dist: r.gen_range(0.03..0.3),
        eps_crs: r.gen_bool(0.7).then(|| r.gen_range(20.0..180.0)),
        eps_spd: r.gen_bool(0.7).then(|| r.gen_range(0.5..6.0)),
        n_min: r.gen_range(1..=6),
        course_mode: if r.gen_bool(0.5) { CourseMode::Circular } else { CourseMode::Plain },
    };
    (points, params)
}

/// Points snapped to multiples of half the radius, so many pairs sit exactly
/// on cell edges and at exactly the radius.
pub fn lattice_instance(r: &mut ChaCha8Rng, n: usize) -> (Vec<TrackPoint>, ClusterParams) {
    let eps = [0.02, 0.05, 0.1, 0.25][r.gen_range(0..4)];
    let points = (0..n)
        .map(|_| {
            let lat = r.gen_range(-20i32..20) as f64 * eps / 2.0;
            let lon = r.gen_range(-20i32..20) as f64 * eps / 2.0;
            TrackPoint::new(lat, lon, r.gen_range(0.0..10.0), r.gen_range(0.0..360.0))
        })
        .collect();
    (points, ClusterParams::spatial(eps, 3))
}

/// Fifteen eastbound and fifteen westbound reports on two parallel lanes.
pub fn two_lane_set() -> Vec<TrackPoint> {
    let mut pts = Vec::new();
    for k in 0..15 {
        pts.push(TrackPoint::new(39.0, -74.5 + 0.004 * k as f64, 10.0, 90.0));
        pts.push(TrackPoint::new(39.005, -74.5 + 0.004 * k as f64, 10.0, 270.0));
    }
    pts
}

const ANCHORAGE: (f64, f64) = (38.9, -74.9);
const MOORING: (f64, f64) = (38.7, -75.0);

/// Draws one report from a mixture of two shipping lanes and an anchorage.
///
/// Lane A runs east along lat 39.0 between lon -74.6 and -74.0 at about
/// 10 knots; lane B runs north along lon -74.8 between lat 38.4 and 39.0 at
/// about 12 knots; the anchorage is a 0.01-degree blob of near-zero speeds.
pub fn corridor_point(r: &mut ChaCha8Rng) -> TrackPoint {
    let jitter = Normal::new(0.0, 0.003).unwrap();
    let heading: Normal<f64> = Normal::new(0.0, 3.0).unwrap();
    let u: f64 = r.gen();
    if u < 0.4 {
        TrackPoint::new(
            39.0 + jitter.sample(r),
            r.gen_range(-74.6..-74.0),
            Normal::new(10.0, 0.5).unwrap().sample(r),
            (90.0 + heading.sample(r)).rem_euclid(360.0),
        )
    } else if u < 0.8 {
        TrackPoint::new(
            r.gen_range(38.4..39.0),
            -74.8 + jitter.sample(r),
            Normal::new(12.0, 0.5).unwrap().sample(r),
            heading.sample(r).rem_euclid(360.0),
        )
    } else {
        let blob = Normal::new(0.0, 0.01).unwrap();
        TrackPoint::new(
            ANCHORAGE.0 + blob.sample(r),
            ANCHORAGE.1 + blob.sample(r),
            r.gen_range(0.0..0.3),
            r.gen_range(0.0..360.0),
        )
    }
}

/// Training set: `n` mixture draws plus one vessel moored at a single spot,
/// which gives a zero-area stationary cluster.
pub fn corridor_training(seed: u64, n: usize) -> Vec<TrackPoint> {
    let mut r = rng(seed);
    let mut pts: Vec<TrackPoint> = (0..n).map(|_| corridor_point(&mut r)).collect();
    pts.extend((0..8).map(|_| TrackPoint::new(MOORING.0, MOORING.1, 0.0, 0.0)));
    pts
}

/// Held-out trajectories drawn from the same mixture.
pub fn corridor_calibration(seed: u64, trajectories: usize, len: usize) -> Vec<Trajectory> {
    let mut r = rng(seed);
    (0..trajectories)
        .map(|k| Trajectory::new(format!("cal-{k}"), (0..len).map(|_| corridor_point(&mut r)).collect()).unwrap())
        .collect()
}

/// A westbound transit straight down lane A, against the flow.
pub fn opposed_crossing(len: usize) -> Trajectory {
    let pts = (0..len)
        .map(|k| TrackPoint::new(39.0, -74.05 - 0.5 * k as f64 / len as f64, 10.0, 270.0))
        .collect();
    Trajectory::new("wrong-way", pts).unwrap()
}
