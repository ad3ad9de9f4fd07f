//! DBSCAN and DBSCANSD.
//!
//! DBSCANSD is DBSCAN with a three-way neighborhood predicate: two points are
//! neighbors when they are spatially closer than `eps_dist`, their courses
//! differ by less than `eps_crs` and their speeds by less than `eps_spd`.
//! All three comparisons are strict. A point is core when its neighborhood,
//! itself included, holds at least `n_min` points.
//!
//! Clusters are built by merging core neighborhoods that share a core point,
//! which yields exactly the density-connected components of the core points.
//! A border point reachable from several clusters goes to the cluster of its
//! lowest-indexed core neighbor. [`merge_neighborhoods`] runs the literal
//! pairwise merge loop and is kept as a second route for cross-checking.

mod grid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use grid::SpatialGrid;

use crate::model::{course_diff, euclid_dist, CourseMode, MotionClass, TrackPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Spatial radius in degrees.
    pub eps_dist: f64,
    /// Course bound in degrees; `None` is unlimited.
    pub eps_crs: Option<f64>,
    /// Speed bound in knots; `None` is unlimited.
    pub eps_spd: Option<f64>,
    pub n_min: usize,
    #[serde(default)]
    pub course_mode: CourseMode,
}

impl ClusterParams {
    /// Spatial-only parameters (plain DBSCAN).
    pub fn spatial(eps_dist: f64, n_min: usize) -> Self {
        Self {
            eps_dist,
            eps_crs: None,
            eps_spd: None,
            n_min,
            course_mode: CourseMode::default(),
        }
    }

    /// eps_dist 0.02 degrees, eps_crs 90 degrees, eps_spd 2.5 knots, n_min 5.
    pub fn maritime_defaults() -> Self {
        Self {
            eps_dist: 0.02,
            eps_crs: Some(90.0),
            eps_spd: Some(2.5),
            n_min: 5,
            course_mode: CourseMode::Circular,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_dist > 0.0 && self.eps_dist.is_finite()) {
            return Err(Error::InvalidParams(format!("eps_dist must be positive, got {}", self.eps_dist)));
        }
        if self.n_min < 1 {
            return Err(Error::InvalidParams("n_min must be at least 1".into()));
        }
        for (name, v) in [("eps_crs", self.eps_crs), ("eps_spd", self.eps_spd)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// The three-way neighborhood predicate.
    pub fn is_neighbor(&self, a: &TrackPoint, b: &TrackPoint) -> bool {
        euclid_dist(a, b) < self.eps_dist
            && self
                .eps_crs
                .map_or(true, |e| course_diff(a.course, b.course, self.course_mode) < e)
            && self.eps_spd.map_or(true, |e| (a.speed - b.speed).abs() < e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    /// Ascending, includes the query point.
    pub indices: Vec<usize>,
    pub is_core: bool,
}

/// Neighborhood of `points[i]` by exhaustive scan.
pub fn query_neighbors(points: &[TrackPoint], i: usize, p: &ClusterParams) -> Neighborhood {
    let indices: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, q)| p.is_neighbor(&points[i], q))
        .map(|(j, _)| j)
        .collect();
    Neighborhood {
        is_core: indices.len() >= p.n_min,
        indices,
    }
}

/// Grid-accelerated neighborhood queries; results are identical to
/// [`query_neighbors`].
pub struct NeighborIndex<'a> {
    points: &'a [TrackPoint],
    params: ClusterParams,
    grid: SpatialGrid,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(points: &'a [TrackPoint], params: ClusterParams) -> Self {
        Self {
            grid: SpatialGrid::new(points, params.eps_dist),
            points,
            params,
        }
    }

    pub fn neighbors(&self, i: usize) -> Neighborhood {
        let p = &self.points[i];
        let indices: Vec<usize> = self
            .grid
            .candidates(p)
            .into_iter()
            .filter(|&j| self.params.is_neighbor(p, &self.points[j]))
            .collect();
        Neighborhood {
            is_core: indices.len() >= self.params.n_min,
            indices,
        }
    }

    pub fn all(&self) -> Vec<Neighborhood> {
        (0..self.points.len())
            .into_par_iter()
            .map(|i| self.neighbors(i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub motion: MotionClass,
    /// Ascending indices into the clustered point slice.
    pub member_indices: Vec<usize>,
    /// Aligned with `member_indices`.
    pub core_flags: Vec<bool>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.member_indices.binary_search(&idx).is_ok()
    }

    pub fn core_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.member_indices
            .iter()
            .zip(&self.core_flags)
            .filter(|(_, &c)| c)
            .map(|(&i, _)| i)
    }

    pub fn members<'p>(&self, points: &'p [TrackPoint]) -> Vec<&'p TrackPoint> {
        self.member_indices.iter().map(|&i| &points[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub params: ClusterParams,
    pub clusters: Vec<Cluster>,
    /// Ascending indices of points in no cluster.
    pub noise: Vec<usize>,
}

impl Clustering {
    /// Cluster id per input point, `None` for noise.
    pub fn labels(&self, n: usize) -> Vec<Option<usize>> {
        let mut labels = vec![None; n];
        for c in &self.clusters {
            for &i in &c.member_indices {
                labels[i] = Some(c.id);
            }
        }
        labels
    }

    /// Sorted core-index sets, one per cluster, in a canonical order.
    pub fn core_partition(&self) -> Vec<Vec<usize>> {
        let mut parts: Vec<Vec<usize>> = self
            .clusters
            .iter()
            .map(|c| c.core_indices().collect())
            .collect();
        parts.sort();
        parts
    }

    /// Sorted member sets, one per cluster, in a canonical order.
    pub fn member_partition(&self) -> Vec<Vec<usize>> {
        let mut parts: Vec<Vec<usize>> = self.clusters.iter().map(|c| c.member_indices.clone()).collect();
        parts.sort();
        parts
    }

    /// Verifies that clusters and noise partition `0..n` and that every
    /// cluster holds a core point.
    pub fn check_partition(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        let all = self
            .clusters
            .iter()
            .flat_map(|c| c.member_indices.iter())
            .chain(self.noise.iter());
        for &i in all {
            if i >= n || seen[i] {
                return Err(Error::InvalidParams(format!("index {i} duplicated or out of range")));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParams(format!("index {missing} not assigned")));
        }
        if let Some(c) = self.clusters.iter().find(|c| c.core_indices().next().is_none()) {
            return Err(Error::InvalidParams(format!("cluster {} has no core point", c.id)));
        }
        Ok(())
    }
}

/// DBSCANSD over `points`; clusters are labelled [`MotionClass::Moving`].
pub fn dbscansd(points: &[TrackPoint], p: &ClusterParams) -> Result<Clustering> {
    cluster_points(points, p, MotionClass::Moving)
}

/// Spatial DBSCAN; clusters are labelled [`MotionClass::Stationary`].
pub fn dbscan(points: &[TrackPoint], eps_dist: f64, n_min: usize) -> Result<Clustering> {
    cluster_points(points, &ClusterParams::spatial(eps_dist, n_min), MotionClass::Stationary)
}

/// Runs the density clustering with an explicit motion label.
pub fn cluster_points(points: &[TrackPoint], p: &ClusterParams, motion: MotionClass) -> Result<Clustering> {
    p.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hoods = NeighborIndex::new(points, *p).all();
    let n = points.len();
    let core: Vec<bool> = hoods.iter().map(|h| h.is_core).collect();

    let mut sets = DisjointSets::new(n);
    for (i, h) in hoods.iter().enumerate().filter(|(i, _)| core[*i]) {
        for &j in &h.indices {
            if core[j] {
                sets.union(i, j);
            }
        }
    }

    // Cluster ids follow the lowest core index of each component.
    let mut id_of_root = vec![usize::MAX; n];
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for i in (0..n).filter(|&i| core[i]) {
        let root = sets.find(i);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = next;
            next += 1;
        }
        label[i] = Some(id_of_root[root]);
    }
    // Border points go to the first core (by index) that reaches them.
    for i in (0..n).filter(|&i| core[i]) {
        let id = label[i];
        for &j in &hoods[i].indices {
            if !core[j] && label[j].is_none() {
                label[j] = id;
            }
        }
    }

    let mut clusters: Vec<Cluster> = (0..next)
        .map(|id| Cluster {
            id,
            motion,
            member_indices: Vec::new(),
            core_flags: Vec::new(),
        })
        .collect();
    let mut noise = Vec::new();
    for i in 0..n {
        match label[i] {
            Some(id) => {
                clusters[id].member_indices.push(i);
                clusters[id].core_flags.push(core[i]);
            }
            None => noise.push(i),
        }
    }

    Ok(Clustering {
        params: *p,
        clusters,
        noise,
    })
}

/// Absorbs `b` into `a` when `b` has a core point that `a` already contains.
///
/// Returns whether the merge happened.
pub fn merge_clusters(a: &mut Cluster, b: &Cluster) -> bool {
    if !b.core_indices().any(|i| a.contains(i)) {
        return false;
    }
    let mut merged: Vec<(usize, bool)> = a
        .member_indices
        .iter()
        .copied()
        .zip(a.core_flags.iter().copied())
        .chain(b.member_indices.iter().copied().zip(b.core_flags.iter().copied()))
        .collect();
    merged.sort_unstable();
    merged.dedup_by(|later, first| {
        if later.0 == first.0 {
            first.1 |= later.1;
            true
        } else {
            false
        }
    });
    (a.member_indices, a.core_flags) = merged.into_iter().unzip();
    true
}

/// One candidate cluster per core point: its neighborhood with core flags.
pub fn core_neighborhoods(points: &[TrackPoint], p: &ClusterParams, motion: MotionClass) -> Vec<Cluster> {
    let hoods: Vec<Neighborhood> = (0..points.len()).map(|i| query_neighbors(points, i, p)).collect();
    hoods
        .iter()
        .enumerate()
        .filter(|(_, h)| h.is_core)
        .map(|(i, h)| Cluster {
            id: i,
            motion,
            member_indices: h.indices.clone(),
            core_flags: h.indices.iter().map(|&j| hoods[j].is_core).collect(),
        })
        .collect()
}

/// Repeats the pairwise merge sweep until no two clusters merge.
///
/// Border points may end up in more than one of the returned clusters; only
/// the core sets are guaranteed disjoint. Quadratic in the number of
/// clusters, so meant for cross-checks on small inputs.
pub fn merge_neighborhoods(mut list: Vec<Cluster>) -> Vec<Cluster> {
    loop {
        let mut changed = false;
        let mut a = 0;
        while a < list.len() {
            let mut b = 0;
            while b < list.len() {
                if a != b {
                    let other = list[b].clone();
                    if merge_clusters(&mut list[a], &other) {
                        list.remove(b);
                        changed = true;
                        if b < a {
                            a -= 1;
                        }
                        continue;
                    }
                }
                b += 1;
            }
            a += 1;
        }
        if !changed {
            return list;
        }
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index wins so roots are stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
