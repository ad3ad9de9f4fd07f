//! Uniform grid over (lat, lon) for fixed-radius candidate lookup.

use std::collections::HashMap;

use crate::model::TrackPoint;

/// Relative slack on the cell edge. Rounding in `coord / cell` must never
/// push a true neighbor two cells away.
const CELL_SLACK: f64 = 1e-9;

#[derive(Debug)]
pub struct SpatialGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGrid {
    /// Indexes `points` with cells at least `radius` wide.
    pub fn new(points: &[TrackPoint], radius: f64) -> Self {
        let cell = radius * (1.0 + CELL_SLACK);
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(key(p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    /// Every indexed point in the 3x3 block of cells around `p`, ascending.
    ///
    /// This is a superset of the points strictly closer than the radius.
    pub fn candidates(&self, p: &TrackPoint) -> Vec<usize> {
        let (r, c) = key(p, self.cell);
        let mut out = Vec::new();
        for dr in -1..=1 {
            for dc in -1..=1 {
                if let Some(bucket) = self.cells.get(&(r + dr, c + dc)) {
                    out.extend_from_slice(bucket);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn key(p: &TrackPoint, cell: f64) -> (i64, i64) {
    ((p.lat / cell).floor() as i64, (p.lon / cell).floor() as i64)
}
