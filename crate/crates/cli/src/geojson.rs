//! GeoJSON FeatureCollections for GIS viewers. Coordinates are `[lon, lat]`.

use ais_anomaly::clustering::Clustering;
use ais_anomaly::patterns::{PatternModel, TrainingClusters};
use ais_anomaly::{MotionClass, TrackPoint};
use serde_json::{json, Value};

fn coords<'a>(points: impl IntoIterator<Item = &'a TrackPoint>) -> Vec<[f64; 2]> {
    points.into_iter().map(|p| [p.lon, p.lat]).collect()
}

fn layer(features: &mut Vec<Value>, c: &Clustering, points: &[TrackPoint], motion: MotionClass) {
    for cl in &c.clusters {
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "MultiPoint", "coordinates": coords(cl.members(points)) },
            "properties": {
                "layer": "clusters",
                "motion": motion.as_str(),
                "cluster_id": cl.id,
                "size": cl.len(),
                "core_points": cl.core_indices().count(),
            },
        }));
    }
    if !c.noise.is_empty() {
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "MultiPoint", "coordinates": coords(c.noise.iter().map(|&i| &points[i])) },
            "properties": { "layer": "noise", "motion": motion.as_str(), "size": c.noise.len() },
        }));
    }
}

/// One MultiPoint per cluster, plus one noise feature per motion class.
pub fn clusters(t: &TrainingClusters) -> Value {
    let mut features = Vec::new();
    if let Some(c) = &t.stationary {
        layer(&mut features, c, &t.stationary_points, MotionClass::Stationary);
    }
    if let Some(c) = &t.moving {
        layer(&mut features, c, &t.moving_points, MotionClass::Moving);
    }
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn patterns(m: &PatternModel) -> Value {
    let gravity = m.gravity_vectors.iter().map(|g| {
        json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [g.lon, g.lat] },
            "properties": {
                "kind": "gravity_vector",
                "cluster_id": g.cluster_id,
                "band_index": g.band_index,
                "speed": g.speed,
                "course": g.course,
                "med_dist": g.med_dist,
                "member_count": g.member_count,
            },
        })
    });
    let sampling = m.sampling_points.iter().map(|s| {
        json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [s.lon, s.lat] },
            "properties": { "kind": "stationary_sampling_point", "cluster_id": s.cluster_id },
        })
    });
    json!({ "type": "FeatureCollection", "features": gravity.chain(sampling).collect::<Vec<_>>() })
}
