//! AIS CSV ingestion, trajectory grouping and the motion split.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{classify_motion, MotionClass, TrackPoint, Trajectory};
use crate::{Error, Result};

/// AIS "course not available" sentinel.
const COG_NOT_AVAILABLE: f64 = 511.0;

/// Header names for the columns the parser reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub vessel_id: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub speed: String,
    pub course: String,
}

impl Default for ColumnMap {
    /// MarineCadastre export names.
    fn default() -> Self {
        Self {
            vessel_id: "MMSI".into(),
            timestamp: "BaseDateTime".into(),
            lat: "LAT".into(),
            lon: "LON".into(),
            speed: "SOG".into(),
            course: "COG".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub total_rows: usize,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<TrackPoint>,
    pub provenance: Provenance,
    pub rejections: Vec<Rejection>,
}

impl Dataset {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct Columns {
    vessel_id: Option<usize>,
    timestamp: Option<usize>,
    lat: usize,
    lon: usize,
    speed: usize,
    course: usize,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let require = |name: &str| {
            find(name).ok_or_else(|| Error::Schema {
                column: name.to_string(),
            })
        };
        Ok(Self {
            vessel_id: find(&map.vessel_id),
            timestamp: find(&map.timestamp),
            lat: require(&map.lat)?,
            lon: require(&map.lon)?,
            speed: require(&map.speed)?,
            course: require(&map.course)?,
        })
    }
}

/// Parses an AIS CSV with a header row.
///
/// Rows with a missing or unparseable position, speed or course are counted
/// and reported in [`Dataset::rejections`] rather than dropped silently. The
/// vessel id and timestamp columns are optional.
pub fn parse_ais_csv<R: Read>(source: R, schema: &ColumnMap, name: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = Columns::resolve(&headers, schema)?;

    let mut points = Vec::new();
    let mut rejections = Vec::new();
    let mut total = 0;
    for record in reader.records() {
        let record = record?;
        total += 1;
        let line = record.position().map_or(total as u64 + 1, |p| p.line());
        match parse_row(&record, &cols) {
            Ok(p) => points.push(p),
            Err(reason) => rejections.push(Rejection { line, reason }),
        }
    }

    Ok(Dataset {
        provenance: Provenance {
            source: name.to_string(),
            total_rows: total,
            accepted: points.len(),
            rejected: rejections.len(),
        },
        points,
        rejections,
    })
}

fn parse_row(record: &csv::StringRecord, cols: &Columns) -> std::result::Result<TrackPoint, String> {
    let number = |idx: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = record.get(idx).map(str::trim).unwrap_or("");
        if raw.is_empty() {
            return Err(format!("{name} missing"));
        }
        // Typographic minus shows up in hand-edited exports.
        let v: f64 = raw
            .replace('\u{2212}', "-")
            .parse()
            .map_err(|_| format!("{name} unparseable: `{raw}`"))?;
        if !v.is_finite() {
            return Err(format!("{name} not finite"));
        }
        Ok(v)
    };

    let lat = number(cols.lat, "LAT")?;
    let lon = number(cols.lon, "LON")?;
    let speed = number(cols.speed, "SOG")?;
    let mut course = number(cols.course, "COG")?;

    if speed < 0.0 {
        return Err(format!("SOG negative: {speed}"));
    }
    if course == COG_NOT_AVAILABLE {
        return Err("COG not available (511)".into());
    }
    if course == 360.0 {
        course = 0.0;
    }

    let mut point = TrackPoint::new(lat, lon, speed, course);
    point.validate().map_err(|e| e.to_string())?;

    point.vessel_id = cols
        .vessel_id
        .and_then(|i| record.get(i))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string);
    point.timestamp = cols
        .timestamp
        .and_then(|i| record.get(i))
        .and_then(|s| parse_timestamp(s.trim()));
    Ok(point)
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if s.is_empty() {
        return None;
    }
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Some(ts.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|naive| naive.and_utc())
}

/// One trajectory per vessel id, ordered by id, points sorted by time.
///
/// Points without a vessel id become singleton trajectories named after their
/// position in the dataset.
pub fn group_trajectories(d: &Dataset) -> Vec<Trajectory> {
    let mut by_vessel: BTreeMap<&str, Vec<TrackPoint>> = BTreeMap::new();
    let mut singletons = Vec::new();
    for (i, p) in d.points.iter().enumerate() {
        match &p.vessel_id {
            Some(id) => by_vessel.entry(id).or_default().push(p.clone()),
            None => singletons.push(Trajectory {
                id: format!("point-{i}"),
                points: vec![p.clone()],
            }),
        }
    }

    let mut out: Vec<Trajectory> = by_vessel
        .into_iter()
        .map(|(id, mut points)| {
            points.sort_by_key(|p| p.timestamp);
            Trajectory {
                id: id.to_string(),
                points,
            }
        })
        .collect();
    out.extend(singletons);
    out
}

/// Splits a set of points into (stationary, moving), preserving order.
pub fn split_by_motion(points: &[TrackPoint]) -> (Vec<TrackPoint>, Vec<TrackPoint>) {
    points
        .iter()
        .cloned()
        .partition(|p| classify_motion(p) == MotionClass::Stationary)
}

/// Writes points as line-delimited JSON (`{lat, lon, speed, course, ts, id}`).
pub fn write_ndjson<W: Write>(points: &[TrackPoint], mut out: W) -> Result<()> {
    for p in points {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ndjson<R: BufRead>(input: R) -> Result<Vec<TrackPoint>> {
    let mut points = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        points.push(serde_json::from_str(&line)?);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "MMSI,BaseDateTime,LAT,LON,SOG,COG\n";

    fn parse(body: &str) -> Result<Dataset> {
        parse_ais_csv(format!("{HEADER}{body}").as_bytes(), &ColumnMap::default(), "test")
    }

    #[test]
    fn maps_marinecadastre_row() {
        let d = parse("366999712,2017-01-01T00:00:03,38.95,\u{2212}74.85,7.2,103.0\n").unwrap();
        assert_eq!(d.points.len(), 1);
        let p = &d.points[0];
        assert_eq!((p.lat, p.lon, p.speed, p.course), (38.95, -74.85, 7.2, 103.0));
        assert_eq!(p.vessel_id.as_deref(), Some("366999712"));
        assert_eq!(
            p.timestamp.unwrap().to_rfc3339(),
            "2017-01-01T00:00:03+00:00"
        );
    }

    #[test]
    fn header_only_is_empty() {
        let d = parse("").unwrap();
        assert!(d.is_empty());
        assert_eq!(d.provenance.rejected, 0);
        assert_eq!(d.provenance.total_rows, 0);
    }

    #[test]
    fn rejects_and_counts_bad_rows() {
        let d = parse(concat!(
            "1,2017-01-01T00:00:00,38.0,-74.0,,90\n",
            "1,2017-01-01T00:00:01,38.0,-74.0,-1,90\n",
            "1,2017-01-01T00:00:02,38.0,-74.0,3,511\n",
            "1,2017-01-01T00:00:03,abc,-74.0,3,90\n",
            "1,2017-01-01T00:00:04,38.0,-74.0,3,360\n",
        ))
        .unwrap();
        assert_eq!(d.provenance.total_rows, 5);
        assert_eq!(d.provenance.rejected, 4);
        assert_eq!(d.provenance.accepted, 1);
        assert_eq!(d.points[0].course, 0.0);
        assert_eq!(d.rejections[0].line, 2);
        assert!(d.rejections[0].reason.contains("SOG"));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let err = parse_ais_csv("MMSI,LAT,LON,SOG\n".as_bytes(), &ColumnMap::default(), "x")
            .unwrap_err();
        match err {
            Error::Schema { column } => assert_eq!(column, "COG"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn groups_and_sorts() {
        let d = parse(concat!(
            "b,2017-01-01T00:00:05,38.0,-74.0,3,90\n",
            "a,2017-01-01T00:00:03,38.0,-74.0,3,90\n",
            "b,2017-01-01T00:00:01,38.0,-74.0,3,90\n",
            "a,2017-01-01T00:00:01,38.0,-74.0,3,90\n",
            "b,2017-01-01T00:00:03,38.0,-74.0,3,90\n",
            "a,2017-01-01T00:00:02,38.0,-74.0,3,90\n",
        ))
        .unwrap();
        let ts = group_trajectories(&d);
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].id, "a");
        for t in &ts {
            assert_eq!(t.len(), 3);
            assert!(t.points.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            assert!(Trajectory::new(t.id.clone(), t.points.clone()).is_ok());
        }
        assert!(group_trajectories(&parse("").unwrap()).is_empty());
    }

    #[test]
    fn points_without_vessel_are_singletons() {
        let d = parse(",,38.0,-74.0,3,90\n,,38.1,-74.0,3,90\n").unwrap();
        let ts = group_trajectories(&d);
        assert_eq!(ts.len(), 2);
        assert!(ts.iter().all(|t| t.len() == 1));
    }

    #[test]
    fn split_examples() {
        let pts: Vec<_> = [0.1, 3.0, 0.2]
            .iter()
            .map(|&s| TrackPoint::new(0.0, 0.0, s, 0.0))
            .collect();
        let (st, mv) = split_by_motion(&pts);
        assert_eq!(st.iter().map(|p| p.speed).collect::<Vec<_>>(), vec![0.1, 0.2]);
        assert_eq!(mv.iter().map(|p| p.speed).collect::<Vec<_>>(), vec![3.0]);

        let fast: Vec<_> = (0..3).map(|_| TrackPoint::new(0.0, 0.0, 0.5, 0.0)).collect();
        let (st, mv) = split_by_motion(&fast);
        assert!(st.is_empty());
        assert_eq!(mv.len(), 3);

        let slow: Vec<_> = (0..3).map(|_| TrackPoint::new(0.0, 0.0, 0.4, 0.0)).collect();
        let (st, mv) = split_by_motion(&slow);
        assert_eq!(st.len(), 3);
        assert!(mv.is_empty());
    }

    #[test]
    fn ndjson_cache_fields() {
        let d = parse("7,2017-01-01T00:00:03,38.95,-74.85,7.2,103.0\n").unwrap();
        let mut buf = Vec::new();
        write_ndjson(&d.points, &mut buf).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for key in ["lat", "lon", "speed", "course", "ts", "id"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(read_ndjson(buf.as_slice()).unwrap(), d.points);
    }
}
