//! Static schedule model: CSV ingestion, validation and lookup indices.
//!
//! A [`StaticFeed`] is built once from a directory of CSV files (or from
//! in-memory [`FeedRecords`]) and never mutated afterwards.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, GeoPoint, Polyline};

pub const STOPS_FILE: &str = "stops.csv";
pub const ROUTES_FILE: &str = "routes.csv";
pub const PATTERNS_FILE: &str = "patterns.csv";
pub const SHAPES_FILE: &str = "shapes.csv";
pub const TRIPS_FILE: &str = "trips.csv";
pub const STOP_TIMES_FILE: &str = "stop_times.csv";

const FEED_FILES: [&str; 6] = [
    STOPS_FILE,
    ROUTES_FILE,
    PATTERNS_FILE,
    SHAPES_FILE,
    TRIPS_FILE,
    STOP_TIMES_FILE,
];

/// Along-shape distances read from the feed may exceed the computed shape
/// length by this much, absorbing float noise from a CSV round trip.
const ALONG_TOLERANCE_M: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FeedError {
    #[error("missing feed file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {detail}")]
    Parse {
        file: String,
        line: u64,
        detail: String,
    },
    #[error("dangling {kind} reference: {id}")]
    DanglingRef { kind: &'static str, id: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("unknown stop {0}")]
    UnknownStop(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invariant(detail: impl Into<String>) -> FeedError {
    FeedError::InvariantViolation(detail.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub stop_id: String,
    pub code: String,
    pub name: String,
    #[serde(flatten)]
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub route_id: String,
    pub short_name: String,
    pub long_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternStop {
    pub stop_id: String,
    pub along_shape_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePattern {
    pub pattern_id: String,
    pub route_id: String,
    pub direction_id: u8,
    pub shape: Polyline,
    pub stops: Vec<PatternStop>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopTime {
    pub stop_id: String,
    pub arrival_s: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub trip_id: String,
    pub pattern_id: String,
    pub stop_times: Vec<StopTime>,
}

/// Raw, unvalidated rows as they appear in the CSV files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeedRecords {
    pub stops: Vec<StopRecord>,
    pub routes: Vec<RouteRecord>,
    pub patterns: Vec<PatternRecord>,
    pub shapes: Vec<ShapeRecord>,
    pub trips: Vec<TripRecord>,
    pub stop_times: Vec<StopTimeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRecord {
    pub stop_id: String,
    pub code: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteRecord {
    pub route_id: String,
    pub short_name: String,
    pub long_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternRecord {
    pub pattern_id: String,
    pub route_id: String,
    pub direction_id: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRecord {
    pub pattern_id: String,
    pub seq: u32,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub trip_id: String,
    pub pattern_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopTimeRecord {
    pub trip_id: String,
    pub seq: u32,
    pub stop_id: String,
    pub arrival_s: i64,
    pub along_shape_m: Option<f64>,
}

/// Where a stop occurs: pattern id and position in that pattern's stop list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopVisit {
    pub pattern_id: String,
    pub stop_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticFeed {
    stops: BTreeMap<String, Stop>,
    routes: BTreeMap<String, Route>,
    patterns: BTreeMap<String, RoutePattern>,
    trips: BTreeMap<String, Trip>,
    stop_by_code: HashMap<String, String>,
    visits_by_stop: HashMap<String, Vec<StopVisit>>,
    trips_by_pattern: HashMap<String, Vec<String>>,
}

impl StaticFeed {
    pub fn stops(&self) -> impl ExactSizeIterator<Item = &Stop> {
        self.stops.values()
    }

    pub fn routes(&self) -> impl ExactSizeIterator<Item = &Route> {
        self.routes.values()
    }

    pub fn patterns(&self) -> impl ExactSizeIterator<Item = &RoutePattern> {
        self.patterns.values()
    }

    pub fn trips(&self) -> impl ExactSizeIterator<Item = &Trip> {
        self.trips.values()
    }

    pub fn stop(&self, stop_id: &str) -> Option<&Stop> {
        self.stops.get(stop_id)
    }

    pub fn stop_by_code(&self, code: &str) -> Option<&Stop> {
        self.stop_by_code
            .get(code)
            .and_then(|id| self.stops.get(id))
    }

    pub fn route(&self, route_id: &str) -> Option<&Route> {
        self.routes.get(route_id)
    }

    pub fn pattern(&self, pattern_id: &str) -> Option<&RoutePattern> {
        self.patterns.get(pattern_id)
    }

    pub fn trip(&self, trip_id: &str) -> Option<&Trip> {
        self.trips.get(trip_id)
    }

    /// Pattern of a trip; always present for a validated feed.
    pub fn trip_pattern(&self, trip: &Trip) -> &RoutePattern {
        &self.patterns[&trip.pattern_id]
    }

    pub fn patterns_for_route<'a>(
        &'a self,
        route_id: &'a str,
    ) -> impl Iterator<Item = &'a RoutePattern> + 'a {
        self.patterns
            .values()
            .filter(move |p| p.route_id == route_id)
    }

    pub fn trips_for_pattern(&self, pattern_id: &str) -> impl Iterator<Item = &Trip> {
        self.trips_by_pattern
            .get(pattern_id)
            .into_iter()
            .flatten()
            .map(|id| &self.trips[id])
    }

    /// Every (pattern, position) at which the stop is visited.
    pub fn stop_visits(&self, stop_id: &str) -> &[StopVisit] {
        self.visits_by_stop
            .get(stop_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Route ids whose patterns serve the stop, sorted and deduplicated.
    pub fn routes_serving_stop(&self, stop_id: &str) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .stop_visits(stop_id)
            .iter()
            .map(|v| self.patterns[&v.pattern_id].route_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Every trip visiting the stop with its scheduled arrival there,
    /// ascending by arrival then trip id.
    pub fn trips_serving_stop(&self, stop_id: &str) -> Result<Vec<(String, i64)>, FeedError> {
        if !self.stops.contains_key(stop_id) {
            return Err(FeedError::UnknownStop(stop_id.to_string()));
        }
        let mut out: Vec<(String, i64)> = self
            .stop_visits(stop_id)
            .iter()
            .flat_map(|visit| {
                self.trips_for_pattern(&visit.pattern_id).map(move |trip| {
                    (
                        trip.trip_id.clone(),
                        trip.stop_times[visit.stop_index].arrival_s,
                    )
                })
            })
            .collect();
        out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    /// Validates raw records and builds the indexed model.
    pub fn from_records(records: FeedRecords) -> Result<Self, FeedError> {
        let FeedRecords {
            stops: stop_rows,
            routes: route_rows,
            patterns: pattern_rows,
            shapes: shape_rows,
            trips: trip_rows,
            stop_times: stop_time_rows,
        } = records;

        let mut stops = BTreeMap::new();
        let mut stop_by_code = HashMap::new();
        for row in stop_rows {
            let location = GeoPoint::new(row.lat, row.lon)
                .map_err(|e| invariant(format!("stop {}: {e}", row.stop_id)))?;
            if row.name.trim().is_empty() {
                return Err(invariant(format!("stop {} has an empty name", row.stop_id)));
            }
            if stop_by_code
                .insert(row.code.clone(), row.stop_id.clone())
                .is_some()
            {
                return Err(invariant(format!("duplicate stop code {}", row.code)));
            }
            let stop = Stop {
                stop_id: row.stop_id.clone(),
                code: row.code,
                name: row.name,
                location,
            };
            if stops.insert(row.stop_id.clone(), stop).is_some() {
                return Err(invariant(format!("duplicate stop_id {}", row.stop_id)));
            }
        }

        let mut routes = BTreeMap::new();
        for row in route_rows {
            if row.short_name.trim().is_empty() {
                return Err(invariant(format!(
                    "route {} has an empty short_name",
                    row.route_id
                )));
            }
            let id = row.route_id.clone();
            let route = Route {
                route_id: row.route_id,
                short_name: row.short_name,
                long_name: row.long_name,
            };
            if routes.insert(id.clone(), route).is_some() {
                return Err(invariant(format!("duplicate route_id {id}")));
            }
        }

        let mut pattern_meta: BTreeMap<String, PatternRecord> = BTreeMap::new();
        for row in pattern_rows {
            if !routes.contains_key(&row.route_id) {
                return Err(FeedError::DanglingRef {
                    kind: "route",
                    id: row.route_id,
                });
            }
            if row.direction_id > 1 {
                return Err(invariant(format!(
                    "pattern {} has direction_id {}",
                    row.pattern_id, row.direction_id
                )));
            }
            let id = row.pattern_id.clone();
            if pattern_meta.insert(id.clone(), row).is_some() {
                return Err(invariant(format!("duplicate pattern_id {id}")));
            }
        }

        let mut shape_points: BTreeMap<String, Vec<(u32, GeoPoint)>> = BTreeMap::new();
        for row in shape_rows {
            if !pattern_meta.contains_key(&row.pattern_id) {
                return Err(FeedError::DanglingRef {
                    kind: "pattern",
                    id: row.pattern_id,
                });
            }
            let p = GeoPoint::new(row.lat, row.lon)
                .map_err(|e| invariant(format!("shape of pattern {}: {e}", row.pattern_id)))?;
            shape_points
                .entry(row.pattern_id)
                .or_default()
                .push((row.seq, p));
        }

        let mut trip_pattern: BTreeMap<String, String> = BTreeMap::new();
        for row in trip_rows {
            if !pattern_meta.contains_key(&row.pattern_id) {
                return Err(FeedError::DanglingRef {
                    kind: "pattern",
                    id: row.pattern_id,
                });
            }
            if trip_pattern
                .insert(row.trip_id.clone(), row.pattern_id)
                .is_some()
            {
                return Err(invariant(format!("duplicate trip_id {}", row.trip_id)));
            }
        }

        let mut times_by_trip: BTreeMap<String, Vec<StopTimeRecord>> = BTreeMap::new();
        for row in stop_time_rows {
            if !trip_pattern.contains_key(&row.trip_id) {
                return Err(FeedError::DanglingRef {
                    kind: "trip",
                    id: row.trip_id,
                });
            }
            if !stops.contains_key(&row.stop_id) {
                return Err(FeedError::DanglingRef {
                    kind: "stop",
                    id: row.stop_id,
                });
            }
            times_by_trip
                .entry(row.trip_id.clone())
                .or_default()
                .push(row);
        }

        let mut shapes: BTreeMap<String, Polyline> = BTreeMap::new();
        for (pattern_id, mut points) in shape_points {
            points.sort_by_key(|(seq, _)| *seq);
            for (expected, (seq, _)) in points.iter().enumerate() {
                if *seq as usize != expected {
                    return Err(invariant(format!(
                        "shape of pattern {pattern_id}: seq {seq} where {expected} expected"
                    )));
                }
            }
            if points.windows(2).any(|w| w[0].1 == w[1].1) {
                return Err(invariant(format!(
                    "shape of pattern {pattern_id} repeats a point"
                )));
            }
            let line = Polyline::new(points.into_iter().map(|(_, p)| p).collect())
                .map_err(|e: GeoError| invariant(format!("shape of pattern {pattern_id}: {e}")))?;
            shapes.insert(pattern_id, line);
        }

        let mut trips = BTreeMap::new();
        let mut trips_by_pattern: HashMap<String, Vec<String>> = HashMap::new();
        // first trip (in id order) of each pattern fixes the stop sequence
        let mut pattern_stops: BTreeMap<String, Vec<(String, Option<f64>)>> = BTreeMap::new();
        for (trip_id, pattern_id) in &trip_pattern {
            let mut rows = times_by_trip.remove(trip_id).unwrap_or_default();
            rows.sort_by_key(|r| r.seq);
            for (expected, row) in rows.iter().enumerate() {
                if row.seq as usize != expected {
                    return Err(invariant(format!(
                        "stop_times of trip {trip_id}: seq {} where {expected} expected",
                        row.seq
                    )));
                }
            }
            if rows.windows(2).any(|w| w[1].arrival_s <= w[0].arrival_s) {
                return Err(invariant(format!(
                    "stop_times of trip {trip_id} are not strictly increasing"
                )));
            }
            match pattern_stops.get_mut(pattern_id) {
                None => {
                    pattern_stops.insert(
                        pattern_id.clone(),
                        rows.iter()
                            .map(|r| (r.stop_id.clone(), r.along_shape_m))
                            .collect(),
                    );
                }
                Some(existing) => {
                    let same_sequence = existing.len() == rows.len()
                        && existing.iter().zip(&rows).all(|(e, r)| e.0 == r.stop_id);
                    if !same_sequence {
                        return Err(invariant(format!(
                            "trip {trip_id} does not follow the stop sequence of pattern {pattern_id}"
                        )));
                    }
                    for (e, r) in existing.iter_mut().zip(&rows) {
                        match (e.1, r.along_shape_m) {
                            (None, Some(d)) => e.1 = Some(d),
                            (Some(a), Some(b)) if (a - b).abs() > ALONG_TOLERANCE_M => {
                                return Err(invariant(format!(
                                    "trip {trip_id} disagrees on along_shape_m at stop {}",
                                    r.stop_id
                                )));
                            }
                            _ => {}
                        }
                    }
                }
            }
            trips_by_pattern
                .entry(pattern_id.clone())
                .or_default()
                .push(trip_id.clone());
            trips.insert(
                trip_id.clone(),
                Trip {
                    trip_id: trip_id.clone(),
                    pattern_id: pattern_id.clone(),
                    stop_times: rows
                        .into_iter()
                        .map(|r| StopTime {
                            stop_id: r.stop_id,
                            arrival_s: r.arrival_s,
                        })
                        .collect(),
                },
            );
        }

        let mut patterns = BTreeMap::new();
        for (pattern_id, meta) in pattern_meta {
            let shape = shapes
                .remove(&pattern_id)
                .ok_or_else(|| invariant(format!("pattern {pattern_id} has no shape")))?;
            let seq = pattern_stops
                .remove(&pattern_id)
                .ok_or_else(|| invariant(format!("pattern {pattern_id} has no trips")))?;
            if seq.len() < 2 {
                return Err(invariant(format!(
                    "pattern {pattern_id} has fewer than 2 stops"
                )));
            }
            let length = shape.length_m();
            let mut stops_on_pattern = Vec::with_capacity(seq.len());
            for (stop_id, along) in seq {
                let along_shape_m = match along {
                    Some(d) => d,
                    None => shape.project(stops[&stop_id].location).along_m,
                };
                if !along_shape_m.is_finite()
                    || along_shape_m < 0.0
                    || along_shape_m > length + ALONG_TOLERANCE_M
                {
                    return Err(invariant(format!(
                        "pattern {pattern_id}: stop {stop_id} at {along_shape_m} m outside shape of {length} m"
                    )));
                }
                stops_on_pattern.push(PatternStop {
                    stop_id,
                    along_shape_m: along_shape_m.min(length),
                });
            }
            if stops_on_pattern
                .windows(2)
                .any(|w| w[1].along_shape_m <= w[0].along_shape_m)
            {
                return Err(invariant(format!(
                    "pattern {pattern_id}: stop distances are not strictly increasing"
                )));
            }
            patterns.insert(
                pattern_id.clone(),
                RoutePattern {
                    pattern_id,
                    route_id: meta.route_id,
                    direction_id: meta.direction_id,
                    shape,
                    stops: stops_on_pattern,
                },
            );
        }

        let mut visits_by_stop: HashMap<String, Vec<StopVisit>> = HashMap::new();
        for pattern in patterns.values() {
            for (stop_index, ps) in pattern.stops.iter().enumerate() {
                visits_by_stop
                    .entry(ps.stop_id.clone())
                    .or_default()
                    .push(StopVisit {
                        pattern_id: pattern.pattern_id.clone(),
                        stop_index,
                    });
            }
        }

        Ok(StaticFeed {
            stops,
            routes,
            patterns,
            trips,
            stop_by_code,
            visits_by_stop,
            trips_by_pattern,
        })
    }

    /// Flattens the model back into records with every distance filled in.
    pub fn to_records(&self) -> FeedRecords {
        let mut records = FeedRecords::default();
        for s in self.stops.values() {
            records.stops.push(StopRecord {
                stop_id: s.stop_id.clone(),
                code: s.code.clone(),
                name: s.name.clone(),
                lat: s.location.lat,
                lon: s.location.lon,
            });
        }
        for r in self.routes.values() {
            records.routes.push(RouteRecord {
                route_id: r.route_id.clone(),
                short_name: r.short_name.clone(),
                long_name: r.long_name.clone(),
            });
        }
        for p in self.patterns.values() {
            records.patterns.push(PatternRecord {
                pattern_id: p.pattern_id.clone(),
                route_id: p.route_id.clone(),
                direction_id: p.direction_id,
            });
            for (seq, pt) in p.shape.points().iter().enumerate() {
                records.shapes.push(ShapeRecord {
                    pattern_id: p.pattern_id.clone(),
                    seq: seq as u32,
                    lat: pt.lat,
                    lon: pt.lon,
                });
            }
        }
        for t in self.trips.values() {
            records.trips.push(TripRecord {
                trip_id: t.trip_id.clone(),
                pattern_id: t.pattern_id.clone(),
            });
            let pattern = &self.patterns[&t.pattern_id];
            for (seq, (st, ps)) in t.stop_times.iter().zip(&pattern.stops).enumerate() {
                records.stop_times.push(StopTimeRecord {
                    trip_id: t.trip_id.clone(),
                    seq: seq as u32,
                    stop_id: st.stop_id.clone(),
                    arrival_s: st.arrival_s,
                    along_shape_m: Some(ps.along_shape_m),
                });
            }
        }
        records
    }
}

impl RoutePattern {
    /// Position of the first occurrence of `stop_id` in the stop list.
    pub fn stop_index(&self, stop_id: &str) -> Option<usize> {
        self.stops.iter().position(|s| s.stop_id == stop_id)
    }
}

/// Reads and validates a feed directory. All-or-nothing.
pub fn load_feed(dir: impl AsRef<Path>) -> Result<StaticFeed, FeedError> {
    StaticFeed::from_records(read_records(dir.as_ref())?)
}

pub fn read_records(dir: &Path) -> Result<FeedRecords, FeedError> {
    for name in FEED_FILES {
        if !dir.join(name).is_file() {
            return Err(FeedError::MissingFile(dir.join(name)));
        }
    }
    let mut records = FeedRecords::default();

    for_each_row(
        dir,
        STOPS_FILE,
        &["stop_id", "code", "name", "lat", "lon"],
        |row| {
            records.stops.push(StopRecord {
                stop_id: row.text(0),
                code: row.text(1),
                name: row.text(2),
                lat: row.parse(3)?,
                lon: row.parse(4)?,
            });
            Ok(())
        },
    )?;
    for_each_row(
        dir,
        ROUTES_FILE,
        &["route_id", "short_name", "long_name"],
        |row| {
            records.routes.push(RouteRecord {
                route_id: row.text(0),
                short_name: row.text(1),
                long_name: row.text(2),
            });
            Ok(())
        },
    )?;
    for_each_row(
        dir,
        PATTERNS_FILE,
        &["pattern_id", "route_id", "direction_id"],
        |row| {
            records.patterns.push(PatternRecord {
                pattern_id: row.text(0),
                route_id: row.text(1),
                direction_id: row.parse(2)?,
            });
            Ok(())
        },
    )?;
    for_each_row(
        dir,
        SHAPES_FILE,
        &["pattern_id", "seq", "lat", "lon"],
        |row| {
            records.shapes.push(ShapeRecord {
                pattern_id: row.text(0),
                seq: row.parse(1)?,
                lat: row.parse(2)?,
                lon: row.parse(3)?,
            });
            Ok(())
        },
    )?;
    for_each_row(dir, TRIPS_FILE, &["trip_id", "pattern_id"], |row| {
        records.trips.push(TripRecord {
            trip_id: row.text(0),
            pattern_id: row.text(1),
        });
        Ok(())
    })?;
    for_each_row(
        dir,
        STOP_TIMES_FILE,
        &["trip_id", "seq", "stop_id", "arrival_s", "along_shape_m?"],
        |row| {
            let along_shape_m = match row.get(4) {
                Some(s) if !s.is_empty() => Some(row.parse(4)?),
                _ => None,
            };
            records.stop_times.push(StopTimeRecord {
                trip_id: row.text(0),
                seq: row.parse(1)?,
                stop_id: row.text(2),
                arrival_s: row.parse(3)?,
                along_shape_m,
            });
            Ok(())
        },
    )?;
    Ok(records)
}

struct Row<'a> {
    file: &'static str,
    line: u64,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    fn get(&self, i: usize) -> Option<&str> {
        self.record.get(i)
    }

    fn text(&self, i: usize) -> String {
        self.record.get(i).unwrap_or_default().to_string()
    }

    fn parse<T: std::str::FromStr>(&self, i: usize) -> Result<T, FeedError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.record.get(i).unwrap_or_default();
        raw.trim().parse().map_err(|e| FeedError::Parse {
            file: self.file.to_string(),
            line: self.line,
            detail: format!("column {}: {raw:?}: {e}", i + 1),
        })
    }
}

/// Streams rows of one CSV file after checking its header. Columns whose
/// name ends in `?` are optional trailing columns.
fn for_each_row(
    dir: &Path,
    file: &'static str,
    columns: &[&str],
    mut f: impl FnMut(&Row<'_>) -> Result<(), FeedError>,
) -> Result<(), FeedError> {
    let path = dir.join(file);
    let parse_err = |line: u64, detail: String| FeedError::Parse {
        file: file.to_string(),
        line,
        detail,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(&path)
        .map_err(|e| parse_err(1, e.to_string()))?;

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let required = columns.iter().filter(|c| !c.ends_with('?')).count();
    let header_ok = header.len() >= required
        && header.len() <= columns.len()
        && header
            .iter()
            .zip(columns)
            .all(|(h, c)| h.trim() == c.trim_end_matches('?'));
    if !header_ok {
        let expected: Vec<&str> = columns.iter().map(|c| c.trim_end_matches('?')).collect();
        return Err(parse_err(
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }

    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                f(&Row {
                    file,
                    line,
                    record: &record,
                })?;
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(parse_err(line, e.to_string()));
            }
        }
    }
    Ok(())
}

/// Writes the feed as six CSV files, always including `along_shape_m`.
pub fn write_feed(feed: &StaticFeed, dir: impl AsRef<Path>) -> Result<(), FeedError> {
    write_records(&feed.to_records(), dir.as_ref())
}

pub fn write_records(records: &FeedRecords, dir: &Path) -> Result<(), FeedError> {
    let emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<(), FeedError> {
        let path = dir.join(name);
        let io = |source| FeedError::Io {
            path: path.clone(),
            source,
        };
        let mut out = csv::Writer::from_writer(File::create(&path).map_err(io)?);
        out.write_record(header).map_err(|e| io(e.into()))?;
        for row in rows {
            out.write_record(&row).map_err(|e| io(e.into()))?;
        }
        out.flush().map_err(io)
    };

    emit(
        STOPS_FILE,
        &["stop_id", "code", "name", "lat", "lon"],
        records
            .stops
            .iter()
            .map(|s| {
                vec![
                    s.stop_id.clone(),
                    s.code.clone(),
                    s.name.clone(),
                    s.lat.to_string(),
                    s.lon.to_string(),
                ]
            })
            .collect(),
    )?;
    emit(
        ROUTES_FILE,
        &["route_id", "short_name", "long_name"],
        records
            .routes
            .iter()
            .map(|r| {
                vec![
                    r.route_id.clone(),
                    r.short_name.clone(),
                    r.long_name.clone(),
                ]
            })
            .collect(),
    )?;
    emit(
        PATTERNS_FILE,
        &["pattern_id", "route_id", "direction_id"],
        records
            .patterns
            .iter()
            .map(|p| {
                vec![
                    p.pattern_id.clone(),
                    p.route_id.clone(),
                    p.direction_id.to_string(),
                ]
            })
            .collect(),
    )?;
    emit(
        SHAPES_FILE,
        &["pattern_id", "seq", "lat", "lon"],
        records
            .shapes
            .iter()
            .map(|s| {
                vec![
                    s.pattern_id.clone(),
                    s.seq.to_string(),
                    s.lat.to_string(),
                    s.lon.to_string(),
                ]
            })
            .collect(),
    )?;
    emit(
        TRIPS_FILE,
        &["trip_id", "pattern_id"],
        records
            .trips
            .iter()
            .map(|t| vec![t.trip_id.clone(), t.pattern_id.clone()])
            .collect(),
    )?;
    let with_along = records
        .stop_times
        .iter()
        .any(|st| st.along_shape_m.is_some());
    let mut header = vec!["trip_id", "seq", "stop_id", "arrival_s"];
    if with_along {
        header.push("along_shape_m");
    }
    emit(
        STOP_TIMES_FILE,
        &header,
        records
            .stop_times
            .iter()
            .map(|st| {
                let mut row = vec![
                    st.trip_id.clone(),
                    st.seq.to_string(),
                    st.stop_id.clone(),
                    st.arrival_s.to_string(),
                ];
                if with_along {
                    row.push(st.along_shape_m.map(|d| d.to_string()).unwrap_or_default());
                }
                row
            })
            .collect(),
    )?;
    Ok(())
}
