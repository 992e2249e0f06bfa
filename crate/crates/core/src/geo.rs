//! Spherical-earth geodesy, polyline projection, and a uniform grid index
//! for radius queries over stops.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean earth radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per degree of latitude (and of longitude at the equator).
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate out of range: lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("bearing is undefined between identical points")]
    DegenerateInput,
    #[error("degenerate shape: {0}")]
    DegenerateShape(&'static str),
    #[error("distance {distance_m} m outside shape of length {length_m} m")]
    OutOfRange { distance_m: f64, length_m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Builds a point, rejecting non-finite or out-of-range coordinates.
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let ok = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon);
        if ok {
            Ok(GeoPoint { lat, lon })
        } else {
            Err(GeoError::InvalidCoordinate { lat, lon })
        }
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    // clamp guards asin against h drifting past 1.0 for antipodal points
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Compass bearing from `a` toward `b` in `[0, 360)`, 0 = north, 90 = east.
pub fn initial_bearing_deg(a: GeoPoint, b: GeoPoint) -> Result<f64, GeoError> {
    if a == b {
        return Err(GeoError::DegenerateInput);
    }
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    let deg = y.atan2(x).to_degrees().rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    Ok(if deg >= 360.0 { 0.0 } else { deg })
}

/// Result of snapping a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub along_m: f64,
    pub offset_m: f64,
    pub segment_index: usize,
}

/// An immutable polyline with precomputed cumulative great-circle lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<GeoPoint>,
    cumulative_m: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if points.len() < 2 {
            return Err(GeoError::DegenerateShape("fewer than 2 points"));
        }
        let mut cumulative_m = Vec::with_capacity(points.len());
        let mut total = 0.0;
        cumulative_m.push(0.0);
        for pair in points.windows(2) {
            total += haversine_m(pair[0], pair[1]);
            cumulative_m.push(total);
        }
        if total <= 0.0 {
            return Err(GeoError::DegenerateShape("zero total length"));
        }
        Ok(Polyline {
            points,
            cumulative_m,
        })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn length_m(&self) -> f64 {
        *self.cumulative_m.last().expect("polyline has >= 2 points")
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Cumulative distance from the first vertex to vertex `i`.
    pub fn distance_to_vertex(&self, i: usize) -> f64 {
        self.cumulative_m[i]
    }

    /// Index of the segment containing distance `d`. A distance that lands
    /// exactly on an interior vertex belongs to the following segment; the
    /// shape end belongs to the last segment.
    pub fn segment_at(&self, d: f64) -> usize {
        let last = self.segment_count() - 1;
        // first vertex strictly beyond d, minus one
        let idx = self.cumulative_m.partition_point(|&c| c <= d);
        idx.saturating_sub(1).min(last)
    }

    pub fn point_at_distance(&self, d: f64) -> Result<GeoPoint, GeoError> {
        let length_m = self.length_m();
        if !(0.0..=length_m).contains(&d) {
            return Err(GeoError::OutOfRange {
                distance_m: d,
                length_m,
            });
        }
        if d == length_m {
            return Ok(*self.points.last().unwrap());
        }
        let i = self.segment_at(d);
        let seg_len = self.cumulative_m[i + 1] - self.cumulative_m[i];
        let t = ((d - self.cumulative_m[i]) / seg_len).clamp(0.0, 1.0);
        let (a, b) = (self.points[i], self.points[i + 1]);
        Ok(GeoPoint {
            lat: a.lat + (b.lat - a.lat) * t,
            lon: a.lon + (b.lon - a.lon) * t,
        })
    }

    /// Projects `p` onto every segment in a local equirectangular plane and
    /// keeps the closest candidate; ties go to the lower segment index.
    pub fn project(&self, p: GeoPoint) -> Projection {
        let mut best = Projection {
            along_m: 0.0,
            offset_m: f64::INFINITY,
            segment_index: 0,
        };
        for (i, pair) in self.points.windows(2).enumerate() {
            let (t, offset_m) = project_onto_segment(p, pair[0], pair[1]);
            if offset_m < best.offset_m {
                let seg_len = self.cumulative_m[i + 1] - self.cumulative_m[i];
                best = Projection {
                    along_m: self.cumulative_m[i] + t * seg_len,
                    offset_m,
                    segment_index: i,
                };
            }
        }
        best
    }
}

/// Returns the clamped fraction along `a→b` and the planar distance from `p`
/// to that foot point, in meters.
fn project_onto_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> (f64, f64) {
    let lon_scale = ((a.lat + b.lat) / 2.0).to_radians().cos() * METERS_PER_DEGREE;
    let to_plane = |q: GeoPoint| {
        let mut dlon = q.lon - a.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        (dlon * lon_scale, (q.lat - a.lat) * METERS_PER_DEGREE)
    };
    let (bx, by) = to_plane(b);
    let (px, py) = to_plane(p);
    let len2 = bx * bx + by * by;
    let t = if len2 > 0.0 {
        ((px * bx + py * by) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (px - t * bx, py - t * by);
    (t, (dx * dx + dy * dy).sqrt())
}

/// Convenience wrapper that validates the raw vertex list first.
pub fn project_onto_polyline(p: GeoPoint, shape: &[GeoPoint]) -> Result<Projection, GeoError> {
    Ok(Polyline::new(shape.to_vec())?.project(p))
}

pub fn point_at_distance(shape: &[GeoPoint], d: f64) -> Result<GeoPoint, GeoError> {
    Polyline::new(shape.to_vec())?.point_at_distance(d)
}

pub const DEFAULT_CELL_SIZE_DEG: f64 = 0.01;

type Cell = (i64, i64);

/// Uniform lat/lon bucket grid over a fixed set of stops.
///
/// The index stores positions into the slice it was built from, so results
/// carry the caller's ids back out unchanged.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size_deg: f64,
    entries: Vec<(String, GeoPoint)>,
    buckets: HashMap<Cell, Vec<usize>>,
}

impl GridIndex {
    pub fn new<I, S>(stops: I, cell_size_deg: f64) -> Self
    where
        I: IntoIterator<Item = (S, GeoPoint)>,
        S: Into<String>,
    {
        assert!(
            cell_size_deg.is_finite() && cell_size_deg > 0.0,
            "cell size must be positive"
        );
        let entries: Vec<(String, GeoPoint)> =
            stops.into_iter().map(|(id, p)| (id.into(), p)).collect();
        let mut buckets: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, (_, p)) in entries.iter().enumerate() {
            buckets
                .entry(cell_of(*p, cell_size_deg))
                .or_default()
                .push(i);
        }
        GridIndex {
            cell_size_deg,
            entries,
            buckets,
        }
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Stop ids in the bucket with the given cell coordinates.
    pub fn bucket(&self, cell: (i64, i64)) -> impl Iterator<Item = &str> {
        self.buckets
            .get(&cell)
            .into_iter()
            .flatten()
            .map(|&i| self.entries[i].0.as_str())
    }

    /// Stops within `radius_m` of `center`, nearest first, ties by id.
    pub fn stops_near(&self, center: GeoPoint, radius_m: f64) -> Vec<(String, f64)> {
        if self.entries.is_empty() || radius_m.is_nan() || radius_m < 0.0 {
            return Vec::new();
        }
        let mut hits: Vec<(String, f64)> = Vec::new();
        let mut consider = |i: usize| {
            let (id, p) = &self.entries[i];
            let d = haversine_m(center, *p);
            if d <= radius_m {
                hits.push((id.clone(), d));
            }
        };

        match self.search_window(center, radius_m) {
            Some(window) if window.cell_count() <= self.buckets.len() as f64 => {
                for lat_cell in window.lat_cells.0..=window.lat_cells.1 {
                    for &(lo, hi) in &window.lon_cells {
                        for lon_cell in lo..=hi {
                            if let Some(bucket) = self.buckets.get(&(lat_cell, lon_cell)) {
                                bucket.iter().for_each(|&i| consider(i));
                            }
                        }
                    }
                }
            }
            Some(window) => {
                // window spans more cells than exist; walk the buckets instead
                for (cell, bucket) in &self.buckets {
                    if window.contains(*cell) {
                        bucket.iter().for_each(|&i| consider(i));
                    }
                }
            }
            None => (0..self.entries.len()).for_each(consider),
        }

        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        hits
    }

    /// Cell ranges covering every point within `radius_m` of `center`, or
    /// `None` when the query reaches a pole or wraps the whole globe.
    fn search_window(&self, center: GeoPoint, radius_m: f64) -> Option<Window> {
        // padding absorbs rounding in the trig below and in haversine itself
        let angular = radius_m / EARTH_RADIUS_M * (1.0 + 1e-9) + 1e-12;
        let dlat = angular.to_degrees();
        let lat_lo = center.lat - dlat;
        let lat_hi = center.lat + dlat;
        if lat_lo <= -90.0 || lat_hi >= 90.0 {
            return None;
        }
        let s = angular.sin() / center.lat.to_radians().cos();
        if s.is_nan() || s >= 1.0 {
            return None;
        }
        let dlon = s.asin().to_degrees() * (1.0 + 1e-9) + 1e-12;
        if dlon >= 180.0 {
            return None;
        }

        let cs = self.cell_size_deg;
        let lat_cells = ((lat_lo / cs).floor() as i64, (lat_hi / cs).floor() as i64);
        let lon_lo = center.lon - dlon;
        let lon_hi = center.lon + dlon;
        let mut lon_ranges = vec![(lon_lo.max(-180.0), lon_hi.min(180.0))];
        if lon_lo < -180.0 {
            lon_ranges.push((lon_lo + 360.0, 180.0));
        }
        if lon_hi > 180.0 {
            lon_ranges.push((-180.0, lon_hi - 360.0));
        }
        let lon_cells = lon_ranges
            .into_iter()
            .map(|(lo, hi)| ((lo / cs).floor() as i64, (hi / cs).floor() as i64))
            .collect();
        Some(Window {
            lat_cells,
            lon_cells,
        })
    }
}

struct Window {
    lat_cells: (i64, i64),
    lon_cells: Vec<(i64, i64)>,
}

impl Window {
    fn cell_count(&self) -> f64 {
        let rows = (self.lat_cells.1 - self.lat_cells.0 + 1) as f64;
        let cols: f64 = self
            .lon_cells
            .iter()
            .map(|(lo, hi)| (hi - lo + 1) as f64)
            .sum();
        rows * cols
    }

    fn contains(&self, (lat, lon): Cell) -> bool {
        (self.lat_cells.0..=self.lat_cells.1).contains(&lat)
            && self
                .lon_cells
                .iter()
                .any(|&(lo, hi)| (lo..=hi).contains(&lon))
    }
}

fn cell_of(p: GeoPoint, cell_size_deg: f64) -> Cell {
    (
        (p.lat / cell_size_deg).floor() as i64,
        (p.lon / cell_size_deg).floor() as i64,
    )
}
