//! Small synthetic feeds shared by tests, benchmarks and demos.

use crate::feed::{
    FeedRecords, PatternRecord, RouteRecord, ShapeRecord, StaticFeed, StopRecord, StopTimeRecord,
    TripRecord,
};
use crate::geo::{GeoPoint, Polyline, METERS_PER_DEGREE};

/// Two stops 1000 m apart on a straight northbound shape, one trip
/// scheduled at 0 s and 120 s. Stop distances are left for projection.
pub fn minimal_records() -> FeedRecords {
    let north = 1000.0 / METERS_PER_DEGREE;
    let (lat0, lon) = (45.0, -73.6);
    FeedRecords {
        stops: vec![
            stop("S1", "1001", "Main St & 1st Ave", lat0, lon),
            stop("S2", "1002", "Main St & 9th Ave", lat0 + north, lon),
        ],
        routes: vec![RouteRecord {
            route_id: "R1".into(),
            short_name: "10".into(),
            long_name: "Main Street".into(),
        }],
        patterns: vec![PatternRecord {
            pattern_id: "P1".into(),
            route_id: "R1".into(),
            direction_id: 0,
        }],
        shapes: vec![
            shape_point("P1", 0, lat0, lon),
            shape_point("P1", 1, lat0 + north, lon),
        ],
        trips: vec![TripRecord {
            trip_id: "T1".into(),
            pattern_id: "P1".into(),
        }],
        stop_times: vec![
            stop_time("T1", 0, "S1", 0, None),
            stop_time("T1", 1, "S2", 120, None),
        ],
    }
}

pub fn minimal_feed() -> StaticFeed {
    StaticFeed::from_records(minimal_records()).expect("minimal fixture is valid")
}

/// Trip id of the corridor fixture's single trip.
pub const CORRIDOR_TRIP: &str = "C1";

/// First scheduled arrival of the corridor trip, seconds after midnight.
pub const CORRIDOR_START_S: i64 = 8 * 3600;

/// A 5 km stair-step shape with six evenly spaced stops and uneven
/// segment running times.
pub fn corridor_records() -> FeedRecords {
    let origin: (f64, f64) = (45.5, -73.6);
    // (east_m, north_m) legs; planar lengths sum to 5000 m
    let legs = [
        (1200.0, 0.0),
        (0.0, 800.0),
        (1500.0, 0.0),
        (0.0, 1000.0),
        (500.0, 0.0),
    ];
    let lon_scale = origin.0.to_radians().cos() * METERS_PER_DEGREE;
    let mut vertices = vec![origin];
    for (east, north) in legs {
        let (lat, lon) = *vertices.last().unwrap();
        vertices.push((lat + north / METERS_PER_DEGREE, lon + east / lon_scale));
    }
    let line = Polyline::new(
        vertices
            .iter()
            .map(|&(lat, lon)| GeoPoint { lat, lon })
            .collect(),
    )
    .expect("corridor shape is valid");
    let length = line.length_m();

    let offsets_s = [0, 150, 270, 420, 540, 660];
    let mut records = FeedRecords {
        routes: vec![RouteRecord {
            route_id: "R5".into(),
            short_name: "5".into(),
            long_name: "Crosstown".into(),
        }],
        patterns: vec![PatternRecord {
            pattern_id: "C".into(),
            route_id: "R5".into(),
            direction_id: 0,
        }],
        trips: vec![TripRecord {
            trip_id: CORRIDOR_TRIP.into(),
            pattern_id: "C".into(),
        }],
        ..FeedRecords::default()
    };
    for (seq, &(lat, lon)) in vertices.iter().enumerate() {
        records.shapes.push(shape_point("C", seq as u32, lat, lon));
    }
    for (i, offset) in offsets_s.iter().enumerate() {
        let along = if i == offsets_s.len() - 1 {
            length
        } else {
            length * i as f64 / (offsets_s.len() - 1) as f64
        };
        let p = line.point_at_distance(along).unwrap();
        let id = format!("C{}", i + 1);
        records.stops.push(stop(
            &id,
            &format!("50{}", i + 1),
            &format!("Crosstown stop {}", i + 1),
            p.lat,
            p.lon,
        ));
        records.stop_times.push(stop_time(
            CORRIDOR_TRIP,
            i as u32,
            &id,
            CORRIDOR_START_S + offset,
            Some(along),
        ));
    }
    records
}

pub fn corridor_feed() -> StaticFeed {
    StaticFeed::from_records(corridor_records()).expect("corridor fixture is valid")
}

fn stop(id: &str, code: &str, name: &str, lat: f64, lon: f64) -> StopRecord {
    StopRecord {
        stop_id: id.into(),
        code: code.into(),
        name: name.into(),
        lat,
        lon,
    }
}

fn shape_point(pattern_id: &str, seq: u32, lat: f64, lon: f64) -> ShapeRecord {
    ShapeRecord {
        pattern_id: pattern_id.into(),
        seq,
        lat,
        lon,
    }
}

fn stop_time(
    trip_id: &str,
    seq: u32,
    stop_id: &str,
    arrival_s: i64,
    along_shape_m: Option<f64>,
) -> StopTimeRecord {
    StopTimeRecord {
        trip_id: trip_id.into(),
        seq,
        stop_id: stop_id.into(),
        arrival_s,
        along_shape_m,
    }
}
