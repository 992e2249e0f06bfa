//! Independent oracles and random generators shared by the integration and
//! acceptance tests. Nothing here calls into the projection, index or
//! filtering code it is used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use transit_core::alerts::{AlertDraft, AlertTarget, ServiceAlert, Severity};
use transit_core::feed::{
    FeedRecords, PatternRecord, RouteRecord, ShapeRecord, StaticFeed, StopRecord, StopTimeRecord,
    TripRecord,
};
use transit_core::geo::GeoPoint;
use transit_core::sim::SplitMix64;

pub const R: f64 = 6_371_000.0;

pub struct Rng(SplitMix64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(SplitMix64::new(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.0.next_f64() < p
    }
}

/// Textbook haversine, written out independently of the crate's version.
pub fn great_circle_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().asin()
}

/// Offsets `p` by meters east/north on a local tangent plane.
pub fn offset(p: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let m_per_deg = R * std::f64::consts::PI / 180.0;
    GeoPoint {
        lat: p.lat + north_m / m_per_deg,
        lon: p.lon + east_m / (m_per_deg * p.lat.to_radians().cos()),
    }
}

/// Random walk polyline with `n` vertices and segment lengths in
/// `[min_len, max_len]` meters.
pub fn random_polyline(rng: &mut Rng, n: usize, min_len: f64, max_len: f64) -> Vec<GeoPoint> {
    let mut pts = vec![GeoPoint {
        lat: rng.uniform(-60.0, 60.0),
        lon: rng.uniform(-170.0, 170.0),
    }];
    while pts.len() < n {
        let heading = rng.uniform(0.0, std::f64::consts::TAU);
        let len = rng.uniform(min_len, max_len);
        let last = *pts.last().unwrap();
        pts.push(offset(last, len * heading.sin(), len * heading.cos()));
    }
    pts
}

/// Nearest point of a densely resampled polyline: samples every `step_m`
/// along each segment (linear in lat/lon), measured with the great circle.
/// Returns (along_m, offset_m).
pub fn dense_projection(p: GeoPoint, shape: &[GeoPoint], step_m: f64) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    let mut start = 0.0;
    for w in shape.windows(2) {
        let seg = great_circle_m(w[0], w[1]);
        let n = (seg / step_m).ceil().max(1.0) as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let q = GeoPoint {
                lat: w[0].lat + (w[1].lat - w[0].lat) * t,
                lon: w[0].lon + (w[1].lon - w[0].lon) * t,
            };
            let d = great_circle_m(p, q);
            if d < best.1 {
                best = (start + t * seg, d);
            }
        }
        start += seg;
    }
    best
}

pub fn polyline_length(shape: &[GeoPoint]) -> f64 {
    shape.windows(2).map(|w| great_circle_m(w[0], w[1])).sum()
}

/// Linear scan over every stop, with the crate's distance metric so that
/// equality (members and order) can be asserted exactly.
pub fn brute_stops_near(
    stops: &[(String, GeoPoint)],
    center: GeoPoint,
    radius_m: f64,
) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = stops
        .iter()
        .map(|(id, p)| (id.clone(), transit_core::geo::haversine_m(center, *p)))
        .filter(|(_, d)| *d <= radius_m)
        .collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

/// A random but valid feed: a grid of stops, several routes with one or two
/// patterns each, and several trips per pattern.
pub fn random_feed_records(seed: u64, trips_wanted: usize) -> FeedRecords {
    let mut rng = Rng::new(seed);
    let mut r = FeedRecords::default();
    let n_stops = 30;
    for i in 0..n_stops {
        r.stops.push(StopRecord {
            stop_id: format!("st{i:02}"),
            code: format!("{}", 2000 + i),
            name: format!("Stop {i}"),
            lat: 45.0 + rng.uniform(0.0, 0.05),
            lon: -73.6 + rng.uniform(0.0, 0.05),
        });
    }
    let n_patterns = 6;
    for p in 0..n_patterns {
        let route = format!("r{}", p / 2);
        if p % 2 == 0 {
            r.routes.push(RouteRecord {
                route_id: route.clone(),
                short_name: format!("{}", p / 2 + 1),
                long_name: String::new(),
            });
        }
        r.patterns.push(PatternRecord {
            pattern_id: format!("p{p}"),
            route_id: route,
            direction_id: (p % 2) as u8,
        });
        // shape goes straight north; stops placed at increasing distances
        let base = GeoPoint {
            lat: 45.0 + rng.uniform(0.0, 0.01),
            lon: -73.6 + rng.uniform(0.0, 0.05),
        };
        let end = offset(base, 0.0, 3000.0);
        for (seq, pt) in [base, end].into_iter().enumerate() {
            r.shapes.push(ShapeRecord {
                pattern_id: format!("p{p}"),
                seq: seq as u32,
                lat: pt.lat,
                lon: pt.lon,
            });
        }
    }
    // stop sequence per pattern: 2..6 distinct stops at increasing distances
    let sequences: Vec<Vec<(String, f64)>> = (0..n_patterns)
        .map(|_| {
            let k = 2 + rng.below(5);
            let mut picked: Vec<usize> = Vec::new();
            while picked.len() < k {
                let s = rng.below(n_stops);
                if !picked.contains(&s) {
                    picked.push(s);
                }
            }
            picked
                .into_iter()
                .enumerate()
                .map(|(j, s)| {
                    (
                        format!("st{s:02}"),
                        400.0 * j as f64 + rng.uniform(0.0, 300.0),
                    )
                })
                .collect()
        })
        .collect();
    for t in 0..trips_wanted {
        let p = rng.below(n_patterns);
        let trip_id = format!("t{t:03}");
        r.trips.push(TripRecord {
            trip_id: trip_id.clone(),
            pattern_id: format!("p{p}"),
        });
        let mut time = 3600 * 5 + rng.below(3600 * 18) as i64;
        for (seq, (stop, along)) in sequences[p].iter().enumerate() {
            r.stop_times.push(StopTimeRecord {
                trip_id: trip_id.clone(),
                seq: seq as u32,
                stop_id: stop.clone(),
                arrival_s: time,
                along_shape_m: Some(*along),
            });
            time += 30 + rng.below(300) as i64;
        }
    }
    // every pattern needs at least one trip
    for (p, sequence) in sequences.iter().enumerate() {
        let pid = format!("p{p}");
        if !r.trips.iter().any(|t| t.pattern_id == pid) {
            let trip_id = format!("fill{p}");
            r.trips.push(TripRecord {
                trip_id: trip_id.clone(),
                pattern_id: pid,
            });
            for (seq, (stop, along)) in sequence.iter().enumerate() {
                r.stop_times.push(StopTimeRecord {
                    trip_id: trip_id.clone(),
                    seq: seq as u32,
                    stop_id: stop.clone(),
                    arrival_s: 1000 + 60 * seq as i64,
                    along_shape_m: Some(*along),
                });
            }
        }
    }
    r
}

pub fn random_alert_draft(rng: &mut Rng, feed: &StaticFeed) -> AlertDraft {
    let routes: Vec<&str> = feed.routes().map(|r| r.route_id.as_str()).collect();
    let stops: Vec<&str> = feed.stops().map(|s| s.stop_id.as_str()).collect();
    let from = rng.below(10_000) as i64;
    let mut d = AlertDraft {
        summary: "detour".into(),
        description: String::new(),
        severity: Severity::Warning,
        affected_route_ids: BTreeSet::new(),
        affected_stop_ids: BTreeSet::new(),
        active_from: from,
        active_until: from + 1 + rng.below(5_000) as i64,
    };
    d.severity = [Severity::Info, Severity::Warning, Severity::Severe][rng.below(3)];
    for _ in 0..rng.below(3) {
        d.affected_route_ids
            .insert(routes[rng.below(routes.len())].to_string());
    }
    for _ in 0..rng.below(3) {
        d.affected_stop_ids
            .insert(stops[rng.below(stops.len())].to_string());
    }
    d
}

/// Straight filter over every alert with the stop-to-route relation rebuilt
/// from raw trip and stop-time records.
pub fn brute_force_alerts(
    alerts: &[ServiceAlert],
    feed: &StaticFeed,
    target: &AlertTarget,
    now: i64,
) -> Vec<ServiceAlert> {
    let records = feed.to_records();
    let routes_at = |stop: &str| -> BTreeSet<String> {
        let trips: BTreeSet<&str> = records
            .stop_times
            .iter()
            .filter(|st| st.stop_id == stop)
            .map(|st| st.trip_id.as_str())
            .collect();
        records
            .trips
            .iter()
            .filter(|t| trips.contains(t.trip_id.as_str()))
            .map(|t| {
                let p = records
                    .patterns
                    .iter()
                    .find(|p| p.pattern_id == t.pattern_id)
                    .unwrap();
                p.route_id.clone()
            })
            .collect()
    };
    let mut out: Vec<ServiceAlert> = alerts
        .iter()
        .filter(|a| a.active_from <= now && now < a.active_until)
        .filter(|a| match target {
            AlertTarget::All => true,
            AlertTarget::Route(r) => a.affected_route_ids.contains(r),
            AlertTarget::Stop(s) => {
                a.affected_stop_ids.contains(s)
                    || routes_at(s)
                        .iter()
                        .any(|r| a.affected_route_ids.contains(r))
            }
        })
        .cloned()
        .collect();
    let rank = |s: Severity| match s {
        Severity::Severe => 0,
        Severity::Warning => 1,
        Severity::Info => 2,
    };
    out.sort_by_key(|a| (rank(a.severity), a.active_from, a.alert_id.clone()));
    out
}
