//! Arrival estimates per stop, stop direction arrows, and live vehicle
//! positions for route maps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feed::StaticFeed;
use crate::geo::{initial_bearing_deg, GeoPoint};
use crate::tracker::{VehicleState, VehicleStatus};

pub const DEFAULT_HORIZON_S: i64 = 1800;
pub const DEFAULT_LOOKBACK_S: i64 = 300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrivalError {
    #[error("unknown stop {0}")]
    UnknownStop(String),
    #[error("unknown route {0}")]
    UnknownRoute(String),
    #[error("unknown pattern {0}")]
    UnknownPattern(String),
    #[error("stop {stop_id} is not on pattern {pattern_id}")]
    StopNotOnPattern { stop_id: String, pattern_id: String },
    #[error("horizon_s must be positive")]
    InvalidHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    Realtime,
    Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalEstimate {
    pub stop_id: String,
    pub trip_id: String,
    pub route_id: String,
    pub scheduled_ts: i64,
    pub predicted_ts: i64,
    pub deviation_s: i64,
    pub source: EstimateSource,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vehicle_distance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalQuery<'a> {
    pub stop_id: &'a str,
    pub now: i64,
    pub horizon_s: i64,
    pub lookback_s: i64,
    /// Unix time of local midnight for trips without a live vehicle.
    pub service_day_start_ts: i64,
}

/// Scheduled trips at a stop inside `[now - lookback, now + horizon]`,
/// adjusted by the deviation of the vehicle running each trip.
///
/// A live vehicle that has not yet reached the stop yields a realtime
/// estimate; one that has reached or passed it suppresses the trip. Trips
/// with no live vehicle (unassigned, pending first fix, stale, off route)
/// fall back to the schedule.
pub fn predict_arrivals_for_stop(
    feed: &StaticFeed,
    vehicles: &[VehicleState],
    query: &ArrivalQuery<'_>,
) -> Result<Vec<ArrivalEstimate>, ArrivalError> {
    if feed.stop(query.stop_id).is_none() {
        return Err(ArrivalError::UnknownStop(query.stop_id.to_string()));
    }
    if query.horizon_s <= 0 {
        return Err(ArrivalError::InvalidHorizon);
    }
    let window = (query.now - query.lookback_s)..=(query.now + query.horizon_s);

    let mut out = Vec::new();
    for visit in feed.stop_visits(query.stop_id) {
        let pattern = feed
            .pattern(&visit.pattern_id)
            .expect("visit pattern exists");
        let stop_along = pattern.stops[visit.stop_index].along_shape_m;
        for trip in feed.trips_for_pattern(&pattern.pattern_id) {
            let arrival_s = trip.stop_times[visit.stop_index].arrival_s;
            let live = vehicles
                .iter()
                .filter(|v| v.trip_id == trip.trip_id && v.is_live())
                .min_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));

            let estimate = match live {
                Some(v) if v.along_m >= stop_along => continue,
                Some(v) => {
                    let scheduled_ts = v.start_of_day_ts + arrival_s;
                    let deviation_s = v.deviation_s.round() as i64;
                    ArrivalEstimate {
                        stop_id: query.stop_id.to_string(),
                        trip_id: trip.trip_id.clone(),
                        route_id: pattern.route_id.clone(),
                        scheduled_ts,
                        predicted_ts: scheduled_ts + deviation_s,
                        deviation_s,
                        source: EstimateSource::Realtime,
                        vehicle_distance_m: Some(stop_along - v.along_m),
                    }
                }
                None => {
                    let scheduled_ts = query.service_day_start_ts + arrival_s;
                    ArrivalEstimate {
                        stop_id: query.stop_id.to_string(),
                        trip_id: trip.trip_id.clone(),
                        route_id: pattern.route_id.clone(),
                        scheduled_ts,
                        predicted_ts: scheduled_ts,
                        deviation_s: 0,
                        source: EstimateSource::Schedule,
                        vehicle_distance_m: None,
                    }
                }
            };
            if window.contains(&estimate.scheduled_ts) {
                out.push(estimate);
            }
        }
    }
    out.sort_by(|a, b| {
        a.predicted_ts
            .cmp(&b.predicted_ts)
            .then_with(|| a.trip_id.cmp(&b.trip_id))
    });
    Ok(out)
}

/// Bearing of the shape segment under the stop. A stop sitting exactly on a
/// vertex takes the following segment, or the last one at the shape end.
pub fn direction_of_travel_deg(
    feed: &StaticFeed,
    stop_id: &str,
    pattern_id: &str,
) -> Result<f64, ArrivalError> {
    let pattern = feed
        .pattern(pattern_id)
        .ok_or_else(|| ArrivalError::UnknownPattern(pattern_id.to_string()))?;
    let index = pattern
        .stop_index(stop_id)
        .ok_or_else(|| ArrivalError::StopNotOnPattern {
            stop_id: stop_id.to_string(),
            pattern_id: pattern_id.to_string(),
        })?;
    let shape = &pattern.shape;
    let segment = shape.segment_at(pattern.stops[index].along_shape_m);
    let points = shape.points();
    Ok(initial_bearing_deg(points[segment], points[segment + 1])
        .expect("feed shapes have no repeated consecutive points"))
}

/// A vehicle placed on the map at its tracked along-route distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclePosition {
    pub vehicle_id: String,
    pub trip_id: String,
    pub route_id: String,
    #[serde(flatten)]
    pub location: GeoPoint,
    pub along_m: f64,
    pub deviation_s: f64,
    pub last_fix_ts: Option<i64>,
    pub status: VehicleStatus,
}

pub fn vehicle_position(feed: &StaticFeed, state: &VehicleState) -> VehiclePosition {
    let trip = feed.trip(&state.trip_id).expect("assigned trip exists");
    let pattern = feed.trip_pattern(trip);
    let along = state.along_m.clamp(0.0, pattern.shape.length_m());
    VehiclePosition {
        vehicle_id: state.vehicle_id.clone(),
        trip_id: state.trip_id.clone(),
        route_id: pattern.route_id.clone(),
        location: pattern
            .shape
            .point_at_distance(along)
            .expect("clamped distance is on the shape"),
        along_m: state.along_m,
        deviation_s: state.deviation_s,
        last_fix_ts: state.last_fix_ts,
        status: state.status,
    }
}

/// Every vehicle assigned to a trip of the route, ordered by vehicle id.
pub fn vehicles_for_route(
    feed: &StaticFeed,
    vehicles: &[VehicleState],
    route_id: &str,
) -> Result<Vec<VehiclePosition>, ArrivalError> {
    if feed.route(route_id).is_none() {
        return Err(ArrivalError::UnknownRoute(route_id.to_string()));
    }
    let mut out: Vec<VehiclePosition> = vehicles
        .iter()
        .map(|v| vehicle_position(feed, v))
        .filter(|p| p.route_id == route_id)
        .collect();
    out.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));
    Ok(out)
}
