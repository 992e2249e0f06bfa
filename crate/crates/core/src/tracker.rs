//! Per-vehicle state maintained from a stream of GPS fixes.
//!
//! Each fix is gated on reported accuracy and timestamp order, snapped onto
//! the assigned trip's shape, smoothed, and turned into a schedule deviation.
//! Smoothing blends the snapped position with a prior obtained by running
//! the previous state forward along the (deviation-shifted) schedule, so a
//! vehicle that keeps a constant deviation is tracked without lag.

use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feed::{RoutePattern, StaticFeed, Trip};
use crate::geo::GeoPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("unknown trip {0}")]
    UnknownTrip(String),
    #[error("vehicle {0} has no assigned trip")]
    UnassignedVehicle(String),
    #[error("invalid fix: {0}")]
    InvalidFix(String),
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub max_accuracy_m: f64,
    pub corridor_m: f64,
    pub regression_clamp_m: f64,
    pub smoothing_alpha: f64,
    pub stale_after_s: i64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            max_accuracy_m: 100.0,
            corridor_m: 250.0,
            regression_clamp_m: 30.0,
            smoothing_alpha: 0.5,
            stale_after_s: 90,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let positive = [
            ("max_accuracy_m", self.max_accuracy_m),
            ("corridor_m", self.corridor_m),
            ("regression_clamp_m", self.regression_clamp_m),
            ("smoothing_alpha", self.smoothing_alpha),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(TrackerError::InvalidConfig(format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.smoothing_alpha > 1.0 {
            return Err(TrackerError::InvalidConfig(
                "smoothing_alpha must be in (0, 1]".into(),
            ));
        }
        if self.stale_after_s <= 0 {
            return Err(TrackerError::InvalidConfig(
                "stale_after_s must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One position report. Serializes flat: `vehicle_id, ts, lat, lon, accuracy_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub vehicle_id: String,
    pub ts: i64,
    #[serde(flatten)]
    pub location: GeoPoint,
    pub accuracy_m: f64,
}

impl GpsFix {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.ts <= 0 {
            return Err(TrackerError::InvalidFix("ts must be positive".into()));
        }
        if !(self.accuracy_m.is_finite() && self.accuracy_m > 0.0) {
            return Err(TrackerError::InvalidFix(
                "accuracy_m must be positive".into(),
            ));
        }
        GeoPoint::new(self.location.lat, self.location.lon)
            .map_err(|e| TrackerError::InvalidFix(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleStatus {
    Tracking,
    Stale,
    OffRoute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub vehicle_id: String,
    pub trip_id: String,
    pub start_of_day_ts: i64,
    pub along_m: f64,
    pub deviation_s: f64,
    /// Timestamp of the last fix that passed gating; `None` until the first.
    pub last_fix_ts: Option<i64>,
    pub status: VehicleStatus,
}

impl VehicleState {
    /// True once an on-route fix has placed the vehicle on its shape and it
    /// is neither stale nor off route.
    pub fn is_live(&self) -> bool {
        self.status == VehicleStatus::Tracking && self.last_fix_ts.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    AccuracyTooLow,
    OutOfOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestResult {
    Accepted(VehicleState),
    Rejected(RejectReason),
}

#[derive(Debug, Clone)]
struct Tracked {
    state: VehicleState,
    /// Set by the first on-route fix; until then `along_m` is not a position.
    positioned: bool,
}

/// Concurrent vehicle state store bound to one static feed.
///
/// The map of vehicles sits behind a read-write lock; each vehicle has its
/// own mutex, so fixes for different vehicles proceed in parallel while
/// fixes for one vehicle are applied one at a time.
#[derive(Debug)]
pub struct Tracker {
    feed: Arc<StaticFeed>,
    config: TrackerConfig,
    vehicles: RwLock<BTreeMap<String, Arc<Mutex<Tracked>>>>,
}

impl Tracker {
    pub fn new(feed: Arc<StaticFeed>, config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Tracker {
            feed,
            config,
            vehicles: RwLock::new(BTreeMap::new()),
        })
    }

    pub fn feed(&self) -> &Arc<StaticFeed> {
        &self.feed
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Creates or replaces the vehicle's state for a new trip.
    pub fn assign_trip(
        &self,
        vehicle_id: &str,
        trip_id: &str,
        start_of_day_ts: i64,
    ) -> Result<VehicleState, TrackerError> {
        if self.feed.trip(trip_id).is_none() {
            return Err(TrackerError::UnknownTrip(trip_id.to_string()));
        }
        let state = VehicleState {
            vehicle_id: vehicle_id.to_string(),
            trip_id: trip_id.to_string(),
            start_of_day_ts,
            along_m: 0.0,
            deviation_s: 0.0,
            last_fix_ts: None,
            status: VehicleStatus::Tracking,
        };
        let tracked = Arc::new(Mutex::new(Tracked {
            state: state.clone(),
            positioned: false,
        }));
        self.vehicles
            .write()
            .insert(vehicle_id.to_string(), tracked);
        Ok(state)
    }

    pub fn ingest_fix(&self, fix: &GpsFix) -> Result<IngestResult, TrackerError> {
        fix.validate()?;
        let entry = self
            .vehicles
            .read()
            .get(&fix.vehicle_id)
            .cloned()
            .ok_or_else(|| TrackerError::UnassignedVehicle(fix.vehicle_id.clone()))?;
        let mut tracked = entry.lock();
        Ok(apply_fix(&self.feed, &self.config, &mut tracked, fix))
    }

    /// Applies fixes in slice order; identical to calling `ingest_fix` on each.
    pub fn ingest_batch(&self, fixes: &[GpsFix]) -> Result<Vec<IngestResult>, TrackerError> {
        fixes.iter().map(|f| self.ingest_fix(f)).collect()
    }

    /// Marks vehicles whose last fix is older than `stale_after_s`.
    /// Returns how many changed to stale in this sweep.
    pub fn sweep_stale(&self, now: i64) -> usize {
        let entries: Vec<_> = self.vehicles.read().values().cloned().collect();
        let mut marked = 0;
        for entry in entries {
            let mut tracked = entry.lock();
            let Some(last) = tracked.state.last_fix_ts else {
                continue;
            };
            if now - last > self.config.stale_after_s
                && tracked.state.status != VehicleStatus::Stale
            {
                tracked.state.status = VehicleStatus::Stale;
                marked += 1;
            }
        }
        marked
    }

    pub fn vehicle(&self, vehicle_id: &str) -> Option<VehicleState> {
        let entry = self.vehicles.read().get(vehicle_id).cloned()?;
        let state = entry.lock().state.clone();
        Some(state)
    }

    /// Consistent copy of every vehicle, ordered by vehicle id.
    pub fn snapshot(&self) -> Vec<VehicleState> {
        let entries: Vec<_> = self.vehicles.read().values().cloned().collect();
        entries.iter().map(|e| e.lock().state.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.vehicles.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.read().is_empty()
    }
}

fn apply_fix(
    feed: &StaticFeed,
    config: &TrackerConfig,
    tracked: &mut Tracked,
    fix: &GpsFix,
) -> IngestResult {
    if fix.accuracy_m > config.max_accuracy_m {
        return IngestResult::Rejected(RejectReason::AccuracyTooLow);
    }
    if matches!(tracked.state.last_fix_ts, Some(last) if fix.ts <= last) {
        return IngestResult::Rejected(RejectReason::OutOfOrder);
    }

    let trip = feed
        .trip(&tracked.state.trip_id)
        .expect("assigned trip exists in the feed");
    let pattern = feed.trip_pattern(trip);
    let projection = pattern.shape.project(fix.location);
    let state = &mut tracked.state;
    state.last_fix_ts = Some(fix.ts);

    if projection.offset_m > config.corridor_m {
        state.status = VehicleStatus::OffRoute;
        return IngestResult::Accepted(state.clone());
    }

    let elapsed_s = (fix.ts - state.start_of_day_ts) as f64;
    if tracked.positioned {
        let previous = state.along_m;
        let candidate = projection
            .along_m
            .max(previous - config.regression_clamp_m)
            .max(previous);
        let prior = distance_at_scheduled_time(trip, pattern, elapsed_s - state.deviation_s)
            .clamp(previous, pattern.shape.length_m());
        let alpha = config.smoothing_alpha;
        state.along_m = (alpha * candidate + (1.0 - alpha) * prior).max(previous);
    } else {
        state.along_m = projection.along_m;
        tracked.positioned = true;
    }
    state.deviation_s = elapsed_s - scheduled_time_at_distance(trip, pattern, state.along_m);
    state.status = VehicleStatus::Tracking;
    IngestResult::Accepted(state.clone())
}

/// Scheduled seconds-after-midnight at along-shape distance `d`, linearly
/// interpolated between stops and clamped to the first/last stop times.
pub fn scheduled_time_at_distance(trip: &Trip, pattern: &RoutePattern, d: f64) -> f64 {
    let knots = pattern
        .stops
        .iter()
        .zip(&trip.stop_times)
        .map(|(ps, st)| (ps.along_shape_m, st.arrival_s as f64));
    interpolate(knots, d)
}

/// Inverse of [`scheduled_time_at_distance`]: where the schedule puts the
/// vehicle at `t` seconds after midnight.
pub fn distance_at_scheduled_time(trip: &Trip, pattern: &RoutePattern, t: f64) -> f64 {
    let knots = trip
        .stop_times
        .iter()
        .zip(&pattern.stops)
        .map(|(st, ps)| (st.arrival_s as f64, ps.along_shape_m));
    interpolate(knots, t)
}

/// Piecewise-linear lookup over knots with strictly increasing x, clamped
/// at both ends.
fn interpolate(knots: impl Iterator<Item = (f64, f64)>, x: f64) -> f64 {
    let mut prev: Option<(f64, f64)> = None;
    for (kx, ky) in knots {
        match prev {
            None if x <= kx => return ky,
            Some((px, py)) if x <= kx => {
                return py + (ky - py) * (x - px) / (kx - px);
            }
            _ => prev = Some((kx, ky)),
        }
    }
    prev.map(|(_, y)| y).unwrap_or(0.0)
}
