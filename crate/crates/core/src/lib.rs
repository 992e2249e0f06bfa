//! Core of the transit tracking service: the static feed model, geodesy
//! and stop index, the vehicle tracker, arrival prediction, service alerts
//! and the GPS trace simulator.

pub mod alerts;
pub mod arrivals;
pub mod feed;
pub mod fixtures;
pub mod geo;
pub mod sim;
pub mod tracker;

pub use alerts::{AlertDraft, AlertError, AlertStore, AlertTarget, ServiceAlert, Severity};
pub use arrivals::{
    direction_of_travel_deg, predict_arrivals_for_stop, vehicles_for_route, ArrivalError,
    ArrivalEstimate, ArrivalQuery, EstimateSource, VehiclePosition,
};
pub use feed::{load_feed, FeedError, Route, RoutePattern, StaticFeed, Stop, Trip};
pub use geo::{
    haversine_m, initial_bearing_deg, GeoError, GeoPoint, GridIndex, Polyline, Projection,
};
pub use tracker::{
    GpsFix, IngestResult, RejectReason, Tracker, TrackerConfig, TrackerError, VehicleState,
    VehicleStatus,
};
