use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use transit_core::arrivals::{vehicle_position, ArrivalQuery};
use transit_core::tracker::RejectReason;
use transit_core::{
    direction_of_travel_deg, predict_arrivals_for_stop, AlertDraft, AlertTarget, ArrivalEstimate,
    GeoPoint, GpsFix, IngestResult, Route, ServiceAlert, Stop, VehiclePosition, VehicleState,
};

use crate::error::ApiError;
use crate::state::AppState;
use crate::text::render_text_arrivals;

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/stops-for-location", get(stops_for_location))
        .route("/api/stop/{stop_id}", get(stop_detail))
        .route(
            "/api/arrivals-and-departures-for-stop/{stop_id}",
            get(arrivals_for_stop),
        )
        .route("/api/routes", get(list_routes))
        .route("/api/route/{route_id}", get(route_detail))
        .route("/api/vehicles", get(list_vehicles))
        .route("/api/vehicle/{vehicle_id}", get(vehicle_detail))
        .route("/api/vehicle-positions", post(post_position))
        .route("/api/vehicle-assignments", post(post_assignment))
        .route("/api/alerts", get(list_alerts).post(create_alert))
        .route(
            "/api/alerts/{alert_id}",
            put(update_alert).delete(delete_alert).get(get_alert),
        )
        .route("/text/stop/{code}", get(text_stop))
        .fallback(|| async { ApiError::not_found("not_found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(
                StatusCode::METHOD_NOT_ALLOWED,
                "method_not_allowed",
                "method not allowed for this endpoint",
            )
        })
        .with_state(state)
}

/// `Query` whose failures come back as an [`ApiError`].
pub struct ApiQuery<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| ApiQuery(v))
            .map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))
    }
}

/// `Json` whose failures come back as an [`ApiError`].
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|e| ApiError::bad_request("invalid_body", e.body_text()))
    }
}

#[derive(Debug, Deserialize)]
pub struct LocationParams {
    pub lat: f64,
    pub lon: f64,
    pub radius_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearbyStop {
    #[serde(flatten)]
    pub stop: Stop,
    pub distance_m: f64,
}

#[derive(Debug, Serialize)]
pub struct StopsResponse {
    pub stops: Vec<NearbyStop>,
}

async fn stops_for_location(
    State(app): Shared,
    ApiQuery(q): ApiQuery<LocationParams>,
) -> ApiResult<StopsResponse> {
    let center = GeoPoint::new(q.lat, q.lon)?;
    let radius = q.radius_m.unwrap_or(app.defaults.default_radius_m);
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(
            ApiError::bad_request("invalid_query", "radius_m must be non-negative")
                .with_field("radius_m"),
        );
    }
    let stops = app
        .index
        .stops_near(center, radius)
        .into_iter()
        .map(|(id, distance_m)| NearbyStop {
            stop: app.feed.stop(&id).expect("indexed stop exists").clone(),
            distance_m,
        })
        .collect();
    Ok(Json(StopsResponse { stops }))
}

#[derive(Debug, Serialize)]
pub struct StopPattern {
    pub pattern_id: String,
    pub route_id: String,
    pub route_short_name: String,
    pub direction_id: u8,
    pub stop_index: usize,
    pub direction_deg: f64,
}

#[derive(Debug, Serialize)]
pub struct StopDetail {
    pub stop: Stop,
    pub patterns: Vec<StopPattern>,
}

fn find_stop<'a>(app: &'a AppState, stop_id: &str) -> Result<&'a Stop, ApiError> {
    app.feed
        .stop(stop_id)
        .ok_or_else(|| ApiError::not_found("unknown_stop", format!("unknown stop {stop_id}")))
}

async fn stop_detail(State(app): Shared, Path(stop_id): Path<String>) -> ApiResult<StopDetail> {
    let stop = find_stop(&app, &stop_id)?.clone();
    let mut patterns = Vec::new();
    for visit in app.feed.stop_visits(&stop_id) {
        let pattern = app
            .feed
            .pattern(&visit.pattern_id)
            .expect("visit pattern exists");
        let route = app
            .feed
            .route(&pattern.route_id)
            .expect("pattern route exists");
        patterns.push(StopPattern {
            pattern_id: pattern.pattern_id.clone(),
            route_id: route.route_id.clone(),
            route_short_name: route.short_name.clone(),
            direction_id: pattern.direction_id,
            stop_index: visit.stop_index,
            direction_deg: direction_of_travel_deg(&app.feed, &stop_id, &pattern.pattern_id)?,
        });
    }
    Ok(Json(StopDetail { stop, patterns }))
}

#[derive(Debug, Default, Deserialize)]
pub struct ArrivalParams {
    pub now: Option<i64>,
    pub horizon_s: Option<i64>,
    pub lookback_s: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalsResponse {
    pub stop: Stop,
    pub now: i64,
    pub arrivals: Vec<ArrivalEstimate>,
    pub alerts: Vec<ServiceAlert>,
}

/// Arrivals plus the stop's active alerts, exactly as the core modules
/// compute them for the same parameters.
pub fn arrivals_response(
    app: &AppState,
    stop_id: &str,
    params: &ArrivalParams,
) -> Result<ArrivalsResponse, ApiError> {
    let stop = find_stop(app, stop_id)?.clone();
    let now = params.now.unwrap_or_else(|| app.now());
    let lookback_s = params.lookback_s.unwrap_or(app.defaults.lookback_s);
    if lookback_s < 0 {
        return Err(
            ApiError::bad_request("invalid_query", "lookback_s must be non-negative")
                .with_field("lookback_s"),
        );
    }
    let query = ArrivalQuery {
        stop_id,
        now,
        horizon_s: params.horizon_s.unwrap_or(app.defaults.horizon_s),
        lookback_s,
        service_day_start_ts: app.service_day_start(now),
    };
    let arrivals = predict_arrivals_for_stop(&app.feed, &app.tracker.snapshot(), &query)?;
    let alerts = app
        .alerts
        .active_for(&AlertTarget::Stop(stop_id.to_string()), now)?;
    Ok(ArrivalsResponse {
        stop,
        now,
        arrivals,
        alerts,
    })
}

async fn arrivals_for_stop(
    State(app): Shared,
    Path(stop_id): Path<String>,
    ApiQuery(params): ApiQuery<ArrivalParams>,
) -> ApiResult<ArrivalsResponse> {
    arrivals_response(&app, &stop_id, &params).map(Json)
}

#[derive(Debug, Serialize)]
pub struct RoutesResponse {
    pub routes: Vec<Route>,
}

async fn list_routes(State(app): Shared) -> Json<RoutesResponse> {
    Json(RoutesResponse {
        routes: app.feed.routes().cloned().collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct PatternStopView {
    #[serde(flatten)]
    pub stop: Stop,
    pub along_shape_m: f64,
}

#[derive(Debug, Serialize)]
pub struct PatternView {
    pub pattern_id: String,
    pub direction_id: u8,
    pub length_m: f64,
    pub shape: Vec<GeoPoint>,
    pub stops: Vec<PatternStopView>,
}

#[derive(Debug, Serialize)]
pub struct RouteDetail {
    pub route: Route,
    pub patterns: Vec<PatternView>,
}

async fn route_detail(State(app): Shared, Path(route_id): Path<String>) -> ApiResult<RouteDetail> {
    let route = app
        .feed
        .route(&route_id)
        .ok_or_else(|| ApiError::not_found("unknown_route", format!("unknown route {route_id}")))?
        .clone();
    let patterns = app
        .feed
        .patterns_for_route(&route_id)
        .map(|p| PatternView {
            pattern_id: p.pattern_id.clone(),
            direction_id: p.direction_id,
            length_m: p.shape.length_m(),
            shape: p.shape.points().to_vec(),
            stops: p
                .stops
                .iter()
                .map(|ps| PatternStopView {
                    stop: app
                        .feed
                        .stop(&ps.stop_id)
                        .expect("pattern stop exists")
                        .clone(),
                    along_shape_m: ps.along_shape_m,
                })
                .collect(),
        })
        .collect();
    Ok(Json(RouteDetail { route, patterns }))
}

#[derive(Debug, Deserialize)]
pub struct VehicleParams {
    pub route_id: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct VehiclesResponse {
    pub vehicles: Vec<VehiclePosition>,
}

async fn list_vehicles(
    State(app): Shared,
    ApiQuery(params): ApiQuery<VehicleParams>,
) -> ApiResult<VehiclesResponse> {
    let snapshot = app.tracker.snapshot();
    let vehicles = match params.route_id {
        Some(route_id) => transit_core::vehicles_for_route(&app.feed, &snapshot, &route_id)?,
        None => {
            let mut all = Vec::new();
            for route in app.feed.routes() {
                all.extend(transit_core::vehicles_for_route(
                    &app.feed,
                    &snapshot,
                    &route.route_id,
                )?);
            }
            all.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));
            all
        }
    };
    Ok(Json(VehiclesResponse { vehicles }))
}

async fn vehicle_detail(
    State(app): Shared,
    Path(vehicle_id): Path<String>,
) -> ApiResult<VehiclePosition> {
    let state = app.tracker.vehicle(&vehicle_id).ok_or_else(|| {
        ApiError::not_found("unknown_vehicle", format!("unknown vehicle {vehicle_id}"))
    })?;
    Ok(Json(vehicle_position(&app.feed, &state)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
    pub vehicle: VehicleState,
}

async fn post_position(
    State(app): Shared,
    ApiJson(fix): ApiJson<GpsFix>,
) -> ApiResult<IngestResponse> {
    let response = match app.tracker.ingest_fix(&fix)? {
        IngestResult::Accepted(vehicle) => IngestResponse {
            accepted: true,
            reason: None,
            vehicle,
        },
        IngestResult::Rejected(reason) => IngestResponse {
            accepted: false,
            reason: Some(reason),
            vehicle: app
                .tracker
                .vehicle(&fix.vehicle_id)
                .expect("vehicle that rejected a fix exists"),
        },
    };
    Ok(Json(response))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub vehicle_id: String,
    pub trip_id: String,
    pub start_of_day_ts: i64,
}

async fn post_assignment(
    State(app): Shared,
    ApiJson(a): ApiJson<Assignment>,
) -> ApiResult<VehicleState> {
    if a.vehicle_id.trim().is_empty() {
        return Err(
            ApiError::bad_request("invalid_body", "vehicle_id must not be empty")
                .with_field("vehicle_id"),
        );
    }
    Ok(Json(app.tracker.assign_trip(
        &a.vehicle_id,
        &a.trip_id,
        a.start_of_day_ts,
    )?))
}

#[derive(Debug, Deserialize)]
pub struct AlertParams {
    pub stop_id: Option<String>,
    pub route_id: Option<String>,
    pub at: Option<i64>,
}

#[derive(Debug, Serialize)]
pub struct AlertsResponse {
    pub alerts: Vec<ServiceAlert>,
}

/// Without parameters: every stored alert (the admin list). With `stop_id`,
/// `route_id` or `at`: alerts active at `at` (default now) for the target.
async fn list_alerts(
    State(app): Shared,
    ApiQuery(p): ApiQuery<AlertParams>,
) -> ApiResult<AlertsResponse> {
    let target = match (p.stop_id, p.route_id) {
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request(
                "invalid_query",
                "give at most one of stop_id and route_id",
            ))
        }
        (Some(stop), None) => Some(AlertTarget::Stop(stop)),
        (None, Some(route)) => Some(AlertTarget::Route(route)),
        (None, None) => None,
    };
    let alerts = match (target, p.at) {
        (None, None) => app.alerts.all(),
        (target, at) => app.alerts.active_for(
            &target.unwrap_or(AlertTarget::All),
            at.unwrap_or_else(|| app.now()),
        )?,
    };
    Ok(Json(AlertsResponse { alerts }))
}

async fn get_alert(State(app): Shared, Path(alert_id): Path<String>) -> ApiResult<ServiceAlert> {
    app.alerts
        .get(&alert_id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("unknown_alert", format!("unknown alert {alert_id}")))
}

async fn create_alert(
    State(app): Shared,
    ApiJson(draft): ApiJson<AlertDraft>,
) -> Result<(StatusCode, Json<ServiceAlert>), ApiError> {
    let alert = app.alerts.create(draft, app.now())?;
    Ok((StatusCode::CREATED, Json(alert)))
}

async fn update_alert(
    State(app): Shared,
    Path(alert_id): Path<String>,
    ApiJson(draft): ApiJson<AlertDraft>,
) -> ApiResult<ServiceAlert> {
    Ok(Json(app.alerts.update(&alert_id, draft, app.now())?))
}

async fn delete_alert(State(app): Shared, Path(alert_id): Path<String>) -> ApiResult<ServiceAlert> {
    Ok(Json(app.alerts.delete(&alert_id)?))
}

#[derive(Debug, Deserialize)]
pub struct TextParams {
    pub now: Option<i64>,
}

async fn text_stop(
    State(app): Shared,
    Path(code): Path<String>,
    ApiQuery(p): ApiQuery<TextParams>,
) -> Result<Response, ApiError> {
    let stop = app
        .feed
        .stop_by_code(&code)
        .ok_or_else(|| ApiError::not_found("unknown_stop", format!("unknown stop code {code}")))?;
    let params = ArrivalParams {
        now: p.now,
        ..ArrivalParams::default()
    };
    let r = arrivals_response(&app, &stop.stop_id, &params)?;
    let body = render_text_arrivals(&app.feed, stop, &r.arrivals, &r.alerts, r.now);
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body).into_response())
}
