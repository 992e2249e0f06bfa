//! End-to-end walk through every endpoint against the minimal feed.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use reqwest::blocking::Response;
use serde_json::{json, Value};
use transit_core::arrivals::ArrivalQuery;
use transit_core::fixtures::minimal_feed;
use transit_core::sim::{generate_trace, RunSpec};
use transit_core::{predict_arrivals_for_stop, AlertTarget, ArrivalEstimate, ServiceAlert};
use transit_server::ManualClock;

use super::{client, state, BackgroundServer, DAY};

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object()
        .unwrap_or_else(|| panic!("not an object: {v}"))
        .keys()
        .cloned()
        .collect()
}

fn assert_keys(v: &Value, want: &[&str]) {
    let want: BTreeSet<String> = want.iter().map(|s| s.to_string()).collect();
    assert_eq!(keys(v), want, "{v}");
}

fn ok(resp: Response) -> Value {
    let status = resp.status();
    let body = resp.text().unwrap();
    assert!(status.is_success(), "{status}: {body}");
    serde_json::from_str(&body).unwrap_or_else(|e| panic!("invalid JSON ({e}): {body}"))
}

/// Checks the error shape and returns the body.
pub fn err(resp: Response, status: u16, code: &str) -> Value {
    assert_eq!(resp.status().as_u16(), status);
    let body: Value = resp.json().expect("error body is JSON");
    let k = keys(&body);
    assert!(
        k == ["code", "message", "status"].map(String::from).into()
            || k == ["code", "field", "message", "status"]
                .map(String::from)
                .into(),
        "{body}"
    );
    assert_eq!(body["status"], status);
    assert_eq!(body["code"], code, "{body}");
    assert!(!body["message"].as_str().unwrap().is_empty());
    body
}

const STOP_KEYS: [&str; 5] = ["stop_id", "code", "name", "lat", "lon"];
const ALERT_KEYS: [&str; 10] = [
    "alert_id",
    "summary",
    "description",
    "severity",
    "affected_route_ids",
    "affected_stop_ids",
    "active_from",
    "active_until",
    "created_ts",
    "modified_ts",
];
const VEHICLE_STATE_KEYS: [&str; 7] = [
    "vehicle_id",
    "trip_id",
    "start_of_day_ts",
    "along_m",
    "deviation_s",
    "last_fix_ts",
    "status",
];
const VEHICLE_POSITION_KEYS: [&str; 9] = [
    "vehicle_id",
    "trip_id",
    "route_id",
    "lat",
    "lon",
    "along_m",
    "deviation_s",
    "last_fix_ts",
    "status",
];

/// Exercises every endpoint in the table, checking shapes, error bodies and
/// that arrivals equal a direct module call.
pub fn exercise_all_endpoints(dir: &Path) {
    let clock = Arc::new(ManualClock::new(DAY + 10));
    let app = state(minimal_feed(), &dir.join("alerts.json"), clock.clone());
    let server = BackgroundServer::start(app.clone());
    let c = client();
    let get = |path: &str| c.get(server.url(path)).send().unwrap();
    let post = |path: &str, body: Value| c.post(server.url(path)).json(&body).send().unwrap();

    // routes
    let routes = ok(get("/api/routes"));
    assert_keys(&routes, &["routes"]);
    assert_eq!(routes["routes"].as_array().unwrap().len(), 1);
    assert_eq!(
        routes["routes"][0],
        json!({"route_id": "R1", "short_name": "10", "long_name": "Main Street"})
    );
    let route = ok(get("/api/route/R1"));
    assert_keys(&route, &["route", "patterns"]);
    let pattern = &route["patterns"][0];
    assert_keys(
        pattern,
        &["pattern_id", "direction_id", "length_m", "shape", "stops"],
    );
    assert_eq!(pattern["shape"].as_array().unwrap().len(), 2);
    assert_keys(&pattern["shape"][0], &["lat", "lon"]);
    let mut ps_keys = STOP_KEYS.to_vec();
    ps_keys.push("along_shape_m");
    assert_keys(&pattern["stops"][1], &ps_keys);
    err(get("/api/route/R404"), 404, "unknown_route");

    // nearby stops, checked against a linear scan
    let near = ok(get(
        "/api/stops-for-location?lat=45.0045&lon=-73.6&radius_m=600",
    ));
    assert_keys(&near, &["stops"]);
    let mut nk = STOP_KEYS.to_vec();
    nk.push("distance_m");
    let listed: Vec<(String, f64)> = near["stops"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            assert_keys(s, &nk);
            (
                s["stop_id"].as_str().unwrap().to_string(),
                s["distance_m"].as_f64().unwrap(),
            )
        })
        .collect();
    let center = transit_core::GeoPoint {
        lat: 45.0045,
        lon: -73.6,
    };
    let mut brute: Vec<(String, f64)> = app
        .feed
        .stops()
        .map(|s| {
            (
                s.stop_id.clone(),
                transit_core::haversine_m(center, s.location),
            )
        })
        .filter(|(_, d)| *d <= 600.0)
        .collect();
    brute.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    assert_eq!(listed, brute);
    // default radius (500 m) reaches S1 only
    let near = ok(get("/api/stops-for-location?lat=45.0&lon=-73.6"));
    assert_eq!(near["stops"].as_array().unwrap().len(), 1);
    err(
        get("/api/stops-for-location?lon=-73.6"),
        400,
        "invalid_query",
    );
    err(
        get("/api/stops-for-location?lat=north&lon=-73.6"),
        400,
        "invalid_query",
    );
    err(
        get("/api/stops-for-location?lat=95&lon=-73.6"),
        400,
        "invalid_coordinate",
    );
    err(
        get("/api/stops-for-location?lat=45&lon=-73.6&radius_m=-1"),
        400,
        "invalid_query",
    );

    // stop detail with direction of travel (the minimal shape runs due north)
    let stop = ok(get("/api/stop/S1"));
    assert_keys(&stop, &["stop", "patterns"]);
    assert_keys(&stop["stop"], &STOP_KEYS);
    let sp = &stop["patterns"][0];
    assert_keys(
        sp,
        &[
            "pattern_id",
            "route_id",
            "route_short_name",
            "direction_id",
            "stop_index",
            "direction_deg",
        ],
    );
    let deg = sp["direction_deg"].as_f64().unwrap();
    assert!(deg.min(360.0 - deg) < 0.01, "{deg}");
    err(get("/api/stop/unknown"), 404, "unknown_stop");

    // assignment and ingest
    let fix = |ts: i64, north_m: f64, acc: f64| json!({"vehicle_id": "bus1", "ts": ts, "lat": 45.0 + north_m / transit_core::geo::METERS_PER_DEGREE, "lon": -73.6, "accuracy_m": acc});
    err(
        post("/api/vehicle-positions", fix(DAY + 20, 100.0, 5.0)),
        409,
        "unassigned_vehicle",
    );
    err(get("/api/vehicle/bus1"), 404, "unknown_vehicle");
    let assigned = ok(post(
        "/api/vehicle-assignments",
        json!({"vehicle_id": "bus1", "trip_id": "T1", "start_of_day_ts": DAY}),
    ));
    assert_keys(&assigned, &VEHICLE_STATE_KEYS);
    assert_eq!(assigned["last_fix_ts"], Value::Null);
    let e = err(
        post(
            "/api/vehicle-assignments",
            json!({"vehicle_id": "bus2", "trip_id": "T404", "start_of_day_ts": DAY}),
        ),
        422,
        "unknown_trip",
    );
    assert_eq!(e["field"], "trip_id");
    err(
        post("/api/vehicle-assignments", json!({"vehicle_id": "bus2"})),
        400,
        "invalid_body",
    );
    err(
        post(
            "/api/vehicle-assignments",
            json!({"vehicle_id": "b", "trip_id": "T1", "start_of_day_ts": DAY, "x": 1}),
        ),
        400,
        "invalid_body",
    );
    let bad_json = c
        .post(server.url("/api/vehicle-positions"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .unwrap();
    err(bad_json, 400, "invalid_body");

    let accepted = ok(post("/api/vehicle-positions", fix(DAY + 30, 250.0, 5.0)));
    assert_keys(&accepted, &["accepted", "vehicle"]);
    assert_eq!(accepted["accepted"], true);
    assert_keys(&accepted["vehicle"], &VEHICLE_STATE_KEYS);
    let v = ok(get("/api/vehicle/bus1"));
    assert_keys(&v, &VEHICLE_POSITION_KEYS);
    assert!(v["along_m"].as_f64().unwrap() > 0.0);
    assert_eq!(v["last_fix_ts"], DAY + 30);
    assert_eq!(v["status"], "tracking");

    let late = ok(post("/api/vehicle-positions", fix(DAY + 25, 260.0, 5.0)));
    assert_keys(&late, &["accepted", "reason", "vehicle"]);
    assert_eq!(late["reason"], "out_of_order");
    let noisy = ok(post("/api/vehicle-positions", fix(DAY + 40, 300.0, 500.0)));
    assert_eq!(noisy["reason"], "accuracy_too_low");
    assert_eq!(noisy["vehicle"], accepted["vehicle"]);
    err(
        post(
            "/api/vehicle-positions",
            json!({"vehicle_id": "bus1", "ts": DAY + 50, "lat": 95.0, "lon": 0.0, "accuracy_m": 5.0}),
        ),
        400,
        "invalid_fix",
    );

    let vehicles = ok(get("/api/vehicles"));
    assert_keys(&vehicles, &["vehicles"]);
    assert_eq!(vehicles["vehicles"].as_array().unwrap().len(), 1);
    assert_eq!(vehicles["vehicles"][0], v);
    assert_eq!(ok(get("/api/vehicles?route_id=R1"))["vehicles"][0], v);
    err(get("/api/vehicles?route_id=R404"), 404, "unknown_route");

    // alerts
    let draft = json!({
        "summary": "Detour via 5th Ave",
        "severity": "warning",
        "affected_route_ids": ["R1"],
        "active_from": DAY,
        "active_until": DAY + 3600,
    });
    let resp = post("/api/alerts", draft.clone());
    assert_eq!(resp.status().as_u16(), 201);
    let alert = ok(resp);
    assert_keys(&alert, &ALERT_KEYS);
    assert_eq!(alert["alert_id"], "alert-000001");
    assert_eq!(alert["created_ts"], DAY + 10);
    let id = alert["alert_id"].as_str().unwrap().to_string();

    let e = err(
        post(
            "/api/alerts",
            json!({"summary": "", "severity": "info", "active_from": 0, "active_until": 1}),
        ),
        400,
        "validation_failed",
    );
    assert_eq!(e["field"], "summary");
    let e = err(
        post(
            "/api/alerts",
            json!({"summary": "x", "severity": "info", "active_from": 5, "active_until": 1}),
        ),
        400,
        "validation_failed",
    );
    assert_eq!(e["field"], "active_until");
    let e = err(
        post(
            "/api/alerts",
            json!({"summary": "x", "severity": "info", "affected_stop_ids": ["S404"], "active_from": 0, "active_until": 1}),
        ),
        422,
        "unknown_reference",
    );
    assert_eq!(e["field"], "affected_stop_ids");
    err(
        post(
            "/api/alerts",
            json!({"summary": "x", "severity": "dire", "active_from": 0, "active_until": 1}),
        ),
        400,
        "invalid_body",
    );

    assert_eq!(ok(get(&format!("/api/alerts/{id}"))), alert);
    let all = ok(get("/api/alerts"));
    assert_keys(&all, &["alerts"]);
    assert_eq!(all["alerts"], json!([alert]));
    let at_stop = ok(get(&format!("/api/alerts?stop_id=S2&at={}", DAY + 60)));
    assert_eq!(at_stop["alerts"], json!([alert]));
    assert_eq!(
        ok(get(&format!("/api/alerts?route_id=R1&at={}", DAY + 3600)))["alerts"],
        json!([])
    );
    err(
        get("/api/alerts?stop_id=S2&route_id=R1"),
        400,
        "invalid_query",
    );
    err(get("/api/alerts?stop_id=S404"), 404, "unknown_stop");

    clock.set(DAY + 20);
    let mut revised = draft.clone();
    revised["severity"] = json!("severe");
    revised["affected_stop_ids"] = json!(["S2"]);
    let updated = ok(c
        .put(server.url(&format!("/api/alerts/{id}")))
        .json(&revised)
        .send()
        .unwrap());
    assert_eq!(updated["severity"], "severe");
    assert_eq!(updated["created_ts"], DAY + 10);
    assert_eq!(updated["modified_ts"], DAY + 20);
    err(
        c.put(server.url("/api/alerts/alert-999999"))
            .json(&revised)
            .send()
            .unwrap(),
        404,
        "unknown_alert",
    );

    // arrivals equal a direct module call with the same parameters
    for query in [
        "",
        "?now=1704067245",
        "?now=1704067245&horizon_s=60&lookback_s=0",
        "?now=1704070000",
    ] {
        let body = ok(get(&format!(
            "/api/arrivals-and-departures-for-stop/S2{query}"
        )));
        assert_keys(&body, &["stop", "now", "arrivals", "alerts"]);
        let now = body["now"].as_i64().unwrap();
        let horizon_s = if query.contains("horizon_s=60") {
            60
        } else {
            app.defaults.horizon_s
        };
        let lookback_s = if query.contains("lookback_s=0") {
            0
        } else {
            app.defaults.lookback_s
        };
        let direct = predict_arrivals_for_stop(
            &app.feed,
            &app.tracker.snapshot(),
            &ArrivalQuery {
                stop_id: "S2",
                now,
                horizon_s,
                lookback_s,
                service_day_start_ts: DAY,
            },
        )
        .unwrap();
        let served: Vec<ArrivalEstimate> =
            serde_json::from_value(body["arrivals"].clone()).unwrap();
        assert_eq!(served, direct, "{query}");
        let alerts: Vec<ServiceAlert> = serde_json::from_value(body["alerts"].clone()).unwrap();
        assert_eq!(
            alerts,
            app.alerts
                .active_for(&AlertTarget::Stop("S2".into()), now)
                .unwrap()
        );
    }
    let body = ok(get(
        "/api/arrivals-and-departures-for-stop/S2?now=1704067245",
    ));
    assert_eq!(body["now"], 1_704_067_245);
    let arrival = &body["arrivals"][0];
    assert_eq!(arrival["source"], "realtime");
    assert_keys(
        arrival,
        &[
            "stop_id",
            "trip_id",
            "route_id",
            "scheduled_ts",
            "predicted_ts",
            "deviation_s",
            "source",
            "vehicle_distance_m",
        ],
    );
    err(
        get("/api/arrivals-and-departures-for-stop/S404"),
        404,
        "unknown_stop",
    );
    err(
        get("/api/arrivals-and-departures-for-stop/S2?horizon_s=0"),
        400,
        "invalid_query",
    );
    err(
        get("/api/arrivals-and-departures-for-stop/S2?now=soon"),
        400,
        "invalid_query",
    );

    // text page
    let text = get("/text/stop/1002?now=1704067245");
    assert_eq!(text.status().as_u16(), 200);
    assert!(text.headers()["content-type"]
        .to_str()
        .unwrap()
        .starts_with("text/plain"));
    let body = text.text().unwrap();
    assert!(body.starts_with("STOP 1002 Main St & 9th Ave\n"), "{body}");
    assert!(body.ends_with('\n'));
    err(get("/text/stop/9999"), 404, "unknown_stop");

    // routing errors are ApiErrors too
    err(get("/api/nothing"), 404, "not_found");
    err(
        c.delete(server.url("/api/routes")).send().unwrap(),
        405,
        "method_not_allowed",
    );

    // GETs leave state untouched
    let before = (app.tracker.snapshot(), app.alerts.all());
    for path in [
        "/api/routes",
        "/api/route/R1",
        "/api/stop/S2",
        "/api/vehicles",
        "/api/vehicle/bus1",
        "/api/alerts",
        "/api/alerts?stop_id=S1",
        "/api/arrivals-and-departures-for-stop/S1",
        "/api/arrivals-and-departures-for-stop/S2?now=1704070000",
        "/text/stop/1001",
        "/api/stops-for-location?lat=45&lon=-73.6",
    ] {
        let _ = get(path).bytes().unwrap();
    }
    assert_eq!((app.tracker.snapshot(), app.alerts.all()), before);

    // delete
    assert_eq!(
        ok(c.delete(server.url(&format!("/api/alerts/{id}")))
            .send()
            .unwrap()),
        updated
    );
    err(get(&format!("/api/alerts/{id}")), 404, "unknown_alert");
    err(
        c.delete(server.url(&format!("/api/alerts/{id}")))
            .send()
            .unwrap(),
        404,
        "unknown_alert",
    );
    server.stop();
}

/// Alerts created through the API are still there after a restart on the
/// same snapshot file.
pub fn alerts_survive_restart(dir: &Path) {
    let path = dir.join("alerts.json");
    let clock = Arc::new(ManualClock::new(DAY));
    let server = BackgroundServer::start(state(minimal_feed(), &path, clock.clone()));
    let c = client();
    let mut created = Vec::new();
    for (i, severity) in ["info", "severe", "warning"].iter().enumerate() {
        let body = json!({
            "summary": format!("notice {i}"),
            "description": "details",
            "severity": severity,
            "affected_stop_ids": ["S1"],
            "active_from": DAY + i as i64,
            "active_until": DAY + 1000,
        });
        let a: ServiceAlert = c
            .post(server.url("/api/alerts"))
            .json(&body)
            .send()
            .unwrap()
            .json()
            .unwrap();
        created.push(a);
    }
    c.delete(server.url("/api/alerts/alert-000002"))
        .send()
        .unwrap();
    let before: Value = c
        .get(server.url("/api/alerts"))
        .send()
        .unwrap()
        .json()
        .unwrap();
    server.stop();

    let server = BackgroundServer::start(state(minimal_feed(), &path, clock));
    let after: Value = c
        .get(server.url("/api/alerts"))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(after, before);
    assert_eq!(after["alerts"].as_array().unwrap().len(), 2);
    let next: ServiceAlert = c
        .post(server.url("/api/alerts"))
        .json(&json!({"summary": "later", "severity": "info", "active_from": DAY, "active_until": DAY + 1}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(next.alert_id, "alert-000004");
    let at: Value = c
        .get(server.url(&format!("/api/alerts?stop_id=S1&at={}", DAY + 5)))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let ids: Vec<&str> = at["alerts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["alert_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["alert-000003", "alert-000001"]);
    server.stop();
}

pub const GOLDEN_SEED: u64 = 2024;

/// The reference scenario behind the text-page golden file: a bus running
/// 45 s late with 5 m noise reports over HTTP until a minute into its
/// trip, then two alerts are posted and the downstream stop's page fetched.
pub fn golden_scenario_text(dir: &Path) -> String {
    let feed = minimal_feed();
    let mut run = RunSpec::new("T1", "bus7");
    run.depart_offset_s = 45;
    run.noise_sigma_m = 5.0;
    let trace = generate_trace(&feed, &run, 0, GOLDEN_SEED, DAY).unwrap();

    let clock = Arc::new(ManualClock::new(DAY));
    let server = BackgroundServer::start(state(feed, &dir.join("alerts.json"), clock.clone()));
    let c = client();
    c.post(server.url("/api/vehicle-assignments"))
        .json(&json!({"vehicle_id": "bus7", "trip_id": "T1", "start_of_day_ts": DAY}))
        .send()
        .unwrap()
        .error_for_status()
        .unwrap();
    let cutoff = DAY + 45 + 60;
    for e in trace.fixes.iter().filter(|e| e.emit_ts <= cutoff) {
        clock.set(e.emit_ts);
        c.post(server.url("/api/vehicle-positions"))
            .json(&e.fix)
            .send()
            .unwrap()
            .error_for_status()
            .unwrap();
    }
    clock.set(cutoff);
    for body in [
        json!({"summary": "Shelter glass being replaced", "severity": "info", "affected_stop_ids": ["S2"], "active_from": DAY, "active_until": DAY + 7200}),
        json!({"summary": "Detour via 5th Ave after 10 PM", "severity": "warning", "affected_route_ids": ["R1"], "active_from": DAY, "active_until": DAY + 7200}),
        json!({"summary": "Expired notice", "severity": "severe", "affected_route_ids": ["R1"], "active_from": DAY - 100, "active_until": DAY}),
    ] {
        c.post(server.url("/api/alerts"))
            .json(&body)
            .send()
            .unwrap()
            .error_for_status()
            .unwrap();
    }
    let text = c
        .get(server.url("/text/stop/1002"))
        .send()
        .unwrap()
        .text()
        .unwrap();
    server.stop();
    text
}
