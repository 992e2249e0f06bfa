//! Plain-text arrivals for basic browsers and feature phones.

use std::fmt::Write;

use transit_core::{ArrivalEstimate, EstimateSource, ServiceAlert, StaticFeed, Stop};

/// Minutes until `predicted_ts`, rounded half away from zero, never negative.
pub fn minutes_until(predicted_ts: i64, now: i64) -> i64 {
    ((predicted_ts - now) as f64 / 60.0).round().max(0.0) as i64
}

/// ```text
/// STOP <code> <name>
/// <short_name> in <M> min (realtime|sched)
/// ! <severity>: <summary>
/// ```
/// Estimates and alerts are written in the order given.
pub fn render_text_arrivals(
    feed: &StaticFeed,
    stop: &Stop,
    estimates: &[ArrivalEstimate],
    alerts: &[ServiceAlert],
    now: i64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "STOP {} {}", stop.code, stop.name);
    for e in estimates {
        let route = feed
            .route(&e.route_id)
            .map(|r| r.short_name.as_str())
            .unwrap_or(e.route_id.as_str());
        let source = match e.source {
            EstimateSource::Realtime => "realtime",
            EstimateSource::Schedule => "sched",
        };
        let _ = writeln!(
            out,
            "{route} in {} min ({source})",
            minutes_until(e.predicted_ts, now)
        );
    }
    for a in alerts {
        let _ = writeln!(out, "! {}: {}", a.severity.as_str(), a.summary);
    }
    out
}
