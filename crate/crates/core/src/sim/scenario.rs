//! Replays generated traces against a tracking target and scores the
//! arrival predictions it serves against ground truth.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrivals::{
    predict_arrivals_for_stop, ArrivalEstimate, ArrivalQuery, EstimateSource, DEFAULT_HORIZON_S,
    DEFAULT_LOOKBACK_S,
};
use crate::feed::StaticFeed;
use crate::tracker::{GpsFix, IngestResult, RejectReason, Tracker, VehicleStatus};

use super::{generate_scenario, merged_emissions, ScenarioSpec, SimError, Trace};

/// Number of accepted fixes after which predictions are expected to have
/// converged on the true lateness.
pub const WARMUP_FIXES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("target unreachable: {0}")]
    Unreachable(String),
    #[error("target refused request: {0}")]
    Refused(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixOutcome {
    Accepted {
        along_m: f64,
        deviation_s: f64,
        status: VehicleStatus,
    },
    Rejected(RejectReason),
}

/// Anything that can take assignments and fixes and answer arrival queries:
/// the in-process tracker, or a running service over HTTP.
pub trait ScenarioTarget {
    fn assign(
        &mut self,
        vehicle_id: &str,
        trip_id: &str,
        start_of_day_ts: i64,
    ) -> Result<(), TargetError>;
    fn ingest(&mut self, fix: &GpsFix) -> Result<FixOutcome, TargetError>;
    fn arrivals(&mut self, stop_id: &str, now: i64) -> Result<Vec<ArrivalEstimate>, TargetError>;
}

pub struct InProcessTarget<'a> {
    tracker: &'a Tracker,
    service_day_start_ts: i64,
    pub horizon_s: i64,
    pub lookback_s: i64,
}

impl<'a> InProcessTarget<'a> {
    pub fn new(tracker: &'a Tracker, service_day_start_ts: i64) -> Self {
        InProcessTarget {
            tracker,
            service_day_start_ts,
            horizon_s: DEFAULT_HORIZON_S,
            lookback_s: DEFAULT_LOOKBACK_S,
        }
    }
}

impl ScenarioTarget for InProcessTarget<'_> {
    fn assign(
        &mut self,
        vehicle_id: &str,
        trip_id: &str,
        start_of_day_ts: i64,
    ) -> Result<(), TargetError> {
        self.tracker
            .assign_trip(vehicle_id, trip_id, start_of_day_ts)
            .map(|_| ())
            .map_err(|e| TargetError::Refused(e.to_string()))
    }

    fn ingest(&mut self, fix: &GpsFix) -> Result<FixOutcome, TargetError> {
        match self.tracker.ingest_fix(fix) {
            Ok(IngestResult::Accepted(s)) => Ok(FixOutcome::Accepted {
                along_m: s.along_m,
                deviation_s: s.deviation_s,
                status: s.status,
            }),
            Ok(IngestResult::Rejected(r)) => Ok(FixOutcome::Rejected(r)),
            Err(e) => Err(TargetError::Refused(e.to_string())),
        }
    }

    fn arrivals(&mut self, stop_id: &str, now: i64) -> Result<Vec<ArrivalEstimate>, TargetError> {
        // the live service sweeps periodically; do the same at query time
        self.tracker.sweep_stale(now);
        let vehicles = self.tracker.snapshot();
        predict_arrivals_for_stop(
            self.tracker.feed(),
            &vehicles,
            &ArrivalQuery {
                stop_id,
                now,
                horizon_s: self.horizon_s,
                lookback_s: self.lookback_s,
                service_day_start_ts: self.service_day_start_ts,
            },
        )
        .map_err(|e| TargetError::Refused(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Timestamps are computed, never slept on.
    Simulated,
    /// Sleep between emissions so the stream plays out in wall-clock time.
    Realtime,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub accuracy_too_low: usize,
    pub out_of_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopReport {
    pub stop_id: String,
    pub scheduled_ts: i64,
    pub true_arrival_ts: i64,
    pub queries: usize,
    pub realtime_queries: usize,
    /// Queries where the target returned no estimate for the trip.
    pub missing: usize,
    /// Largest |predicted − true| seen over all queries.
    pub max_abs_error_s: Option<i64>,
    /// Same, restricted to queries made after the warm-up fixes.
    pub max_abs_error_after_warmup_s: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub trip_id: String,
    pub vehicle_id: String,
    pub ticks: usize,
    pub emitted: usize,
    pub reordered: usize,
    pub accepted: usize,
    pub off_route: usize,
    pub rejections: RejectionCounts,
    /// Fixes that reached the target after a fix with a later timestamp.
    pub late_fixes: usize,
    pub late_fixes_rejected: usize,
    pub along_monotone: bool,
    pub max_deviation_jump_s: f64,
    pub final_along_m: Option<f64>,
    pub final_deviation_s: Option<f64>,
    pub stops: Vec<StopReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub completed: bool,
    pub failure: Option<String>,
    pub runs: Vec<RunReport>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct RunProgress {
    report: RunReport,
    max_emitted_ts: Option<i64>,
    last_accepted: Option<(f64, f64)>,
}

impl RunProgress {
    fn new(trace: &Trace) -> Self {
        RunProgress {
            report: RunReport {
                trip_id: trace.truth.trip_id.clone(),
                vehicle_id: trace.truth.vehicle_id.clone(),
                ticks: trace.truth.samples.len(),
                emitted: trace.fixes.len(),
                reordered: trace.fixes.iter().filter(|f| f.reordered).count(),
                accepted: 0,
                off_route: 0,
                rejections: RejectionCounts::default(),
                late_fixes: 0,
                late_fixes_rejected: 0,
                along_monotone: true,
                max_deviation_jump_s: 0.0,
                final_along_m: None,
                final_deviation_s: None,
                stops: trace
                    .truth
                    .stop_arrivals
                    .iter()
                    .map(|s| StopReport {
                        stop_id: s.stop_id.clone(),
                        scheduled_ts: s.scheduled_ts,
                        true_arrival_ts: s.arrival_ts,
                        queries: 0,
                        realtime_queries: 0,
                        missing: 0,
                        max_abs_error_s: None,
                        max_abs_error_after_warmup_s: None,
                    })
                    .collect(),
            },
            max_emitted_ts: None,
            last_accepted: None,
        }
    }

    fn record_fix(&mut self, fix_ts: i64, outcome: &FixOutcome) {
        let late = self.max_emitted_ts.is_some_and(|m| fix_ts < m);
        self.max_emitted_ts = Some(self.max_emitted_ts.map_or(fix_ts, |m| m.max(fix_ts)));
        let r = &mut self.report;
        if late {
            r.late_fixes += 1;
        }
        match outcome {
            FixOutcome::Rejected(reason) => {
                if late {
                    r.late_fixes_rejected += 1;
                }
                match reason {
                    RejectReason::AccuracyTooLow => r.rejections.accuracy_too_low += 1,
                    RejectReason::OutOfOrder => r.rejections.out_of_order += 1,
                }
            }
            FixOutcome::Accepted { status, .. } if *status != VehicleStatus::Tracking => {
                r.off_route += 1;
            }
            FixOutcome::Accepted {
                along_m,
                deviation_s,
                ..
            } => {
                r.accepted += 1;
                if let Some((prev_along, prev_dev)) = self.last_accepted {
                    if *along_m < prev_along {
                        r.along_monotone = false;
                    }
                    r.max_deviation_jump_s =
                        r.max_deviation_jump_s.max((deviation_s - prev_dev).abs());
                }
                self.last_accepted = Some((*along_m, *deviation_s));
                r.final_along_m = Some(*along_m);
                r.final_deviation_s = Some(*deviation_s);
            }
        }
    }

    fn record_estimate(&mut self, stop_index: usize, estimate: Option<&ArrivalEstimate>) {
        let warmed_up = self.report.accepted >= WARMUP_FIXES;
        let stop = &mut self.report.stops[stop_index];
        stop.queries += 1;
        let Some(e) = estimate else {
            stop.missing += 1;
            return;
        };
        if e.source == EstimateSource::Realtime {
            stop.realtime_queries += 1;
        }
        let err = (e.predicted_ts - stop.true_arrival_ts).abs();
        stop.max_abs_error_s = Some(stop.max_abs_error_s.map_or(err, |m| m.max(err)));
        if warmed_up {
            stop.max_abs_error_after_warmup_s = Some(
                stop.max_abs_error_after_warmup_s
                    .map_or(err, |m| m.max(err)),
            );
        }
    }
}

/// Assigns every run, replays the merged fix stream, and after each fix asks
/// the target for arrivals at every stop the vehicle has not yet reached.
///
/// Failing to assign is `TargetUnreachable`; a failure mid-replay returns
/// the partial report with `completed = false`.
pub fn run_scenario(
    feed: &StaticFeed,
    spec: &ScenarioSpec,
    target: &mut dyn ScenarioTarget,
    pacing: Pacing,
) -> Result<ScenarioReport, SimError> {
    let traces = generate_scenario(feed, spec)?;
    for run in &spec.runs {
        target
            .assign(&run.vehicle_id, &run.trip_id, spec.service_day_start_ts)
            .map_err(|e| SimError::TargetUnreachable(e.to_string()))?;
    }

    let mut progress: Vec<RunProgress> = traces.iter().map(RunProgress::new).collect();
    let mut failure = None;
    let mut clock: Option<i64> = None;

    'replay: for (run_index, emitted) in merged_emissions(&traces) {
        let now = emitted.emit_ts;
        if pacing == Pacing::Realtime {
            if let Some(prev) = clock {
                let wait = (now - prev).max(0) as u64;
                std::thread::sleep(Duration::from_secs(wait));
            }
        }
        clock = Some(now);

        let outcome = match target.ingest(&emitted.fix) {
            Ok(o) => o,
            Err(e) => {
                failure = Some(e.to_string());
                break 'replay;
            }
        };
        progress[run_index].record_fix(emitted.fix.ts, &outcome);

        let truth = &traces[run_index].truth;
        for stop in truth.stop_arrivals.iter().filter(|s| s.arrival_ts > now) {
            let estimates = match target.arrivals(&stop.stop_id, now) {
                Ok(list) => list,
                Err(e) => {
                    failure = Some(e.to_string());
                    break 'replay;
                }
            };
            let mine = estimates
                .iter()
                .find(|e| e.trip_id == truth.trip_id && e.scheduled_ts == stop.scheduled_ts);
            progress[run_index].record_estimate(stop.stop_index, mine);
        }
    }

    Ok(ScenarioReport {
        seed: spec.seed,
        completed: failure.is_none(),
        failure,
        runs: progress.into_iter().map(|p| p.report).collect(),
    })
}
