//! Deterministic GPS trace generation over the static feed.
//!
//! A vehicle follows its trip's schedule shifted by a constant lateness, so
//! the true arrival at every stop is exactly `scheduled + depart_offset_s`.
//! Noise, accuracy, dropout and reordering only affect what is emitted; the
//! ground truth is computed before any perturbation.

mod rng;
mod scenario;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feed::StaticFeed;
use crate::geo::{GeoPoint, METERS_PER_DEGREE};
use crate::tracker::{distance_at_scheduled_time, GpsFix};

pub use rng::SplitMix64;
pub use scenario::{
    run_scenario, FixOutcome, InProcessTarget, Pacing, RejectionCounts, RunReport, ScenarioReport,
    ScenarioTarget, StopReport, TargetError, WARMUP_FIXES,
};

/// Reported accuracy when a run has no profile entry covering a fix.
pub const DEFAULT_ACCURACY_M: f64 = 5.0;

/// 2024-01-01T00:00:00Z; anchor used when a scenario file omits one.
pub const DEFAULT_SERVICE_DAY_START_TS: i64 = 1_704_067_200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown trip {0}")]
    UnknownTrip(String),
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyStep {
    /// Seconds after the vehicle's actual departure.
    pub from_s: i64,
    pub accuracy_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub trip_id: String,
    pub vehicle_id: String,
    #[serde(default)]
    pub depart_offset_s: i64,
    #[serde(default = "default_interval")]
    pub fix_interval_s: i64,
    #[serde(default)]
    pub noise_sigma_m: f64,
    #[serde(default)]
    pub dropout_p: f64,
    #[serde(default)]
    pub reorder_p: f64,
    #[serde(default)]
    pub reorder_delay_s: i64,
    #[serde(default)]
    pub accuracy_profile: Vec<AccuracyStep>,
}

fn default_interval() -> i64 {
    10
}

fn default_service_day() -> i64 {
    DEFAULT_SERVICE_DAY_START_TS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    #[serde(default = "default_service_day")]
    pub service_day_start_ts: i64,
    pub runs: Vec<RunSpec>,
}

impl RunSpec {
    pub fn new(trip_id: &str, vehicle_id: &str) -> Self {
        RunSpec {
            trip_id: trip_id.into(),
            vehicle_id: vehicle_id.into(),
            depart_offset_s: 0,
            fix_interval_s: default_interval(),
            noise_sigma_m: 0.0,
            dropout_p: 0.0,
            reorder_p: 0.0,
            reorder_delay_s: 0,
            accuracy_profile: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| {
            Err(SimError::InvalidSpec(format!(
                "run {}: {msg}",
                self.vehicle_id
            )))
        };
        for (name, p) in [("dropout_p", self.dropout_p), ("reorder_p", self.reorder_p)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1]"));
            }
        }
        if self.fix_interval_s <= 0 {
            return bad("fix_interval_s must be positive".into());
        }
        if !(self.noise_sigma_m.is_finite() && self.noise_sigma_m >= 0.0) {
            return bad("noise_sigma_m must be non-negative".into());
        }
        if self.reorder_delay_s < 0 {
            return bad("reorder_delay_s must be non-negative".into());
        }
        if self
            .accuracy_profile
            .iter()
            .any(|s| !(s.accuracy_m.is_finite() && s.accuracy_m > 0.0))
        {
            return bad("accuracy_m must be positive".into());
        }
        Ok(())
    }

    fn accuracy_at(&self, since_departure_s: i64) -> f64 {
        self.accuracy_profile
            .iter()
            .filter(|s| s.from_s <= since_departure_s)
            .max_by_key(|s| s.from_s)
            .map(|s| s.accuracy_m)
            .unwrap_or(DEFAULT_ACCURACY_M)
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.runs.is_empty() {
            return Err(SimError::InvalidSpec("scenario has no runs".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for run in &self.runs {
            run.validate()?;
            if !seen.insert(run.vehicle_id.as_str()) {
                return Err(SimError::InvalidSpec(format!(
                    "vehicle {} appears in more than one run",
                    run.vehicle_id
                )));
            }
        }
        Ok(())
    }
}

/// One fix as emitted, with the unperturbed position it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmittedFix {
    pub fix: GpsFix,
    /// When the fix reaches the service; later than `fix.ts` if reordered.
    pub emit_ts: i64,
    pub reordered: bool,
    pub true_location: GeoPoint,
    pub true_along_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub ts: i64,
    pub along_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopArrivalTruth {
    pub stop_index: usize,
    pub stop_id: String,
    pub along_m: f64,
    pub scheduled_ts: i64,
    pub arrival_ts: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trip_id: String,
    pub vehicle_id: String,
    pub start_of_day_ts: i64,
    /// True position at every fix tick, dropped or not.
    pub samples: Vec<TruthSample>,
    pub stop_arrivals: Vec<StopArrivalTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// In emission order.
    pub fixes: Vec<EmittedFix>,
    pub truth: GroundTruth,
}

/// Generates run `run_index` of a scenario. The PRNG stream depends only on
/// `seed` and `run_index`, and every tick consumes the same four draws
/// whatever the perturbation settings.
pub fn generate_trace(
    feed: &StaticFeed,
    run: &RunSpec,
    run_index: usize,
    seed: u64,
    service_day_start_ts: i64,
) -> Result<Trace, SimError> {
    run.validate()?;
    let trip = feed
        .trip(&run.trip_id)
        .ok_or_else(|| SimError::UnknownTrip(run.trip_id.clone()))?;
    let pattern = feed.trip_pattern(trip);
    let shift = service_day_start_ts + run.depart_offset_s;

    let stop_arrivals: Vec<StopArrivalTruth> = pattern
        .stops
        .iter()
        .zip(&trip.stop_times)
        .enumerate()
        .map(|(i, (ps, st))| StopArrivalTruth {
            stop_index: i,
            stop_id: ps.stop_id.clone(),
            along_m: ps.along_shape_m,
            scheduled_ts: service_day_start_ts + st.arrival_s,
            arrival_ts: shift + st.arrival_s,
        })
        .collect();
    let depart_ts = stop_arrivals.first().map(|s| s.arrival_ts).unwrap_or(shift);
    let finish_ts = stop_arrivals.last().map(|s| s.arrival_ts).unwrap_or(shift);

    let mut rng = SplitMix64::for_run(seed, run_index);
    let mut samples = Vec::new();
    let mut pending: Vec<(i64, usize, EmittedFix)> = Vec::new();
    let mut ts = depart_ts;
    while ts <= finish_ts {
        let along_m = distance_at_scheduled_time(trip, pattern, (ts - shift) as f64);
        samples.push(TruthSample { ts, along_m });
        let truth = pattern
            .shape
            .point_at_distance(along_m.clamp(0.0, pattern.shape.length_m()))
            .expect("schedule distance lies on the shape");

        let (gx, gy) = rng.next_gaussian_pair();
        let dropout_draw = rng.next_f64();
        let reorder_draw = rng.next_f64();

        let east_m = gx * run.noise_sigma_m;
        let north_m = gy * run.noise_sigma_m;
        let location = displace(truth, east_m, north_m);
        let reordered = reorder_draw < run.reorder_p;
        let emit_ts = if reordered {
            ts + run.reorder_delay_s
        } else {
            ts
        };
        if dropout_draw >= run.dropout_p {
            let seq = pending.len();
            pending.push((
                emit_ts,
                seq,
                EmittedFix {
                    fix: GpsFix {
                        vehicle_id: run.vehicle_id.clone(),
                        ts,
                        location,
                        accuracy_m: run.accuracy_at(ts - depart_ts),
                    },
                    emit_ts,
                    reordered,
                    true_location: truth,
                    true_along_m: along_m,
                },
            ));
        }
        ts += run.fix_interval_s;
    }
    pending.sort_by_key(|(emit, seq, _)| (*emit, *seq));

    Ok(Trace {
        fixes: pending.into_iter().map(|(_, _, f)| f).collect(),
        truth: GroundTruth {
            trip_id: run.trip_id.clone(),
            vehicle_id: run.vehicle_id.clone(),
            start_of_day_ts: service_day_start_ts,
            samples,
            stop_arrivals,
        },
    })
}

/// Moves `p` by a small east/north offset in the local tangent plane.
fn displace(p: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let lat = (p.lat + north_m / METERS_PER_DEGREE).clamp(-90.0, 90.0);
    let cos = p.lat.to_radians().cos().max(1e-9);
    let mut lon = p.lon + east_m / (METERS_PER_DEGREE * cos);
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint { lat, lon }
}

/// One trace per run, in the order the runs are listed. See [`merged_emissions`] for the
/// combined stream.
pub fn generate_scenario(feed: &StaticFeed, spec: &ScenarioSpec) -> Result<Vec<Trace>, SimError> {
    spec.validate()?;
    spec.runs
        .iter()
        .enumerate()
        .map(|(i, run)| generate_trace(feed, run, i, spec.seed, spec.service_day_start_ts))
        .collect()
}

/// Interleaves per-run emissions into the order they reach the service:
/// by emit time, then run index, then per-run order.
pub fn merged_emissions(traces: &[Trace]) -> Vec<(usize, &EmittedFix)> {
    let mut all: Vec<(i64, usize, usize, &EmittedFix)> = traces
        .iter()
        .enumerate()
        .flat_map(|(run, t)| {
            t.fixes
                .iter()
                .enumerate()
                .map(move |(seq, f)| (f.emit_ts, run, seq, f))
        })
        .collect();
    all.sort_by_key(|(emit, run, seq, _)| (*emit, *run, *seq));
    all.into_iter().map(|(_, run, _, f)| (run, f)).collect()
}

/// JSON-lines encoding of the merged fix stream.
pub fn trace_jsonl(traces: &[Trace]) -> String {
    let mut out = String::new();
    for (_, emitted) in merged_emissions(traces) {
        out.push_str(&serde_json::to_string(&emitted.fix).expect("fix serializes"));
        out.push('\n');
    }
    out
}
