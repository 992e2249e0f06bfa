//! Drives a running service over HTTP so the simulator can score it.

use std::time::Duration;

use reqwest::blocking::{Client, Response};
use transit_core::sim::{FixOutcome, ScenarioTarget, TargetError};
use transit_core::{ArrivalEstimate, GpsFix};

use crate::api::{ArrivalsResponse, Assignment, IngestResponse};
use crate::error::ApiError;

pub struct HttpTarget {
    client: Client,
    base: String,
}

impl HttpTarget {
    pub fn new(base_url: &str) -> Result<Self, TargetError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| TargetError::Unreachable(e.to_string()))?;
        Ok(HttpTarget {
            client,
            base: base_url.trim_end_matches('/').to_string(),
        })
    }

    fn check(resp: reqwest::Result<Response>) -> Result<Response, TargetError> {
        let resp = resp.map_err(|e| TargetError::Unreachable(e.to_string()))?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let detail = match resp.json::<ApiError>() {
            Ok(e) => format!("{} {}: {}", e.status, e.code, e.message),
            Err(_) => status.to_string(),
        };
        Err(TargetError::Refused(detail))
    }
}

impl ScenarioTarget for HttpTarget {
    fn assign(
        &mut self,
        vehicle_id: &str,
        trip_id: &str,
        start_of_day_ts: i64,
    ) -> Result<(), TargetError> {
        let body = Assignment {
            vehicle_id: vehicle_id.into(),
            trip_id: trip_id.into(),
            start_of_day_ts,
        };
        Self::check(
            self.client
                .post(format!("{}/api/vehicle-assignments", self.base))
                .json(&body)
                .send(),
        )?;
        Ok(())
    }

    fn ingest(&mut self, fix: &GpsFix) -> Result<FixOutcome, TargetError> {
        let resp = Self::check(
            self.client
                .post(format!("{}/api/vehicle-positions", self.base))
                .json(fix)
                .send(),
        )?;
        let r: IngestResponse = resp
            .json()
            .map_err(|e| TargetError::Refused(e.to_string()))?;
        Ok(match r.reason {
            Some(reason) => FixOutcome::Rejected(reason),
            None => FixOutcome::Accepted {
                along_m: r.vehicle.along_m,
                deviation_s: r.vehicle.deviation_s,
                status: r.vehicle.status,
            },
        })
    }

    fn arrivals(&mut self, stop_id: &str, now: i64) -> Result<Vec<ArrivalEstimate>, TargetError> {
        let resp = Self::check(
            self.client
                .get(format!(
                    "{}/api/arrivals-and-departures-for-stop/{stop_id}?now={now}",
                    self.base
                ))
                .send(),
        )?;
        let r: ArrivalsResponse = resp
            .json()
            .map_err(|e| TargetError::Refused(e.to_string()))?;
        Ok(r.arrivals)
    }
}
