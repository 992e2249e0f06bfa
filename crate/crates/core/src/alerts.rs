//! Service alerts: validated create/update/delete with an atomically
//! rewritten JSON snapshot, and time-window queries by stop or route.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feed::StaticFeed;

pub const MAX_SUMMARY_CHARS: usize = 140;

#[derive(Debug, Error)]
pub enum AlertError {
    #[error("invalid {field}: {message}")]
    ValidationFailed {
        field: &'static str,
        message: String,
    },
    #[error("unknown alert {0}")]
    UnknownAlert(String),
    #[error("alert references unknown {kind} {id}")]
    UnknownEntityRef { kind: &'static str, id: String },
    #[error("unknown {kind} {id}")]
    UnknownEntity { kind: &'static str, id: String },
    #[error("alert store {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("alert store {path} is corrupt: {source}")]
    Corrupt {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Ordered so that `Severe > Warning > Info`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Severe,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Severe => "severe",
        }
    }
}

/// Client-supplied alert content; ids and timestamps are server-assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertDraft {
    pub summary: String,
    #[serde(default)]
    pub description: String,
    pub severity: Severity,
    #[serde(default)]
    pub affected_route_ids: BTreeSet<String>,
    #[serde(default)]
    pub affected_stop_ids: BTreeSet<String>,
    pub active_from: i64,
    pub active_until: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceAlert {
    pub alert_id: String,
    pub summary: String,
    pub description: String,
    pub severity: Severity,
    pub affected_route_ids: BTreeSet<String>,
    pub affected_stop_ids: BTreeSet<String>,
    pub active_from: i64,
    pub active_until: i64,
    pub created_ts: i64,
    pub modified_ts: i64,
}

impl ServiceAlert {
    pub fn is_active_at(&self, now: i64) -> bool {
        self.active_from <= now && now < self.active_until
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlertTarget {
    All,
    Stop(String),
    Route(String),
}

/// Checks draft invariants and entity references against the feed.
pub fn validate_draft(draft: &AlertDraft, feed: &StaticFeed) -> Result<(), AlertError> {
    let fail = |field, message: &str| AlertError::ValidationFailed {
        field,
        message: message.to_string(),
    };
    if draft.summary.trim().is_empty() {
        return Err(fail("summary", "must not be empty"));
    }
    if draft.summary.chars().count() > MAX_SUMMARY_CHARS {
        return Err(fail("summary", "must be at most 140 characters"));
    }
    if draft.active_from >= draft.active_until {
        return Err(fail("active_until", "must be after active_from"));
    }
    if let Some(id) = draft
        .affected_route_ids
        .iter()
        .find(|id| feed.route(id).is_none())
    {
        return Err(AlertError::UnknownEntityRef {
            kind: "route",
            id: id.clone(),
        });
    }
    if let Some(id) = draft
        .affected_stop_ids
        .iter()
        .find(|id| feed.stop(id).is_none())
    {
        return Err(AlertError::UnknownEntityRef {
            kind: "stop",
            id: id.clone(),
        });
    }
    Ok(())
}

/// Alerts relevant to `target` and active at `now`, severest first, then by
/// `active_from`, then by id. A stop inherits alerts on every route whose
/// patterns serve it.
pub fn active_alerts_for<'a>(
    alerts: impl IntoIterator<Item = &'a ServiceAlert>,
    feed: &StaticFeed,
    target: &AlertTarget,
    now: i64,
) -> Result<Vec<ServiceAlert>, AlertError> {
    let stop_routes: Vec<&str> = match target {
        AlertTarget::All => Vec::new(),
        AlertTarget::Stop(id) => {
            if feed.stop(id).is_none() {
                return Err(AlertError::UnknownEntity {
                    kind: "stop",
                    id: id.clone(),
                });
            }
            feed.routes_serving_stop(id)
        }
        AlertTarget::Route(id) => {
            if feed.route(id).is_none() {
                return Err(AlertError::UnknownEntity {
                    kind: "route",
                    id: id.clone(),
                });
            }
            Vec::new()
        }
    };
    let relevant = |a: &ServiceAlert| match target {
        AlertTarget::All => true,
        AlertTarget::Route(id) => a.affected_route_ids.contains(id),
        AlertTarget::Stop(id) => {
            a.affected_stop_ids.contains(id)
                || stop_routes
                    .iter()
                    .any(|r| a.affected_route_ids.contains(*r))
        }
    };
    let mut out: Vec<ServiceAlert> = alerts
        .into_iter()
        .filter(|a| a.is_active_at(now) && relevant(a))
        .cloned()
        .collect();
    sort_for_display(&mut out);
    Ok(out)
}

pub fn sort_for_display(alerts: &mut [ServiceAlert]) {
    alerts.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then_with(|| a.active_from.cmp(&b.active_from))
            .then_with(|| a.alert_id.cmp(&b.alert_id))
    });
}

/// Alert store with single-writer mutations and concurrent readers.
///
/// Every mutation rewrites the snapshot file (temp file + rename) before
/// the in-memory map is updated, so readers only ever see committed state.
#[derive(Debug)]
pub struct AlertStore {
    feed: Arc<StaticFeed>,
    path: Option<PathBuf>,
    alerts: RwLock<BTreeMap<String, ServiceAlert>>,
    writer: Mutex<u64>,
}

impl AlertStore {
    /// A store that never touches disk.
    pub fn in_memory(feed: Arc<StaticFeed>) -> Self {
        AlertStore {
            feed,
            path: None,
            alerts: RwLock::new(BTreeMap::new()),
            writer: Mutex::new(1),
        }
    }

    /// Opens (or starts) the snapshot at `path`. A missing file is an empty
    /// store; stored alerts must still reference entities in `feed`.
    pub fn open(feed: Arc<StaticFeed>, path: impl Into<PathBuf>) -> Result<Self, AlertError> {
        let path = path.into();
        let alerts: Vec<ServiceAlert> = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| AlertError::Corrupt {
                path: path.clone(),
                source,
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(source) => return Err(AlertError::Io { path, source }),
        };
        let mut map = BTreeMap::new();
        let mut next_id = 1;
        for alert in alerts {
            let draft = draft_of(&alert);
            validate_draft(&draft, &feed)?;
            if let Some(n) = alert
                .alert_id
                .strip_prefix("alert-")
                .and_then(|n| n.parse::<u64>().ok())
            {
                next_id = next_id.max(n + 1);
            }
            map.insert(alert.alert_id.clone(), alert);
        }
        Ok(AlertStore {
            feed,
            path: Some(path),
            alerts: RwLock::new(map),
            writer: Mutex::new(next_id),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn create(&self, draft: AlertDraft, now: i64) -> Result<ServiceAlert, AlertError> {
        validate_draft(&draft, &self.feed)?;
        let mut next_id = self.writer.lock();
        let alert = ServiceAlert {
            alert_id: format!("alert-{:06}", *next_id),
            summary: draft.summary,
            description: draft.description,
            severity: draft.severity,
            affected_route_ids: draft.affected_route_ids,
            affected_stop_ids: draft.affected_stop_ids,
            active_from: draft.active_from,
            active_until: draft.active_until,
            created_ts: now,
            modified_ts: now,
        };
        self.commit(|map| {
            map.insert(alert.alert_id.clone(), alert.clone());
        })?;
        *next_id += 1;
        Ok(alert)
    }

    /// Replaces every mutable field; `modified_ts` never goes below `created_ts`.
    pub fn update(
        &self,
        alert_id: &str,
        draft: AlertDraft,
        now: i64,
    ) -> Result<ServiceAlert, AlertError> {
        let _writer = self.writer.lock();
        let existing = self
            .get(alert_id)
            .ok_or_else(|| AlertError::UnknownAlert(alert_id.to_string()))?;
        validate_draft(&draft, &self.feed)?;
        let alert = ServiceAlert {
            alert_id: existing.alert_id,
            summary: draft.summary,
            description: draft.description,
            severity: draft.severity,
            affected_route_ids: draft.affected_route_ids,
            affected_stop_ids: draft.affected_stop_ids,
            active_from: draft.active_from,
            active_until: draft.active_until,
            created_ts: existing.created_ts,
            modified_ts: now.max(existing.created_ts),
        };
        self.commit(|map| {
            map.insert(alert.alert_id.clone(), alert.clone());
        })?;
        Ok(alert)
    }

    pub fn delete(&self, alert_id: &str) -> Result<ServiceAlert, AlertError> {
        let _writer = self.writer.lock();
        let existing = self
            .get(alert_id)
            .ok_or_else(|| AlertError::UnknownAlert(alert_id.to_string()))?;
        self.commit(|map| {
            map.remove(alert_id);
        })?;
        Ok(existing)
    }

    pub fn get(&self, alert_id: &str) -> Option<ServiceAlert> {
        self.alerts.read().get(alert_id).cloned()
    }

    /// Every stored alert, including expired and future ones, by id.
    pub fn all(&self) -> Vec<ServiceAlert> {
        self.alerts.read().values().cloned().collect()
    }

    pub fn active_for(
        &self,
        target: &AlertTarget,
        now: i64,
    ) -> Result<Vec<ServiceAlert>, AlertError> {
        let alerts = self.alerts.read();
        active_alerts_for(alerts.values(), &self.feed, target, now)
    }

    /// Must be called with the writer lock held.
    fn commit(
        &self,
        mutate: impl FnOnce(&mut BTreeMap<String, ServiceAlert>),
    ) -> Result<(), AlertError> {
        let mut next = self.alerts.read().clone();
        mutate(&mut next);
        if let Some(path) = &self.path {
            write_snapshot(path, next.values())?;
        }
        *self.alerts.write() = next;
        Ok(())
    }
}

fn draft_of(alert: &ServiceAlert) -> AlertDraft {
    AlertDraft {
        summary: alert.summary.clone(),
        description: alert.description.clone(),
        severity: alert.severity,
        affected_route_ids: alert.affected_route_ids.clone(),
        affected_stop_ids: alert.affected_stop_ids.clone(),
        active_from: alert.active_from,
        active_until: alert.active_until,
    }
}

fn write_snapshot<'a>(
    path: &Path,
    alerts: impl Iterator<Item = &'a ServiceAlert>,
) -> Result<(), AlertError> {
    let io = |source| AlertError::Io {
        path: path.to_path_buf(),
        source,
    };
    let list: Vec<&ServiceAlert> = alerts.collect();
    let mut bytes = serde_json::to_vec_pretty(&list).expect("alerts serialize");
    bytes.push(b'\n');

    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut file = fs::File::create(&tmp).map_err(io)?;
        file.write_all(&bytes).map_err(io)?;
        file.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}
