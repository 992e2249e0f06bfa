use std::sync::Arc;

use thiserror::Error;
use transit_core::geo::DEFAULT_CELL_SIZE_DEG;
use transit_core::{
    load_feed, AlertError, AlertStore, FeedError, GridIndex, StaticFeed, Tracker, TrackerError,
};

use crate::clock::{utc_midnight, Clock};
use crate::config::{QueryDefaults, ServiceConfig};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error(transparent)]
    Alerts(#[from] AlertError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
}

/// Everything a handler needs. The feed and index are immutable; the tracker
/// and alert store do their own locking.
pub struct AppState {
    pub feed: Arc<StaticFeed>,
    pub index: GridIndex,
    pub tracker: Tracker,
    pub alerts: AlertStore,
    pub defaults: QueryDefaults,
    pub service_day_start_ts: Option<i64>,
    pub clock: Arc<dyn Clock>,
}

impl AppState {
    pub fn new(
        feed: Arc<StaticFeed>,
        alerts: AlertStore,
        config: &ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StartupError> {
        let index = GridIndex::new(
            feed.stops().map(|s| (s.stop_id.clone(), s.location)),
            DEFAULT_CELL_SIZE_DEG,
        );
        Ok(AppState {
            tracker: Tracker::new(feed.clone(), config.tracker)?,
            feed,
            index,
            alerts,
            defaults: config.defaults,
            service_day_start_ts: config.service_day_start_ts,
            clock,
        })
    }

    /// Loads the feed and opens the alert snapshot named in the config.
    pub fn from_config(
        config: &ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StartupError> {
        let feed = Arc::new(load_feed(&config.feed_dir)?);
        let alerts = AlertStore::open(feed.clone(), &config.alerts_path)?;
        Self::new(feed, alerts, config, clock)
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    /// Service-day anchor for schedule-only estimates at `now`.
    pub fn service_day_start(&self, now: i64) -> i64 {
        self.service_day_start_ts
            .unwrap_or_else(|| utc_midnight(now))
    }
}
