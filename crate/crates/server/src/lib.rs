//! HTTP/JSON API over the transit core: stop and route browsing, arrivals,
//! vehicle ingest, alert CRUD, and a plain-text stop page.

pub mod api;
pub mod clock;
pub mod config;
pub mod error;
pub mod http_target;
pub mod state;
pub mod text;

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

pub use api::router;
pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{QueryDefaults, ServiceConfig};
pub use error::ApiError;
pub use http_target::HttpTarget;
pub use state::{AppState, StartupError};
pub use text::render_text_arrivals;

pub const SWEEP_INTERVAL: Duration = Duration::from_secs(10);

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
/// A background task marks stale vehicles every [`SWEEP_INTERVAL`].
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweeper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(SWEEP_INTERVAL);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tick.tick().await;
                let marked = state.tracker.sweep_stale(state.now());
                if marked > 0 {
                    tracing::info!(marked, "vehicles marked stale");
                }
            }
        })
    };
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await;
    sweeper.abort();
    result
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
