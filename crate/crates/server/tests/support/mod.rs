#![allow(dead_code)]

pub mod contract;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::thread::JoinHandle;

use transit_core::{AlertStore, StaticFeed};
use transit_server::{AppState, ManualClock, ServiceConfig};

/// Unix midnight used as the service day in server tests.
pub const DAY: i64 = 1_704_067_200;

/// A server on an ephemeral port, driven by its own runtime thread.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(state: Arc<AppState>) -> Self {
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                transit_server::serve(listener, state, async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
            });
        });
        BackgroundServer {
            addr: addr_rx.recv().unwrap(),
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

pub fn config(alerts_path: &Path) -> ServiceConfig {
    ServiceConfig {
        listen_addr: "127.0.0.1:0".into(),
        feed_dir: ".".into(),
        alerts_path: alerts_path.to_path_buf(),
        tracker: Default::default(),
        defaults: Default::default(),
        service_day_start_ts: Some(DAY),
    }
}

/// State over `feed` with alerts persisted at `alerts_path` and a manual clock.
pub fn state(feed: StaticFeed, alerts_path: &Path, clock: Arc<ManualClock>) -> Arc<AppState> {
    let feed = Arc::new(feed);
    let alerts = AlertStore::open(feed.clone(), alerts_path).unwrap();
    Arc::new(AppState::new(feed, alerts, &config(alerts_path), clock).unwrap())
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::new()
}
