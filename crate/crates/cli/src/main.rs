use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use transit_core::sim::{
    generate_scenario, run_scenario, trace_jsonl, InProcessTarget, Pacing, ScenarioReport,
    ScenarioSpec,
};
use transit_core::{load_feed, StaticFeed, Tracker, TrackerConfig};
use transit_server::{AppState, Clock, HttpTarget, ServiceConfig, SystemClock};

#[derive(Parser)]
#[command(
    name = "transit",
    version,
    about = "Real-time transit tracking service"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Load a feed directory and print a summary.
    ValidateFeed { dir: PathBuf },
    /// Generate GPS traces for a scenario and score predictions against them.
    Simulate {
        #[arg(long)]
        feed: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Replay against a running service instead of an in-process tracker.
        #[arg(long, conflicts_with = "out")]
        post: Option<String>,
        /// Write the fix stream as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Sleep between fixes so the stream plays out in wall-clock time.
        #[arg(long)]
        realtime: bool,
        /// With --post, keep the scenario's timestamps instead of starting
        /// the first departure now.
        #[arg(long, requires = "post")]
        keep_times: bool,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Serve { config } => serve(&config),
        Command::ValidateFeed { dir } => validate_feed(&dir),
        Command::Simulate {
            feed,
            scenario,
            post,
            out,
            report,
            realtime,
            keep_times,
        } => simulate(SimulateArgs {
            feed,
            scenario,
            post,
            out,
            report,
            realtime,
            keep_times,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn serve(config_path: &Path) -> Result<(), String> {
    let config = ServiceConfig::load(config_path).map_err(|e| e.to_string())?;
    let state = AppState::from_config(&config, Arc::new(SystemClock)).map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.listen_addr)
            .await
            .map_err(|e| format!("bind {}: {e}", config.listen_addr))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        println!("listening on {addr}");
        tracing::info!(
            %addr,
            stops = state.feed.stops().len(),
            alerts = state.alerts.all().len(),
            "listening"
        );
        transit_server::serve(listener, Arc::new(state), transit_server::shutdown_signal())
            .await
            .map_err(|e| e.to_string())
    })
}

fn validate_feed(dir: &Path) -> Result<(), String> {
    let feed = load_feed(dir).map_err(|e| e.to_string())?;
    println!("feed {}: ok", dir.display());
    println!(
        "  {} stops, {} routes, {} patterns, {} trips",
        feed.stops().len(),
        feed.routes().len(),
        feed.patterns().len(),
        feed.trips().len()
    );
    for p in feed.patterns() {
        println!(
            "  pattern {} (route {}, direction {}): {} stops over {:.0} m, {} trips",
            p.pattern_id,
            p.route_id,
            p.direction_id,
            p.stops.len(),
            p.shape.length_m(),
            feed.trips_for_pattern(&p.pattern_id).count()
        );
    }
    Ok(())
}

struct SimulateArgs {
    feed: PathBuf,
    scenario: PathBuf,
    post: Option<String>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
    realtime: bool,
    keep_times: bool,
}

fn simulate(args: SimulateArgs) -> Result<(), String> {
    let feed = Arc::new(load_feed(&args.feed).map_err(|e| e.to_string())?);
    let bytes =
        std::fs::read(&args.scenario).map_err(|e| format!("{}: {e}", args.scenario.display()))?;
    let mut spec: ScenarioSpec =
        serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", args.scenario.display()))?;
    let pacing = if args.realtime {
        Pacing::Realtime
    } else {
        Pacing::Simulated
    };

    let report = match &args.post {
        Some(url) => {
            if !args.keep_times {
                rebase_to_now(&feed, &mut spec, SystemClock.now())?;
            }
            let mut target = HttpTarget::new(url).map_err(|e| e.to_string())?;
            run_scenario(&feed, &spec, &mut target, pacing).map_err(|e| e.to_string())?
        }
        None => {
            if let Some(out) = &args.out {
                let traces = generate_scenario(&feed, &spec).map_err(|e| e.to_string())?;
                std::fs::write(out, trace_jsonl(&traces))
                    .map_err(|e| format!("{}: {e}", out.display()))?;
            }
            let tracker =
                Tracker::new(feed.clone(), TrackerConfig::default()).map_err(|e| e.to_string())?;
            let mut target = InProcessTarget::new(&tracker, spec.service_day_start_ts);
            run_scenario(&feed, &spec, &mut target, pacing).map_err(|e| e.to_string())?
        }
    };
    write_report(&report, args.report.as_deref())?;
    match &report.failure {
        Some(why) => Err(format!("scenario stopped early: {why}")),
        None => Ok(()),
    }
}

/// Shifts the service day so the earliest departure happens at `now`; a
/// live service would otherwise see every fix as long stale.
fn rebase_to_now(feed: &StaticFeed, spec: &mut ScenarioSpec, now: i64) -> Result<(), String> {
    let mut first = None;
    for run in &spec.runs {
        let trip = feed
            .trip(&run.trip_id)
            .ok_or_else(|| format!("unknown trip {}", run.trip_id))?;
        let depart = trip.stop_times[0].arrival_s + run.depart_offset_s;
        first = Some(first.map_or(depart, |f: i64| f.min(depart)));
    }
    if let Some(first) = first {
        spec.service_day_start_ts = now - first;
    }
    Ok(())
}

fn write_report(report: &ScenarioReport, path: Option<&Path>) -> Result<(), String> {
    let json = report.to_json();
    match path {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}
