// Copyright 2026 The mixtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `mixtwin` command-line entry point.
//!
//! Exit status: 0 success, 1 configuration or usage error, 2 the platoon
//! never settled, 3 a vehicle agent was lost, 4 any other runtime failure.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tokio::sync::watch;

use mixtwin::config::{AgentFile, HubFile};
use mixtwin::controllers::build_controllers;
use mixtwin::harness::{run_lockstep, HarnessError};
use mixtwin::net::{self, DistributedOptions, HubServer, NetError, ReplayOptions};
use mixtwin::report::{write_outputs, RunOutcome};
use mixtwin::scenario::{load_json, ScenarioSpec};

#[derive(Parser)]
#[command(name = "mixtwin", version, about = "Mixed digital-twin platooning testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lockstep,
    Distributed,
}

#[derive(Subcommand)]
enum Command {
    /// Run a hub until interrupted.
    Hub {
        #[arg(long, env = "MIXTWIN_LISTEN", default_value = "127.0.0.1:7400")]
        listen: SocketAddr,
        /// WebSocket endpoint for driver stations and observers.
        #[arg(long, env = "MIXTWIN_WS", default_value = "127.0.0.1:7401")]
        ws: SocketAddr,
        #[arg(long, env = "MIXTWIN_HUB_CONFIG")]
        config: Option<PathBuf>,
        /// Track file; overrides the one in the hub config.
        #[arg(long, env = "MIXTWIN_TRACK")]
        track: Option<PathBuf>,
    },
    /// Run one vehicle agent until interrupted.
    Agent {
        #[arg(long, env = "MIXTWIN_HUB")]
        hub: SocketAddr,
        #[arg(long, env = "MIXTWIN_AGENT_CONFIG")]
        config: PathBuf,
    },
    /// Serve one controller entity of a scenario until interrupted.
    Controller {
        #[arg(long, env = "MIXTWIN_HUB")]
        hub: SocketAddr,
        #[arg(long, env = "MIXTWIN_SCENARIO")]
        scenario: PathBuf,
        /// Entity name, `cacc` or `drivers`.
        #[arg(long)]
        entity: String,
    },
    /// Run a scenario to completion and write its outputs.
    Run {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "lockstep")]
        mode: Mode,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "MIXTWIN_OUT")]
        out: Option<PathBuf>,
        /// Distributed mode only: use this hub instead of an in-process one.
        #[arg(long, env = "MIXTWIN_HUB")]
        hub: Option<SocketAddr>,
    },
    /// Check a scenario file and list every problem.
    Validate { spec: PathBuf },
    /// Serve a recorded pool log to observers.
    Replay {
        log: PathBuf,
        /// Playback rate; 0 sends only the final frame.
        #[arg(long, default_value_t = 1.0)]
        speed_factor: f64,
        #[arg(long, env = "MIXTWIN_LISTEN", default_value = "127.0.0.1:7400")]
        listen: SocketAddr,
        #[arg(long, env = "MIXTWIN_WS", default_value = "127.0.0.1:7401")]
        ws: SocketAddr,
        /// Observers to wait for before playback starts.
        #[arg(long, default_value_t = 0)]
        wait_observers: usize,
        #[arg(long, default_value_t = 50.0)]
        tick_hz: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Harness(HarnessError::Invalid(_)) => 1,
            Failure::Harness(HarnessError::SettlingTimeout { .. }) => 2,
            Failure::Harness(HarnessError::AgentLost(_)) => 3,
            Failure::Net(NetError::Closed) => 3,
            Failure::Net(NetError::Refused(_)) => 1,
            _ => 4,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn load_spec(path: &Path) -> Result<(ScenarioSpec, mixtwin_core::Track), Failure> {
    let (spec, dir) = ScenarioSpec::load(path).map_err(|e| Failure::Config(e.to_string()))?;
    let problems = spec.violations(dir.as_deref());
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(|v| format!("  {v}")).collect();
        return Err(Failure::Config(format!("{} is invalid:\n{}", path.display(), list.join("\n"))));
    }
    let track = spec.resolve_track(dir.as_deref()).map_err(Failure::Config)?;
    Ok((spec, track))
}

/// A receiver that flips on Ctrl-C.
fn interrupt() -> watch::Receiver<bool> {
    let (tx, rx) = watch::channel(false);
    tokio::spawn(async move {
        if tokio::signal::ctrl_c().await.is_ok() {
            let _ = tx.send(true);
        }
    });
    rx
}

fn summarize(outcome: &RunOutcome) {
    let r = &outcome.report;
    println!(
        "{} ({}): {} ticks, {:.2} s, settled at {}, trigger at {}",
        r.name,
        r.mode,
        r.ticks,
        r.duration_s,
        r.settled_at.map_or("-".into(), |t| format!("{t:.2} s")),
        r.trigger_time.map_or("-".into(), |t| format!("{t:.2} s")),
    );
    for v in &r.vehicles {
        println!(
            "  vehicle {}: speed {:.3}..{:.3} m/s, amplification {}, min gap {}",
            v.vehicle_id,
            v.min_speed,
            v.peak_speed,
            v.amplification.map_or("-".into(), |a| format!("{a:.3}")),
            v.min_gap.map_or("-".into(), |g| format!("{g:.2} m")),
        );
    }
    println!("  collisions: {}", r.collisions.len());
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate { spec } => {
            load_spec(&spec)?;
            println!("{}: ok", spec.display());
            Ok(())
        }
        Command::Run {
            spec,
            mode,
            seed,
            out,
            hub,
        } => {
            let (mut s, track) = load_spec(&spec)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let outcome = match mode {
                Mode::Lockstep => run_lockstep(&s, &track)?,
                Mode::Distributed => {
                    let opts = DistributedOptions {
                        hub,
                        ..DistributedOptions::default()
                    };
                    runtime()?.block_on(net::run_distributed(&s, &track, opts))?.outcome
                }
            };
            summarize(&outcome);
            if let Some(dir) = out {
                write_outputs(&outcome, &dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Hub {
            listen,
            ws,
            config,
            track,
        } => {
            let (mut file, dir) = match &config {
                Some(p) => (load_json::<HubFile>(p).map_err(|e| Failure::Config(e.to_string()))?, p.parent().map(Path::to_path_buf)),
                None => (HubFile::default(), None),
            };
            if let Some(t) = track {
                file.track = Some(mixtwin::scenario::TrackSource::Path(t));
            }
            let cfg = file.server_config(listen, Some(ws), dir.as_deref()).map_err(Failure::Config)?;
            runtime()?.block_on(async move {
                let mut stop = interrupt();
                let hub = HubServer::start(cfg).await?;
                println!("hub listening on {} (framed) and {} (websocket)", hub.addr, hub.ws_addr.map_or("-".into(), |a| a.to_string()));
                let mut report = tokio::time::interval(std::time::Duration::from_secs(10));
                loop {
                    tokio::select! {
                        _ = stop.changed() => break,
                        _ = report.tick() => {
                            let s = hub.stats();
                            log::info!(
                                "tick {} vehicles {} connections {} p99 {:?} ms drops {}",
                                s.ticks, s.vehicles, s.connections, s.interval_quantile(0.99), s.vehicle_drops
                            );
                        }
                    }
                }
                hub.shutdown().await;
                Ok(())
            })
        }
        Command::Agent { hub, config } => {
            let file: AgentFile = load_json(&config).map_err(|e| Failure::Config(e.to_string()))?;
            let (agent, opts) = file.build(config.parent()).map_err(Failure::Config)?;
            runtime()?.block_on(async move {
                let stop = interrupt();
                let summary = net::run_agent(hub, agent, opts, stop).await?;
                println!("agent stopped after {} steps, {} dispatches", summary.steps, summary.dispatches);
                Ok(())
            })
        }
        Command::Controller { hub, scenario, entity } => {
            let (spec, track) = load_spec(&scenario)?;
            let host = build_controllers(&spec, &track, spec.platoon[0].speed_lag())
                .map_err(|e| Failure::Config(e.to_string()))?
                .into_iter()
                .find(|h| h.entity_id() == entity)
                .ok_or_else(|| Failure::Config(format!("scenario has no controller entity '{entity}'")))?;
            runtime()?.block_on(async move {
                let stop = interrupt();
                let summary = net::run_controller(hub, host, stop).await?;
                println!("controller stopped after {} pools, {} instructions", summary.pools, summary.instructions);
                Ok(())
            })
        }
        Command::Replay {
            log,
            speed_factor,
            listen,
            ws,
            wait_observers,
            tick_hz,
        } => {
            if !(speed_factor >= 0.0 && speed_factor.is_finite()) {
                return Err(Failure::Config("--speed-factor must be a finite number >= 0".into()));
            }
            let opts = ReplayOptions {
                log,
                listen,
                ws_listen: Some(ws),
                speed_factor,
                wait_observers,
                tick_hz,
            };
            let summary = runtime()?.block_on(net::replay(opts, None))?;
            println!("replayed {} frames to {} observers", summary.frames_sent, summary.observers);
            Ok(())
        }
    }
}
