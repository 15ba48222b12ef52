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

//! A scenario run with every participant on its own connection: agents on
//! their own clocks, controllers as separate clients, and an observer that
//! records the pool stream.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use tokio::sync::watch;
use tokio::task::JoinHandle;

use mixtwin_core::hub::{HubCounters, PoolSnapshot};
use mixtwin_core::{Track, VehicleId};

use super::clients::{run_agent, run_controller, AgentOptions, AgentSummary, ControllerSummary, Observer};
use super::server::{HubServer, HubStats, ServerConfig};
use super::NetError;
use crate::agents::VehicleAgent;
use crate::controllers::build_controllers;
use crate::harness::{agent_seed, hub_config, initial_states, run_finished, HarnessError, Recorder};
use crate::report::{build_report, ReportInputs, RunOutcome};
use crate::scenario::ScenarioSpec;

#[derive(Debug, Clone)]
pub struct DistributedOptions {
    /// Framed endpoint of a running hub. Without one an in-process hub is
    /// started on loopback.
    pub hub: Option<SocketAddr>,
    /// How long to wait for every vehicle to appear in the pool.
    pub startup_timeout: Duration,
    /// Longest silence tolerated on the pool stream.
    pub pool_timeout: Duration,
}

impl Default for DistributedOptions {
    fn default() -> Self {
        DistributedOptions {
            hub: None,
            startup_timeout: Duration::from_secs(10),
            pool_timeout: Duration::from_secs(2),
        }
    }
}

#[derive(Debug)]
pub struct DistributedOutcome {
    pub outcome: RunOutcome,
    /// Counters of the in-process hub, sampled before teardown.
    pub stats: Option<HubStats>,
    pub agents: BTreeMap<VehicleId, AgentSummary>,
    pub controllers: Vec<ControllerSummary>,
}

struct Progress {
    recorder: Recorder,
    t0: Option<(f64, u64)>,
    last: Option<(f64, u64)>,
}

fn shifted(pool: &PoolSnapshot, t0: f64, tick0: u64) -> PoolSnapshot {
    PoolSnapshot {
        pool_timestamp: pool.pool_timestamp - t0,
        tick: pool.tick - tick0,
        states: pool.states.clone(),
    }
}

pub async fn run_distributed(spec: &ScenarioSpec, track: &Track, opts: DistributedOptions) -> Result<DistributedOutcome, HarnessError> {
    if spec.platoon.is_empty() {
        return Err(HarnessError::Invalid("platoon is empty".into()));
    }
    let local = match opts.hub {
        Some(_) => None,
        None => Some(HubServer::start_dedicated(ServerConfig::local(hub_config(spec), Some(track.clone()))).await?),
    };
    let addr = opts.hub.or(local.as_ref().map(|h| h.addr)).expect("one of the two is set");
    let (stop_tx, stop_rx) = watch::channel(false);

    let mut observer = Observer::connect(addr, &format!("{}-recorder", spec.name)).await?;
    let starts = initial_states(spec, track)?;
    let mut agents: Vec<(VehicleId, JoinHandle<Result<AgentSummary, NetError>>)> = Vec::new();
    let mut head_tau = None;
    for (e, start) in spec.platoon.iter().zip(&starts) {
        let vspec = e.vehicle_spec();
        let imp = e.imperfections();
        let seeded = imp.clone().with_seed(agent_seed(spec.seed, e.vehicle_id, imp.rng_seed));
        let tf = spec.frames.transform(vspec.frame())?;
        let agent = VehicleAgent::new(vspec, seeded, tf, Some(track.clone()), start)?;
        head_tau.get_or_insert(agent.speed_lag());
        let mut ao = AgentOptions::new(format!("vehicle-{}", e.vehicle_id.0), spec.tick_hz);
        ao.link_delay_s = e.link_delay_s;
        agents.push((e.vehicle_id, tokio::spawn(run_agent(addr, agent, ao, stop_rx.clone()))));
    }
    let head_tau = head_tau.expect("platoon is not empty");
    let controllers: Vec<JoinHandle<Result<ControllerSummary, NetError>>> = build_controllers(spec, track, head_tau)?
        .into_iter()
        .map(|host| tokio::spawn(run_controller(addr, host, stop_rx.clone())))
        .collect();

    let mut progress = Progress {
        recorder: Recorder::new(spec, track),
        t0: None,
        last: None,
    };
    let result = drive(spec, track, &opts, &mut observer, &agents, local.as_ref(), &mut progress).await;
    let stats = local.as_ref().map(|h| h.stats());

    let _ = stop_tx.send(true);
    observer.close().await;
    let mut controller_summaries = Vec::new();
    for c in controllers {
        match c.await {
            Ok(Ok(s)) => controller_summaries.push(s),
            Ok(Err(e)) => log::warn!("controller ended with {e}"),
            Err(e) => log::warn!("controller task failed: {e}"),
        }
    }
    let mut agent_summaries = BTreeMap::new();
    let mut lost = None;
    for (id, a) in agents {
        match a.await {
            Ok(Ok(s)) => {
                agent_summaries.insert(id, s);
            }
            Ok(Err(e)) => {
                log::warn!("agent {id} ended with {e}");
                lost.get_or_insert(id);
            }
            Err(e) => {
                log::warn!("agent {id} task failed: {e}");
                lost.get_or_insert(id);
            }
        }
    }
    if let Some(h) = local {
        h.shutdown().await;
    }
    result?;
    if let Some(id) = lost {
        return Err(HarnessError::AgentLost(id));
    }

    let t0 = progress.t0.map_or(0.0, |(t, _)| t);
    let (duration, ticks) = progress.last.map_or((0.0, 0), |(t, k)| (t, k));
    let trigger_time = controller_summaries
        .iter()
        .find_map(|c| c.host.head_executor())
        .and_then(|h| h.trigger_time())
        .map(|t| t - t0);
    let recorder = progress.recorder;
    let report = build_report(
        ReportInputs {
            spec,
            mode: "distributed",
            ticks,
            duration_s: duration,
            settled_at: recorder.settled_at(),
            trigger_time,
            counters: stats.as_ref().map_or(HubCounters::default(), |s| s.counters),
        },
        recorder.series(),
    );
    let (series, pool_log) = recorder.into_parts();
    Ok(DistributedOutcome {
        outcome: RunOutcome { report, series, pool_log },
        stats,
        agents: agent_summaries,
        controllers: controller_summaries,
    })
}

async fn drive(
    spec: &ScenarioSpec,
    track: &Track,
    opts: &DistributedOptions,
    observer: &mut Observer,
    agents: &[(VehicleId, JoinHandle<Result<AgentSummary, NetError>>)],
    local: Option<&super::HubHandle>,
    progress: &mut Progress,
) -> Result<(), HarnessError> {
    let ids = spec.ids();
    let startup = tokio::time::Instant::now() + opts.startup_timeout;
    loop {
        if let Some((id, _)) = agents.iter().find(|(_, h)| h.is_finished()) {
            return Err(HarnessError::AgentLost(*id));
        }
        let pool = match tokio::time::timeout(opts.pool_timeout, observer.next_pool()).await {
            Ok(p) => p?,
            Err(_) => return Err(NetError::Timeout("a state pool").into()),
        };
        let missing = ids.iter().find(|id| !pool.states.iter().any(|s| s.vehicle_id == **id));
        let (t0, tick0) = match (progress.t0, missing) {
            (Some(t), None) => t,
            (Some(_), Some(id)) => return Err(HarnessError::AgentLost(*id)),
            (None, Some(id)) => {
                if tokio::time::Instant::now() > startup {
                    return Err(HarnessError::AgentLost(*id));
                }
                continue;
            }
            (None, None) => {
                let dt = spec.tick_period();
                let origin = (pool.pool_timestamp - dt, pool.tick - 1);
                progress.t0 = Some(origin);
                if let Some(h) = local {
                    h.reset_window();
                }
                origin
            }
        };
        let p = shifted(&pool, t0, tick0);
        progress.recorder.record(&p, None);
        let head = p.states.iter().find(|s| s.vehicle_id == ids[0]).expect("all present");
        progress.recorder.advance_head(head.arc_position);
        progress.last = Some((p.pool_timestamp, p.tick));
        if progress.recorder.timed_out(p.pool_timestamp) {
            return Err(HarnessError::SettlingTimeout {
                timeout_s: spec.settle.timeout_s,
            });
        }
        if run_finished(spec, track, p.pool_timestamp, progress.recorder.head_travel()) {
            return Ok(());
        }
    }
}
