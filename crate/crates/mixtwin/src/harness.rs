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

//! Lockstep scenario runner: one virtual clock, a fixed step order, no
//! threads. Each tick: agents step and publish, the hub ingests, housekeeps
//! and broadcasts, controllers answer, and the hub dispatches.

use std::collections::VecDeque;

use mixtwin_core::control::lateral_angle;
use mixtwin_core::hub::{
    Channel, Dispatch, HubConfig, HubCore, HubError, InterlockConfig, PoolSnapshot,
};
use mixtwin_core::{CoreError, FrameId, Track, VehicleId, VehicleState};

use crate::agents::VehicleAgent;
use crate::controllers::{build_controllers, ControllerHost, SettleMonitor};
use crate::scenario::GapMetric;
use crate::poollog::{rows_for, PoolLogRow};
use crate::report::{build_report, ReportInputs, RunOutcome, RunSeries, VehicleSeries};
use crate::scenario::ScenarioSpec;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Hub(#[from] HubError),
    #[error("platoon did not settle within {timeout_s} s")]
    SettlingTimeout { timeout_s: f64 },
    #[error("lost vehicle agent {0}")]
    AgentLost(VehicleId),
    #[error(transparent)]
    Net(#[from] crate::net::NetError),
}

struct AgentSlot {
    agent: VehicleAgent,
    link_delay: f64,
    publish_every: u64,
    in_flight: VecDeque<(f64, VehicleState)>,
}

/// What one tick produced.
#[derive(Debug, Clone)]
pub struct TickRecord {
    pub tick: u64,
    pub time: f64,
    pub pool: PoolSnapshot,
    /// Housekeeping dispatches first, then controller dispatches.
    pub dispatches: Vec<Dispatch>,
}

/// Hub configuration derived from a scenario.
pub fn hub_config(spec: &ScenarioSpec) -> HubConfig {
    HubConfig {
        tick_hz: spec.tick_hz,
        frames: spec.frames,
        watchdog_s: spec.watchdog_s,
        dead_reckoning: spec.dead_reckoning,
        interlock: spec.interlock.then(|| InterlockConfig {
            order: spec.ids(),
            threshold: spec.collision_threshold,
            margin: 0.5,
        }),
    }
}

/// Unified starting states: head at the start point, each follower its
/// initial gap behind its predecessor, all at base speed on the centreline.
pub fn initial_states(spec: &ScenarioSpec, track: &Track) -> Result<Vec<VehicleState>, CoreError> {
    let mut s = track.named_point(spec.start_point)?;
    let mut out = Vec::with_capacity(spec.platoon.len());
    for (i, e) in spec.platoon.iter().enumerate() {
        if i > 0 {
            s -= spec.initial_gap(i);
        }
        let mut st = VehicleState::at_rest(e.vehicle_id, FrameId::Unified, track.point_at(s));
        st.arc_position = track.wrap(s);
        st.speed = spec.base_speed;
        st.front_wheel_angle = lateral_angle(&st, track, &spec.lateral);
        out.push(st);
    }
    Ok(out)
}

/// Seed of the noise stream of one agent.
pub fn agent_seed(scenario_seed: u64, vehicle: VehicleId, configured: u64) -> u64 {
    scenario_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(vehicle.0 as u64)
        .wrapping_add(configured.rotate_left(32))
}

pub struct LockstepRun {
    spec: ScenarioSpec,
    track: Track,
    hub: HubCore,
    agents: Vec<AgentSlot>,
    controllers: Vec<ControllerHost>,
    dt: f64,
    tick: u64,
    recorder: Recorder,
}

/// Collects series, the pool log, head travel and the settle state from a
/// stream of pools.
#[derive(Debug, Clone)]
pub struct Recorder {
    order: Vec<VehicleId>,
    metric: GapMetric,
    track: Track,
    monitor: SettleMonitor,
    head_travel: f64,
    head_last_arc: Option<f64>,
    series: RunSeries,
    pool_log: Vec<PoolLogRow>,
}

impl Recorder {
    pub fn new(spec: &ScenarioSpec, track: &Track) -> Self {
        Recorder {
            order: spec.ids(),
            metric: spec.gap_metric,
            track: track.clone(),
            monitor: SettleMonitor::from_scenario(spec),
            head_travel: 0.0,
            head_last_arc: None,
            series: RunSeries {
                ticks: Vec::new(),
                times: Vec::new(),
                vehicles: spec
                    .platoon
                    .iter()
                    .map(|e| VehicleSeries {
                        vehicle_id: e.vehicle_id,
                        ..VehicleSeries::default()
                    })
                    .collect(),
            },
            pool_log: Vec::new(),
        }
    }

    /// Record one pool. `true_speeds` follows platoon order; without it the
    /// pool speeds stand in.
    pub fn record(&mut self, pool: &PoolSnapshot, true_speeds: Option<&[f64]>) {
        self.monitor.update(pool, &self.track);
        let metric = self.metric;
        let track = &self.track;
        self.pool_log
            .extend(rows_for(pool, &self.order, |f, l| metric.gap(track, f, l)));
        let find = |id: VehicleId| pool.states.iter().find(|s| s.vehicle_id == id);
        if self.order.iter().any(|id| find(*id).is_none()) {
            return;
        }
        self.series.ticks.push(pool.tick);
        self.series.times.push(pool.pool_timestamp);
        for (i, id) in self.order.iter().enumerate() {
            let s = find(*id).expect("checked");
            let vs = &mut self.series.vehicles[i];
            vs.arc.push(s.arc_position);
            vs.speed.push(s.speed);
            vs.true_speed.push(true_speeds.map_or(s.speed, |t| t[i]));
            if i > 0 {
                let pred = find(self.order[i - 1]).expect("checked");
                vs.gap.push(metric.gap(track, s, pred));
            }
        }
    }

    /// Accumulate head travel from a new head arc position.
    pub fn advance_head(&mut self, arc: f64) {
        let lap = self.track.lap_length();
        if let Some(last) = self.head_last_arc {
            self.head_travel += mixtwin_core::track::wrap(arc - last + lap / 2.0, lap) - lap / 2.0;
        }
        self.head_last_arc = Some(arc);
    }

    pub fn head_travel(&self) -> f64 {
        self.head_travel
    }

    pub fn settled_at(&self) -> Option<f64> {
        self.monitor.settled_at()
    }

    pub fn timed_out(&self, t: f64) -> bool {
        self.monitor.timed_out(t)
    }

    pub fn series(&self) -> &RunSeries {
        &self.series
    }

    pub fn into_parts(self) -> (RunSeries, Vec<PoolLogRow>) {
        (self.series, self.pool_log)
    }
}

impl LockstepRun {
    pub fn new(spec: ScenarioSpec, track: Track) -> Result<Self, HarnessError> {
        if spec.platoon.is_empty() {
            return Err(HarnessError::Invalid("platoon is empty".into()));
        }
        let dt = spec.tick_period();
        let mut hub = HubCore::new(hub_config(&spec), Some(track.clone()));
        let starts = initial_states(&spec, &track)?;
        let mut agents = Vec::new();
        for (e, start) in spec.platoon.iter().zip(&starts) {
            let vspec = e.vehicle_spec();
            hub.register_vehicle(vspec.clone())?;
            let imp = e.imperfections();
            let seeded = imp.clone().with_seed(agent_seed(spec.seed, e.vehicle_id, imp.rng_seed));
            let tf = spec.frames.transform(vspec.frame())?;
            let agent = VehicleAgent::new(vspec, seeded, tf, Some(track.clone()), start)?;
            agents.push(AgentSlot {
                publish_every: agent.publish_every(spec.tick_hz),
                agent,
                link_delay: e.link_delay_s,
                in_flight: VecDeque::new(),
            });
        }
        let head_tau = agents[0].agent.speed_lag();
        let controllers = build_controllers(&spec, &track, head_tau)?;
        for host in &controllers {
            for b in host.bindings() {
                hub.register_source(b.source.clone())?;
                hub.remap(&b.source, b.vehicle, Channel::Both, false)?;
            }
        }
        let mut recorder = Recorder::new(&spec, &track);
        recorder.advance_head(starts[0].arc_position);
        Ok(LockstepRun {
            spec,
            track,
            hub,
            agents,
            controllers,
            dt,
            tick: 0,
            recorder,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn hub(&self) -> &HubCore {
        &self.hub
    }

    pub fn hub_mut(&mut self) -> &mut HubCore {
        &mut self.hub
    }

    pub fn controllers(&self) -> &[ControllerHost] {
        &self.controllers
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    /// Ground truth of a vehicle in the unified frame.
    pub fn truth(&self, id: VehicleId) -> Option<VehicleState> {
        self.agents
            .iter()
            .find(|a| a.agent.spec().vehicle_id == id)
            .map(|a| a.agent.truth_unified())
    }

    /// Distance the head has travelled since the start.
    pub fn head_travel(&self) -> f64 {
        self.recorder.head_travel()
    }

    pub fn settled_at(&self) -> Option<f64> {
        self.recorder.settled_at()
    }

    pub fn trigger_time(&self) -> Option<f64> {
        self.controllers.iter().find_map(|c| c.head_executor()).and_then(|h| h.trigger_time())
    }

    fn deliver(&mut self, dispatches: &[Dispatch]) -> Result<(), HarnessError> {
        for d in dispatches {
            let id = d.instruction.target_vehicle_id;
            let slot = self
                .agents
                .iter_mut()
                .find(|a| a.agent.spec().vehicle_id == id)
                .ok_or(HarnessError::AgentLost(id))?;
            slot.agent.command(d.instruction.clone())?;
        }
        Ok(())
    }

    /// Advance one tick.
    pub fn step(&mut self) -> Result<TickRecord, HarnessError> {
        let k = self.tick + 1;
        let t = k as f64 * self.dt;
        for slot in self.agents.iter_mut() {
            slot.agent.step(self.dt)?;
            if k % slot.publish_every == 0 {
                let mut s = slot.agent.publish();
                s.timestamp = t;
                slot.in_flight.push_back((t + slot.link_delay, s));
            }
        }
        for i in 0..self.agents.len() {
            while self.agents[i].in_flight.front().is_some_and(|(at, _)| *at <= t + 1e-9) {
                let (_, s) = self.agents[i].in_flight.pop_front().expect("front exists");
                match self.hub.ingest_state(s, t) {
                    Ok(_) | Err(HubError::StaleSeq { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let mut dispatches = self.hub.housekeeping(t);
        self.deliver(&dispatches)?;
        let pool = self.hub.broadcast_pool(t);
        self.tick = pool.tick;
        let truth: Vec<f64> = self.agents.iter().map(|a| a.agent.truth_unified().speed).collect();
        self.recorder.record(&pool, Some(&truth));
        let mut instructions = Vec::new();
        for host in self.controllers.iter_mut() {
            instructions.extend(host.on_pool(&pool));
        }
        for instr in &instructions {
            match self.hub.route_instruction(instr, t) {
                Ok(d) => {
                    self.deliver(&d)?;
                    dispatches.extend(d);
                }
                Err(HubError::UnmappedSource(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let head = self.agents[0].agent.truth_unified();
        self.recorder.advance_head(head.arc_position);
        if self.recorder.timed_out(t) {
            return Err(HarnessError::SettlingTimeout {
                timeout_s: self.spec.settle.timeout_s,
            });
        }
        Ok(TickRecord {
            tick: k,
            time: t,
            pool,
            dispatches,
        })
    }

    /// Whether the configured laps (or the time cap) are done.
    pub fn finished(&self) -> bool {
        run_finished(&self.spec, &self.track, self.time(), self.recorder.head_travel())
    }

    pub fn run_to_end(mut self) -> Result<RunOutcome, HarnessError> {
        while !self.finished() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> RunOutcome {
        let report = build_report(
            ReportInputs {
                spec: &self.spec,
                mode: "lockstep",
                ticks: self.tick,
                duration_s: self.time(),
                settled_at: self.recorder.settled_at(),
                trigger_time: self.trigger_time(),
                counters: self.hub.counters(),
            },
            self.recorder.series(),
        );
        let (series, pool_log) = self.recorder.into_parts();
        RunOutcome {
            report,
            series,
            pool_log,
        }
    }
}

/// Whether a run at time `t` with the given head travel is done: laps
/// complete, the configured time cap reached, or a hard cap of four times the
/// nominal duration plus the settle timeout.
pub fn run_finished(spec: &ScenarioSpec, track: &Track, t: f64, head_travel: f64) -> bool {
    let cap = spec.max_duration_s.unwrap_or(f64::INFINITY);
    let laps = spec.laps as f64 * track.lap_length();
    let hard = laps / spec.base_speed * 4.0 + spec.settle.timeout_s;
    head_travel >= laps || t >= cap - 1e-9 || t >= hard
}

pub fn run_lockstep(spec: &ScenarioSpec, track: &Track) -> Result<RunOutcome, HarnessError> {
    LockstepRun::new(spec.clone(), track.clone())?.run_to_end()
}
