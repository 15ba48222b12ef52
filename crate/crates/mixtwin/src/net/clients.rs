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

//! Vehicle agent, controller and observer clients.

use std::collections::{BTreeMap, VecDeque};
use std::net::SocketAddr;
use std::time::Duration;

use tokio::sync::watch;
use tokio::time::Instant;

use mixtwin_core::hub::{Channel, PoolSnapshot};
use mixtwin_core::{SourceId, VehicleState};

use super::{tick_period, Clock, Link, NetError};
use crate::agents::VehicleAgent;
use crate::controllers::ControllerHost;
use crate::protocol::{AdminCommandPayload, EntityKind, Payload, RegisterPayload};

const REMAP_RETRY: Duration = Duration::from_millis(100);

#[derive(Debug, Clone)]
pub struct AgentOptions {
    pub entity_id: String,
    pub tick_hz: f64,
    /// Extra one-way delay applied to published states, s.
    pub link_delay_s: f64,
    /// Offset of the agent's clock from the process clock, s.
    pub clock_skew_s: f64,
}

impl AgentOptions {
    pub fn new(entity_id: impl Into<String>, tick_hz: f64) -> Self {
        AgentOptions {
            entity_id: entity_id.into(),
            tick_hz,
            link_delay_s: 0.0,
            clock_skew_s: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentSummary {
    pub steps: u64,
    pub published: u64,
    pub dispatches: u64,
    /// Source of every applied dispatch, in arrival order.
    pub sources: Vec<SourceId>,
    pub truth: VehicleState,
}

/// Drive one vehicle against a hub until `stop` flips or the hub goes away.
pub async fn run_agent(
    addr: SocketAddr,
    mut agent: VehicleAgent,
    opts: AgentOptions,
    mut stop: watch::Receiver<bool>,
) -> Result<AgentSummary, NetError> {
    let clock = Clock::start().skewed(opts.clock_skew_s);
    let mut link = Link::connect(addr, clock).await?;
    let spec = agent.spec().clone();
    link.register(RegisterPayload {
        entity_kind: EntityKind::VehicleAgent,
        entity_id: opts.entity_id.clone(),
        frame: Some(spec.frame()),
        capabilities: vec!["state".into(), "dispatch".into()],
        sources: Vec::new(),
        vehicle: Some(spec),
    })
    .await?;
    let dt = 1.0 / opts.tick_hz;
    let publish_every = agent.publish_every(opts.tick_hz);
    let delay = Duration::from_secs_f64(opts.link_delay_s.max(0.0));
    let mut in_flight: VecDeque<(Instant, VehicleState)> = VecDeque::new();
    let period = tick_period(opts.tick_hz);
    let mut interval = tokio::time::interval(period);
    let mut last_tick = Instant::now();
    let mut summary = AgentSummary {
        steps: 0,
        published: 0,
        dispatches: 0,
        sources: Vec::new(),
        truth: agent.truth_unified(),
    };
    loop {
        tokio::select! {
            biased;
            _ = stop.changed() => break,
            at = interval.tick() => {
                last_tick = at;
                agent.step(dt)?;
                summary.steps += 1;
                if summary.steps % publish_every == 0 {
                    let mut s = agent.publish();
                    s.timestamp = clock.now();
                    in_flight.push_back((Instant::now() + delay, s));
                }
                let now = Instant::now();
                while in_flight.front().is_some_and(|(due, _)| *due <= now) {
                    let (_, s) = in_flight.pop_front().expect("front exists");
                    link.send(Payload::StateUpdate(s)).await?;
                    summary.published += 1;
                }
            }
            env = link.recv() => {
                let env = env?;
                match &env.payload {
                    Payload::InstructionDispatch(d) => {
                        summary.dispatches += 1;
                        summary.sources.push(d.instruction.source_id.clone());
                        if let Err(e) = agent.command(d.instruction.clone()) {
                            log::warn!("{}: rejected dispatch: {e}", opts.entity_id);
                        }
                    }
                    Payload::Error(e) => log::warn!("{}: hub error {}: {}", opts.entity_id, e.kind, e.message),
                    _ => {
                        if link.answer_heartbeat(&env).await? {
                            align_phase(&mut interval, last_tick, period);
                        }
                    }
                }
            }
        }
    }
    summary.truth = agent.truth_unified();
    link.close().await;
    Ok(summary)
}

/// Hub heartbeats leave on a hub tick. Shift the agent's own ticks to sit
/// half a period away from it so each state lands well inside a pool window.
fn align_phase(interval: &mut tokio::time::Interval, last_tick: Instant, period: Duration) {
    let now = Instant::now();
    let phase = now.saturating_duration_since(last_tick).as_secs_f64() % period.as_secs_f64();
    let error = phase - period.as_secs_f64() / 2.0;
    if error.abs() > period.as_secs_f64() / 4.0 {
        interval.reset_at(now + period / 2);
    }
}

#[derive(Debug, Clone)]
pub struct ControllerSummary {
    pub host: ControllerHost,
    pub pools: u64,
    pub instructions: u64,
    pub remapped: usize,
}

/// Serve a controller host: register its sources, map each to its vehicle
/// (retrying until the vehicle exists), then answer every pool.
pub async fn run_controller(addr: SocketAddr, mut host: ControllerHost, mut stop: watch::Receiver<bool>) -> Result<ControllerSummary, NetError> {
    let mut link = Link::connect(addr, Clock::start()).await?;
    link.register(RegisterPayload {
        entity_kind: EntityKind::Controller,
        entity_id: host.entity_id().to_string(),
        frame: None,
        capabilities: vec!["instruction".into()],
        sources: host.sources(),
        vehicle: None,
    })
    .await?;
    let mut summary = ControllerSummary {
        host: host.clone(),
        pools: 0,
        instructions: 0,
        remapped: 0,
    };
    let mut pending: BTreeMap<u64, usize> = BTreeMap::new();
    let mut retry: Vec<usize> = (0..host.bindings().len()).collect();
    let mut retry_timer = tokio::time::interval(REMAP_RETRY);
    loop {
        tokio::select! {
            biased;
            _ = stop.changed() => break,
            _ = retry_timer.tick(), if !retry.is_empty() => {
                for i in std::mem::take(&mut retry) {
                    let b = &host.bindings()[i];
                    let cmd = AdminCommandPayload::Remap {
                        source_id: b.source.clone(),
                        vehicle_id: b.vehicle,
                        channel: Channel::Both,
                        force: false,
                    };
                    let seq = link.send(Payload::AdminCommand(cmd)).await?;
                    pending.insert(seq, i);
                }
            }
            env = link.recv() => {
                let env = env?;
                match &env.payload {
                    Payload::StatePool(pool) => {
                        summary.pools += 1;
                        for instr in host.on_pool(pool) {
                            link.send(Payload::Instruction(instr)).await?;
                            summary.instructions += 1;
                        }
                    }
                    Payload::AdminAck(ack) => {
                        if let Some(i) = pending.remove(&ack.command_seq) {
                            if ack.ok {
                                summary.remapped += 1;
                            } else {
                                log::debug!("remap of binding {i} refused: {:?}; retrying", ack.error);
                                retry.push(i);
                            }
                        }
                    }
                    Payload::Error(e) => log::warn!("{}: hub error {}: {}", host.entity_id(), e.kind, e.message),
                    _ => {
                        link.answer_heartbeat(&env).await?;
                    }
                }
            }
        }
    }
    summary.host = host;
    link.close().await;
    Ok(summary)
}

/// A read-only pool subscriber.
pub struct Observer {
    link: Link,
}

impl Observer {
    pub async fn connect(addr: SocketAddr, entity_id: &str) -> Result<Observer, NetError> {
        Observer::register(Link::connect(addr, Clock::start()).await?, entity_id).await
    }

    pub async fn connect_ws(addr: SocketAddr, entity_id: &str) -> Result<Observer, NetError> {
        Observer::register(Link::connect_ws(addr, Clock::start()).await?, entity_id).await
    }

    async fn register(mut link: Link, entity_id: &str) -> Result<Observer, NetError> {
        link.register(RegisterPayload {
            entity_kind: EntityKind::Observer,
            entity_id: entity_id.into(),
            frame: None,
            capabilities: Vec::new(),
            sources: Vec::new(),
            vehicle: None,
        })
        .await?;
        Ok(Observer { link })
    }

    /// Next pool broadcast; other traffic is skipped.
    pub async fn next_pool(&mut self) -> Result<PoolSnapshot, NetError> {
        loop {
            let env = self.link.recv().await?;
            match env.payload {
                Payload::StatePool(p) => return Ok(p),
                _ => {
                    self.link.answer_heartbeat(&env).await?;
                }
            }
        }
    }

    pub async fn close(self) {
        self.link.close().await;
    }
}
