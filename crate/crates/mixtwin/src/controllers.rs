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

//! Control sources: CACC, scripted drivers and the head-profile executor.
//! Each is a step function over a received pool snapshot.

use std::collections::BTreeMap;

use mixtwin_core::control::{
    accel_to_speed_cmd, lateral_angle, CaccParams, LateralParams, ScriptedDriver, ScriptedDriverParams,
};
use mixtwin_core::dynamics::lag_gain;
use mixtwin_core::hub::PoolSnapshot;
use mixtwin_core::profile::{head_speed, HeadProfile, Perturbation, TriggerLatch};
use mixtwin_core::{ControlInstruction, CoreError, SourceId, Track, VehicleId, VehicleState};

use crate::scenario::{GapMetric, ScenarioSpec, SettleSpec, SourceKind};

fn find(pool: &PoolSnapshot, id: VehicleId) -> Option<&VehicleState> {
    pool.states.iter().find(|s| s.vehicle_id == id)
}

/// Watches platoon gaps until every one has stayed within the band around
/// the desired spacing for the hold time.
#[derive(Debug, Clone)]
pub struct SettleMonitor {
    order: Vec<VehicleId>,
    d_des: f64,
    spec: SettleSpec,
    metric: GapMetric,
    inside_since: Option<f64>,
    settled_at: Option<f64>,
}

impl SettleMonitor {
    pub fn new(order: Vec<VehicleId>, d_des: f64, spec: SettleSpec, metric: GapMetric) -> Self {
        SettleMonitor {
            order,
            d_des,
            spec,
            metric,
            inside_since: None,
            settled_at: None,
        }
    }

    pub fn from_scenario(s: &ScenarioSpec) -> Self {
        SettleMonitor::new(s.ids(), s.cacc.d_des, s.settle, s.gap_metric)
    }

    pub fn settled_at(&self) -> Option<f64> {
        self.settled_at
    }

    /// True once settled; stays true.
    pub fn update(&mut self, pool: &PoolSnapshot, track: &Track) -> bool {
        if self.settled_at.is_some() {
            return true;
        }
        let t = pool.pool_timestamp;
        let inside = self.order.iter().all(|id| find(pool, *id).is_some())
            && self.order.windows(2).all(|w| {
                let (l, f) = (find(pool, w[0]).expect("present"), find(pool, w[1]).expect("present"));
                (self.metric.gap(track, f, l) - self.d_des).abs() <= self.spec.band * self.d_des
            });
        if !inside {
            self.inside_since = None;
            return false;
        }
        let since = *self.inside_since.get_or_insert(t);
        if t - since >= self.spec.hold_s - 1e-9 {
            self.settled_at = Some(t);
            return true;
        }
        false
    }

    pub fn timed_out(&self, t: f64) -> bool {
        self.settled_at.is_none() && t > self.spec.timeout_s
    }
}

/// Drives the head along its speed profile. Waits for the platoon to settle,
/// arms the trigger, and schedules the perturbation at the first qualifying
/// crossing of the trigger point.
#[derive(Debug, Clone)]
pub struct HeadExecutor {
    profile: HeadProfile,
    shape: Option<Perturbation>,
    latch: Option<TriggerLatch>,
    monitor: SettleMonitor,
    /// Fraction of a speed error the head's actuator closes per tick.
    alpha: f64,
    trigger_time: Option<f64>,
}

impl HeadExecutor {
    pub fn new(
        base_speed: f64,
        perturbation: Option<(Perturbation, TriggerLatch)>,
        monitor: SettleMonitor,
        actuator_tau: f64,
        dt: f64,
    ) -> Self {
        let (shape, latch) = match perturbation {
            Some((s, l)) => (Some(s), Some(l)),
            None => (None, None),
        };
        HeadExecutor {
            profile: HeadProfile::cruise(base_speed),
            shape,
            latch,
            monitor,
            alpha: lag_gain(actuator_tau, dt),
            trigger_time: None,
        }
    }

    pub fn trigger_time(&self) -> Option<f64> {
        self.trigger_time
    }

    pub fn settled_at(&self) -> Option<f64> {
        self.monitor.settled_at()
    }

    pub fn profile(&self) -> &HeadProfile {
        &self.profile
    }

    /// Unified speed command for the step that starts at the pool time.
    /// Inverts the first-order actuator so the head's speed lands on the
    /// profile at the next tick.
    pub fn speed_cmd(&mut self, pool: &PoolSnapshot, head: &VehicleState, track: &Track, dt: f64) -> f64 {
        let t = pool.pool_timestamp;
        if self.monitor.update(pool, track) {
            if let Some(latch) = self.latch.as_mut() {
                latch.arm();
            }
        }
        if let (Some(latch), Some(shape)) = (self.latch.as_mut(), self.shape) {
            if latch.update(head.arc_position) {
                self.profile.schedule(t, shape);
                self.trigger_time = Some(t);
            }
        }
        let now = head_speed(t, &self.profile);
        let next = head_speed(t + dt, &self.profile);
        (now + (next - now) / self.alpha).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub enum Law {
    Cacc(CaccParams),
    Scripted(ScriptedDriver),
    Head(Box<HeadExecutor>),
}

/// One source driving one vehicle on both channels.
#[derive(Debug, Clone)]
pub struct Binding {
    pub source: SourceId,
    pub vehicle: VehicleId,
    pub predecessor: Option<VehicleId>,
    pub head: VehicleId,
    pub law: Law,
}

/// A controller process: any number of bindings sharing one pool feed.
#[derive(Debug, Clone)]
pub struct ControllerHost {
    entity_id: String,
    track: Track,
    lateral: LateralParams,
    metric: GapMetric,
    dt: f64,
    bindings: Vec<Binding>,
    seq: u64,
    last_cmd: BTreeMap<VehicleId, f64>,
}

impl ControllerHost {
    pub fn new(entity_id: &str, track: Track, lateral: LateralParams, metric: GapMetric, dt: f64) -> Self {
        ControllerHost {
            entity_id: entity_id.into(),
            track,
            lateral,
            metric,
            dt,
            bindings: Vec::new(),
            seq: 0,
            last_cmd: BTreeMap::new(),
        }
    }

    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    /// Conventional source id for a vehicle served by this entity.
    pub fn source_for(entity_id: &str, vehicle: VehicleId) -> SourceId {
        SourceId::new(format!("{entity_id}/{}", vehicle.0))
    }

    pub fn add(&mut self, vehicle: VehicleId, predecessor: Option<VehicleId>, head: VehicleId, law: Law) -> SourceId {
        let source = Self::source_for(&self.entity_id, vehicle);
        self.bindings.push(Binding {
            source: source.clone(),
            vehicle,
            predecessor,
            head,
            law,
        });
        source
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn sources(&self) -> Vec<SourceId> {
        self.bindings.iter().map(|b| b.source.clone()).collect()
    }

    pub fn head_executor(&self) -> Option<&HeadExecutor> {
        self.bindings.iter().find_map(|b| match &b.law {
            Law::Head(h) => Some(h.as_ref()),
            _ => None,
        })
    }

    /// Unified instructions for every binding whose inputs are in the pool.
    pub fn on_pool(&mut self, pool: &PoolSnapshot) -> Vec<ControlInstruction> {
        let mut out = Vec::with_capacity(self.bindings.len());
        for b in self.bindings.iter_mut() {
            let Some(own) = find(pool, b.vehicle) else {
                continue;
            };
            let speed = match &mut b.law {
                Law::Head(exec) => exec.speed_cmd(pool, own, &self.track, self.dt),
                Law::Cacc(params) => {
                    match (b.predecessor.and_then(|p| find(pool, p)), find(pool, b.head)) {
                        (Some(pred), Some(head)) => {
                            let gap = self.metric.gap(&self.track, own, pred);
                            let a = params
                                .unclamped(gap - params.d_des, head.speed - own.speed, pred.speed - own.speed)
                                .clamp(params.a_min, params.a_max);
                            accel_to_speed_cmd(a, own.speed, self.dt)
                        }
                        _ => own.speed,
                    }
                }
                Law::Scripted(driver) => match b.predecessor.and_then(|p| find(pool, p)) {
                    Some(pred) => {
                        let gap = self.metric.gap(&self.track, own, pred);
                        driver.speed_cmd_from_gap(pool.pool_timestamp, own.speed, gap, self.dt)
                    }
                    None => own.speed,
                },
            };
            let angle = lateral_angle(own, &self.track, &self.lateral);
            self.seq += 1;
            self.last_cmd.insert(b.vehicle, speed);
            out.push(ControlInstruction::unified(
                b.vehicle,
                b.source.clone(),
                angle,
                speed,
                pool.pool_timestamp,
                self.seq,
            ));
        }
        out
    }
}

/// Which controller entity serves a platoon row.
pub fn entity_for(kind: SourceKind) -> &'static str {
    match kind {
        SourceKind::Cacc => "cacc",
        SourceKind::HeadProfile | SourceKind::Scripted | SourceKind::Human => "drivers",
    }
}

/// Build the controller entities of a scenario: CACC rows in one, the head
/// profile and the driver stand-ins in the other. Live human rows get none.
pub fn build_controllers(
    spec: &ScenarioSpec,
    track: &Track,
    head_tau: f64,
) -> Result<Vec<ControllerHost>, CoreError> {
    let dt = spec.tick_period();
    let ids = spec.ids();
    let Some(&head) = ids.first() else {
        return Ok(Vec::new());
    };
    let mut hosts: Vec<ControllerHost> = Vec::new();
    for (i, e) in spec.platoon.iter().enumerate() {
        if !e.automated() {
            continue;
        }
        let name = entity_for(e.source);
        let idx = match hosts.iter().position(|h| h.entity_id == name) {
            Some(i) => i,
            None => {
                hosts.push(ControllerHost::new(name, track.clone(), spec.lateral, spec.gap_metric, dt));
                hosts.len() - 1
            }
        };
        let law = match e.source {
            SourceKind::HeadProfile => {
                let perturbation = match &spec.perturbation {
                    Some(p) => Some((p.shape, TriggerLatch::new(track, p.trigger_point, p.trigger_lap)?)),
                    None => None,
                };
                Law::Head(Box::new(HeadExecutor::new(
                    spec.base_speed,
                    perturbation,
                    SettleMonitor::from_scenario(spec),
                    head_tau,
                    dt,
                )))
            }
            SourceKind::Cacc => Law::Cacc(spec.cacc),
            SourceKind::Scripted | SourceKind::Human => {
                let params: ScriptedDriverParams = e.driver_params().map_err(CoreError::InvalidParameter)?;
                Law::Scripted(ScriptedDriver::new(params))
            }
        };
        let predecessor = (i > 0).then(|| ids[i - 1]);
        hosts[idx].add(e.vehicle_id, predecessor, head, law);
    }
    Ok(hosts)
}
