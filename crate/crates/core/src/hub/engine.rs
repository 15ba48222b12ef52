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

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::table::{Channel, CorrespondenceTable};
use super::HubError;
use crate::frame::{FrameId, FrameTable, FrameTransform};
use crate::track::Track;
use crate::vehicle::{ControlInstruction, SourceId, VehicleId, VehicleKind, VehicleSpec, VehicleState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterlockConfig {
    /// Platoon order, head first.
    pub order: Vec<VehicleId>,
    pub threshold: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubConfig {
    #[serde(default = "default_tick_hz")]
    pub tick_hz: f64,
    #[serde(default)]
    pub frames: FrameTable,
    #[serde(default = "default_watchdog")]
    pub watchdog_s: f64,
    #[serde(default = "yes")]
    pub dead_reckoning: bool,
    #[serde(default)]
    pub interlock: Option<InterlockConfig>,
}

fn default_tick_hz() -> f64 {
    50.0
}

fn default_watchdog() -> f64 {
    2.0
}

fn yes() -> bool {
    true
}

impl Default for HubConfig {
    fn default() -> Self {
        HubConfig {
            tick_hz: default_tick_hz(),
            frames: FrameTable::default(),
            watchdog_s: default_watchdog(),
            dead_reckoning: true,
            interlock: None,
        }
    }
}

impl HubConfig {
    pub fn tick_period(&self) -> f64 {
        1.0 / self.tick_hz
    }
}

/// Latest state of one vehicle, raw and aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub raw: VehicleState,
    pub unified: VehicleState,
    pub receive_time: f64,
    pub estimated_delay: f64,
}

/// One broadcast of the unified pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSnapshot {
    pub pool_timestamp: f64,
    pub tick: u64,
    pub states: Vec<VehicleState>,
}

/// A converted, filtered command bound for one vehicle agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub tick: u64,
    /// Expressed in the target vehicle's frame.
    pub instruction: ControlInstruction,
    pub lateral_source: Option<SourceId>,
    pub longitudinal_source: Option<SourceId>,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubCounters {
    pub stale_dropped: u64,
    pub unmapped_dropped: u64,
    pub clamped: u64,
    pub watchdog_trips: u64,
    pub interlock_holds: u64,
    pub dispatched: u64,
}

#[derive(Debug, Clone)]
struct Command {
    value: f64,
    time: f64,
    source: SourceId,
}

#[derive(Debug, Clone)]
struct VehicleSlot {
    spec: VehicleSpec,
    transform: FrameTransform,
    entry: Option<PoolEntry>,
    clock_offset: f64,
    lateral: Option<Command>,
    longitudinal: Option<Command>,
    watchdog_tripped: bool,
    interlocked: bool,
    dispatch_seq: u64,
}

/// Clock offset (hub minus remote) from one request/response exchange.
pub fn offset_from_exchange(hub_sent: f64, remote_time: f64, hub_received: f64) -> f64 {
    0.5 * (hub_sent + hub_received) - remote_time
}

pub struct HubCore {
    config: HubConfig,
    track: Option<Track>,
    vehicles: BTreeMap<VehicleId, VehicleSlot>,
    sources: BTreeSet<SourceId>,
    table: CorrespondenceTable,
    tick: u64,
    counters: HubCounters,
}

impl HubCore {
    pub fn new(config: HubConfig, track: Option<Track>) -> Self {
        HubCore {
            config,
            track,
            vehicles: BTreeMap::new(),
            sources: BTreeSet::new(),
            table: CorrespondenceTable::new(),
            tick: 0,
            counters: HubCounters::default(),
        }
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn track(&self) -> Option<&Track> {
        self.track.as_ref()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn counters(&self) -> HubCounters {
        self.counters
    }

    pub fn table(&self) -> &CorrespondenceTable {
        &self.table
    }

    pub fn register_vehicle(&mut self, spec: VehicleSpec) -> Result<(), HubError> {
        spec.validate()?;
        if self.vehicles.contains_key(&spec.vehicle_id) {
            return Err(HubError::DuplicateRegistration(alloc::format!("vehicle {}", spec.vehicle_id)));
        }
        let transform = self.config.frames.transform(spec.frame())?;
        self.vehicles.insert(
            spec.vehicle_id,
            VehicleSlot {
                spec,
                transform,
                entry: None,
                clock_offset: 0.0,
                lateral: None,
                longitudinal: None,
                watchdog_tripped: false,
                interlocked: false,
                dispatch_seq: 0,
            },
        );
        Ok(())
    }

    pub fn unregister_vehicle(&mut self, vehicle: VehicleId) {
        self.vehicles.remove(&vehicle);
        self.table.remove_vehicle(vehicle);
    }

    pub fn vehicle_spec(&self, vehicle: VehicleId) -> Option<&VehicleSpec> {
        self.vehicles.get(&vehicle).map(|s| &s.spec)
    }

    pub fn vehicle_ids(&self) -> Vec<VehicleId> {
        self.vehicles.keys().copied().collect()
    }

    pub fn register_source(&mut self, source: SourceId) -> Result<(), HubError> {
        if !self.sources.insert(source.clone()) {
            return Err(HubError::DuplicateRegistration(alloc::format!("source {source}")));
        }
        Ok(())
    }

    pub fn unregister_source(&mut self, source: &SourceId) {
        self.sources.remove(source);
        self.table.remove_source(source);
    }

    pub fn has_source(&self, source: &SourceId) -> bool {
        self.sources.contains(source)
    }

    /// Record the hub-minus-sender clock offset of a vehicle's publisher.
    pub fn set_clock_offset(&mut self, vehicle: VehicleId, offset: f64) -> Result<(), HubError> {
        let slot = self.vehicles.get_mut(&vehicle).ok_or(HubError::UnknownVehicle(vehicle))?;
        slot.clock_offset = offset;
        Ok(())
    }

    /// Align a raw state to the unified frame, place it on the track and
    /// dead-reckon it forward by the estimated transport delay.
    pub fn ingest_state(&mut self, raw: VehicleState, receive_time: f64) -> Result<&PoolEntry, HubError> {
        let id = raw.vehicle_id;
        let dead_reckoning = self.config.dead_reckoning;
        let slot = self.vehicles.get_mut(&id).ok_or(HubError::UnknownVehicle(id))?;
        if let Some(prev) = &slot.entry {
            if raw.seq <= prev.raw.seq {
                self.counters.stale_dropped += 1;
                return Err(HubError::StaleSeq {
                    vehicle: id,
                    seq: raw.seq,
                    last: prev.raw.seq,
                });
            }
        }
        let mut unified = slot.transform.to_unified(&raw)?;
        if let Some(track) = &self.track {
            unified.arc_position = track.project(&unified.pose).arc_position;
        }
        let estimated_delay = (receive_time - (raw.timestamp + slot.clock_offset)).max(0.0);
        if dead_reckoning && estimated_delay > 0.0 {
            let ahead = unified.speed * estimated_delay;
            unified.pose.x += ahead * libm::cos(unified.pose.heading);
            unified.pose.y += ahead * libm::sin(unified.pose.heading);
            unified.arc_position = match &self.track {
                Some(track) => track.wrap(unified.arc_position + ahead),
                None => unified.arc_position + ahead,
            };
        }
        slot.entry = Some(PoolEntry {
            raw,
            unified,
            receive_time,
            estimated_delay,
        });
        Ok(slot.entry.as_ref().expect("just stored"))
    }

    pub fn pool_entry(&self, vehicle: VehicleId) -> Option<&PoolEntry> {
        self.vehicles.get(&vehicle).and_then(|s| s.entry.as_ref())
    }

    /// Advance the tick and snapshot every known vehicle's unified state.
    pub fn broadcast_pool(&mut self, now: f64) -> PoolSnapshot {
        self.tick += 1;
        PoolSnapshot {
            pool_timestamp: now,
            tick: self.tick,
            states: self
                .vehicles
                .values()
                .filter_map(|s| s.entry.as_ref().map(|e| e.unified.clone()))
                .collect(),
        }
    }

    /// Age of the oldest pool entry at `now`, measured from its receipt
    /// (equivalently `now - raw.timestamp - offset - estimated_delay`).
    pub fn staleness(&self, now: f64) -> f64 {
        self.vehicles
            .values()
            .filter_map(|s| s.entry.as_ref())
            .map(|e| now - e.receive_time)
            .fold(0.0, f64::max)
    }

    pub fn remap(&mut self, source: &SourceId, vehicle: VehicleId, channel: Channel, force: bool) -> Result<(), HubError> {
        if !self.sources.contains(source) {
            return Err(HubError::UnknownSource(source.clone()));
        }
        if !self.vehicles.contains_key(&vehicle) {
            return Err(HubError::UnknownVehicle(vehicle));
        }
        self.table.remap(source, vehicle, channel, force)
    }

    /// Route a unified instruction through the correspondence table. The
    /// table decides the target regardless of `instr.target_vehicle_id`.
    pub fn route_instruction(&mut self, instr: &ControlInstruction, now: f64) -> Result<Vec<Dispatch>, HubError> {
        let source = &instr.source_id;
        if !self.sources.contains(source) {
            return Err(HubError::UnknownSource(source.clone()));
        }
        if instr.source_frame != FrameId::Unified {
            return Err(crate::error::CoreError::FrameMismatch {
                expected: FrameId::Unified,
                found: instr.source_frame,
            }
            .into());
        }
        let lateral = self.table.lateral_target(source);
        let longitudinal = self.table.longitudinal_target(source);
        if lateral.is_none() && longitudinal.is_none() {
            self.counters.unmapped_dropped += 1;
            return Err(HubError::UnmappedSource(source.clone()));
        }
        for v in [lateral, longitudinal].into_iter().flatten() {
            if !self.vehicles.contains_key(&v) {
                return Err(HubError::UnknownTarget {
                    source_id: source.clone(),
                    vehicle: v,
                });
            }
        }
        if let Some(v) = lateral {
            let slot = self.vehicles.get_mut(&v).expect("checked");
            slot.lateral = Some(Command {
                value: instr.desired_front_wheel_angle,
                time: now,
                source: source.clone(),
            });
        }
        if let Some(v) = longitudinal {
            let slot = self.vehicles.get_mut(&v).expect("checked");
            slot.longitudinal = Some(Command {
                value: instr.desired_speed,
                time: now,
                source: source.clone(),
            });
            slot.watchdog_tripped = false;
        }
        let mut out = Vec::new();
        let mut targets: Vec<VehicleId> = [lateral, longitudinal].into_iter().flatten().collect();
        targets.dedup();
        for v in targets {
            out.push(self.compose(v, now)?);
        }
        Ok(out)
    }

    /// Periodic checks: the missing-source watchdog and the interlock.
    pub fn housekeeping(&mut self, now: f64) -> Vec<Dispatch> {
        let interlocked = self.interlocked_vehicles();
        let watchdog = self.config.watchdog_s;
        let mut due = Vec::new();
        for (id, slot) in self.vehicles.iter_mut() {
            let stale = slot.longitudinal.as_ref().map_or(false, |c| now - c.time > watchdog);
            if stale && !slot.watchdog_tripped {
                slot.watchdog_tripped = true;
                self.counters.watchdog_trips += 1;
                due.push(*id);
            }
            let locked = interlocked.contains(id);
            if locked != slot.interlocked {
                due.push(*id);
            }
        }
        due.sort();
        due.dedup();
        due.into_iter().filter_map(|v| self.compose(v, now).ok()).collect()
    }

    fn interlocked_vehicles(&self) -> BTreeSet<VehicleId> {
        let mut out = BTreeSet::new();
        let (Some(cfg), Some(track)) = (&self.config.interlock, &self.track) else {
            return out;
        };
        for pair in cfg.order.windows(2) {
            let (leader, follower) = (pair[0], pair[1]);
            let (Some(l), Some(f)) = (self.vehicles.get(&leader), self.vehicles.get(&follower)) else {
                continue;
            };
            if l.spec.kind != VehicleKind::EmulatedPhysical || f.spec.kind != VehicleKind::EmulatedPhysical {
                continue;
            }
            let (Some(le), Some(fe)) = (&l.entry, &f.entry) else {
                continue;
            };
            if track.signed_gap(&fe.unified, &le.unified) <= cfg.threshold + cfg.margin {
                out.insert(follower);
            }
        }
        out
    }

    fn compose(&mut self, vehicle: VehicleId, now: f64) -> Result<Dispatch, HubError> {
        let locked = self.interlocked_vehicles().contains(&vehicle);
        let tick = self.tick;
        let slot = self.vehicles.get_mut(&vehicle).ok_or(HubError::UnknownVehicle(vehicle))?;
        let spec = &slot.spec;
        let raw_angle = slot.lateral.as_ref().map_or(0.0, |c| c.value);
        let raw_speed = match (&slot.longitudinal, &slot.entry) {
            (Some(c), _) => c.value,
            (None, Some(e)) => e.unified.speed,
            (None, None) => 0.0,
        };
        let angle = raw_angle.clamp(-spec.max_wheel_angle, spec.max_wheel_angle);
        let mut speed = if raw_speed.is_nan() { 0.0 } else { raw_speed.clamp(0.0, spec.max_speed) };
        let clamped = angle != raw_angle || speed != raw_speed;
        if clamped {
            self.counters.clamped += 1;
        }
        if slot.watchdog_tripped {
            speed = 0.0;
        }
        slot.interlocked = locked;
        if locked {
            speed = 0.0;
            self.counters.interlock_holds += 1;
        }
        slot.dispatch_seq += 1;
        // a held command whose source has been remapped elsewhere stays in
        // force but is no longer attributed to that source
        let lateral_source = slot
            .lateral
            .as_ref()
            .map(|c| c.source.clone())
            .filter(|s| self.table.lateral_target(s) == Some(vehicle));
        let longitudinal_source = slot
            .longitudinal
            .as_ref()
            .map(|c| c.source.clone())
            .filter(|s| self.table.longitudinal_target(s) == Some(vehicle));
        let unified = ControlInstruction {
            target_vehicle_id: vehicle,
            desired_front_wheel_angle: angle,
            desired_speed: speed,
            source_id: longitudinal_source
                .clone()
                .or_else(|| lateral_source.clone())
                .unwrap_or_else(|| SourceId::from("hub")),
            source_frame: FrameId::Unified,
            timestamp: now,
            seq: slot.dispatch_seq,
        };
        let instruction = slot.transform.from_unified(&unified)?;
        self.counters.dispatched += 1;
        Ok(Dispatch {
            tick,
            instruction,
            lateral_source,
            longitudinal_source,
            clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Pose;
    use crate::vehicle::Role;

    fn hub() -> HubCore {
        let mut h = HubCore::new(HubConfig::default(), Some(Track::default_loop()));
        h.register_vehicle(VehicleSpec::new(VehicleId(1), VehicleKind::Virtual, Role::Head)).unwrap();
        h.register_vehicle(VehicleSpec::new(VehicleId(2), VehicleKind::EmulatedPhysical, Role::Hdv)).unwrap();
        h.register_source(SourceId::from("s")).unwrap();
        h
    }

    fn state(id: u32, frame: FrameId, x: f64, v: f64, t: f64, seq: u64) -> VehicleState {
        let mut s = VehicleState::at_rest(VehicleId(id), frame, Pose::new(x, 0.0, 0.0));
        s.speed = v;
        s.timestamp = t;
        s.seq = seq;
        s
    }

    fn instr(speed: f64, angle: f64) -> ControlInstruction {
        ControlInstruction::unified(VehicleId(1), SourceId::from("s"), angle, speed, 0.0, 1)
    }

    #[test]
    fn dead_reckoning_along_track() {
        let mut h = hub();
        let e = h.ingest_state(state(1, FrameId::Virtual, 10.0, 2.8, 5.0, 1), 5.1).unwrap();
        assert!((e.estimated_delay - 0.1).abs() < 1e-12);
        assert!((e.unified.arc_position - 10.28).abs() < 1e-9);
        assert!((e.unified.pose.x - 10.28).abs() < 1e-9);
        let e = h.ingest_state(state(1, FrameId::Virtual, 12.0, 2.8, 6.0, 2), 6.0).unwrap();
        assert_eq!(e.estimated_delay, 0.0);
        assert!((e.unified.arc_position - 12.0).abs() < 1e-12);
    }

    #[test]
    fn clock_offset_enters_delay() {
        let mut h = hub();
        // remote clock runs 100 s behind the hub
        h.set_clock_offset(VehicleId(1), offset_from_exchange(200.0, 100.1, 200.2)).unwrap();
        let e = h.ingest_state(state(1, FrameId::Virtual, 10.0, 0.0, 100.0, 1), 200.05).unwrap();
        assert!((e.estimated_delay - 0.05).abs() < 1e-9);
    }

    #[test]
    fn stale_and_unknown() {
        let mut h = hub();
        h.ingest_state(state(1, FrameId::Virtual, 1.0, 1.0, 0.0, 5), 0.0).unwrap();
        assert!(matches!(
            h.ingest_state(state(1, FrameId::Virtual, 1.0, 1.0, 0.0, 5), 0.0),
            Err(HubError::StaleSeq { .. })
        ));
        assert_eq!(h.counters().stale_dropped, 1);
        assert!(matches!(
            h.ingest_state(state(9, FrameId::Virtual, 1.0, 1.0, 0.0, 1), 0.0),
            Err(HubError::UnknownVehicle(VehicleId(9)))
        ));
        assert!(h.ingest_state(state(1, FrameId::Physical, 1.0, 1.0, 0.0, 6), 0.0).is_err());
    }

    #[test]
    fn physical_state_is_scaled_into_pool() {
        let mut h = hub();
        let e = h.ingest_state(state(2, FrameId::Physical, 0.5, 0.2, 0.0, 1), 0.0).unwrap();
        assert_eq!(e.unified.frame, FrameId::Unified);
        assert!((e.unified.speed - 2.8).abs() < 1e-12);
        assert!((e.unified.arc_position - 7.0).abs() < 1e-9);
    }

    #[test]
    fn broadcast_counts() {
        let mut h = hub();
        let p = h.broadcast_pool(0.0);
        assert!(p.states.is_empty());
        assert_eq!(p.tick, 1);
        h.ingest_state(state(1, FrameId::Virtual, 1.0, 1.0, 0.0, 1), 0.0).unwrap();
        h.ingest_state(state(2, FrameId::Physical, 1.0, 0.1, 0.0, 1), 0.0).unwrap();
        let p = h.broadcast_pool(0.02);
        assert_eq!(p.states.len(), 2);
        assert_eq!(p.tick, 2);
        assert!(p.states.iter().all(|s| s.frame == FrameId::Unified));
    }

    #[test]
    fn routing_converts_and_clamps() {
        let mut h = hub();
        h.remap(&SourceId::from("s"), VehicleId(2), Channel::Both, false).unwrap();
        let d = h.route_instruction(&instr(2.8, 0.1), 0.0).unwrap();
        assert_eq!(d.len(), 1);
        let i = &d[0].instruction;
        assert_eq!(i.target_vehicle_id, VehicleId(2));
        assert_eq!(i.source_frame, FrameId::Physical);
        assert!((i.desired_speed - 0.2).abs() < 1e-12);
        assert!(!d[0].clamped);

        let d = h.route_instruction(&instr(-1.0, 2.0), 0.0).unwrap();
        assert_eq!(d[0].instruction.desired_speed, 0.0);
        assert_eq!(d[0].instruction.desired_front_wheel_angle, 0.52);
        assert!(d[0].clamped);

        h.remap(&SourceId::from("s"), VehicleId(1), Channel::Both, false).unwrap();
        let d = h.route_instruction(&instr(99.0, 0.0), 0.0).unwrap();
        assert!((d[0].instruction.desired_speed - 30.0 / 3.6).abs() < 1e-12);
        assert_eq!(h.counters().clamped, 2);
    }

    #[test]
    fn swapped_channel_leaves_hold_unattributed() {
        let mut h = hub();
        let s = SourceId::from("s");
        h.remap(&s, VehicleId(1), Channel::Both, false).unwrap();
        h.route_instruction(&instr(2.8, 0.05), 0.0).unwrap();
        h.remap(&s, VehicleId(2), Channel::Longitudinal, true).unwrap();
        let d = h.route_instruction(&instr(1.4, 0.02), 0.02).unwrap();
        assert_eq!(d.len(), 2);
        let old = d.iter().find(|x| x.instruction.target_vehicle_id == VehicleId(1)).unwrap();
        assert_eq!(old.lateral_source, Some(s.clone()));
        assert_eq!(old.longitudinal_source, None);
        assert_eq!(old.instruction.desired_speed, 2.8);
        let new = d.iter().find(|x| x.instruction.target_vehicle_id == VehicleId(2)).unwrap();
        assert_eq!(new.longitudinal_source, Some(s));
        assert!((new.instruction.desired_speed - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unmapped_and_unknown_sources() {
        let mut h = hub();
        assert!(matches!(
            h.route_instruction(&instr(1.0, 0.0), 0.0),
            Err(HubError::UnmappedSource(_))
        ));
        assert_eq!(h.counters().unmapped_dropped, 1);
        let mut other = instr(1.0, 0.0);
        other.source_id = SourceId::from("ghost");
        assert!(matches!(h.route_instruction(&other, 0.0), Err(HubError::UnknownSource(_))));
        assert!(matches!(
            h.remap(&SourceId::from("s"), VehicleId(7), Channel::Both, false),
            Err(HubError::UnknownVehicle(VehicleId(7)))
        ));
    }

    #[test]
    fn watchdog_zeroes_speed_once() {
        let mut h = hub();
        h.remap(&SourceId::from("s"), VehicleId(1), Channel::Both, false).unwrap();
        h.route_instruction(&instr(2.8, 0.05), 0.0).unwrap();
        assert!(h.housekeeping(1.9).is_empty());
        let d = h.housekeeping(2.1);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].instruction.desired_speed, 0.0);
        assert_eq!(d[0].instruction.desired_front_wheel_angle, 0.05);
        assert!(h.housekeeping(3.0).is_empty());
        let d = h.route_instruction(&instr(2.0, 0.0), 3.1).unwrap();
        assert_eq!(d[0].instruction.desired_speed, 2.0);
    }

    #[test]
    fn interlock_stops_physical_follower() {
        let mut cfg = HubConfig::default();
        cfg.interlock = Some(InterlockConfig {
            order: alloc::vec![VehicleId(1), VehicleId(2)],
            threshold: 4.6,
            margin: 0.5,
        });
        let mut h = HubCore::new(cfg, Some(Track::default_loop()));
        h.register_vehicle(VehicleSpec::new(VehicleId(1), VehicleKind::EmulatedPhysical, Role::Head)).unwrap();
        h.register_vehicle(VehicleSpec::new(VehicleId(2), VehicleKind::EmulatedPhysical, Role::Hdv)).unwrap();
        h.register_source(SourceId::from("s")).unwrap();
        h.remap(&SourceId::from("s"), VehicleId(2), Channel::Both, false).unwrap();
        // leader at 16 m, follower at 10 m (scaled by 14 into the pool)
        h.ingest_state(state(1, FrameId::Physical, 16.0 / 14.0, 0.1, 0.0, 1), 0.0).unwrap();
        h.ingest_state(state(2, FrameId::Physical, 10.0 / 14.0, 0.1, 0.0, 1), 0.0).unwrap();
        let d = h.route_instruction(&instr(2.8, 0.0), 0.0).unwrap();
        assert!(d[0].instruction.desired_speed > 0.0);
        h.ingest_state(state(2, FrameId::Physical, 11.0 / 14.0, 0.1, 0.0, 2), 0.0).unwrap();
        let d = h.housekeeping(0.02);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].instruction.desired_speed, 0.0);
        let d = h.route_instruction(&instr(2.8, 0.0), 0.04).unwrap();
        assert_eq!(d[0].instruction.desired_speed, 0.0);
    }
}
