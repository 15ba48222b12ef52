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

//! Standalone configuration files for the `hub` and `agent` commands.

use std::net::SocketAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mixtwin_core::control::{lateral_angle, LateralParams};
use mixtwin_core::hub::{HubConfig, InterlockConfig};
use mixtwin_core::{FrameId, FrameTable, VehicleState};

use crate::agents::VehicleAgent;
use crate::net::{AgentOptions, ServerConfig};
use crate::scenario::{resolve_track, PlatoonEntry, TrackSource};

fn tick_hz() -> f64 {
    50.0
}

fn watchdog() -> f64 {
    2.0
}

fn yes() -> bool {
    true
}

fn capacity() -> usize {
    256
}

fn heartbeat() -> f64 {
    1.0
}

fn start_point() -> char {
    'A'
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubFile {
    #[serde(default = "tick_hz")]
    pub tick_hz: f64,
    #[serde(default)]
    pub frames: FrameTable,
    #[serde(default = "watchdog")]
    pub watchdog_s: f64,
    #[serde(default = "yes")]
    pub dead_reckoning: bool,
    #[serde(default)]
    pub interlock: Option<InterlockConfig>,
    #[serde(default)]
    pub track: Option<TrackSource>,
    #[serde(default = "capacity")]
    pub outbound_capacity: usize,
    #[serde(default = "heartbeat")]
    pub heartbeat_s: f64,
}

impl Default for HubFile {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl HubFile {
    pub fn server_config(&self, listen: SocketAddr, ws_listen: Option<SocketAddr>, base_dir: Option<&Path>) -> Result<ServerConfig, String> {
        if !(self.tick_hz > 0.0 && self.watchdog_s > 0.0 && self.heartbeat_s > 0.0) {
            return Err("tick_hz, watchdog_s and heartbeat_s must be positive".into());
        }
        Ok(ServerConfig {
            listen,
            ws_listen,
            hub: HubConfig {
                tick_hz: self.tick_hz,
                frames: self.frames,
                watchdog_s: self.watchdog_s,
                dead_reckoning: self.dead_reckoning,
                interlock: self.interlock.clone(),
            },
            track: Some(resolve_track(self.track.as_ref(), base_dir)?),
            outbound_capacity: self.outbound_capacity,
            heartbeat_s: self.heartbeat_s,
        })
    }
}

/// One vehicle agent process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    #[serde(default)]
    pub entity_id: Option<String>,
    pub vehicle: PlatoonEntry,
    /// Named track point to start from.
    #[serde(default = "start_point")]
    pub start_point: char,
    /// Arc distance behind the start point, m.
    #[serde(default)]
    pub start_offset: f64,
    #[serde(default)]
    pub start_speed: f64,
    #[serde(default = "tick_hz")]
    pub tick_hz: f64,
    #[serde(default)]
    pub frames: FrameTable,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clock_skew_s: f64,
    #[serde(default)]
    pub track: Option<TrackSource>,
}

impl AgentFile {
    pub fn build(&self, base_dir: Option<&Path>) -> Result<(VehicleAgent, AgentOptions), String> {
        let track = resolve_track(self.track.as_ref(), base_dir)?;
        let e = &self.vehicle;
        let spec = e.vehicle_spec();
        let s = track.named_point(self.start_point).map_err(|x| x.to_string())? - self.start_offset;
        let mut start = VehicleState::at_rest(e.vehicle_id, FrameId::Unified, track.point_at(s));
        start.arc_position = track.wrap(s);
        start.speed = self.start_speed;
        start.front_wheel_angle = lateral_angle(&start, &track, &LateralParams::default());
        let imp = e.imperfections();
        let imp = if self.seed != 0 { imp.with_seed(self.seed) } else { imp };
        let tf = self.frames.transform(spec.frame()).map_err(|x| x.to_string())?;
        let agent = VehicleAgent::new(spec, imp, tf, Some(track), &start).map_err(|x| x.to_string())?;
        let mut opts = AgentOptions::new(
            self.entity_id.clone().unwrap_or_else(|| format!("vehicle-{}", e.vehicle_id.0)),
            self.tick_hz,
        );
        opts.link_delay_s = e.link_delay_s;
        opts.clock_skew_s = self.clock_skew_s;
        Ok((agent, opts))
    }
}
