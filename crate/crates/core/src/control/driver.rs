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

//! Scripted human-driver model: an optimal-velocity law applied to delayed
//! observations. Used in place of live drivers when no UI is attached.

use alloc::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::track::Track;
use crate::vehicle::VehicleState;

// Observation times are compared with this slack so that a time-shifted
// replay selects the same samples.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedDriverParams {
    pub v_free: f64,
    pub gap_stop: f64,
    pub gap_free: f64,
    /// Sensitivity, 1/s.
    pub k_h: f64,
    /// Reaction delay, s.
    pub tau_h: f64,
}

impl Default for ScriptedDriverParams {
    /// String-unstable default: amplifies a head perturbation down a chain.
    fn default() -> Self {
        ScriptedDriverParams {
            v_free: 3.64,
            gap_stop: 15.33,
            gap_free: 21.4,
            k_h: 0.8,
            tau_h: 0.6,
        }
    }
}

impl ScriptedDriverParams {
    /// A driver told to keep a conservative style: shallow speed-gap slope.
    pub fn briefed() -> Self {
        ScriptedDriverParams {
            v_free: 3.64,
            gap_stop: 5.0,
            gap_free: 25.0,
            k_h: 0.6,
            tau_h: 0.8,
        }
    }

    /// Tailgating driver whose standstill gap sits below a car length.
    pub fn aggressive() -> Self {
        ScriptedDriverParams {
            v_free: 3.64,
            gap_stop: 1.0,
            gap_free: 25.7,
            k_h: 0.8,
            tau_h: 0.8,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.gap_stop < self.gap_free) {
            return Err(CoreError::InvalidParameter("gap_stop must be < gap_free".into()));
        }
        if !(self.k_h > 0.0 && self.tau_h >= 0.0 && self.v_free > 0.0) {
            return Err(CoreError::InvalidParameter("need k_h > 0, tau_h >= 0, v_free > 0".into()));
        }
        Ok(())
    }

    /// Gap at which the optimal velocity equals `v`.
    pub fn equilibrium_gap(&self, v: f64) -> f64 {
        self.gap_stop + (self.gap_free - self.gap_stop) * (v / self.v_free).clamp(0.0, 1.0)
    }
}

/// Piecewise-linear optimal velocity for a gap.
pub fn optimal_velocity(gap: f64, p: &ScriptedDriverParams) -> f64 {
    if gap <= p.gap_stop {
        0.0
    } else if gap >= p.gap_free {
        p.v_free
    } else {
        p.v_free * (gap - p.gap_stop) / (p.gap_free - p.gap_stop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Observation {
    t: f64,
    gap: f64,
    speed: f64,
}

/// One scripted driver with its private observation history.
#[derive(Debug, Clone)]
pub struct ScriptedDriver {
    params: ScriptedDriverParams,
    history: VecDeque<Observation>,
    intent: Option<f64>,
}

impl ScriptedDriver {
    pub fn new(params: ScriptedDriverParams) -> Self {
        ScriptedDriver {
            params,
            history: VecDeque::new(),
            intent: None,
        }
    }

    pub fn params(&self) -> &ScriptedDriverParams {
        &self.params
    }

    /// Record the observation at time `t` and return the speed command
    /// `v + k_h (V(gap(t - tau_h)) - v(t - tau_h)) dt`, floored at zero.
    ///
    /// `v` is the driver's own previous command once one exists, so sensing
    /// noise and actuator lag are not integrated into the pedal position.
    /// The first call starts from the observed speed.
    pub fn speed_cmd(&mut self, t: f64, own: &VehicleState, predecessor: &VehicleState, track: &Track, dt: f64) -> f64 {
        self.speed_cmd_from_gap(t, own.speed, track.signed_gap(own, predecessor), dt)
    }

    pub fn speed_cmd_from_gap(&mut self, t: f64, speed: f64, gap: f64, dt: f64) -> f64 {
        self.history.push_back(Observation { t, gap, speed });
        let horizon = t - self.params.tau_h;
        // keep the newest sample at or before the horizon, drop anything older
        while self.history.len() > 1 && self.history[1].t <= horizon + TIME_EPS {
            self.history.pop_front();
        }
        let seen = self.history[0];
        let v_opt = optimal_velocity(seen.gap, &self.params);
        let base = self.intent.unwrap_or(speed);
        let cmd = (base + self.params.k_h * (v_opt - seen.speed) * dt).max(0.0);
        self.intent = Some(cmd);
        cmd
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.intent = None;
    }
}
