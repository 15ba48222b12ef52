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

//! Head-vehicle speed profiles: constant cruise with scheduled half-sine
//! or three-phase braking perturbations, and the point-crossing trigger.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::track::{wrap, Track};

/// 10.08 km/h.
pub const BASE_SPEED: f64 = 2.8;
/// 3.02 km/h.
pub const HALF_SINE_AMPLITUDE: f64 = 3.02 / 3.6;
pub const HALF_SINE_DURATION: f64 = 3.5;
/// 1.01 km/h.
pub const BRAKE_TARGET: f64 = 1.01 / 3.6;
pub const BRAKE_RATE: f64 = 0.28;
pub const BRAKE_HOLD: f64 = 20.0;
pub const BRAKE_RECOVER: f64 = 12.0;

/// How the configured half-sine duration is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodReading {
    /// The duration is the length of the single positive hump.
    #[default]
    HalfWave,
    /// The duration is a full sine period; the hump lasts half of it.
    FullPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Perturbation {
    HalfSine {
        #[serde(default = "defaults::duration")]
        duration: f64,
        #[serde(default = "defaults::amplitude")]
        amplitude: f64,
        #[serde(default)]
        period_reading: PeriodReading,
    },
    Brake {
        #[serde(default = "defaults::target")]
        target: f64,
        #[serde(default = "defaults::rate")]
        rate: f64,
        #[serde(default = "defaults::hold")]
        hold: f64,
        #[serde(default = "defaults::recover")]
        recover: f64,
    },
}

mod defaults {
    pub fn duration() -> f64 {
        super::HALF_SINE_DURATION
    }
    pub fn amplitude() -> f64 {
        super::HALF_SINE_AMPLITUDE
    }
    pub fn target() -> f64 {
        super::BRAKE_TARGET
    }
    pub fn rate() -> f64 {
        super::BRAKE_RATE
    }
    pub fn hold() -> f64 {
        super::BRAKE_HOLD
    }
    pub fn recover() -> f64 {
        super::BRAKE_RECOVER
    }
}

impl Perturbation {
    pub fn half_sine() -> Self {
        Perturbation::HalfSine {
            duration: HALF_SINE_DURATION,
            amplitude: HALF_SINE_AMPLITUDE,
            period_reading: PeriodReading::HalfWave,
        }
    }

    pub fn brake() -> Self {
        Perturbation::Brake {
            target: BRAKE_TARGET,
            rate: BRAKE_RATE,
            hold: BRAKE_HOLD,
            recover: BRAKE_RECOVER,
        }
    }

    pub fn validate(&self, base_speed: f64) -> Result<(), CoreError> {
        let ok = match *self {
            Perturbation::HalfSine { duration, amplitude, .. } => duration > 0.0 && amplitude.is_finite(),
            Perturbation::Brake {
                target,
                rate,
                hold,
                recover,
            } => rate > 0.0 && hold > 0.0 && recover > 0.0 && target >= 0.0 && target < base_speed,
        };
        if ok {
            Ok(())
        } else {
            Err(CoreError::InvalidParameter(alloc::format!("invalid perturbation {self:?}")))
        }
    }

    /// Length of the deviation window starting at the trigger.
    pub fn window(&self, base_speed: f64) -> f64 {
        match *self {
            Perturbation::HalfSine {
                duration,
                period_reading,
                ..
            } => hump(duration, period_reading),
            Perturbation::Brake {
                target,
                rate,
                hold,
                recover,
            } => (base_speed - target) / rate + hold + recover,
        }
    }

    /// Speed `elapsed` seconds after the trigger, inside the window.
    fn speed(&self, base_speed: f64, elapsed: f64) -> f64 {
        match *self {
            Perturbation::HalfSine {
                duration,
                amplitude,
                period_reading,
            } => base_speed + amplitude * libm::sin(PI * elapsed / hump(duration, period_reading)),
            Perturbation::Brake {
                target,
                rate,
                hold,
                recover,
            } => {
                let decel = (base_speed - target) / rate;
                if elapsed < decel {
                    base_speed - rate * elapsed
                } else if elapsed < decel + hold {
                    target
                } else {
                    target + (base_speed - target) * ((elapsed - decel - hold) / recover).min(1.0)
                }
            }
        }
    }
}

fn hump(duration: f64, reading: PeriodReading) -> f64 {
    match reading {
        PeriodReading::HalfWave => duration,
        PeriodReading::FullPeriod => duration / 2.0,
    }
}

/// A perturbation scheduled at an absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSegment {
    pub start: f64,
    pub shape: Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadProfile {
    pub base_speed: f64,
    pub segments: Vec<ProfileSegment>,
}

impl HeadProfile {
    pub fn cruise(base_speed: f64) -> Self {
        HeadProfile {
            base_speed,
            segments: Vec::new(),
        }
    }

    pub fn schedule(&mut self, start: f64, shape: Perturbation) {
        self.segments.push(ProfileSegment { start, shape });
        self.segments
            .sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap_or(core::cmp::Ordering::Equal));
    }

    pub fn is_perturbed(&self) -> bool {
        !self.segments.is_empty()
    }
}

/// Head speed at time `t`: base speed outside every perturbation window.
pub fn head_speed(t: f64, profile: &HeadProfile) -> f64 {
    let v = profile
        .segments
        .iter()
        .find(|seg| t >= seg.start && t < seg.start + seg.shape.window(profile.base_speed))
        .map(|seg| seg.shape.speed(profile.base_speed, t - seg.start))
        .unwrap_or(profile.base_speed);
    v.max(0.0)
}

/// Latches the first crossing of a named point on or after a given lap.
///
/// Laps are counted from the arc position first observed: lap `n` spans
/// unwrapped arc `[(n - 1) L, n L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerLatch {
    point_arc: f64,
    trigger_lap: u32,
    lap_length: f64,
    armed: bool,
    fired: bool,
    odometer: f64,
    last_arc: Option<f64>,
}

impl TriggerLatch {
    pub fn new(track: &Track, point: char, trigger_lap: u32) -> Result<Self, CoreError> {
        Ok(TriggerLatch {
            point_arc: track.named_point(point)?,
            trigger_lap: trigger_lap.max(1),
            lap_length: track.lap_length(),
            armed: false,
            fired: false,
            odometer: 0.0,
            last_arc: None,
        })
    }

    pub fn arm(&mut self) {
        self.armed = true;
    }

    pub fn fired(&self) -> bool {
        self.fired
    }

    /// Unwrapped distance along the track since the first observation,
    /// offset by that first arc position.
    pub fn odometer(&self) -> f64 {
        self.odometer
    }

    /// Feed the head's current arc position; true exactly once.
    pub fn update(&mut self, arc_position: f64) -> bool {
        let l = self.lap_length;
        let Some(last) = self.last_arc else {
            self.last_arc = Some(arc_position);
            self.odometer = wrap(arc_position, l);
            return false;
        };
        let delta = wrap(arc_position - last + l / 2.0, l) - l / 2.0;
        let before = self.odometer;
        self.odometer += delta;
        self.last_arc = Some(arc_position);
        if self.fired || !self.armed || delta <= 0.0 {
            return false;
        }
        let lap = libm::floor((self.odometer - self.point_arc) / l) + 1.0;
        let crossing = (lap - 1.0) * l + self.point_arc;
        if lap >= self.trigger_lap as f64 && crossing > before && crossing <= self.odometer {
            self.fired = true;
            return true;
        }
        false
    }
}
