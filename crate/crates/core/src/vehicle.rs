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

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::frame::FrameId;
use crate::pose::Pose;

/// Platoon-visible vehicle identifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of a control source (controller sub-source or driver).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(pub String);

impl SourceId {
    pub fn new(id: impl Into<String>) -> Self {
        SourceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SourceId {
    fn from(s: &str) -> Self {
        SourceId(s.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VehicleKind {
    EmulatedPhysical,
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "CAV")]
    Cav,
    #[serde(rename = "HDV")]
    Hdv,
    Head,
}

pub const DEFAULT_MAX_WHEEL_ANGLE: f64 = 0.52;
pub const DEFAULT_BODY_LENGTH: f64 = 4.6;
pub const DEFAULT_WHEELBASE: f64 = 2.6;
/// 30 km/h.
pub const DEFAULT_MAX_SPEED: f64 = 30.0 / 3.6;
pub const DEFAULT_MAX_ACCEL: f64 = 2.0;
pub const DEFAULT_MAX_DECEL: f64 = 4.0;

/// Default first-order speed-actuator time constant for a vehicle kind.
pub fn default_speed_lag(kind: VehicleKind) -> f64 {
    match kind {
        VehicleKind::Virtual => 0.04,
        VehicleKind::EmulatedPhysical => 0.10,
    }
}

/// Static description of one vehicle. Lengths, speeds and accelerations are
/// in the unified frame unless the spec was produced by [`VehicleSpec::in_frame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub vehicle_id: VehicleId,
    pub kind: VehicleKind,
    pub role: Role,
    /// Publishing frame; defaults to Physical for emulated-physical vehicles
    /// and Virtual otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameId>,
    pub body_length: f64,
    pub wheelbase: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_decel: f64,
    #[serde(default = "default_max_angle")]
    pub max_wheel_angle: f64,
    /// Speed actuator time constant in seconds; `None` uses the kind default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_lag_tau: Option<f64>,
}

fn default_max_angle() -> f64 {
    DEFAULT_MAX_WHEEL_ANGLE
}

impl VehicleSpec {
    pub fn new(vehicle_id: VehicleId, kind: VehicleKind, role: Role) -> Self {
        VehicleSpec {
            vehicle_id,
            kind,
            role,
            frame: None,
            body_length: DEFAULT_BODY_LENGTH,
            wheelbase: DEFAULT_WHEELBASE,
            max_speed: DEFAULT_MAX_SPEED,
            max_accel: DEFAULT_MAX_ACCEL,
            max_decel: DEFAULT_MAX_DECEL,
            max_wheel_angle: DEFAULT_MAX_WHEEL_ANGLE,
            speed_lag_tau: None,
        }
    }

    pub fn frame(&self) -> FrameId {
        self.frame.unwrap_or(match self.kind {
            VehicleKind::EmulatedPhysical => FrameId::Physical,
            VehicleKind::Virtual => FrameId::Virtual,
        })
    }

    pub fn speed_lag(&self) -> f64 {
        self.speed_lag_tau.unwrap_or_else(|| default_speed_lag(self.kind))
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: &str| Err(CoreError::InvalidParameter(alloc::format!("vehicle {}: {m}", self.vehicle_id)));
        if !(self.body_length > 0.0) {
            return bad("body_length must be > 0");
        }
        if !(self.wheelbase > 0.0 && self.wheelbase < self.body_length) {
            return bad("wheelbase must be in (0, body_length)");
        }
        if !(self.max_speed > 0.0 && self.max_accel > 0.0 && self.max_decel > 0.0) {
            return bad("speed and acceleration limits must be > 0");
        }
        if !(self.max_wheel_angle > 0.0) {
            return bad("max_wheel_angle must be > 0");
        }
        if let Some(tau) = self.speed_lag_tau {
            if !(tau >= 0.0) {
                return bad("speed_lag_tau must be >= 0");
            }
        }
        match (self.kind, self.frame()) {
            (VehicleKind::EmulatedPhysical, FrameId::Physical) => Ok(()),
            (VehicleKind::Virtual, FrameId::Virtual | FrameId::InnoLike) => Ok(()),
            _ => bad("frame does not match vehicle kind"),
        }
    }

    /// The same vehicle expressed in a frame with the given scale to unified:
    /// lengths, speeds and accelerations divided by `scale`.
    pub fn in_frame(&self, scale: f64) -> VehicleSpec {
        VehicleSpec {
            body_length: self.body_length / scale,
            wheelbase: self.wheelbase / scale,
            max_speed: self.max_speed / scale,
            max_accel: self.max_accel / scale,
            max_decel: self.max_decel / scale,
            ..self.clone()
        }
    }
}

/// Timestamped state of one vehicle in a declared frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub vehicle_id: VehicleId,
    pub frame: FrameId,
    pub pose: Pose,
    pub speed: f64,
    pub acceleration: f64,
    pub front_wheel_angle: f64,
    /// Position along the track, unified meters.
    pub arc_position: f64,
    pub timestamp: f64,
    pub seq: u64,
}

impl VehicleState {
    pub fn at_rest(vehicle_id: VehicleId, frame: FrameId, pose: Pose) -> Self {
        VehicleState {
            vehicle_id,
            frame,
            pose,
            speed: 0.0,
            acceleration: 0.0,
            front_wheel_angle: 0.0,
            arc_position: 0.0,
            timestamp: 0.0,
            seq: 0,
        }
    }
}

/// Unified command pair plus the source that issued it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInstruction {
    pub target_vehicle_id: VehicleId,
    pub desired_front_wheel_angle: f64,
    pub desired_speed: f64,
    pub source_id: SourceId,
    pub source_frame: FrameId,
    pub timestamp: f64,
    pub seq: u64,
}

impl ControlInstruction {
    pub fn unified(target: VehicleId, source: SourceId, angle: f64, speed: f64, timestamp: f64, seq: u64) -> Self {
        ControlInstruction {
            target_vehicle_id: target,
            desired_front_wheel_angle: angle,
            desired_speed: speed,
            source_id: source,
            source_frame: FrameId::Unified,
            timestamp,
            seq,
        }
    }
}
