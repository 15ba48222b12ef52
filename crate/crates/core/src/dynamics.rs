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

//! Kinematic bicycle model, rear-axle reference, with a rate-limited
//! first-order speed actuator.

use crate::error::CoreError;
use crate::vehicle::{ControlInstruction, VehicleSpec, VehicleState};

pub const MAX_DT: f64 = 0.1;

/// Fraction of the speed error closed in one step of length `dt` by an
/// actuator with time constant `tau` (explicit Euler, saturating at 1).
pub fn lag_gain(tau: f64, dt: f64) -> f64 {
    if tau <= dt {
        1.0
    } else {
        dt / tau
    }
}

/// Advance one vehicle by `dt` under `cmd`. State, spec and command must all
/// be expressed in the same frame.
///
/// Pose is integrated with the speed at the start of the step; the speed then
/// moves toward the (clamped) desired speed through the actuator lag, limited
/// to `max_accel`/`max_decel` and to `[0, max_speed]`.
pub fn bicycle_step(
    state: &VehicleState,
    spec: &VehicleSpec,
    cmd: &ControlInstruction,
    dt: f64,
) -> Result<VehicleState, CoreError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(CoreError::NonPositiveDt(dt));
    }
    if cmd.source_frame != state.frame {
        return Err(CoreError::FrameMismatch {
            expected: state.frame,
            found: cmd.source_frame,
        });
    }
    let max_angle = spec.max_wheel_angle;
    let delta = cmd.desired_front_wheel_angle.clamp(-max_angle, max_angle);
    let v = state.speed;
    let theta = state.pose.heading;

    let mut next = state.clone();
    if v != 0.0 {
        next.pose.x = state.pose.x + v * libm::cos(theta) * dt;
        next.pose.y = state.pose.y + v * libm::sin(theta) * dt;
        if delta != 0.0 {
            next.pose.set_heading(theta + v / spec.wheelbase * libm::tan(delta) * dt);
        }
    }

    let target = cmd.desired_speed.clamp(0.0, spec.max_speed);
    let dv = (lag_gain(spec.speed_lag(), dt) * (target - v)).clamp(-spec.max_decel * dt, spec.max_accel * dt);
    let v_next = (v + dv).clamp(0.0, spec.max_speed);
    next.speed = v_next;
    next.acceleration = (v_next - v) / dt;
    next.front_wheel_angle = delta;
    next.timestamp = state.timestamp + dt;
    next.seq = state.seq + 1;
    Ok(next)
}
