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

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::track::Track;
use crate::vehicle::VehicleState;

/// Gains and limits of the predecessor-and-leader CACC law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaccParams {
    /// Spacing-error gain, 1/s².
    pub k_p: f64,
    /// Leader speed-error gain, 1/s.
    pub k_v1: f64,
    /// Predecessor speed-error gain, 1/s.
    pub k_v2: f64,
    /// Desired centroid spacing, m.
    pub d_des: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for CaccParams {
    // Validated against the five-vehicle lockstep string-stability run.
    fn default() -> Self {
        CaccParams {
            k_p: 0.1,
            k_v1: 0.5,
            k_v2: 0.5,
            d_des: 20.0,
            a_min: -2.0,
            a_max: 2.0,
        }
    }
}

impl CaccParams {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.k_p > 0.0 && self.k_v1 > 0.0 && self.k_v2 > 0.0) {
            return Err(CoreError::InvalidParameter("CACC gains must be > 0".into()));
        }
        if !(self.a_min < 0.0 && self.a_max > 0.0) {
            return Err(CoreError::InvalidParameter("CACC needs a_min < 0 < a_max".into()));
        }
        if !(self.d_des > 0.0) {
            return Err(CoreError::InvalidParameter("d_des must be > 0".into()));
        }
        Ok(())
    }

    /// The law before saturation, from its three error terms.
    pub fn unclamped(&self, spacing_error: f64, head_speed_error: f64, pred_speed_error: f64) -> f64 {
        self.k_p * spacing_error + self.k_v1 * head_speed_error + self.k_v2 * pred_speed_error
    }
}

/// Desired acceleration of `own` from its spacing to `predecessor` and the
/// speed errors to the predecessor and the platoon head, saturated to
/// `[a_min, a_max]`. The spacing error is positive when the gap exceeds
/// `d_des`.
pub fn cacc_accel(
    own: &VehicleState,
    predecessor: Option<&VehicleState>,
    head: &VehicleState,
    params: &CaccParams,
    track: &Track,
) -> Result<f64, CoreError> {
    let pred = predecessor.ok_or(CoreError::MissingPredecessor)?;
    let gap = track.signed_gap(own, pred);
    let a = params.unclamped(gap - params.d_des, head.speed - own.speed, pred.speed - own.speed);
    Ok(a.clamp(params.a_min, params.a_max))
}

/// Desired acceleration to a speed command, from the last received speed.
pub fn accel_to_speed_cmd(a: f64, v_prev: f64, dt: f64) -> f64 {
    (v_prev + a * dt).max(0.0)
}
