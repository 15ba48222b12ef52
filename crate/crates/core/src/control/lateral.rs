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

use crate::pose::normalize_angle;
use crate::track::Track;
use crate::vehicle::{VehicleState, DEFAULT_MAX_WHEEL_ANGLE, DEFAULT_WHEELBASE};

/// Pure pursuit with speed-scheduled lookahead `base + gain * v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LateralParams {
    pub lookahead_base: f64,
    pub lookahead_gain: f64,
    pub wheelbase: f64,
    #[serde(default = "default_max_angle")]
    pub max_wheel_angle: f64,
}

fn default_max_angle() -> f64 {
    DEFAULT_MAX_WHEEL_ANGLE
}

impl Default for LateralParams {
    fn default() -> Self {
        LateralParams {
            lookahead_base: 4.0,
            lookahead_gain: 0.8,
            wheelbase: DEFAULT_WHEELBASE,
            max_wheel_angle: DEFAULT_MAX_WHEEL_ANGLE,
        }
    }
}

/// Steering angle that puts a target at bearing `alpha` and distance
/// `lookahead` on the vehicle's turning circle.
pub fn pursuit_angle(alpha: f64, wheelbase: f64, lookahead: f64) -> f64 {
    libm::atan(2.0 * wheelbase * libm::sin(alpha) / lookahead)
}

/// Front-wheel angle that keeps `own` on the track centreline.
pub fn lateral_angle(own: &VehicleState, track: &Track, params: &LateralParams) -> f64 {
    let lookahead = params.lookahead_base + params.lookahead_gain * own.speed.max(0.0);
    let here = track.project(&own.pose);
    let target = track.point_at(here.arc_position + lookahead);
    let bearing = libm::atan2(target.y - own.pose.y, target.x - own.pose.x);
    let alpha = normalize_angle(bearing - own.pose.heading);
    pursuit_angle(alpha, params.wheelbase, lookahead).clamp(-params.max_wheel_angle, params.max_wheel_angle)
}
