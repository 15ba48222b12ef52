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

//! Control sources: the CACC longitudinal law, the pure-pursuit lateral
//! controller and the scripted human-driver stand-in.

pub mod cacc;
pub mod driver;
pub mod lateral;

pub use cacc::{accel_to_speed_cmd, cacc_accel, CaccParams};
pub use driver::{optimal_velocity, ScriptedDriver, ScriptedDriverParams};
pub use lateral::{lateral_angle, pursuit_angle, LateralParams};
