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

//! Core of the mixtwin mixed digital-twin testbed.
//!
//! Everything here is allocation-only and free of IO: coordinate frames,
//! track geometry, kinematic vehicle dynamics, the longitudinal and lateral
//! controllers, head-vehicle perturbation profiles, the hub's aggregation and
//! routing logic, and the collision/string-stability metrics. The `mixtwin`
//! crate wraps these with the wire protocol, transports, file formats and CLI.
//!
//! Units are SI throughout (m, m/s, m/s², rad, s).

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod control;
pub mod dynamics;
pub mod error;
pub mod frame;
pub mod hub;
pub mod metrics;
pub mod pose;
pub mod profile;
pub mod track;
pub mod vehicle;

pub use error::CoreError;
pub use frame::{FrameId, FrameTable, FrameTransform};
pub use pose::Pose;
pub use track::Track;
pub use vehicle::{ControlInstruction, Role, SourceId, VehicleId, VehicleKind, VehicleSpec, VehicleState};

/// Convert km/h to m/s.
pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Convert m/s to km/h.
pub fn ms_to_kmh(ms: f64) -> f64 {
    ms * 3.6
}
