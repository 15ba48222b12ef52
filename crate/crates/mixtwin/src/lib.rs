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

//! Mixed digital-twin platooning testbed.
//!
//! Wraps [`mixtwin_core`] with the wire protocol, vehicle agents, control
//! sources, the lockstep scenario harness, the networked hub and clients,
//! and the file formats used by the `mixtwin` binary.

pub mod agents;
pub mod config;
pub mod controllers;
pub mod harness;
pub mod net;
pub mod poollog;
pub mod protocol;
pub mod report;
pub mod scenario;

pub use mixtwin_core as core;
