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

//! The hub's pure logic: state aggregation into the unified pool, the
//! hot-swappable source/vehicle correspondence, instruction conversion and
//! filtering, watchdog and safety interlock. Transports drive it; it never
//! blocks and owns no clocks.

mod engine;
mod table;

pub use self::engine::{
    offset_from_exchange, Dispatch, HubConfig, HubCore, HubCounters, InterlockConfig, PoolEntry, PoolSnapshot,
};
pub use self::table::{Channel, ChannelSources, CorrespondenceTable};

use alloc::string::String;

use crate::error::CoreError;
use crate::vehicle::{SourceId, VehicleId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HubError {
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
    #[error("unknown source '{0}'")]
    UnknownSource(SourceId),
    #[error("source '{0}' is not mapped to any vehicle")]
    UnmappedSource(SourceId),
    #[error("source '{source_id}' maps to unregistered vehicle {vehicle}")]
    UnknownTarget { source_id: SourceId, vehicle: VehicleId },
    #[error("stale state for vehicle {vehicle}: seq {seq} <= {last}")]
    StaleSeq { vehicle: VehicleId, seq: u64, last: u64 },
    #[error("vehicle {vehicle} already has source '{holder}' on the {channel:?} channel")]
    ConflictingSource {
        vehicle: VehicleId,
        channel: Channel,
        holder: SourceId,
    },
    #[error("'{0}' is already registered")]
    DuplicateRegistration(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl HubError {
    /// Stable machine-readable name, used on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            HubError::UnknownVehicle(_) => "UnknownVehicle",
            HubError::UnknownSource(_) => "UnknownSource",
            HubError::UnmappedSource(_) => "UnmappedSource",
            HubError::UnknownTarget { .. } => "UnknownTarget",
            HubError::StaleSeq { .. } => "StaleSeq",
            HubError::ConflictingSource { .. } => "ConflictingSource",
            HubError::DuplicateRegistration(_) => "DuplicateRegistration",
            HubError::Core(_) => "InvalidInput",
        }
    }
}
