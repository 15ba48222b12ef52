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

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::HubError;
use crate::vehicle::{SourceId, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Lateral,
    Longitudinal,
    Both,
}

impl Channel {
    fn lateral(self) -> bool {
        matches!(self, Channel::Lateral | Channel::Both)
    }

    fn longitudinal(self) -> bool {
        matches!(self, Channel::Longitudinal | Channel::Both)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSources {
    pub lateral: Option<SourceId>,
    pub longitudinal: Option<SourceId>,
}

/// Which source drives which channel of which vehicle.
///
/// Each vehicle has at most one source per channel. A source can hold at
/// most one vehicle per channel. Every mutation either fully applies or
/// leaves the table unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorrespondenceTable {
    by_vehicle: BTreeMap<VehicleId, ChannelSources>,
}

impl CorrespondenceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sources_of(&self, vehicle: VehicleId) -> ChannelSources {
        self.by_vehicle.get(&vehicle).cloned().unwrap_or_default()
    }

    pub fn lateral_target(&self, source: &SourceId) -> Option<VehicleId> {
        self.by_vehicle
            .iter()
            .find(|(_, s)| s.lateral.as_ref() == Some(source))
            .map(|(v, _)| *v)
    }

    pub fn longitudinal_target(&self, source: &SourceId) -> Option<VehicleId> {
        self.by_vehicle
            .iter()
            .find(|(_, s)| s.longitudinal.as_ref() == Some(source))
            .map(|(v, _)| *v)
    }

    pub fn is_mapped(&self, source: &SourceId) -> bool {
        self.lateral_target(source).is_some() || self.longitudinal_target(source).is_some()
    }

    /// Map `channel` of `source` onto `vehicle`, removing the source from
    /// whatever vehicle it drove before on those channels. With `force`, a
    /// different source already holding the channel is displaced.
    pub fn remap(&mut self, source: &SourceId, vehicle: VehicleId, channel: Channel, force: bool) -> Result<(), HubError> {
        let mut next = self.clone();
        let slot = next.by_vehicle.entry(vehicle).or_default().clone();
        for (wanted, holder, ch) in [
            (channel.lateral(), &slot.lateral, Channel::Lateral),
            (channel.longitudinal(), &slot.longitudinal, Channel::Longitudinal),
        ] {
            if let Some(h) = holder {
                if wanted && h != source && !force {
                    return Err(HubError::ConflictingSource {
                        vehicle,
                        channel: ch,
                        holder: h.clone(),
                    });
                }
            }
        }
        for sources in next.by_vehicle.values_mut() {
            if channel.lateral() && sources.lateral.as_ref() == Some(source) {
                sources.lateral = None;
            }
            if channel.longitudinal() && sources.longitudinal.as_ref() == Some(source) {
                sources.longitudinal = None;
            }
        }
        let slot = next.by_vehicle.entry(vehicle).or_default();
        if channel.lateral() {
            slot.lateral = Some(source.clone());
        }
        if channel.longitudinal() {
            slot.longitudinal = Some(source.clone());
        }
        next.by_vehicle.retain(|_, s| s.lateral.is_some() || s.longitudinal.is_some());
        *self = next;
        Ok(())
    }

    /// Drop every mapping of `source`.
    pub fn remove_source(&mut self, source: &SourceId) {
        for sources in self.by_vehicle.values_mut() {
            if sources.lateral.as_ref() == Some(source) {
                sources.lateral = None;
            }
            if sources.longitudinal.as_ref() == Some(source) {
                sources.longitudinal = None;
            }
        }
        self.by_vehicle.retain(|_, s| s.lateral.is_some() || s.longitudinal.is_some());
    }

    pub fn remove_vehicle(&mut self, vehicle: VehicleId) {
        self.by_vehicle.remove(&vehicle);
    }

    pub fn entries(&self) -> Vec<(VehicleId, ChannelSources)> {
        self.by_vehicle.iter().map(|(v, s)| (*v, s.clone())).collect()
    }
}
