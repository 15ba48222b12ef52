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

//! Environment frames and the scale/offset transforms into the unified,
//! full-scale frame.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::vehicle::{ControlInstruction, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FrameId {
    Physical,
    Virtual,
    InnoLike,
    Unified,
}

/// Default sand-table scale (1:14).
pub const PHYSICAL_SCALE: f64 = 14.0;

/// Maps positions of one frame into unified meters:
/// `unified = scale_to_unified * local + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTransform {
    pub frame: FrameId,
    pub scale_to_unified: f64,
    #[serde(default)]
    pub offset_x: f64,
    #[serde(default)]
    pub offset_y: f64,
}

impl FrameTransform {
    pub fn new(frame: FrameId, scale_to_unified: f64) -> Result<Self, CoreError> {
        if !(scale_to_unified > 0.0 && scale_to_unified.is_finite()) {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "scale_to_unified for {frame:?} must be finite and > 0"
            )));
        }
        if frame == FrameId::Unified && scale_to_unified != 1.0 {
            return Err(CoreError::InvalidParameter("the unified frame has scale 1".into()));
        }
        Ok(FrameTransform {
            frame,
            scale_to_unified,
            offset_x: 0.0,
            offset_y: 0.0,
        })
    }

    pub fn identity() -> Self {
        FrameTransform {
            frame: FrameId::Unified,
            scale_to_unified: 1.0,
            offset_x: 0.0,
            offset_y: 0.0,
        }
    }

    pub fn with_offset(mut self, x: f64, y: f64) -> Self {
        self.offset_x = x;
        self.offset_y = y;
        self
    }

    fn check(&self, found: FrameId) -> Result<(), CoreError> {
        if found != self.frame {
            return Err(CoreError::FrameMismatch {
                expected: self.frame,
                found,
            });
        }
        Ok(())
    }

    /// Express a frame-local state in the unified frame. Positions, speed and
    /// acceleration are scaled; heading, wheel angle, arc position (already
    /// unified) and timestamps are untouched.
    pub fn to_unified(&self, state: &VehicleState) -> Result<VehicleState, CoreError> {
        self.check(state.frame)?;
        let k = self.scale_to_unified;
        let mut out = state.clone();
        out.frame = FrameId::Unified;
        out.pose.x = state.pose.x * k + self.offset_x;
        out.pose.y = state.pose.y * k + self.offset_y;
        out.speed = state.speed * k;
        out.acceleration = state.acceleration * k;
        Ok(out)
    }

    /// Inverse of [`FrameTransform::to_unified`].
    pub fn state_from_unified(&self, state: &VehicleState) -> Result<VehicleState, CoreError> {
        if state.frame != FrameId::Unified {
            return Err(CoreError::FrameMismatch {
                expected: FrameId::Unified,
                found: state.frame,
            });
        }
        let k = self.scale_to_unified;
        let mut out = state.clone();
        out.frame = self.frame;
        out.pose.x = (state.pose.x - self.offset_x) / k;
        out.pose.y = (state.pose.y - self.offset_y) / k;
        out.speed = state.speed / k;
        out.acceleration = state.acceleration / k;
        Ok(out)
    }

    /// Express a unified instruction in this frame. Angles are scale free.
    pub fn from_unified(&self, instr: &ControlInstruction) -> Result<ControlInstruction, CoreError> {
        if instr.source_frame != FrameId::Unified {
            return Err(CoreError::FrameMismatch {
                expected: FrameId::Unified,
                found: instr.source_frame,
            });
        }
        let mut out = instr.clone();
        out.source_frame = self.frame;
        out.desired_speed = instr.desired_speed / self.scale_to_unified;
        Ok(out)
    }

    /// Inverse of [`FrameTransform::from_unified`].
    pub fn instruction_to_unified(&self, instr: &ControlInstruction) -> Result<ControlInstruction, CoreError> {
        self.check(instr.source_frame)?;
        let mut out = instr.clone();
        out.source_frame = FrameId::Unified;
        out.desired_speed = instr.desired_speed * self.scale_to_unified;
        Ok(out)
    }
}

/// Configured scale of every environment frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTable {
    #[serde(default = "default_physical")]
    pub physical: f64,
    #[serde(default = "one", rename = "virtual")]
    pub virtual_: f64,
    #[serde(default = "one")]
    pub inno_like: f64,
}

fn default_physical() -> f64 {
    PHYSICAL_SCALE
}

fn one() -> f64 {
    1.0
}

impl Default for FrameTable {
    fn default() -> Self {
        FrameTable {
            physical: PHYSICAL_SCALE,
            virtual_: 1.0,
            inno_like: 1.0,
        }
    }
}

impl FrameTable {
    pub fn scale(&self, frame: FrameId) -> f64 {
        match frame {
            FrameId::Physical => self.physical,
            FrameId::Virtual => self.virtual_,
            FrameId::InnoLike => self.inno_like,
            FrameId::Unified => 1.0,
        }
    }

    pub fn transform(&self, frame: FrameId) -> Result<FrameTransform, CoreError> {
        FrameTransform::new(frame, self.scale(frame))
    }
}
