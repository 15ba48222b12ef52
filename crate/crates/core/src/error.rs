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

use crate::frame::FrameId;

/// Errors raised by the pure core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("frame mismatch: transform is for {expected:?}, value is in {found:?}")]
    FrameMismatch { expected: FrameId, found: FrameId },
    #[error("time step must be in (0, 0.1] s, got {0}")]
    NonPositiveDt(f64),
    #[error("track has no usable segments")]
    EmptyTrack,
    #[error("invalid track: {0}")]
    InvalidTrack(String),
    #[error("unknown named point '{0}'")]
    UnknownNamedPoint(char),
    #[error("missing predecessor state")]
    MissingPredecessor,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no perturbation present")]
    NoPerturbation,
}
