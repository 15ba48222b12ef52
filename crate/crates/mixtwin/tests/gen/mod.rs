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


//! Random envelopes covering every message type.

use mixtwin::core::hub::{Channel, PoolSnapshot};
use mixtwin::core::{ControlInstruction, FrameId, Pose, SourceId, VehicleId, VehicleState};
use mixtwin::protocol::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_envelope(rng: &mut ChaCha8Rng) -> Envelope {
    Envelope::new(rng.random(), f(rng), payload(rng))
}

pub fn f(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-1e3..1e3),
        1 => rng.random_range(-1.0..1.0) * 1e-7,
        2 => f64::from(rng.random_range(-50i32..50)),
        _ => rng.random_range(-1e12..1e12),
    }
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let alphabet = ['a', 'z', '0', '/', '-', '"', '\\', 'é', '車', '\n', ' '];
    (0..rng.random_range(1..12)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

fn frame_id(rng: &mut ChaCha8Rng) -> FrameId {
    [FrameId::Physical, FrameId::Virtual, FrameId::InnoLike, FrameId::Unified][rng.random_range(0..4)]
}

pub fn state(rng: &mut ChaCha8Rng) -> VehicleState {
    let mut s = VehicleState::at_rest(VehicleId(rng.random_range(1..100)), frame_id(rng), Pose::new(f(rng), f(rng), rng.random_range(-3.0..3.0)));
    s.speed = f(rng);
    s.acceleration = f(rng);
    s.front_wheel_angle = f(rng);
    s.arc_position = f(rng);
    s.timestamp = f(rng);
    s.seq = rng.random();
    s
}

fn instruction(rng: &mut ChaCha8Rng) -> ControlInstruction {
    ControlInstruction {
        target_vehicle_id: VehicleId(rng.random()),
        desired_front_wheel_angle: f(rng),
        desired_speed: f(rng),
        source_id: SourceId::new(word(rng)),
        source_frame: frame_id(rng),
        timestamp: f(rng),
        seq: rng.random(),
    }
}

fn error(rng: &mut ChaCha8Rng) -> ErrorPayload {
    ErrorPayload::new(word(rng), word(rng))
}

pub fn payload(rng: &mut ChaCha8Rng) -> Payload {
    match rng.random_range(0..10) {
        0 => Payload::Register(RegisterPayload {
            entity_kind: [EntityKind::VehicleAgent, EntityKind::Controller, EntityKind::DriverStation, EntityKind::Observer, EntityKind::Admin]
                [rng.random_range(0..5)],
            entity_id: word(rng),
            frame: rng.random_bool(0.5).then(|| frame_id(rng)),
            capabilities: (0..rng.random_range(0..3)).map(|_| word(rng)).collect(),
            sources: (0..rng.random_range(0..3)).map(|_| SourceId::new(word(rng))).collect(),
            vehicle: None,
        }),
        1 => Payload::RegisterAck(RegisterAckPayload {
            entity_id: word(rng),
            accepted: rng.random(),
            error: rng.random_bool(0.5).then(|| error(rng)),
            tick_hz: f(rng),
            track: None,
        }),
        2 => Payload::StateUpdate(state(rng)),
        3 => Payload::StatePool(PoolSnapshot {
            pool_timestamp: f(rng),
            tick: rng.random(),
            states: (0..rng.random_range(0..9)).map(|_| state(rng)).collect(),
        }),
        4 => Payload::Instruction(instruction(rng)),
        5 => Payload::InstructionDispatch(DispatchPayload {
            tick: rng.random(),
            instruction: instruction(rng),
            clamped: rng.random(),
        }),
        6 => Payload::AdminCommand(if rng.random() {
            AdminCommandPayload::Remap {
                source_id: SourceId::new(word(rng)),
                vehicle_id: VehicleId(rng.random()),
                channel: [Channel::Lateral, Channel::Longitudinal, Channel::Both][rng.random_range(0..3)],
                force: rng.random(),
            }
        } else {
            AdminCommandPayload::Unmap {
                source_id: SourceId::new(word(rng)),
            }
        }),
        7 => Payload::AdminAck(AdminAckPayload {
            command_seq: rng.random(),
            ok: rng.random(),
            error: rng.random_bool(0.5).then(|| error(rng)),
        }),
        8 => Payload::Heartbeat(HeartbeatPayload {
            origin: f(rng),
            remote: rng.random_bool(0.5).then(|| f(rng)),
        }),
        _ => Payload::Error(error(rng)),
    }
}
