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

//! Wire protocol: typed envelopes, canonical JSON bodies and length-prefixed
//! framing.
//!
//! A frame is a 4-byte big-endian body length followed by the body. The body
//! is compact JSON with object keys in sorted order, so equal envelopes
//! always encode to equal bytes. The WebSocket link carries the same bodies
//! as text messages, without the prefix.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use mixtwin_core::hub::{Channel, PoolSnapshot};
use mixtwin_core::track::TrackDef;
use mixtwin_core::{ControlInstruction, FrameId, SourceId, VehicleId, VehicleSpec, VehicleState};

/// Largest accepted body, in bytes.
pub const MAX_FRAME: usize = 1 << 20;

const PREFIX: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("frame of {0} bytes exceeds the {MAX_FRAME} byte limit")]
    OversizeFrame(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MsgType {
    Register,
    RegisterAck,
    StateUpdate,
    StatePool,
    Instruction,
    InstructionDispatch,
    AdminCommand,
    AdminAck,
    Heartbeat,
    Error,
}

impl MsgType {
    pub const ALL: [MsgType; 10] = [
        MsgType::Register,
        MsgType::RegisterAck,
        MsgType::StateUpdate,
        MsgType::StatePool,
        MsgType::Instruction,
        MsgType::InstructionDispatch,
        MsgType::AdminCommand,
        MsgType::AdminAck,
        MsgType::Heartbeat,
        MsgType::Error,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Register => "Register",
            MsgType::RegisterAck => "RegisterAck",
            MsgType::StateUpdate => "StateUpdate",
            MsgType::StatePool => "StatePool",
            MsgType::Instruction => "Instruction",
            MsgType::InstructionDispatch => "InstructionDispatch",
            MsgType::AdminCommand => "AdminCommand",
            MsgType::AdminAck => "AdminAck",
            MsgType::Heartbeat => "Heartbeat",
            MsgType::Error => "Error",
        }
    }

    pub fn from_name(name: &str) -> Option<MsgType> {
        MsgType::ALL.into_iter().find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    VehicleAgent,
    Controller,
    DriverStation,
    Observer,
    Admin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterPayload {
    pub entity_kind: EntityKind,
    pub entity_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameId>,
    #[serde(default)]
    pub capabilities: Vec<String>,
    /// Control sources owned by this entity (controllers, driver stations).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceId>,
    /// The vehicle a VehicleAgent drives, in unified units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterAckPayload {
    pub entity_id: String,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorPayload>,
    pub tick_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<TrackDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchPayload {
    pub tick: u64,
    pub instruction: ControlInstruction,
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AdminCommandPayload {
    Remap {
        source_id: SourceId,
        vehicle_id: VehicleId,
        channel: Channel,
        #[serde(default)]
        force: bool,
    },
    Unmap {
        source_id: SourceId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdminAckPayload {
    /// Envelope seq of the command being answered.
    pub command_seq: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorPayload>,
}

/// Hub stamps `origin`; the peer echoes it back with its own clock in `remote`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartbeatPayload {
    pub origin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub kind: String,
    pub message: String,
}

impl ErrorPayload {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        ErrorPayload {
            kind: kind.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Register(RegisterPayload),
    RegisterAck(RegisterAckPayload),
    StateUpdate(VehicleState),
    StatePool(PoolSnapshot),
    Instruction(ControlInstruction),
    InstructionDispatch(DispatchPayload),
    AdminCommand(AdminCommandPayload),
    AdminAck(AdminAckPayload),
    Heartbeat(HeartbeatPayload),
    Error(ErrorPayload),
}

impl Payload {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Payload::Register(_) => MsgType::Register,
            Payload::RegisterAck(_) => MsgType::RegisterAck,
            Payload::StateUpdate(_) => MsgType::StateUpdate,
            Payload::StatePool(_) => MsgType::StatePool,
            Payload::Instruction(_) => MsgType::Instruction,
            Payload::InstructionDispatch(_) => MsgType::InstructionDispatch,
            Payload::AdminCommand(_) => MsgType::AdminCommand,
            Payload::AdminAck(_) => MsgType::AdminAck,
            Payload::Heartbeat(_) => MsgType::Heartbeat,
            Payload::Error(_) => MsgType::Error,
        }
    }

    fn to_value(&self) -> Result<Value, serde_json::Error> {
        match self {
            Payload::Register(p) => serde_json::to_value(p),
            Payload::RegisterAck(p) => serde_json::to_value(p),
            Payload::StateUpdate(p) => serde_json::to_value(p),
            Payload::StatePool(p) => serde_json::to_value(p),
            Payload::Instruction(p) => serde_json::to_value(p),
            Payload::InstructionDispatch(p) => serde_json::to_value(p),
            Payload::AdminCommand(p) => serde_json::to_value(p),
            Payload::AdminAck(p) => serde_json::to_value(p),
            Payload::Heartbeat(p) => serde_json::to_value(p),
            Payload::Error(p) => serde_json::to_value(p),
        }
    }

    fn from_value(ty: MsgType, v: Value) -> Result<Payload, ProtocolError> {
        Ok(match ty {
            MsgType::Register => Payload::Register(field(v)?),
            MsgType::RegisterAck => Payload::RegisterAck(field(v)?),
            MsgType::StateUpdate => Payload::StateUpdate(field(v)?),
            MsgType::StatePool => Payload::StatePool(field(v)?),
            MsgType::Instruction => Payload::Instruction(field(v)?),
            MsgType::InstructionDispatch => Payload::InstructionDispatch(field(v)?),
            MsgType::AdminCommand => Payload::AdminCommand(field(v)?),
            MsgType::AdminAck => Payload::AdminAck(field(v)?),
            MsgType::Heartbeat => Payload::Heartbeat(field(v)?),
            MsgType::Error => Payload::Error(field(v)?),
        })
    }
}

fn field<T: DeserializeOwned>(v: Value) -> Result<T, ProtocolError> {
    serde_json::from_value(v).map_err(|e| ProtocolError::SchemaViolation(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub seq: u64,
    /// Sender clock, seconds.
    pub timestamp: f64,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(seq: u64, timestamp: f64, payload: Payload) -> Self {
        Envelope { seq, timestamp, payload }
    }

    pub fn msg_type(&self) -> MsgType {
        self.payload.msg_type()
    }
}

#[derive(Deserialize)]
struct RawEnvelope {
    msg_type: String,
    seq: u64,
    timestamp: f64,
    payload: Value,
}

/// Non-finite floats have no JSON form; serde_json turns them into null.
/// Optional fields are skipped when absent, so any null left is one of those.
fn reject_nulls(v: &Value, path: &mut String) -> Result<(), ProtocolError> {
    match v {
        Value::Null => Err(ProtocolError::SchemaViolation(format!("non-finite or null value at {path}"))),
        Value::Array(items) => items.iter().try_for_each(|x| reject_nulls(x, path)),
        Value::Object(map) => map.iter().try_for_each(|(k, x)| {
            let len = path.len();
            path.push('.');
            path.push_str(k);
            let r = reject_nulls(x, path);
            path.truncate(len);
            r
        }),
        _ => Ok(()),
    }
}

/// Canonical JSON body of an envelope, without the length prefix.
pub fn encode_body(env: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    if !env.timestamp.is_finite() {
        return Err(ProtocolError::SchemaViolation("non-finite timestamp".into()));
    }
    let payload = env
        .payload
        .to_value()
        .map_err(|e| ProtocolError::SchemaViolation(e.to_string()))?;
    reject_nulls(&payload, &mut String::from("payload"))?;
    let mut obj = serde_json::Map::new();
    obj.insert("msg_type".into(), Value::from(env.msg_type().name()));
    obj.insert("payload".into(), payload);
    obj.insert("seq".into(), Value::from(env.seq));
    obj.insert("timestamp".into(), Value::from(env.timestamp));
    let body = serde_json::to_vec(&Value::Object(obj)).map_err(|e| ProtocolError::SchemaViolation(e.to_string()))?;
    if body.len() > MAX_FRAME {
        return Err(ProtocolError::OversizeFrame(body.len() as u64));
    }
    Ok(body)
}

/// Length-prefixed frame.
pub fn encode(env: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    let body = encode_body(env)?;
    let mut out = Vec::with_capacity(PREFIX + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decode one JSON body.
pub fn decode_body(body: &[u8]) -> Result<Envelope, ProtocolError> {
    let text = std::str::from_utf8(body).map_err(|e| ProtocolError::MalformedFrame(format!("body is not UTF-8: {e}")))?;
    let value: Value = serde_json::from_str(text).map_err(|e| ProtocolError::MalformedFrame(format!("body is not JSON: {e}")))?;
    let raw: RawEnvelope = serde_json::from_value(value).map_err(|e| ProtocolError::SchemaViolation(e.to_string()))?;
    let ty = MsgType::from_name(&raw.msg_type)
        .ok_or_else(|| ProtocolError::SchemaViolation(format!("unknown msg_type '{}'", raw.msg_type)))?;
    Ok(Envelope {
        seq: raw.seq,
        timestamp: raw.timestamp,
        payload: Payload::from_value(ty, raw.payload)?,
    })
}

/// Decode the first frame in `bytes`. Returns `None` when the frame is not
/// complete yet; otherwise the envelope and the bytes it consumed.
pub fn decode(bytes: &[u8]) -> Result<Option<(Envelope, usize)>, ProtocolError> {
    let Some(len) = frame_len(bytes)? else {
        return Ok(None);
    };
    if bytes.len() < PREFIX + len {
        return Ok(None);
    }
    let env = decode_body(&bytes[PREFIX..PREFIX + len])?;
    Ok(Some((env, PREFIX + len)))
}

fn frame_len(bytes: &[u8]) -> Result<Option<usize>, ProtocolError> {
    if bytes.len() < PREFIX {
        return Ok(None);
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as u64;
    if len > MAX_FRAME as u64 {
        return Err(ProtocolError::OversizeFrame(len));
    }
    if len == 0 {
        return Err(ProtocolError::MalformedFrame("zero-length frame".into()));
    }
    Ok(Some(len as usize))
}

/// Reassembles frames from an arbitrarily chunked byte stream.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &[u8]) {
        if self.start > 0 && self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        }
        self.buf.extend_from_slice(chunk);
    }

    /// Next complete envelope. A frame that fails to decode is consumed, so
    /// the caller may log the error and keep reading. An oversize prefix is
    /// not recoverable.
    pub fn next_envelope(&mut self) -> Result<Option<Envelope>, ProtocolError> {
        let pending = &self.buf[self.start..];
        let Some(len) = frame_len(pending)? else {
            return Ok(None);
        };
        if pending.len() < PREFIX + len {
            return Ok(None);
        }
        let body = &pending[PREFIX..PREFIX + len];
        let result = decode_body(body);
        self.start += PREFIX + len;
        if self.start > 64 * 1024 && self.start * 2 > self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        result.map(Some)
    }

    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }
}

/// Per-connection sequence check: accepts strictly increasing seq values.
#[derive(Debug, Default, Clone)]
pub struct SeqGuard {
    last: Option<u64>,
    pub dropped: u64,
}

impl SeqGuard {
    pub fn accept(&mut self, seq: u64) -> bool {
        match self.last {
            Some(last) if seq <= last => {
                self.dropped += 1;
                false
            }
            _ => {
                self.last = Some(seq);
                true
            }
        }
    }
}
