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

#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::sync::watch;
use tokio::task::JoinHandle;

use mixtwin::core::hub::{Channel, HubConfig};
use mixtwin::core::{ControlInstruction, FrameId, Role, SourceId, Track, VehicleId, VehicleKind, VehicleSpec, VehicleState};
use mixtwin::net::{Clock, HubHandle, HubServer, Link, ServerConfig};
use mixtwin::protocol::*;
use mixtwin::scenario::{PlatoonEntry, SourceKind};

pub async fn local_hub() -> HubHandle {
    let cfg = ServerConfig::local(HubConfig::default(), Some(Track::default_loop()));
    HubServer::start(cfg).await.unwrap()
}

pub fn virtual_spec(id: u32) -> VehicleSpec {
    PlatoonEntry::new(id, VehicleKind::Virtual, Role::Cav, SourceKind::Cacc).vehicle_spec()
}

/// A bare vehicle connection that records every dispatch it is sent.
pub struct FakeAgent {
    pub dispatches: Arc<Mutex<Vec<DispatchPayload>>>,
    pub errors: Arc<Mutex<Vec<ErrorPayload>>>,
    stop: watch::Sender<bool>,
    task: JoinHandle<Link>,
}

impl FakeAgent {
    pub async fn start(addr: SocketAddr, spec: VehicleSpec, clock: Clock, publish: Option<VehicleState>) -> FakeAgent {
        let mut link = Link::connect(addr, clock).await.unwrap();
        link.register(RegisterPayload {
            entity_kind: EntityKind::VehicleAgent,
            entity_id: format!("fake-{}", spec.vehicle_id.0),
            frame: Some(spec.frame()),
            capabilities: vec![],
            sources: vec![],
            vehicle: Some(spec),
        })
        .await
        .unwrap();
        let dispatches = Arc::new(Mutex::new(Vec::new()));
        let errors = Arc::new(Mutex::new(Vec::new()));
        let (stop, mut stopped) = watch::channel(false);
        let (d, e) = (dispatches.clone(), errors.clone());
        let task = tokio::spawn(async move {
            let mut every = tokio::time::interval(Duration::from_millis(20));
            let mut seq = 0;
            loop {
                tokio::select! {
                    _ = stopped.changed() => return link,
                    _ = every.tick(), if publish.is_some() => {
                        let mut s = publish.clone().unwrap();
                        seq += 1;
                        s.seq = seq;
                        s.timestamp = link.clock().now();
                        link.send(Payload::StateUpdate(s)).await.unwrap();
                    }
                    env = link.recv() => {
                        let Ok(env) = env else { return link };
                        match &env.payload {
                            Payload::InstructionDispatch(p) => d.lock().unwrap().push(p.clone()),
                            Payload::Error(p) => e.lock().unwrap().push(p.clone()),
                            _ => {
                                link.answer_heartbeat(&env).await.unwrap();
                            }
                        }
                    }
                }
            }
        });
        FakeAgent {
            dispatches,
            errors,
            stop,
            task,
        }
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.dispatches.lock().unwrap().iter().map(|d| d.instruction.desired_speed).collect()
    }

    pub async fn stop(self) -> Link {
        let _ = self.stop.send(true);
        self.task.await.unwrap()
    }
}

pub fn instruction(source: &str, target: u32, speed: f64, seq: u64) -> ControlInstruction {
    ControlInstruction::unified(VehicleId(target), SourceId::new(source), 0.0, speed, 0.0, seq)
}

pub async fn admin(link: &mut Link, cmd: AdminCommandPayload) -> AdminAckPayload {
    let seq = link.send(Payload::AdminCommand(cmd)).await.unwrap();
    link.recv_until(
        Duration::from_secs(5),
        |env| match &env.payload {
            Payload::AdminAck(a) if a.command_seq == seq => Some(a.clone()),
            _ => None,
        },
        "AdminAck",
    )
    .await
    .unwrap()
}

pub fn remap(source: &str, vehicle: u32, force: bool) -> AdminCommandPayload {
    AdminCommandPayload::Remap {
        source_id: SourceId::new(source),
        vehicle_id: VehicleId(vehicle),
        channel: Channel::Both,
        force,
    }
}

#[derive(Debug)]
pub struct SwapOutcome {
    pub old_vehicle: Vec<f64>,
    pub new_vehicle: Vec<f64>,
    pub sent_before: Vec<f64>,
    pub sent_after: Vec<f64>,
}

/// A driver station on the WebSocket endpoint steers vehicle 1, is remapped
/// to vehicle 2 mid-stream, and keeps sending with the old target id.
pub async fn networked_hot_swap() -> SwapOutcome {
    let hub = local_hub().await;
    let a = FakeAgent::start(hub.addr, virtual_spec(1), Clock::start(), None).await;
    let b = FakeAgent::start(hub.addr, virtual_spec(2), Clock::start(), None).await;
    let mut station = Link::connect_ws(hub.ws_addr.unwrap(), Clock::start()).await.unwrap();
    station
        .register(RegisterPayload {
            entity_kind: EntityKind::DriverStation,
            entity_id: "station-1".into(),
            frame: None,
            capabilities: vec!["wheel".into()],
            sources: vec![SourceId::new("station-1")],
            vehicle: None,
        })
        .await
        .unwrap();
    assert!(admin(&mut station, remap("station-1", 1, false)).await.ok);
    let sent_before: Vec<f64> = (0..5).map(|i| 1.0 + 0.1 * i as f64).collect();
    let sent_after: Vec<f64> = (0..5).map(|i| 2.0 + 0.1 * i as f64).collect();
    for (i, v) in sent_before.iter().enumerate() {
        station.send(Payload::Instruction(instruction("station-1", 1, *v, i as u64 + 1))).await.unwrap();
    }
    let ack = admin(&mut station, remap("station-1", 2, true)).await;
    assert!(ack.ok, "{ack:?}");
    for (i, v) in sent_after.iter().enumerate() {
        station.send(Payload::Instruction(instruction("station-1", 1, *v, i as u64 + 10))).await.unwrap();
    }
    tokio::time::sleep(Duration::from_millis(300)).await;
    let out = SwapOutcome {
        old_vehicle: a.speeds(),
        new_vehicle: b.speeds(),
        sent_before,
        sent_after,
    };
    station.close().await;
    a.stop().await;
    b.stop().await;
    hub.shutdown().await;
    out
}

/// A state on the track centreline; valid in the virtual frame too, whose scale is one.
pub fn virtual_state(id: u32, track: &Track, arc: f64, speed: f64) -> VehicleState {
    let mut s = VehicleState::at_rest(VehicleId(id), FrameId::Virtual, track.point_at(arc));
    s.arc_position = arc;
    s.speed = speed;
    s
}
