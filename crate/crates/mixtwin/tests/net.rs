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

mod common;

use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use common::*;
use mixtwin::core::{SourceId, Track, VehicleId};
use mixtwin::harness::LockstepRun;
use mixtwin::net::*;
use mixtwin::poollog::export_pool_log;
use mixtwin::protocol::*;
use mixtwin::scenario::{mixed_platoon, DriverPreset};

async fn raw_error(stream: &mut TcpStream) -> ErrorPayload {
    let mut dec = FrameDecoder::new();
    let mut buf = [0u8; 4096];
    loop {
        let n = tokio::time::timeout(Duration::from_secs(5), stream.read(&mut buf)).await.unwrap().unwrap();
        assert!(n > 0, "closed before an error arrived");
        dec.push(&buf[..n]);
        while let Some(env) = dec.next_envelope().unwrap() {
            if let Payload::Error(e) = env.payload {
                return e;
            }
        }
    }
}

#[tokio::test]
async fn websocket_observer_receives_pools_and_bad_text_gets_an_error() {
    let hub = local_hub().await;
    let track = Track::default_loop();
    let agent = FakeAgent::start(hub.addr, virtual_spec(3), Clock::start(), Some(virtual_state(3, &track, 12.0, 2.0))).await;
    let mut obs = Observer::connect_ws(hub.ws_addr.unwrap(), "ui").await.unwrap();
    let mut found = None;
    for _ in 0..100 {
        let pool = obs.next_pool().await.unwrap();
        if let Some(s) = pool.states.iter().find(|s| s.vehicle_id == VehicleId(3)) {
            found = Some((pool.tick, s.clone()));
            break;
        }
    }
    let (tick, s) = found.expect("vehicle 3 shows up in the pool");
    assert!(tick > 0);
    assert!((s.speed - 2.0).abs() < 1e-12);
    assert_eq!(s.frame, mixtwin::core::FrameId::Unified);
    obs.close().await;

    let mut raw = Link::connect_ws(hub.ws_addr.unwrap(), Clock::start()).await.unwrap();
    raw.send_raw(b"{not json").await.unwrap();
    let err = raw
        .recv_until(Duration::from_secs(5), |e| match &e.payload {
            Payload::Error(p) => Some(p.clone()),
            _ => None,
        }, "Error")
        .await
        .unwrap();
    assert_eq!(err.kind, "MalformedFrame");
    raw.send(Payload::Instruction(instruction("x", 3, 1.0, 1))).await.unwrap();
    let err = raw
        .recv_until(Duration::from_secs(5), |e| match &e.payload {
            Payload::Error(p) => Some(p.clone()),
            _ => None,
        }, "Error")
        .await
        .unwrap();
    assert_eq!(err.kind, "NotRegistered");
    raw.close().await;
    agent.stop().await;
    hub.shutdown().await;
}

#[tokio::test]
async fn hot_swap_over_the_network() {
    let out = networked_hot_swap().await;
    assert_eq!(out.old_vehicle, out.sent_before);
    assert_eq!(out.new_vehicle, out.sent_after);
}

#[tokio::test]
async fn registration_rules() {
    let hub = local_hub().await;
    let _a = FakeAgent::start(hub.addr, virtual_spec(1), Clock::start(), None).await;
    let mut dup = Link::connect(hub.addr, Clock::start()).await.unwrap();
    let err = dup
        .register(RegisterPayload {
            entity_kind: EntityKind::VehicleAgent,
            entity_id: "another".into(),
            frame: None,
            capabilities: vec![],
            sources: vec![],
            vehicle: Some(virtual_spec(1)),
        })
        .await
        .unwrap_err();
    assert!(err.to_string().contains("DuplicateRegistration"), "{err}");

    let mut c = Link::connect(hub.addr, Clock::start()).await.unwrap();
    let mismatch = c
        .register(RegisterPayload {
            entity_kind: EntityKind::VehicleAgent,
            entity_id: "v9".into(),
            frame: Some(mixtwin::core::FrameId::Physical),
            capabilities: vec![],
            sources: vec![],
            vehicle: Some(virtual_spec(9)),
        })
        .await
        .unwrap_err();
    assert!(mismatch.to_string().contains("FrameMismatch"), "{mismatch}");

    let mut ctl = Link::connect(hub.addr, Clock::start()).await.unwrap();
    ctl.register(RegisterPayload {
        entity_kind: EntityKind::Controller,
        entity_id: "ctl".into(),
        frame: None,
        capabilities: vec![],
        sources: vec![SourceId::new("ctl/1")],
        vehicle: None,
    })
    .await
    .unwrap();
    ctl.send(Payload::Instruction(instruction("someone-else", 1, 1.0, 1))).await.unwrap();
    let e = ctl
        .recv_until(Duration::from_secs(5), |e| match &e.payload {
            Payload::Error(p) => Some(p.clone()),
            _ => None,
        }, "Error")
        .await
        .unwrap();
    assert_eq!(e.kind, "UnknownSource");
    let ack = admin(&mut ctl, remap("ctl/1", 77, false)).await;
    assert!(!ack.ok);
    assert_eq!(ack.error.unwrap().kind, "UnknownVehicle");
    let ack = admin(&mut ctl, AdminCommandPayload::Unmap { source_id: SourceId::new("ctl/1") }).await;
    assert!(ack.ok);
    hub.shutdown().await;
}

#[tokio::test]
async fn oversize_frame_is_answered_and_the_connection_closed() {
    let hub = local_hub().await;
    let mut s = TcpStream::connect(hub.addr).await.unwrap();
    s.write_all(&((MAX_FRAME as u32) + 1).to_be_bytes()).await.unwrap();
    let e = raw_error(&mut s).await;
    assert_eq!(e.kind, "OversizeFrame");
    let mut buf = [0u8; 64];
    let n = tokio::time::timeout(Duration::from_secs(5), async {
        loop {
            match s.read(&mut buf).await {
                Ok(0) | Err(_) => return 0,
                Ok(_) => continue,
            }
        }
    })
    .await
    .unwrap();
    assert_eq!(n, 0);
    hub.shutdown().await;
}

#[tokio::test]
async fn disconnecting_agent_is_unregistered_and_counted() {
    let hub = local_hub().await;
    let a = FakeAgent::start(hub.addr, virtual_spec(5), Clock::start(), None).await;
    tokio::time::sleep(Duration::from_millis(100)).await;
    assert_eq!(hub.stats().vehicles, 1);
    a.stop().await.close().await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    let st = hub.stats();
    assert_eq!(st.vehicles, 0);
    assert_eq!(st.vehicle_drops, 1);
    hub.shutdown().await;
}

#[tokio::test]
async fn clock_offset_is_learned_from_heartbeats() {
    let hub = local_hub().await;
    let track = Track::default_loop();
    // the agent's clock runs 100 s behind the hub's
    let clock = Clock::start().skewed(-100.0);
    let speed = 2.0;
    let a = FakeAgent::start(hub.addr, virtual_spec(4), clock, Some(virtual_state(4, &track, 30.0, speed))).await;
    let mut obs = Observer::connect(hub.addr, "obs").await.unwrap();
    let mut arcs = Vec::new();
    while arcs.len() < 20 {
        let p = obs.next_pool().await.unwrap();
        if let Some(s) = p.states.iter().find(|s| s.vehicle_id == VehicleId(4)) {
            arcs.push(s.arc_position);
        }
    }
    for arc in arcs {
        assert!((arc - 30.0).abs() < speed * 0.05, "{arc}");
    }
    obs.close().await;
    a.stop().await;
    hub.shutdown().await;
}

#[tokio::test]
async fn replay_serves_the_last_frame_or_the_whole_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = mixed_platoon(mixtwin::core::profile::Perturbation::half_sine(), DriverPreset::Named("default".into()));
    spec.max_duration_s = Some(1.0);
    let outcome = LockstepRun::new(spec, Track::default_loop()).unwrap().run_to_end().unwrap();
    let log = dir.path().join("pool_log.csv");
    export_pool_log(&log, &outcome.pool_log).unwrap();
    let frames = outcome.report.ticks as usize;

    for (factor, expect) in [(0.0, 1usize), (20.0, frames)] {
        let (tx, rx) = tokio::sync::oneshot::channel();
        let opts = ReplayOptions {
            log: log.clone(),
            listen: "127.0.0.1:0".parse().unwrap(),
            ws_listen: Some("127.0.0.1:0".parse().unwrap()),
            speed_factor: factor,
            wait_observers: 1,
            tick_hz: 50.0,
        };
        let server = tokio::spawn(replay(opts, Some(tx)));
        let (_, ws) = rx.await.unwrap();
        let mut obs = Observer::connect_ws(ws.unwrap(), "viewer").await.unwrap();
        let mut got = Vec::new();
        while let Ok(p) = obs.next_pool().await {
            got.push(p);
        }
        let summary = server.await.unwrap().unwrap();
        assert_eq!(summary.frames_sent, expect);
        assert_eq!(got.len(), expect, "factor {factor}");
        assert_eq!(got.last().unwrap().tick, frames as u64);
        assert!(got.windows(2).all(|w| w[0].tick < w[1].tick));
        assert_eq!(got.last().unwrap().states.len(), 8);
    }
}
