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

//! Replays a recorded pool log to observers at a chosen speed.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::AtomicU64;
use std::sync::Arc;
use std::time::Duration;

use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tokio::time::Instant;

use super::server::{accept_loop, Body, Event};
use super::{Clock, NetError};
use crate::poollog::{import_pool_log, snapshots};
use crate::protocol::{encode_body, EntityKind, Envelope, ErrorPayload, Payload, RegisterAckPayload};

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub log: PathBuf,
    pub listen: SocketAddr,
    pub ws_listen: Option<SocketAddr>,
    /// Playback rate relative to the recording. Zero sends only the final
    /// frame.
    pub speed_factor: f64,
    /// Observers to wait for before the first frame.
    pub wait_observers: usize,
    pub tick_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplaySummary {
    pub frames_sent: usize,
    pub observers: usize,
}

struct Replayer {
    sessions: HashMap<u64, (mpsc::Sender<Body>, bool)>,
    seq: u64,
    clock: Clock,
    tick_hz: f64,
    observers_seen: usize,
}

impl Replayer {
    fn send(&mut self, conn: u64, payload: Payload) {
        self.seq += 1;
        let Ok(body) = encode_body(&Envelope::new(self.seq, self.clock.now(), payload)) else {
            return;
        };
        if let Some((tx, _)) = self.sessions.get(&conn) {
            if tx.try_send(Arc::new(body)).is_err() {
                self.sessions.remove(&conn);
            }
        }
    }

    fn broadcast(&mut self, payload: Payload) {
        self.seq += 1;
        let Ok(body) = encode_body(&Envelope::new(self.seq, self.clock.now(), payload)) else {
            return;
        };
        let body = Arc::new(body);
        self.sessions.retain(|_, (tx, observer)| !*observer || tx.try_send(body.clone()).is_ok());
    }

    fn on_event(&mut self, ev: Event) {
        match ev {
            Event::Open { conn, tx } => {
                self.sessions.insert(conn, (tx, false));
            }
            Event::Closed { conn } => {
                self.sessions.remove(&conn);
            }
            Event::Bad { conn, err } => self.send(conn, Payload::Error(ErrorPayload::new("MalformedFrame", err.to_string()))),
            Event::Message { conn, env, .. } => match env.payload {
                Payload::Register(p) => {
                    let ok = p.entity_kind == EntityKind::Observer;
                    let ack = RegisterAckPayload {
                        entity_id: p.entity_id,
                        accepted: ok,
                        error: (!ok).then(|| ErrorPayload::new("NotPermitted", "a replay only serves observers")),
                        tick_hz: self.tick_hz,
                        track: None,
                    };
                    self.send(conn, Payload::RegisterAck(ack));
                    if ok {
                        if let Some(s) = self.sessions.get_mut(&conn) {
                            s.1 = true;
                            self.observers_seen += 1;
                        }
                    }
                }
                Payload::Heartbeat(hb) if hb.remote.is_none() => {
                    let now = self.clock.now();
                    self.send(
                        conn,
                        Payload::Heartbeat(crate::protocol::HeartbeatPayload {
                            origin: hb.origin,
                            remote: Some(now),
                        }),
                    );
                }
                _ => {}
            },
        }
    }

    fn observers(&self) -> usize {
        self.sessions.values().filter(|(_, o)| *o).count()
    }
}

/// Serve the log, then close every connection. `ready` receives the bound
/// framed and WebSocket addresses.
pub async fn replay(opts: ReplayOptions, ready: Option<tokio::sync::oneshot::Sender<(SocketAddr, Option<SocketAddr>)>>) -> Result<ReplaySummary, NetError> {
    let rows = import_pool_log(&opts.log).map_err(|e| NetError::Io(std::io::Error::other(e.to_string())))?;
    let frames = snapshots(&rows).map_err(|e| NetError::Io(std::io::Error::other(e.to_string())))?;
    let tcp = TcpListener::bind(opts.listen).await?;
    let addr = tcp.local_addr()?;
    let ws = match opts.ws_listen {
        Some(a) => Some(TcpListener::bind(a).await?),
        None => None,
    };
    let ws_addr = ws.as_ref().map(|l| l.local_addr()).transpose()?;
    log::info!("replaying {} frames on {addr} (framed), {ws_addr:?} (websocket)", frames.len());
    if let Some(tx) = ready {
        let _ = tx.send((addr, ws_addr));
    }
    let (stop_tx, stop) = watch::channel(false);
    let (events_tx, mut events) = mpsc::channel(1024);
    let clock = Clock::start();
    let ids = Arc::new(AtomicU64::new(1));
    let mut tasks = vec![tokio::spawn(accept_loop(tcp, false, events_tx.clone(), stop.clone(), clock, ids.clone(), 4096))];
    if let Some(l) = ws {
        tasks.push(tokio::spawn(accept_loop(l, true, events_tx.clone(), stop.clone(), clock, ids, 4096)));
    }
    drop(events_tx);
    let mut r = Replayer {
        sessions: HashMap::new(),
        seq: 0,
        clock,
        tick_hz: opts.tick_hz,
        observers_seen: 0,
    };
    while r.observers() < opts.wait_observers {
        match events.recv().await {
            Some(ev) => r.on_event(ev),
            None => return Err(NetError::Closed),
        }
    }
    let schedule: Vec<usize> = if opts.speed_factor > 0.0 {
        (0..frames.len()).collect()
    } else {
        frames.len().checked_sub(1).into_iter().collect()
    };
    let start = Instant::now();
    let t_first = frames.first().map_or(0.0, |f| f.pool_timestamp);
    let mut sent = 0;
    for i in schedule {
        let f = &frames[i];
        if opts.speed_factor > 0.0 {
            let due = start + Duration::from_secs_f64(((f.pool_timestamp - t_first) / opts.speed_factor).max(0.0));
            loop {
                tokio::select! {
                    _ = tokio::time::sleep_until(due) => break,
                    Some(ev) = events.recv() => r.on_event(ev),
                }
            }
        }
        r.broadcast(Payload::StatePool(f.clone()));
        sent += 1;
    }
    let observers = r.observers_seen;
    // dropping the senders lets each writer drain its queue and close
    let open: Vec<u64> = r.sessions.keys().copied().collect();
    r.sessions.clear();
    let deadline = Instant::now() + Duration::from_secs(5);
    let mut remaining = open.len();
    while remaining > 0 {
        match tokio::time::timeout_at(deadline, events.recv()).await {
            Ok(Some(Event::Closed { conn })) if open.contains(&conn) => remaining -= 1,
            Ok(Some(_)) => {}
            _ => break,
        }
    }
    let _ = stop_tx.send(true);
    for t in tasks {
        let _ = t.await;
    }
    Ok(ReplaySummary {
        frames_sent: sent,
        observers,
    })
}
