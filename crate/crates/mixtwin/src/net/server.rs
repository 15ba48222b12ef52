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

//! The hub process: one tick task owns the [`HubCore`]; connection tasks
//! only move bytes and forward decoded envelopes to it.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use futures_util::{SinkExt, StreamExt};
use serde::Serialize;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

use mixtwin_core::hub::{offset_from_exchange, Dispatch, HubConfig, HubCore, HubCounters, HubError};
use mixtwin_core::{SourceId, Track, VehicleId};

use super::{tick_period, Clock, NetError};
use crate::protocol::{
    decode_body, encode_body, AdminAckPayload, AdminCommandPayload, DispatchPayload, EntityKind, Envelope, ErrorPayload,
    FrameDecoder, HeartbeatPayload, Payload, ProtocolError, RegisterAckPayload, RegisterPayload, SeqGuard,
};

const INTERVAL_HISTORY: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub ws_listen: Option<SocketAddr>,
    pub hub: HubConfig,
    pub track: Option<Track>,
    /// Outbound queue per connection, in messages. A full queue disconnects
    /// the consumer.
    pub outbound_capacity: usize,
    pub heartbeat_s: f64,
}

impl ServerConfig {
    /// Loopback on ephemeral ports for both endpoints.
    pub fn local(hub: HubConfig, track: Option<Track>) -> Self {
        ServerConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 0)),
            ws_listen: Some(SocketAddr::from(([127, 0, 0, 1], 0))),
            hub,
            track,
            outbound_capacity: 256,
            heartbeat_s: 1.0,
        }
    }
}

/// Live counters of a running hub.
#[derive(Debug, Clone, Default, Serialize)]
pub struct HubStats {
    pub ticks: u64,
    /// Most recent tick-to-tick intervals, ms.
    pub intervals_ms: VecDeque<f64>,
    /// Worst pool staleness seen, in ticks.
    pub max_staleness_ticks: f64,
    pub vehicles: usize,
    pub connections: usize,
    pub vehicle_drops: u64,
    pub slow_consumer_drops: u64,
    pub protocol_errors: u64,
    pub unsynced_dropped: u64,
    pub counters: HubCounters,
}

impl HubStats {
    /// Nearest-rank quantile of the recorded intervals.
    pub fn interval_quantile(&self, q: f64) -> Option<f64> {
        if self.intervals_ms.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = self.intervals_ms.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
        Some(v[rank - 1])
    }
}

pub struct HubHandle {
    pub addr: SocketAddr,
    pub ws_addr: Option<SocketAddr>,
    stats: Arc<Mutex<HubStats>>,
    reset: Arc<AtomicBool>,
    shutdown: Arc<watch::Sender<bool>>,
    tasks: Vec<JoinHandle<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl HubHandle {
    pub fn stats(&self) -> HubStats {
        self.stats.lock().expect("stats lock").clone()
    }

    /// Clear the interval history and the staleness maximum.
    pub fn reset_window(&self) {
        self.reset.store(true, Ordering::SeqCst);
        let mut s = self.stats.lock().expect("stats lock");
        s.intervals_ms.clear();
        s.max_staleness_ticks = 0.0;
    }

    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
        if let Some(t) = self.thread {
            let _ = tokio::task::spawn_blocking(move || t.join()).await;
        }
    }

    /// Block until the hub stops.
    pub async fn wait(mut self) {
        for t in std::mem::take(&mut self.tasks) {
            let _ = t.await;
        }
        if let Some(t) = self.thread.take() {
            let _ = tokio::task::spawn_blocking(move || t.join()).await;
        }
    }
}

pub struct HubServer;

impl HubServer {
    pub async fn start(config: ServerConfig) -> Result<HubHandle, NetError> {
        let tcp = TcpListener::bind(config.listen).await?;
        let addr = tcp.local_addr()?;
        let ws = match config.ws_listen {
            Some(a) => Some(TcpListener::bind(a).await?),
            None => None,
        };
        let ws_addr = ws.as_ref().map(|l| l.local_addr()).transpose()?;
        let (shutdown, stop) = watch::channel(false);
        let (events_tx, events_rx) = mpsc::channel(4096);
        let stats = Arc::new(Mutex::new(HubStats::default()));
        let clock = Clock::start();
        let ids = Arc::new(AtomicU64::new(1));
        let cap = config.outbound_capacity.max(1);
        let mut tasks = vec![tokio::spawn(accept_loop(tcp, false, events_tx.clone(), stop.clone(), clock, ids.clone(), cap))];
        if let Some(l) = ws {
            tasks.push(tokio::spawn(accept_loop(l, true, events_tx.clone(), stop.clone(), clock, ids, cap)));
        }
        drop(events_tx);
        let reset = Arc::new(AtomicBool::new(false));
        let state = HubState::new(config, clock, stats.clone(), reset.clone());
        tasks.push(tokio::spawn(state.run(events_rx, stop)));
        log::info!("hub listening on {addr} (framed), {ws_addr:?} (websocket)");
        Ok(HubHandle {
            addr,
            ws_addr,
            stats,
            reset,
            shutdown: Arc::new(shutdown),
            tasks,
            thread: None,
        })
    }

    /// Start the hub on its own thread and runtime, isolated from the
    /// caller's tasks.
    pub async fn start_dedicated(config: ServerConfig) -> Result<HubHandle, NetError> {
        let (tx, rx) = tokio::sync::oneshot::channel();
        let thread = std::thread::Builder::new().name("mixtwin-hub".into()).spawn(move || {
            let rt = match tokio::runtime::Builder::new_multi_thread().worker_threads(1).enable_all().build() {
                Ok(rt) => rt,
                Err(e) => {
                    let _ = tx.send(Err(NetError::Io(e)));
                    return;
                }
            };
            rt.block_on(async move {
                match HubServer::start(config).await {
                    Ok(mut h) => {
                        let tasks = std::mem::take(&mut h.tasks);
                        let _ = tx.send(Ok(h));
                        for t in tasks {
                            let _ = t.await;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                    }
                }
            });
        })?;
        let mut h = rx.await.map_err(|_| NetError::Closed)??;
        h.thread = Some(thread);
        Ok(h)
    }
}

pub(super) type Body = Arc<Vec<u8>>;

pub(super) enum Event {
    Open { conn: u64, tx: mpsc::Sender<Body> },
    Message { conn: u64, env: Envelope, at: f64 },
    Bad { conn: u64, err: ProtocolError },
    Closed { conn: u64 },
}

pub(super) async fn accept_loop(
    listener: TcpListener,
    websocket: bool,
    events: mpsc::Sender<Event>,
    mut stop: watch::Receiver<bool>,
    clock: Clock,
    ids: Arc<AtomicU64>,
    cap: usize,
) {
    loop {
        tokio::select! {
            _ = stop.changed() => return,
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    let conn = ids.fetch_add(1, Ordering::Relaxed);
                    log::debug!("connection {conn} from {peer}");
                    let events = events.clone();
                    let stop = stop.clone();
                    tokio::spawn(async move {
                        let r = if websocket {
                            serve_ws(stream, conn, events.clone(), stop, clock, cap).await
                        } else {
                            serve_tcp(stream, conn, events.clone(), stop, clock, cap).await
                        };
                        if let Err(e) = r {
                            log::debug!("connection {conn}: {e}");
                        }
                        let _ = events.send(Event::Closed { conn }).await;
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    }
}

async fn serve_tcp(
    stream: TcpStream,
    conn: u64,
    events: mpsc::Sender<Event>,
    mut stop: watch::Receiver<bool>,
    clock: Clock,
    cap: usize,
) -> Result<(), NetError> {
    let (mut rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::channel::<Body>(cap);
    events.send(Event::Open { conn, tx }).await.map_err(|_| NetError::Closed)?;
    let mut writer = tokio::spawn(async move {
        while let Some(body) = rx.recv().await {
            let mut frame = Vec::with_capacity(4 + body.len());
            frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
            frame.extend_from_slice(&body);
            if wr.write_all(&frame).await.is_err() {
                return;
            }
        }
        let _ = wr.shutdown().await;
    });
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    let result = loop {
        let n = tokio::select! {
            _ = stop.changed() => break Ok(()),
            _ = &mut writer => break Ok(()),
            n = rd.read(&mut buf) => n?,
        };
        if n == 0 {
            break Ok(());
        }
        let at = clock.now();
        decoder.push(&buf[..n]);
        loop {
            let before = decoder.buffered();
            match decoder.next_envelope() {
                Ok(Some(env)) => {
                    if events.send(Event::Message { conn, env, at }).await.is_err() {
                        return Ok(());
                    }
                }
                Ok(None) => break,
                Err(err) => {
                    let fatal = decoder.buffered() == before;
                    let _ = events.send(Event::Bad { conn, err: err.clone() }).await;
                    if fatal {
                        return Err(err.into());
                    }
                }
            }
        }
    };
    writer.abort();
    result
}

async fn serve_ws(
    stream: TcpStream,
    conn: u64,
    events: mpsc::Sender<Event>,
    mut stop: watch::Receiver<bool>,
    clock: Clock,
    cap: usize,
) -> Result<(), NetError> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::channel::<Body>(cap);
    events.send(Event::Open { conn, tx }).await.map_err(|_| NetError::Closed)?;
    let mut writer = tokio::spawn(async move {
        while let Some(body) = rx.recv().await {
            let text = String::from_utf8_lossy(&body).into_owned();
            if sink.send(Message::text(text)).await.is_err() {
                return;
            }
        }
        let _ = sink.close().await;
    });
    let result = loop {
        let msg = tokio::select! {
            _ = stop.changed() => break Ok(()),
            _ = &mut writer => break Ok(()),
            m = source.next() => m,
        };
        let body = match msg {
            None | Some(Ok(Message::Close(_))) => break Ok(()),
            Some(Err(e)) => break Err(e.into()),
            Some(Ok(Message::Text(t))) => t.as_bytes().to_vec(),
            Some(Ok(Message::Binary(b))) => b.to_vec(),
            Some(Ok(_)) => continue,
        };
        let at = clock.now();
        let ev = match decode_body(&body) {
            Ok(env) => Event::Message { conn, env, at },
            Err(err) => Event::Bad { conn, err },
        };
        if events.send(ev).await.is_err() {
            break Ok(());
        }
    };
    writer.abort();
    result
}

struct Session {
    tx: mpsc::Sender<Body>,
    guard: SeqGuard,
    kind: Option<EntityKind>,
    entity_id: Option<String>,
    vehicle: Option<VehicleId>,
    sources: BTreeSet<SourceId>,
    synced: bool,
    best_rtt: f64,
    last_heartbeat: f64,
}

impl Session {
    fn subscribes(&self) -> bool {
        matches!(
            self.kind,
            Some(EntityKind::Controller | EntityKind::DriverStation | EntityKind::Observer)
        )
    }
}

struct HubState {
    core: HubCore,
    config: ServerConfig,
    clock: Clock,
    sessions: HashMap<u64, Session>,
    by_vehicle: HashMap<VehicleId, u64>,
    seq: u64,
    stats: Arc<Mutex<HubStats>>,
    reset: Arc<AtomicBool>,
    local: HubStats,
    last_tick: Option<f64>,
}

impl HubState {
    fn new(config: ServerConfig, clock: Clock, stats: Arc<Mutex<HubStats>>, reset: Arc<AtomicBool>) -> Self {
        HubState {
            core: HubCore::new(config.hub.clone(), config.track.clone()),
            config,
            clock,
            sessions: HashMap::new(),
            by_vehicle: HashMap::new(),
            seq: 0,
            stats,
            reset,
            local: HubStats::default(),
            last_tick: None,
        }
    }

    async fn run(mut self, mut events: mpsc::Receiver<Event>, mut stop: watch::Receiver<bool>) {
        let mut interval = tokio::time::interval(tick_period(self.core.config().tick_hz));
        interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
        loop {
            tokio::select! {
                biased;
                _ = stop.changed() => break,
                _ = interval.tick() => self.on_tick(),
                ev = events.recv() => match ev {
                    Some(ev) => self.on_event(ev),
                    None => break,
                },
            }
        }
        self.sessions.clear();
    }

    fn envelope(&mut self, payload: Payload) -> Option<Body> {
        self.seq += 1;
        match encode_body(&Envelope::new(self.seq, self.clock.now(), payload)) {
            Ok(b) => Some(Arc::new(b)),
            Err(e) => {
                log::error!("cannot encode outbound message: {e}");
                None
            }
        }
    }

    fn push(&mut self, conn: u64, body: Body) {
        let Some(s) = self.sessions.get(&conn) else {
            return;
        };
        if let Err(mpsc::error::TrySendError::Full(_)) = s.tx.try_send(body) {
            log::warn!("connection {conn} is not keeping up; disconnecting it");
            self.local.slow_consumer_drops += 1;
            self.drop_session(conn);
        }
    }

    fn send(&mut self, conn: u64, payload: Payload) {
        if let Some(body) = self.envelope(payload) {
            self.push(conn, body);
        }
    }

    fn send_error(&mut self, conn: u64, kind: &str, message: impl Into<String>) {
        self.send(conn, Payload::Error(ErrorPayload::new(kind, message)));
    }

    fn drop_session(&mut self, conn: u64) {
        let Some(s) = self.sessions.remove(&conn) else {
            return;
        };
        if let Some(v) = s.vehicle {
            log::warn!("vehicle {v} disconnected");
            self.core.unregister_vehicle(v);
            self.by_vehicle.remove(&v);
            self.local.vehicle_drops += 1;
        }
        for src in &s.sources {
            self.core.unregister_source(src);
        }
    }

    fn deliver(&mut self, dispatches: Vec<Dispatch>) {
        for d in dispatches {
            let Some(&conn) = self.by_vehicle.get(&d.instruction.target_vehicle_id) else {
                continue;
            };
            self.send(
                conn,
                Payload::InstructionDispatch(DispatchPayload {
                    tick: d.tick,
                    instruction: d.instruction,
                    clamped: d.clamped,
                }),
            );
        }
    }

    fn on_tick(&mut self) {
        let now = self.clock.now();
        if let Some(last) = self.last_tick {
            if self.local.intervals_ms.len() == INTERVAL_HISTORY {
                self.local.intervals_ms.pop_front();
            }
            self.local.intervals_ms.push_back((now - last) * 1e3);
        }
        self.last_tick = Some(now);
        let d = self.core.housekeeping(now);
        self.deliver(d);

        let due: Vec<u64> = self
            .sessions
            .iter()
            .filter(|(_, s)| s.vehicle.is_some() && now - s.last_heartbeat >= self.config.heartbeat_s)
            .map(|(c, _)| *c)
            .collect();
        for conn in due {
            self.heartbeat(conn, now);
        }

        let pool = self.core.broadcast_pool(now);
        if !pool.states.is_empty() {
            let stale = self.core.staleness(now) * self.core.config().tick_hz;
            self.local.max_staleness_ticks = self.local.max_staleness_ticks.max(stale);
        }
        let subscribers: Vec<u64> = self.sessions.iter().filter(|(_, s)| s.subscribes()).map(|(c, _)| *c).collect();
        if !subscribers.is_empty() {
            if let Some(body) = self.envelope(Payload::StatePool(pool)) {
                for conn in subscribers {
                    self.push(conn, body.clone());
                }
            }
        }
        self.publish_stats();
    }

    fn publish_stats(&mut self) {
        if self.reset.swap(false, Ordering::SeqCst) {
            self.local.intervals_ms.clear();
            self.local.max_staleness_ticks = 0.0;
        }
        let mut shared = self.stats.lock().expect("stats lock");
        self.local.ticks = self.core.tick();
        self.local.vehicles = self.by_vehicle.len();
        self.local.connections = self.sessions.len();
        self.local.counters = self.core.counters();
        *shared = self.local.clone();
    }

    fn heartbeat(&mut self, conn: u64, now: f64) {
        if let Some(s) = self.sessions.get_mut(&conn) {
            s.last_heartbeat = now;
        }
        self.send(conn, Payload::Heartbeat(HeartbeatPayload { origin: now, remote: None }));
    }

    fn on_event(&mut self, ev: Event) {
        match ev {
            Event::Open { conn, tx } => {
                self.sessions.insert(
                    conn,
                    Session {
                        tx,
                        guard: SeqGuard::default(),
                        kind: None,
                        entity_id: None,
                        vehicle: None,
                        sources: BTreeSet::new(),
                        synced: false,
                        best_rtt: f64::INFINITY,
                        last_heartbeat: f64::NEG_INFINITY,
                    },
                );
            }
            Event::Closed { conn } => self.drop_session(conn),
            Event::Bad { conn, err } => {
                self.local.protocol_errors += 1;
                let kind = match err {
                    ProtocolError::MalformedFrame(_) => "MalformedFrame",
                    ProtocolError::SchemaViolation(_) => "SchemaViolation",
                    ProtocolError::OversizeFrame(_) => "OversizeFrame",
                };
                self.send_error(conn, kind, err.to_string());
            }
            Event::Message { conn, env, at } => self.on_message(conn, env, at),
        }
    }

    fn on_message(&mut self, conn: u64, env: Envelope, at: f64) {
        let Some(s) = self.sessions.get_mut(&conn) else {
            return;
        };
        if !s.guard.accept(env.seq) {
            log::debug!("connection {conn}: stale seq {}", env.seq);
            return;
        }
        let registered = s.kind.is_some();
        match env.payload {
            Payload::Register(p) => self.on_register(conn, p),
            Payload::Heartbeat(hb) => self.on_heartbeat(conn, hb, at),
            _ if !registered => self.send_error(conn, "NotRegistered", "register before sending other messages"),
            Payload::StateUpdate(state) => {
                let s = &self.sessions[&conn];
                if s.vehicle != Some(state.vehicle_id) {
                    self.send_error(conn, "UnknownVehicle", format!("this connection does not drive vehicle {}", state.vehicle_id));
                    return;
                }
                if !s.synced {
                    self.local.unsynced_dropped += 1;
                    return;
                }
                match self.core.ingest_state(state, at) {
                    Ok(_) | Err(HubError::StaleSeq { .. }) => {}
                    Err(e) => self.send_error(conn, e.kind(), e.to_string()),
                }
            }
            Payload::Instruction(instr) => {
                if !self.sessions[&conn].sources.contains(&instr.source_id) {
                    self.send_error(conn, "UnknownSource", format!("source '{}' is not owned by this connection", instr.source_id));
                    return;
                }
                match self.core.route_instruction(&instr, at) {
                    Ok(d) => self.deliver(d),
                    Err(HubError::UnmappedSource(_)) => {}
                    Err(e) => self.send_error(conn, e.kind(), e.to_string()),
                }
            }
            Payload::AdminCommand(cmd) => {
                if self.sessions[&conn].kind == Some(EntityKind::VehicleAgent) {
                    self.send_error(conn, "NotPermitted", "vehicle agents cannot issue admin commands");
                    return;
                }
                let result = match cmd {
                    AdminCommandPayload::Remap {
                        source_id,
                        vehicle_id,
                        channel,
                        force,
                    } => self.core.remap(&source_id, vehicle_id, channel, force),
                    AdminCommandPayload::Unmap { source_id } => {
                        if self.core.has_source(&source_id) {
                            self.core.unregister_source(&source_id);
                            self.core.register_source(source_id)
                        } else {
                            Err(HubError::UnknownSource(source_id))
                        }
                    }
                };
                let ack = AdminAckPayload {
                    command_seq: env.seq,
                    ok: result.is_ok(),
                    error: result.err().map(|e| ErrorPayload::new(e.kind(), e.to_string())),
                };
                self.send(conn, Payload::AdminAck(ack));
            }
            other => self.send_error(conn, "UnexpectedMessage", format!("{} is hub-to-client only", other.msg_type().name())),
        }
    }

    fn on_heartbeat(&mut self, conn: u64, hb: HeartbeatPayload, at: f64) {
        match hb.remote {
            None => {
                let now = self.clock.now();
                self.send(conn, Payload::Heartbeat(HeartbeatPayload { origin: hb.origin, remote: Some(now) }));
            }
            Some(remote) => {
                let Some(s) = self.sessions.get_mut(&conn) else {
                    return;
                };
                let rtt = at - hb.origin;
                if !(rtt >= 0.0) || rtt > s.best_rtt {
                    return;
                }
                s.best_rtt = rtt;
                s.synced = true;
                if let Some(v) = s.vehicle {
                    let _ = self.core.set_clock_offset(v, offset_from_exchange(hb.origin, remote, at));
                }
            }
        }
    }

    fn refuse(&mut self, conn: u64, entity_id: String, kind: &str, message: String) {
        log::warn!("refusing '{entity_id}': {message}");
        let ack = RegisterAckPayload {
            entity_id,
            accepted: false,
            error: Some(ErrorPayload::new(kind, message)),
            tick_hz: self.core.config().tick_hz,
            track: None,
        };
        self.send(conn, Payload::RegisterAck(ack));
    }

    fn on_register(&mut self, conn: u64, p: RegisterPayload) {
        if self.sessions[&conn].kind.is_some() {
            self.send_error(conn, "AlreadyRegistered", "this connection is already registered");
            return;
        }
        if self.sessions.values().any(|s| s.entity_id.as_deref() == Some(p.entity_id.as_str())) {
            self.refuse(conn, p.entity_id.clone(), "DuplicateRegistration", format!("entity '{}' is already connected", p.entity_id));
            return;
        }
        let mut vehicle = None;
        let mut sources = BTreeSet::new();
        match p.entity_kind {
            EntityKind::VehicleAgent => {
                let Some(spec) = p.vehicle.clone() else {
                    self.refuse(conn, p.entity_id, "SchemaViolation", "a VehicleAgent must describe its vehicle".into());
                    return;
                };
                if let Some(f) = p.frame {
                    if f != spec.frame() {
                        self.refuse(conn, p.entity_id, "FrameMismatch", format!("frame {f:?} does not match the vehicle's {:?}", spec.frame()));
                        return;
                    }
                }
                let id = spec.vehicle_id;
                if let Err(e) = self.core.register_vehicle(spec) {
                    self.refuse(conn, p.entity_id, e.kind(), e.to_string());
                    return;
                }
                vehicle = Some(id);
            }
            EntityKind::Controller | EntityKind::DriverStation => {
                let wanted = if p.sources.is_empty() {
                    vec![SourceId::new(p.entity_id.clone())]
                } else {
                    p.sources.clone()
                };
                for src in wanted {
                    if let Err(e) = self.core.register_source(src.clone()) {
                        for done in &sources {
                            self.core.unregister_source(done);
                        }
                        self.refuse(conn, p.entity_id, e.kind(), e.to_string());
                        return;
                    }
                    sources.insert(src);
                }
            }
            EntityKind::Observer | EntityKind::Admin => {}
        }
        let s = self.sessions.get_mut(&conn).expect("checked above");
        s.kind = Some(p.entity_kind);
        s.entity_id = Some(p.entity_id.clone());
        s.vehicle = vehicle;
        s.sources = sources;
        if let Some(v) = vehicle {
            self.by_vehicle.insert(v, conn);
        }
        log::info!("registered {:?} '{}'", p.entity_kind, p.entity_id);
        let ack = RegisterAckPayload {
            entity_id: p.entity_id,
            accepted: true,
            error: None,
            tick_hz: self.core.config().tick_hz,
            track: self.core.track().map(Track::to_def),
        };
        self.send(conn, Payload::RegisterAck(ack));
        if vehicle.is_some() {
            let now = self.clock.now();
            self.heartbeat(conn, now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_nearest_rank() {
        let mut s = HubStats::default();
        assert_eq!(s.interval_quantile(0.99), None);
        s.intervals_ms = (1..=100).map(f64::from).collect();
        assert_eq!(s.interval_quantile(0.99), Some(99.0));
        assert_eq!(s.interval_quantile(1.0), Some(100.0));
        assert_eq!(s.interval_quantile(0.0), Some(1.0));
    }
}
