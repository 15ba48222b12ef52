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

//! Networked hub and clients over TCP (length-prefixed frames) and
//! WebSocket (text bodies).

pub mod clients;
pub mod distributed;
pub mod replay;
pub mod server;

use std::net::SocketAddr;
use std::time::{Duration, Instant};

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;

use futures_util::{SinkExt, StreamExt};
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{
    decode_body, encode, encode_body, Envelope, FrameDecoder, HeartbeatPayload, Payload, ProtocolError, RegisterAckPayload,
    RegisterPayload, SeqGuard,
};

pub use clients::{run_agent, run_controller, AgentOptions, AgentSummary, ControllerSummary, Observer};
pub use distributed::{run_distributed, DistributedOptions, DistributedOutcome};
pub use replay::{replay, ReplayOptions, ReplaySummary};
pub use server::{HubHandle, HubServer, HubStats, ServerConfig};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("websocket: {0}")]
    WebSocket(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("hub closed the connection")]
    Closed,
    #[error("agent failed: {0}")]
    Agent(#[from] mixtwin_core::CoreError),
    #[error("registration refused: {0}")]
    Refused(String),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
}

/// Seconds since a fixed instant, optionally shifted.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    epoch: Instant,
    skew: f64,
}

impl Clock {
    pub fn start() -> Self {
        Clock {
            epoch: Instant::now(),
            skew: 0.0,
        }
    }

    /// A clock that reads `skew` seconds ahead of this one.
    pub fn skewed(self, skew: f64) -> Self {
        Clock {
            skew: self.skew + skew,
            ..self
        }
    }

    pub fn now(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64() + self.skew
    }
}

impl Default for Clock {
    fn default() -> Self {
        Clock::start()
    }
}

fn tick_period(hz: f64) -> Duration {
    Duration::from_secs_f64(1.0 / hz)
}

type WsStream = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>;

enum Transport {
    Framed {
        reader: OwnedReadHalf,
        writer: OwnedWriteHalf,
        decoder: FrameDecoder,
        buf: Vec<u8>,
    },
    WebSocket(Box<WsStream>),
}

/// Client side of a hub connection, framed TCP or WebSocket. `recv` is
/// cancel safe.
pub struct Link {
    transport: Transport,
    guard: SeqGuard,
    seq: u64,
    clock: Clock,
}

impl Link {
    pub async fn connect(addr: SocketAddr, clock: Clock) -> Result<Link, NetError> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (reader, writer) = stream.into_split();
        Ok(Link::with(
            Transport::Framed {
                reader,
                writer,
                decoder: FrameDecoder::new(),
                buf: vec![0; 64 * 1024],
            },
            clock,
        ))
    }

    pub async fn connect_ws(addr: SocketAddr, clock: Clock) -> Result<Link, NetError> {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/")).await?;
        Ok(Link::with(Transport::WebSocket(Box::new(ws)), clock))
    }

    fn with(transport: Transport, clock: Clock) -> Link {
        Link {
            transport,
            guard: SeqGuard::default(),
            seq: 0,
            clock,
        }
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    /// Send a payload stamped with the next seq and the local clock. Returns the seq.
    pub async fn send(&mut self, payload: Payload) -> Result<u64, NetError> {
        self.seq += 1;
        let env = Envelope::new(self.seq, self.clock.now(), payload);
        match &mut self.transport {
            Transport::Framed { writer, .. } => writer.write_all(&encode(&env)?).await?,
            Transport::WebSocket(ws) => {
                let body = String::from_utf8(encode_body(&env)?).expect("JSON is UTF-8");
                ws.send(Message::text(body)).await?;
            }
        }
        Ok(self.seq)
    }

    /// Send raw bytes as they are: a frame on TCP, a text message on WebSocket.
    pub async fn send_raw(&mut self, bytes: &[u8]) -> Result<(), NetError> {
        match &mut self.transport {
            Transport::Framed { writer, .. } => writer.write_all(bytes).await?,
            Transport::WebSocket(ws) => ws.send(Message::text(String::from_utf8_lossy(bytes).into_owned())).await?,
        }
        Ok(())
    }

    async fn next_raw(&mut self) -> Result<Envelope, NetError> {
        match &mut self.transport {
            Transport::Framed {
                reader, decoder, buf, ..
            } => loop {
                let before = decoder.buffered();
                match decoder.next_envelope() {
                    Ok(Some(env)) => return Ok(env),
                    Ok(None) => {}
                    Err(e) if decoder.buffered() == before => return Err(e.into()),
                    Err(e) => {
                        log::warn!("skipping frame: {e}");
                        continue;
                    }
                }
                let n = reader.read(buf).await?;
                if n == 0 {
                    return Err(NetError::Closed);
                }
                decoder.push(&buf[..n]);
            },
            Transport::WebSocket(ws) => loop {
                let body = match ws.next().await {
                    None | Some(Ok(Message::Close(_))) => return Err(NetError::Closed),
                    Some(Err(e)) => return Err(e.into()),
                    Some(Ok(Message::Text(t))) => t.as_bytes().to_vec(),
                    Some(Ok(Message::Binary(b))) => b.to_vec(),
                    Some(Ok(_)) => continue,
                };
                match decode_body(&body) {
                    Ok(env) => return Ok(env),
                    Err(e) => log::warn!("skipping message: {e}"),
                }
            },
        }
    }

    /// Next envelope with a fresh seq. Undecodable frames and stale seqs are
    /// logged and skipped.
    pub async fn recv(&mut self) -> Result<Envelope, NetError> {
        loop {
            let env = self.next_raw().await?;
            if self.guard.accept(env.seq) {
                return Ok(env);
            }
            log::debug!("dropping stale seq {}", env.seq);
        }
    }

    /// Receive until `pick` returns a value, answering hub heartbeats on the way.
    pub async fn recv_until<T>(&mut self, limit: Duration, mut pick: impl FnMut(&Envelope) -> Option<T>, what: &'static str) -> Result<T, NetError> {
        let deadline = tokio::time::Instant::now() + limit;
        loop {
            let env = tokio::time::timeout_at(deadline, self.recv())
                .await
                .map_err(|_| NetError::Timeout(what))??;
            if let Some(v) = pick(&env) {
                return Ok(v);
            }
            self.answer_heartbeat(&env).await?;
        }
    }

    /// Echo a hub heartbeat with the local clock. Returns whether it was one.
    pub async fn answer_heartbeat(&mut self, env: &Envelope) -> Result<bool, NetError> {
        if let Payload::Heartbeat(hb) = &env.payload {
            if hb.remote.is_none() {
                let reply = HeartbeatPayload {
                    origin: hb.origin,
                    remote: Some(self.clock.now()),
                };
                self.send(Payload::Heartbeat(reply)).await?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Register and wait for the acknowledgement.
    pub async fn register(&mut self, p: RegisterPayload) -> Result<RegisterAckPayload, NetError> {
        self.send(Payload::Register(p)).await?;
        let ack = self
            .recv_until(
                Duration::from_secs(10),
                |env| match &env.payload {
                    Payload::RegisterAck(a) => Some(a.clone()),
                    _ => None,
                },
                "RegisterAck",
            )
            .await?;
        if !ack.accepted {
            let why = ack.error.map(|e| format!("{}: {}", e.kind, e.message)).unwrap_or_default();
            return Err(NetError::Refused(why));
        }
        Ok(ack)
    }

    pub async fn close(self) {
        match self.transport {
            Transport::Framed { mut writer, .. } => {
                let _ = writer.shutdown().await;
            }
            Transport::WebSocket(mut ws) => {
                let _ = ws.close(None).await;
            }
        }
    }
}
