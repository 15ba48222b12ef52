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

//! Pool log: one CSV row per vehicle per broadcast.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use mixtwin_core::hub::PoolSnapshot;
use mixtwin_core::{FrameId, VehicleId, VehicleState};

pub const HEADER: [&str; 7] = [
    "tick",
    "time",
    "vehicle_id",
    "arc_position",
    "speed",
    "frame",
    "gap_to_predecessor",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolLogRow {
    pub tick: u64,
    pub time: f64,
    pub vehicle_id: VehicleId,
    pub arc_position: f64,
    pub speed: f64,
    pub frame: FrameId,
    /// Empty for the head or when the predecessor is absent.
    pub gap_to_predecessor: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad log: {0}")]
    BadLog(String),
}

impl From<csv::Error> for LogError {
    fn from(e: csv::Error) -> Self {
        let msg = e.to_string();
        match e.into_kind() {
            csv::ErrorKind::Io(io) => LogError::Io(io),
            _ => LogError::BadLog(msg),
        }
    }
}

/// Rows for one snapshot. `order` is the platoon order used for gaps;
/// `gap` computes the follower-to-leader gap.
pub fn rows_for(
    pool: &PoolSnapshot,
    order: &[VehicleId],
    gap: impl Fn(&VehicleState, &VehicleState) -> f64,
) -> Vec<PoolLogRow> {
    let find = |id: VehicleId| pool.states.iter().find(|s| s.vehicle_id == id);
    pool.states
        .iter()
        .map(|s| {
            let pred = order
                .iter()
                .position(|id| *id == s.vehicle_id)
                .filter(|&i| i > 0)
                .and_then(|i| find(order[i - 1]));
            PoolLogRow {
                tick: pool.tick,
                time: pool.pool_timestamp,
                vehicle_id: s.vehicle_id,
                arc_position: s.arc_position,
                speed: s.speed,
                frame: s.frame,
                gap_to_predecessor: pred.map(|p| gap(s, p)),
            }
        })
        .collect()
}

pub fn write_rows<W: Write>(out: W, rows: &[PoolLogRow]) -> Result<usize, LogError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn export_pool_log(path: &Path, rows: &[PoolLogRow]) -> Result<usize, LogError> {
    write_rows(std::fs::File::create(path)?, rows)
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<PoolLogRow>, LogError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(LogError::BadLog(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn import_pool_log(path: &Path) -> Result<Vec<PoolLogRow>, LogError> {
    read_rows(std::fs::File::open(path)?)
}

/// Regroup rows into snapshots, one per tick, in file order.
pub fn snapshots(rows: &[PoolLogRow]) -> Result<Vec<PoolSnapshot>, LogError> {
    let mut out: Vec<PoolSnapshot> = Vec::new();
    for r in rows {
        let start_new = out.last().is_none_or(|p| p.tick != r.tick);
        if start_new {
            if let Some(p) = out.last() {
                if r.tick < p.tick {
                    return Err(LogError::BadLog(format!("tick {} follows {}", r.tick, p.tick)));
                }
            }
            out.push(PoolSnapshot {
                pool_timestamp: r.time,
                tick: r.tick,
                states: Vec::new(),
            });
        }
        let mut s = VehicleState::at_rest(r.vehicle_id, r.frame, mixtwin_core::Pose::new(0.0, 0.0, 0.0));
        s.arc_position = r.arc_position;
        s.speed = r.speed;
        s.timestamp = r.time;
        out.last_mut().expect("pushed").states.push(s);
    }
    Ok(out)
}
