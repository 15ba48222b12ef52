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

//! Run reports: per-vehicle series, summaries, collisions, and their files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use mixtwin_core::hub::HubCounters;
use mixtwin_core::metrics::{amplification_ratio, detect_collisions, max_of, min_of, CollisionEvent};
use mixtwin_core::{CoreError, Role, VehicleId, VehicleKind};

use crate::poollog::{export_pool_log, PoolLogRow};
use crate::scenario::{ScenarioSpec, SourceKind};

/// Time series of one vehicle, sampled once per recorded tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VehicleSeries {
    pub vehicle_id: VehicleId,
    pub arc: Vec<f64>,
    /// Pool speed, as the hub saw it.
    pub speed: Vec<f64>,
    /// Ground-truth speed from the agent (lockstep only).
    pub true_speed: Vec<f64>,
    /// Gap to the predecessor; empty for the head.
    pub gap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSeries {
    pub ticks: Vec<u64>,
    pub times: Vec<f64>,
    pub vehicles: Vec<VehicleSeries>,
}

impl RunSeries {
    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleSeries> {
        self.vehicles.iter().find(|v| v.vehicle_id == id)
    }

    /// FNV-1a over every id and float bit pattern.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        self.ticks.iter().for_each(|&t| eat(t));
        self.times.iter().for_each(|t| eat(t.to_bits()));
        for v in &self.vehicles {
            eat(v.vehicle_id.0 as u64);
            for s in [&v.arc, &v.speed, &v.true_speed, &v.gap] {
                eat(s.len() as u64);
                s.iter().for_each(|x| eat(x.to_bits()));
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSummary {
    pub vehicle_id: VehicleId,
    pub kind: VehicleKind,
    pub role: Role,
    pub source: SourceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predecessor: Option<VehicleId>,
    pub peak_speed: f64,
    pub min_speed: f64,
    /// Largest |v - base| from the trigger on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplification: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub mode: String,
    pub tick_hz: f64,
    pub ticks: u64,
    pub duration_s: f64,
    pub base_speed: f64,
    pub collision_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settled_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trigger_time: Option<f64>,
    pub vehicles: Vec<VehicleSummary>,
    pub collisions: Vec<CollisionEvent>,
    pub counters: HubCounters,
    pub series_digest: String,
}

impl RunReport {
    /// Peak-deviation ratio of a vehicle against the head.
    pub fn amplification(&self, id: VehicleId) -> Result<f64, CoreError> {
        if self.trigger_time.is_none() {
            return Err(CoreError::NoPerturbation);
        }
        self.vehicles
            .iter()
            .find(|v| v.vehicle_id == id)
            .and_then(|v| v.amplification)
            .ok_or(CoreError::NoPerturbation)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub series: RunSeries,
    pub pool_log: Vec<PoolLogRow>,
}

pub struct ReportInputs<'a> {
    pub spec: &'a ScenarioSpec,
    pub mode: &'a str,
    pub ticks: u64,
    pub duration_s: f64,
    pub settled_at: Option<f64>,
    pub trigger_time: Option<f64>,
    pub counters: HubCounters,
}

/// Summaries, amplification ratios and collision events from the series.
pub fn build_report(inp: ReportInputs<'_>, series: &RunSeries) -> RunReport {
    let spec = inp.spec;
    let base = spec.base_speed;
    let from = inp
        .trigger_time
        .map(|t0| series.times.iter().position(|&t| t >= t0).unwrap_or(series.times.len()));
    let head_series = spec.head().and_then(|h| series.vehicle(h.vehicle_id));
    let mut vehicles = Vec::new();
    let mut collisions = Vec::new();
    for (i, e) in spec.platoon.iter().enumerate() {
        let Some(vs) = series.vehicle(e.vehicle_id) else {
            continue;
        };
        let window = from.map(|k| &vs.speed[k.min(vs.speed.len())..]);
        let peak_deviation = window.map(|w| mixtwin_core::metrics::peak_deviation(w, base));
        let amplification = match (window, from, head_series) {
            (Some(w), Some(k), Some(h)) => amplification_ratio(w, &h.speed[k.min(h.speed.len())..], base).ok(),
            _ => None,
        };
        let predecessor = (i > 0).then(|| spec.platoon[i - 1].vehicle_id);
        if let Some(p) = predecessor {
            let lead_kind = spec.platoon[i - 1].kind;
            let virtual_involved = lead_kind == VehicleKind::Virtual || e.kind == VehicleKind::Virtual;
            collisions.extend(detect_collisions(
                &series.times,
                &vs.gap,
                spec.collision_threshold,
                (p, e.vehicle_id),
                virtual_involved,
            ));
        }
        vehicles.push(VehicleSummary {
            vehicle_id: e.vehicle_id,
            kind: e.kind,
            role: e.role,
            source: e.source,
            predecessor,
            peak_speed: max_of(&vs.speed).unwrap_or(0.0),
            min_speed: min_of(&vs.speed).unwrap_or(0.0),
            peak_deviation,
            amplification,
            min_gap: min_of(&vs.gap),
        });
    }
    collisions.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.pair.1.cmp(&b.pair.1)));
    RunReport {
        name: spec.name.clone(),
        seed: spec.seed,
        mode: inp.mode.into(),
        tick_hz: spec.tick_hz,
        ticks: inp.ticks,
        duration_s: inp.duration_s,
        base_speed: base,
        collision_threshold: spec.collision_threshold,
        settled_at: inp.settled_at,
        trigger_time: inp.trigger_time,
        vehicles,
        collisions,
        counters: inp.counters,
        series_digest: format!("{:016x}", series.digest()),
    }
}

/// Write `report.json`, `pool_log.csv` and one `vehicle_<id>.csv` per vehicle.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), outcome.report.to_json())?;
    export_pool_log(&dir.join("pool_log.csv"), &outcome.pool_log).map_err(std::io::Error::other)?;
    let s = &outcome.series;
    for v in &s.vehicles {
        let mut w = csv::Writer::from_writer(std::fs::File::create(dir.join(format!("vehicle_{}.csv", v.vehicle_id.0)))?);
        w.write_record(["tick", "time", "arc_position", "speed", "true_speed", "gap_to_predecessor"])?;
        for k in 0..s.times.len() {
            let opt = |x: &Vec<f64>| x.get(k).map(|g| g.to_string()).unwrap_or_default();
            w.write_record([
                s.ticks[k].to_string(),
                s.times[k].to_string(),
                opt(&v.arc),
                opt(&v.speed),
                opt(&v.true_speed),
                opt(&v.gap),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}
