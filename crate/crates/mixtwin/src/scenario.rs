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

//! Declarative experiment description and its static checks.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mixtwin_core::control::{CaccParams, LateralParams, ScriptedDriverParams};
use mixtwin_core::profile::{Perturbation, BASE_SPEED};
use mixtwin_core::track::{chord_gap, TrackDef};
use mixtwin_core::vehicle::{
    DEFAULT_BODY_LENGTH, DEFAULT_MAX_ACCEL, DEFAULT_MAX_DECEL, DEFAULT_MAX_SPEED, DEFAULT_MAX_WHEEL_ANGLE,
    DEFAULT_WHEELBASE,
};
use mixtwin_core::{FrameId, FrameTable, Role, Track, VehicleId, VehicleKind, VehicleSpec, VehicleState};

use crate::agents::ImperfectionModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    HeadProfile,
    #[serde(rename = "CACC")]
    Cacc,
    Scripted,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMetric {
    /// Arc length along the track centreline.
    #[default]
    Arc,
    /// Straight-line distance between centroids.
    Chord,
}

impl GapMetric {
    pub fn gap(self, track: &Track, follower: &VehicleState, leader: &VehicleState) -> f64 {
        match self {
            GapMetric::Arc => track.signed_gap(follower, leader),
            GapMetric::Chord => chord_gap(follower, leader),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriverPreset {
    Named(String),
    Params(ScriptedDriverParams),
}

impl DriverPreset {
    pub fn resolve(&self) -> Result<ScriptedDriverParams, String> {
        match self {
            DriverPreset::Params(p) => Ok(*p),
            DriverPreset::Named(n) => match n.as_str() {
                "default" => Ok(ScriptedDriverParams::default()),
                "briefed" => Ok(ScriptedDriverParams::briefed()),
                "aggressive" => Ok(ScriptedDriverParams::aggressive()),
                other => Err(format!("unknown driver preset '{other}' (default, briefed, aggressive)")),
            },
        }
    }
}

/// One platoon member: the vehicle, who drives it and how imperfect it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonEntry {
    pub vehicle_id: VehicleId,
    pub kind: VehicleKind,
    pub role: Role,
    pub source: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameId>,
    #[serde(default = "d::body_length")]
    pub body_length: f64,
    #[serde(default = "d::wheelbase")]
    pub wheelbase: f64,
    #[serde(default = "d::max_speed")]
    pub max_speed: f64,
    #[serde(default = "d::max_accel")]
    pub max_accel: f64,
    #[serde(default = "d::max_decel")]
    pub max_decel: f64,
    #[serde(default = "d::max_wheel_angle")]
    pub max_wheel_angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_lag_tau: Option<f64>,
    /// Scripted or Human rows: the stand-in driver model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<DriverPreset>,
    /// Omitted: the kind's defaults. `{}`: a perfect vehicle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imperfections: Option<ImperfectionModel>,
    /// Constant delay on the agent-to-hub state link, seconds.
    #[serde(default)]
    pub link_delay_s: f64,
    /// Human row left to a live driver station instead of the stand-in.
    #[serde(default)]
    pub live: bool,
}

mod d {
    use super::*;
    pub fn body_length() -> f64 {
        DEFAULT_BODY_LENGTH
    }
    pub fn wheelbase() -> f64 {
        DEFAULT_WHEELBASE
    }
    pub fn max_speed() -> f64 {
        DEFAULT_MAX_SPEED
    }
    pub fn max_accel() -> f64 {
        DEFAULT_MAX_ACCEL
    }
    pub fn max_decel() -> f64 {
        DEFAULT_MAX_DECEL
    }
    pub fn max_wheel_angle() -> f64 {
        DEFAULT_MAX_WHEEL_ANGLE
    }
    pub fn laps() -> u32 {
        4
    }
    pub fn threshold() -> f64 {
        4.6
    }
    pub fn tick_hz() -> f64 {
        50.0
    }
    pub fn watchdog() -> f64 {
        2.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn base_speed() -> f64 {
        BASE_SPEED
    }
    pub fn start_point() -> char {
        'A'
    }
    pub fn name() -> String {
        "scenario".into()
    }
    pub fn trigger_point() -> char {
        'C'
    }
    pub fn one() -> u32 {
        1
    }
    pub fn band() -> f64 {
        0.05
    }
    pub fn hold() -> f64 {
        10.0
    }
    pub fn timeout() -> f64 {
        60.0
    }
}

impl PlatoonEntry {
    pub fn new(vehicle_id: u32, kind: VehicleKind, role: Role, source: SourceKind) -> Self {
        PlatoonEntry {
            vehicle_id: VehicleId(vehicle_id),
            kind,
            role,
            source,
            frame: None,
            body_length: DEFAULT_BODY_LENGTH,
            wheelbase: DEFAULT_WHEELBASE,
            max_speed: DEFAULT_MAX_SPEED,
            max_accel: DEFAULT_MAX_ACCEL,
            max_decel: DEFAULT_MAX_DECEL,
            max_wheel_angle: DEFAULT_MAX_WHEEL_ANGLE,
            speed_lag_tau: None,
            driver: None,
            imperfections: None,
            link_delay_s: 0.0,
            live: false,
        }
    }

    pub fn vehicle_spec(&self) -> VehicleSpec {
        VehicleSpec {
            vehicle_id: self.vehicle_id,
            kind: self.kind,
            role: self.role,
            frame: self.frame,
            body_length: self.body_length,
            wheelbase: self.wheelbase,
            max_speed: self.max_speed,
            max_accel: self.max_accel,
            max_decel: self.max_decel,
            max_wheel_angle: self.max_wheel_angle,
            speed_lag_tau: self.speed_lag_tau,
        }
    }

    pub fn imperfections(&self) -> ImperfectionModel {
        self.imperfections
            .clone()
            .unwrap_or_else(|| ImperfectionModel::default_for(self.kind))
    }

    pub fn driver_params(&self) -> Result<ScriptedDriverParams, String> {
        self.driver
            .as_ref()
            .map_or(Ok(ScriptedDriverParams::default()), DriverPreset::resolve)
    }

    /// Speed actuator time constant the agent will use, s.
    pub fn speed_lag(&self) -> f64 {
        self.imperfections()
            .actuation_lag_tau
            .unwrap_or_else(|| self.vehicle_spec().speed_lag())
    }

    /// Whether an in-process controller drives this vehicle.
    pub fn automated(&self) -> bool {
        !(self.source == SourceKind::Human && self.live)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default = "d::trigger_point")]
    pub trigger_point: char,
    #[serde(default = "d::one")]
    pub trigger_lap: u32,
    pub shape: Perturbation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettleSpec {
    /// Relative gap band around d_des.
    #[serde(default = "d::band")]
    pub band: f64,
    #[serde(default = "d::hold")]
    pub hold_s: f64,
    #[serde(default = "d::timeout")]
    pub timeout_s: f64,
}

impl Default for SettleSpec {
    fn default() -> Self {
        SettleSpec {
            band: d::band(),
            hold_s: d::hold(),
            timeout_s: d::timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrackSource {
    Path(PathBuf),
    Inline(TrackDef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialGaps {
    Uniform(f64),
    PerVehicle(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "d::name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Omitted: the built-in 245 m stadium loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<TrackSource>,
    #[serde(default = "d::laps")]
    pub laps: u32,
    #[serde(default = "d::threshold")]
    pub collision_threshold: f64,
    #[serde(default)]
    pub gap_metric: GapMetric,
    #[serde(default = "d::tick_hz")]
    pub tick_hz: f64,
    #[serde(default)]
    pub frames: FrameTable,
    #[serde(default = "d::watchdog")]
    pub watchdog_s: f64,
    #[serde(default = "d::yes")]
    pub dead_reckoning: bool,
    #[serde(default = "d::yes")]
    pub interlock: bool,
    #[serde(default)]
    pub settle: SettleSpec,
    #[serde(default)]
    pub cacc: CaccParams,
    #[serde(default)]
    pub lateral: LateralParams,
    #[serde(default = "d::base_speed")]
    pub base_speed: f64,
    #[serde(default = "d::start_point")]
    pub start_point: char,
    /// Spacing behind each predecessor at start; omitted: `cacc.d_des`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_gaps: Option<InitialGaps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    /// Stop after this much simulated time even if laps remain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_duration_s: Option<f64>,
    pub platoon: Vec<PlatoonEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Parse a JSON document, naming the file, field and line on failure.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// The default loop when `src` is absent; relative paths resolve against `base_dir`.
pub fn resolve_track(src: Option<&TrackSource>, base_dir: Option<&Path>) -> Result<Track, String> {
    match src {
        None => Ok(Track::default_loop()),
        Some(TrackSource::Inline(def)) => Track::from_def(def).map_err(|e| e.to_string()),
        Some(TrackSource::Path(p)) => {
            let full = match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p.clone(),
            };
            let def: TrackDef = load_json(&full).map_err(|e| e.to_string())?;
            Track::from_def(&def).map_err(|e| format!("{}: {e}", full.display()))
        }
    }
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<(ScenarioSpec, Option<PathBuf>), ConfigError> {
        let spec = load_json(path)?;
        Ok((spec, path.parent().map(Path::to_path_buf)))
    }

    pub fn tick_period(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn head(&self) -> Option<&PlatoonEntry> {
        self.platoon.first()
    }

    pub fn ids(&self) -> Vec<VehicleId> {
        self.platoon.iter().map(|e| e.vehicle_id).collect()
    }

    pub fn entry(&self, id: VehicleId) -> Option<&PlatoonEntry> {
        self.platoon.iter().find(|e| e.vehicle_id == id)
    }

    /// Gap behind the predecessor of platoon member `i` (1-based for followers).
    pub fn initial_gap(&self, i: usize) -> f64 {
        match &self.initial_gaps {
            None => self.cacc.d_des,
            Some(InitialGaps::Uniform(g)) => *g,
            Some(InitialGaps::PerVehicle(g)) => g.get(i - 1).copied().unwrap_or(self.cacc.d_des),
        }
    }

    pub fn resolve_track(&self, base_dir: Option<&Path>) -> Result<Track, String> {
        resolve_track(self.track.as_ref(), base_dir)
    }

    /// Every static violation, in a stable order. Empty means valid.
    pub fn violations(&self, base_dir: Option<&Path>) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut v = |field: &str, msg: String| out.push(Violation::new(field, msg));

        let heads = self.platoon.iter().filter(|e| e.role == Role::Head).count();
        if heads != 1 {
            v("platoon", format!("exactly one Head is required, found {heads}"));
        }
        if let Some(first) = self.platoon.first() {
            if first.role != Role::Head && heads == 1 {
                v("platoon[0].role", "the Head must be in position 1".into());
            }
        } else {
            v("platoon", "platoon is empty".into());
        }
        let mut seen = BTreeSet::new();
        for (i, e) in self.platoon.iter().enumerate() {
            let at = |f: &str| format!("platoon[{i}].{f}");
            if !seen.insert(e.vehicle_id) {
                v(&at("vehicle_id"), format!("duplicate vehicle_id {}", e.vehicle_id));
            }
            if let Err(err) = e.vehicle_spec().validate() {
                v(&at("vehicle"), err.to_string());
            }
            match (e.role == Role::Head, e.source) {
                (true, SourceKind::HeadProfile) | (false, SourceKind::Cacc | SourceKind::Scripted | SourceKind::Human) => {}
                (true, s) => v(&at("source"), format!("the Head is driven by HeadProfile, not {s:?}")),
                (false, _) => v(&at("source"), "HeadProfile is reserved for the Head".into()),
            }
            if let Err(err) = e.driver_params().and_then(|p| p.validate().map_err(|x| x.to_string())) {
                v(&at("driver"), err);
            }
            if let Err(err) = e.imperfections().validate() {
                v(&at("imperfections"), err);
            }
            if !(e.link_delay_s >= 0.0) {
                v(&at("link_delay_s"), "must be >= 0".into());
            }
            if e.live && e.source != SourceKind::Human {
                v(&at("live"), "only Human rows can be live".into());
            }
        }
        if !(self.collision_threshold > 0.0) {
            v("collision_threshold", "must be > 0".into());
        }
        let mut total = 0.0;
        for i in 1..self.platoon.len() {
            let g = self.initial_gap(i);
            total += g;
            if !(g >= self.collision_threshold) {
                v(
                    "initial_gaps",
                    format!(
                        "initial gap {g} m behind vehicle {} is below collision_threshold {} m",
                        self.platoon[i - 1].vehicle_id,
                        self.collision_threshold
                    ),
                );
            }
        }
        if let Some(InitialGaps::PerVehicle(g)) = &self.initial_gaps {
            if g.len() + 1 != self.platoon.len() {
                v("initial_gaps", format!("expected {} gaps, found {}", self.platoon.len().saturating_sub(1), g.len()));
            }
        }
        if self.laps == 0 {
            v("laps", "must be >= 1".into());
        }
        if !(self.tick_hz > 0.0 && self.tick_hz <= 1000.0) {
            v("tick_hz", "must be in (0, 1000]".into());
        } else if 1.0 / self.tick_hz > mixtwin_core::dynamics::MAX_DT {
            v("tick_hz", "tick period exceeds the 0.1 s integration limit".into());
        }
        if !(self.watchdog_s > 0.0) {
            v("watchdog_s", "must be > 0".into());
        }
        if !(self.base_speed > 0.0) {
            v("base_speed", "must be > 0".into());
        }
        if let Err(e) = self.cacc.validate() {
            v("cacc", e.to_string());
        }
        if !(self.lateral.lookahead_base > 0.0) {
            v("lateral.lookahead_base", "must be > 0".into());
        }
        if !(self.settle.band > 0.0 && self.settle.hold_s >= 0.0 && self.settle.timeout_s > 0.0) {
            v("settle", "band and timeout must be > 0, hold_s >= 0".into());
        }
        for (name, s) in [("physical", self.frames.physical), ("virtual", self.frames.virtual_), ("inno_like", self.frames.inno_like)] {
            if !(s > 0.0 && s.is_finite()) {
                v(&format!("frames.{name}"), "scale must be > 0".into());
            }
        }
        if let Some(p) = &self.perturbation {
            if let Err(e) = p.shape.validate(self.base_speed) {
                v("perturbation.shape", e.to_string());
            }
            if p.trigger_lap == 0 || p.trigger_lap > self.laps {
                v("perturbation.trigger_lap", format!("must be in 1..={}", self.laps));
            }
        }
        match self.resolve_track(base_dir) {
            Err(e) => v("track", e),
            Ok(track) => {
                if total >= track.lap_length() {
                    v("initial_gaps", format!("platoon length {total} m does not fit on a {} m lap", track.lap_length()));
                }
                if track.named_point(self.start_point).is_err() {
                    v("start_point", format!("track has no point '{}'", self.start_point));
                }
                if let Some(p) = &self.perturbation {
                    if track.named_point(p.trigger_point).is_err() {
                        v("perturbation.trigger_point", format!("track has no point '{}'", p.trigger_point));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: String) -> Self {
        Violation {
            field: field.into(),
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// The eight-vehicle composition with scripted stand-ins for the human rows.
pub fn mixed_platoon(perturbation: Perturbation, driver: DriverPreset) -> ScenarioSpec {
    use SourceKind::*;
    use VehicleKind::*;
    let rows = [
        (1, EmulatedPhysical, Role::Head, HeadProfile),
        (2, EmulatedPhysical, Role::Hdv, Human),
        (3, Virtual, Role::Cav, Cacc),
        (4, EmulatedPhysical, Role::Hdv, Human),
        (5, Virtual, Role::Hdv, Human),
        (6, Virtual, Role::Cav, Cacc),
        (7, Virtual, Role::Cav, Cacc),
        (8, Virtual, Role::Hdv, Human),
    ];
    let platoon = rows
        .into_iter()
        .map(|(id, kind, role, source)| {
            let mut e = PlatoonEntry::new(id, kind, role, source);
            if source == Human {
                e.driver = Some(driver.clone());
            }
            if id == 8 {
                e.frame = Some(FrameId::InnoLike);
            }
            e
        })
        .collect();
    ScenarioSpec {
        perturbation: Some(PerturbationSpec {
            trigger_point: 'C',
            trigger_lap: 1,
            shape: perturbation,
        }),
        ..ScenarioSpec::minimal("mixed-platoon", platoon)
    }
}

impl ScenarioSpec {
    /// All defaults around the given platoon.
    pub fn minimal(name: &str, platoon: Vec<PlatoonEntry>) -> ScenarioSpec {
        ScenarioSpec {
            name: name.into(),
            seed: 0,
            track: None,
            laps: d::laps(),
            collision_threshold: d::threshold(),
            gap_metric: GapMetric::Arc,
            tick_hz: d::tick_hz(),
            frames: FrameTable::default(),
            watchdog_s: d::watchdog(),
            dead_reckoning: true,
            interlock: true,
            settle: SettleSpec::default(),
            cacc: CaccParams::default(),
            lateral: LateralParams::default(),
            base_speed: BASE_SPEED,
            start_point: 'A',
            initial_gaps: None,
            perturbation: None,
            max_duration_s: None,
            platoon,
        }
    }

    /// A head followed by `n` identical perfect followers of one source kind.
    pub fn chain(n: usize, source: SourceKind, perturbation: Option<Perturbation>) -> ScenarioSpec {
        let mut platoon = vec![PlatoonEntry::new(1, VehicleKind::Virtual, Role::Head, SourceKind::HeadProfile)];
        for i in 0..n {
            let role = if source == SourceKind::Cacc { Role::Cav } else { Role::Hdv };
            platoon.push(PlatoonEntry::new(i as u32 + 2, VehicleKind::Virtual, role, source));
        }
        ScenarioSpec {
            perturbation: perturbation.map(|shape| PerturbationSpec {
                trigger_point: 'C',
                trigger_lap: 1,
                shape,
            }),
            ..ScenarioSpec::minimal("chain", platoon)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_platoon_is_valid() {
        let s = mixed_platoon(Perturbation::half_sine(), DriverPreset::Named("default".into()));
        assert_eq!(s.violations(None), vec![]);
        let json = serde_json::to_string(&s).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn two_heads_and_short_gap() {
        let mut s = mixed_platoon(Perturbation::brake(), DriverPreset::Named("default".into()));
        s.platoon[3].role = Role::Head;
        s.initial_gaps = Some(InitialGaps::Uniform(3.0));
        let v = s.violations(None);
        assert!(v.iter().any(|x| x.message.contains("exactly one Head")), "{v:?}");
        assert!(v.iter().any(|x| x.field == "initial_gaps" && x.message.contains("collision_threshold")));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = serde_json::from_str::<ScenarioSpec>(r#"{"platoon": [], "lapz": 3}"#).unwrap_err();
        assert!(err.to_string().contains("lapz"), "{err}");
        let err = serde_json::from_str::<ScenarioSpec>(
            r#"{"platoon": [{"vehicle_id": 1, "kind": "Virtual", "role": "Head", "source": "HeadProfile", "colour": 1}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(
            DriverPreset::Named("aggressive".into()).resolve().unwrap(),
            ScriptedDriverParams::aggressive()
        );
        assert!(DriverPreset::Named("wild".into()).resolve().is_err());
        let p: DriverPreset = serde_json::from_str(r#"{"k_h": 2.0}"#).unwrap();
        assert_eq!(p.resolve().unwrap().k_h, 2.0);
    }
}
