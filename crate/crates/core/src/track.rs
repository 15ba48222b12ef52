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

//! Closed single-lane track: a polyline in unified meters with named points.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::pose::Pose;
use crate::vehicle::VehicleState;

/// Default lap length of the reference loop.
pub const DEFAULT_LAP_LENGTH: f64 = 245.0;
const DEFAULT_STRAIGHT: f64 = 80.0;
const ARC_SEGMENTS: usize = 64;

/// Serialized form: waypoints (first point repeated last) and named points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDef {
    pub waypoints: Vec<[f64; 2]>,
    pub named_points: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    /// Distinct vertices; segment `i` runs from `points[i]` to `points[(i + 1) % n]`.
    points: Vec<[f64; 2]>,
    /// Arc length at the start of each segment.
    cumulative: Vec<f64>,
    lap_length: f64,
    named_points: BTreeMap<char, f64>,
}

/// Where a pose lands on the track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub arc_position: f64,
    /// Signed, positive to the left of the travel direction.
    pub lateral_offset: f64,
}

impl Track {
    /// Build from an explicitly closed polyline (last point equals first).
    pub fn new(waypoints: &[[f64; 2]], named_points: BTreeMap<char, f64>) -> Result<Track, CoreError> {
        if waypoints.is_empty() {
            return Err(CoreError::EmptyTrack);
        }
        let first = waypoints[0];
        let last = waypoints[waypoints.len() - 1];
        if libm::hypot(first[0] - last[0], first[1] - last[1]) > 1e-9 {
            return Err(CoreError::InvalidTrack("polyline is not closed (last point must equal first)".into()));
        }
        let points: Vec<[f64; 2]> = waypoints[..waypoints.len() - 1].to_vec();
        if points.len() < 3 {
            return Err(CoreError::EmptyTrack);
        }
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(CoreError::InvalidTrack("non-finite waypoint".into()));
        }
        let n = points.len();
        let mut cumulative = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            cumulative.push(total);
            let (a, b) = (points[i], points[(i + 1) % n]);
            let len = libm::hypot(b[0] - a[0], b[1] - a[1]);
            if len <= 0.0 {
                return Err(CoreError::InvalidTrack(alloc::format!("zero-length segment at waypoint {i}")));
            }
            total += len;
        }
        let mut prev: Option<f64> = None;
        for (&name, &s) in &named_points {
            if !(0.0..total).contains(&s) {
                return Err(CoreError::InvalidTrack(alloc::format!(
                    "named point {name} at {s} m outside [0, {total})"
                )));
            }
            if prev.is_some_and(|p| s <= p) {
                return Err(CoreError::InvalidTrack(alloc::format!(
                    "named point {name} is not after its predecessor"
                )));
            }
            prev = Some(s);
        }
        Ok(Track {
            points,
            cumulative,
            lap_length: total,
            named_points,
        })
    }

    pub fn from_def(def: &TrackDef) -> Result<Track, CoreError> {
        let mut named = BTreeMap::new();
        for (k, &v) in &def.named_points {
            let mut chars = k.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => {
                    named.insert(c, v);
                }
                _ => return Err(CoreError::InvalidTrack(alloc::format!("named point key '{k}' must be one letter"))),
            }
        }
        Track::new(&def.waypoints, named)
    }

    pub fn to_def(&self) -> TrackDef {
        let mut waypoints = self.points.clone();
        waypoints.push(self.points[0]);
        TrackDef {
            waypoints,
            named_points: self.named_points.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Stadium loop: two straights joined by semicircles, counter-clockwise,
    /// starting at the beginning of the lower straight. The arc radius is
    /// chosen so that the polyline perimeter equals `lap_length` exactly.
    pub fn stadium(straight: f64, lap_length: f64) -> Result<Track, CoreError> {
        let per_arc = (lap_length - 2.0 * straight) / 2.0;
        if !(straight > 0.0 && per_arc > 0.0) {
            return Err(CoreError::InvalidParameter("stadium needs lap_length > 2 * straight > 0".into()));
        }
        let half = PI / (2.0 * ARC_SEGMENTS as f64);
        let r = per_arc / (2.0 * ARC_SEGMENTS as f64 * libm::sin(half));
        let mut pts = Vec::with_capacity(2 * ARC_SEGMENTS + 3);
        pts.push([0.0, 0.0]);
        // right turn-around, centre (straight, r), from angle -π/2 to π/2
        for k in 0..=ARC_SEGMENTS {
            let a = -PI / 2.0 + PI * k as f64 / ARC_SEGMENTS as f64;
            pts.push([straight + r * libm::cos(a), r + r * libm::sin(a)]);
        }
        // left turn-around, centre (0, r), from π/2 to 3π/2
        for k in 0..ARC_SEGMENTS {
            let a = PI / 2.0 + PI * k as f64 / ARC_SEGMENTS as f64;
            pts.push([r * libm::cos(a), r + r * libm::sin(a)]);
        }
        pts.push([0.0, 0.0]);
        // exact endpoints of the straights
        pts[1] = [straight, 0.0];
        pts[ARC_SEGMENTS + 1] = [straight, 2.0 * r];
        pts[ARC_SEGMENTS + 2] = [0.0, 2.0 * r];
        let probe = Track::new(&pts, BTreeMap::new())?;
        let lap = probe.lap_length;
        let named = ['A', 'B', 'C', 'D', 'E', 'F']
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, lap * i as f64 / 6.0))
            .collect();
        Track::new(&pts, named)
    }

    /// The reference 245 m loop with points A..F at sixths of a lap.
    pub fn default_loop() -> Track {
        Track::stadium(DEFAULT_STRAIGHT, DEFAULT_LAP_LENGTH).expect("default loop is valid")
    }

    pub fn lap_length(&self) -> f64 {
        self.lap_length
    }

    pub fn waypoints(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn cumulative_lengths(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn named_points(&self) -> &BTreeMap<char, f64> {
        &self.named_points
    }

    pub fn named_point(&self, name: char) -> Result<f64, CoreError> {
        self.named_points.get(&name).copied().ok_or(CoreError::UnknownNamedPoint(name))
    }

    /// Wrap an arc length into [0, lap_length).
    pub fn wrap(&self, s: f64) -> f64 {
        wrap(s, self.lap_length)
    }

    fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.points.len();
        (self.points[i], self.points[(i + 1) % n])
    }

    fn segment_index(&self, s: f64) -> usize {
        match self.cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    /// Point and travel heading at an arc length (wrapped onto the loop).
    pub fn point_at(&self, s: f64) -> Pose {
        let s = self.wrap(s);
        let i = self.segment_index(s);
        let (a, b) = self.segment(i);
        let len = libm::hypot(b[0] - a[0], b[1] - a[1]);
        let t = ((s - self.cumulative[i]) / len).clamp(0.0, 1.0);
        Pose::new(
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            libm::atan2(b[1] - a[1], b[0] - a[0]),
        )
    }

    /// Nearest-segment projection with wraparound.
    pub fn project(&self, pose: &Pose) -> Projection {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..self.points.len() {
            let (a, b) = self.segment(i);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = (((pose.x - a[0]) * dx + (pose.y - a[1]) * dy) / len2).clamp(0.0, 1.0);
            let (px, py) = (a[0] + t * dx, a[1] + t * dy);
            let d = libm::hypot(pose.x - px, pose.y - py);
            if d < best.0 {
                let len = libm::sqrt(len2);
                let cross = dx * (pose.y - py) - dy * (pose.x - px);
                let sign = if cross < 0.0 { -1.0 } else { 1.0 };
                best = (d, self.cumulative[i] + t * len, sign * d);
            }
        }
        Projection {
            arc_position: self.wrap(best.1),
            lateral_offset: best.2,
        }
    }

    /// Same as [`Track::project`] but fails on an unusable track.
    pub fn project_to_track(&self, pose: &Pose) -> Result<Projection, CoreError> {
        if self.points.len() < 3 {
            return Err(CoreError::EmptyTrack);
        }
        Ok(self.project(pose))
    }

    /// Centroid arc gap from follower forward to leader, in [0, lap_length).
    pub fn signed_gap(&self, follower: &VehicleState, leader: &VehicleState) -> f64 {
        self.arc_gap(follower.arc_position, leader.arc_position)
    }

    pub fn arc_gap(&self, follower_arc: f64, leader_arc: f64) -> f64 {
        self.wrap(leader_arc - follower_arc)
    }
}

/// Wrap into [0, period).
pub fn wrap(s: f64, period: f64) -> f64 {
    let w = s - period * libm::floor(s / period);
    if w >= period || w < 0.0 {
        0.0
    } else {
        w
    }
}

/// Straight-line centroid distance.
pub fn chord_gap(follower: &VehicleState, leader: &VehicleState) -> f64 {
    follower.pose.distance_to(leader.pose.x, leader.pose.y)
}
