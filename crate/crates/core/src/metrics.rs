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

//! Collision and string-stability metrics over logged series.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::vehicle::VehicleId;

/// One excursion of a centroid gap below the collision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// (leader, follower)
    pub pair: (VehicleId, VehicleId),
    pub start_time: f64,
    /// `None` if the gap had not recovered when the series ended.
    pub end_time: Option<f64>,
    pub min_gap: f64,
    pub min_gap_time: f64,
    pub virtual_involved: bool,
}

/// Scan a gap series sampled at `times`. An event opens on the first sample
/// strictly below `threshold` and closes on the first sample at or above it.
pub fn detect_collisions(
    times: &[f64],
    gaps: &[f64],
    threshold: f64,
    pair: (VehicleId, VehicleId),
    virtual_involved: bool,
) -> Vec<CollisionEvent> {
    let mut events = Vec::new();
    let mut open: Option<CollisionEvent> = None;
    for (&t, &g) in times.iter().zip(gaps) {
        match open.as_mut() {
            None if g < threshold => {
                open = Some(CollisionEvent {
                    pair,
                    start_time: t,
                    end_time: None,
                    min_gap: g,
                    min_gap_time: t,
                    virtual_involved,
                });
            }
            Some(ev) if g < threshold => {
                if g < ev.min_gap {
                    ev.min_gap = g;
                    ev.min_gap_time = t;
                }
            }
            Some(ev) => {
                ev.end_time = Some(t);
                events.push(open.take().expect("open event"));
            }
            None => {}
        }
    }
    events.extend(open);
    events
}

/// Largest absolute deviation of `speeds` from `base`.
pub fn peak_deviation(speeds: &[f64], base: f64) -> f64 {
    speeds.iter().map(|v| libm::fabs(v - base)).fold(0.0, f64::max)
}

/// Ratio of a vehicle's peak speed deviation to the head's.
pub fn amplification_ratio(speeds: &[f64], head_speeds: &[f64], base: f64) -> Result<f64, CoreError> {
    let head = peak_deviation(head_speeds, base);
    if !(head > 0.0) {
        return Err(CoreError::NoPerturbation);
    }
    Ok(peak_deviation(speeds, base) / head)
}

/// Minimum of a series; `None` when empty.
pub fn min_of(series: &[f64]) -> Option<f64> {
    series.iter().copied().reduce(f64::min)
}

/// Maximum of a series; `None` when empty.
pub fn max_of(series: &[f64]) -> Option<f64> {
    series.iter().copied().reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn times(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * 0.02).collect()
    }

    const PAIR: (VehicleId, VehicleId) = (VehicleId(3), VehicleId(4));

    #[test]
    fn single_dip() {
        let g = vec![6.0, 5.0, 4.4, 3.67, 4.0, 4.7, 6.0];
        let ev = detect_collisions(&times(g.len()), &g, 4.6, PAIR, true);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].min_gap, 3.67);
        assert_eq!(ev[0].start_time, 0.04);
        assert_eq!(ev[0].end_time, Some(0.1));
        assert!(ev[0].virtual_involved);
    }

    #[test]
    fn no_events_above_threshold() {
        let g = vec![4.6, 5.0, 20.0];
        assert!(detect_collisions(&times(3), &g, 4.6, PAIR, false).is_empty());
    }

    #[test]
    fn two_excursions_and_open_tail() {
        let g = vec![5.0, 4.0, 5.0, 4.5, 4.2, 5.0, 3.0];
        let ev = detect_collisions(&times(g.len()), &g, 4.6, PAIR, false);
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[1].min_gap, 4.2);
        assert_eq!(ev[2].end_time, None);
    }

    #[test]
    fn ratios() {
        let head = vec![2.8, 3.2, 2.8];
        assert_eq!(amplification_ratio(&head, &head, 2.8).unwrap(), 1.0);
        let f = vec![2.8, 2.6, 3.6, 2.8];
        assert!((amplification_ratio(&f, &head, 2.8).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(amplification_ratio(&f, &[2.8, 2.8], 2.8), Err(CoreError::NoPerturbation));
    }
}
