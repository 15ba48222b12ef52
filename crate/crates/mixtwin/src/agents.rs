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

//! Vehicle agents: the clean virtual vehicle and the emulated physical one
//! with sensing noise, actuation lag and command jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use mixtwin_core::dynamics::bicycle_step;
use mixtwin_core::{
    ControlInstruction, CoreError, FrameTransform, SourceId, Track, VehicleKind, VehicleSpec, VehicleState,
};

/// Imperfections injected by an agent. Sigmas are frame-local.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionModel {
    #[serde(default)]
    pub position_noise_sigma: f64,
    #[serde(default)]
    pub speed_noise_sigma: f64,
    /// Overrides the vehicle's speed actuator time constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuation_lag_tau: Option<f64>,
    /// Commands take effect up to this many seconds late.
    #[serde(default)]
    pub command_jitter: f64,
    #[serde(default = "fifty")]
    pub state_publish_hz: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn fifty() -> f64 {
    50.0
}

impl ImperfectionModel {
    pub fn none() -> Self {
        ImperfectionModel {
            position_noise_sigma: 0.0,
            speed_noise_sigma: 0.0,
            actuation_lag_tau: None,
            command_jitter: 0.0,
            state_publish_hz: 50.0,
            rng_seed: 0,
        }
    }

    pub fn emulated_physical() -> Self {
        ImperfectionModel {
            position_noise_sigma: 0.002,
            speed_noise_sigma: 0.01,
            actuation_lag_tau: Some(0.10),
            command_jitter: 0.005,
            state_publish_hz: 50.0,
            rng_seed: 0,
        }
    }

    pub fn default_for(kind: VehicleKind) -> Self {
        match kind {
            VehicleKind::Virtual => Self::none(),
            VehicleKind::EmulatedPhysical => Self::emulated_physical(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.position_noise_sigma >= 0.0 && self.speed_noise_sigma >= 0.0) {
            return Err("noise sigmas must be >= 0".into());
        }
        if !(self.command_jitter >= 0.0) {
            return Err("command_jitter must be >= 0".into());
        }
        if let Some(tau) = self.actuation_lag_tau {
            if !(tau >= 0.0) {
                return Err("actuation_lag_tau must be >= 0".into());
            }
        }
        if !(self.state_publish_hz > 0.0 && self.state_publish_hz.is_finite()) {
            return Err("state_publish_hz must be > 0".into());
        }
        Ok(())
    }
}

/// A command waiting for its jittered activation.
#[derive(Debug, Clone)]
struct Pending {
    cmd: ControlInstruction,
    delay: f64,
}

/// One vehicle process. Integrates its own dynamics in its local frame and
/// publishes (possibly noisy) states.
#[derive(Debug, Clone)]
pub struct VehicleAgent {
    spec: VehicleSpec,
    local_spec: VehicleSpec,
    transform: FrameTransform,
    track: Option<Track>,
    imperfections: ImperfectionModel,
    truth: VehicleState,
    active: ControlInstruction,
    pending: Option<Pending>,
    rng: ChaCha8Rng,
    pos_noise: Option<Normal<f64>>,
    speed_noise: Option<Normal<f64>>,
    published: u64,
}

impl VehicleAgent {
    /// `initial` is expressed in the unified frame.
    pub fn new(
        spec: VehicleSpec,
        imperfections: ImperfectionModel,
        transform: FrameTransform,
        track: Option<Track>,
        initial: &VehicleState,
    ) -> Result<Self, CoreError> {
        spec.validate()?;
        if transform.frame != spec.frame() {
            return Err(CoreError::FrameMismatch {
                expected: spec.frame(),
                found: transform.frame,
            });
        }
        imperfections.validate().map_err(CoreError::InvalidParameter)?;
        let mut local_spec = spec.in_frame(transform.scale_to_unified);
        if let Some(tau) = imperfections.actuation_lag_tau {
            local_spec.speed_lag_tau = Some(tau);
        }
        let truth = transform.state_from_unified(initial)?;
        let active = ControlInstruction {
            target_vehicle_id: spec.vehicle_id,
            desired_front_wheel_angle: truth.front_wheel_angle,
            desired_speed: truth.speed,
            source_id: SourceId::from("init"),
            source_frame: transform.frame,
            timestamp: truth.timestamp,
            seq: 0,
        };
        let noise = |sigma: f64| (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma is finite and positive"));
        Ok(VehicleAgent {
            pos_noise: noise(imperfections.position_noise_sigma),
            speed_noise: noise(imperfections.speed_noise_sigma),
            rng: ChaCha8Rng::seed_from_u64(imperfections.rng_seed),
            spec,
            local_spec,
            transform,
            track,
            imperfections,
            truth,
            active,
            pending: None,
            published: 0,
        })
    }

    pub fn spec(&self) -> &VehicleSpec {
        &self.spec
    }

    pub fn transform(&self) -> &FrameTransform {
        &self.transform
    }

    pub fn imperfections(&self) -> &ImperfectionModel {
        &self.imperfections
    }

    /// Effective speed actuator time constant in seconds.
    pub fn speed_lag(&self) -> f64 {
        self.local_spec.speed_lag()
    }

    /// Every how many ticks of `tick_hz` a state is published.
    pub fn publish_every(&self, tick_hz: f64) -> u64 {
        ((tick_hz / self.imperfections.state_publish_hz).round() as u64).max(1)
    }

    /// Ground truth in the local frame.
    pub fn truth(&self) -> &VehicleState {
        &self.truth
    }

    pub fn truth_unified(&self) -> VehicleState {
        let mut s = self.transform.to_unified(&self.truth).expect("agent frame is consistent");
        if let Some(track) = &self.track {
            s.arc_position = track.project(&s.pose).arc_position;
        }
        s
    }

    /// Accept a command in the local frame; it takes effect at the start of
    /// the next step, delayed by the jitter draw.
    pub fn command(&mut self, cmd: ControlInstruction) -> Result<(), CoreError> {
        if cmd.source_frame != self.transform.frame {
            return Err(CoreError::FrameMismatch {
                expected: self.transform.frame,
                found: cmd.source_frame,
            });
        }
        let j = self.imperfections.command_jitter;
        let delay = if j > 0.0 { self.rng.random_range(-j..=j).max(0.0) } else { 0.0 };
        if let Some(p) = self.pending.take() {
            self.active = p.cmd;
        }
        self.pending = Some(Pending { cmd, delay });
        Ok(())
    }

    /// Integrate the dynamics over `dt` seconds.
    pub fn step(&mut self, dt: f64) -> Result<(), CoreError> {
        if let Some(p) = self.pending.take() {
            let first = p.delay.min(dt);
            if first > 0.0 {
                self.truth = bicycle_step(&self.truth, &self.local_spec, &self.active, first)?;
            }
            self.active = p.cmd;
            let rest = dt - first;
            if rest > 0.0 {
                self.truth = bicycle_step(&self.truth, &self.local_spec, &self.active, rest)?;
            }
        } else {
            self.truth = bicycle_step(&self.truth, &self.local_spec, &self.active, dt)?;
        }
        Ok(())
    }

    /// Build the state to publish: the truth plus sensing noise, with the
    /// agent's own publish counter as seq.
    pub fn publish(&mut self) -> VehicleState {
        let mut s = self.truth.clone();
        if let Some(n) = self.pos_noise {
            s.pose.x += n.sample(&mut self.rng);
            s.pose.y += n.sample(&mut self.rng);
        }
        if let Some(n) = self.speed_noise {
            s.speed = (s.speed + n.sample(&mut self.rng)).max(0.0);
        }
        if let Some(track) = &self.track {
            let unified = self.transform.to_unified(&s).expect("agent frame is consistent");
            s.arc_position = track.project(&unified.pose).arc_position;
        }
        self.published += 1;
        s.seq = self.published;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixtwin_core::{FrameId, FrameTable, Role, VehicleId};

    fn agent(kind: VehicleKind, imp: ImperfectionModel) -> VehicleAgent {
        let spec = VehicleSpec::new(VehicleId(1), kind, Role::Cav);
        let tf = FrameTable::default().transform(spec.frame()).unwrap();
        let track = Track::default_loop();
        let mut init = VehicleState::at_rest(VehicleId(1), FrameId::Unified, track.point_at(0.0));
        init.speed = 2.8;
        VehicleAgent::new(spec, imp, tf, Some(track), &init).unwrap()
    }

    fn cmd(a: &VehicleAgent, speed_unified: f64) -> ControlInstruction {
        let u = ControlInstruction::unified(VehicleId(1), SourceId::from("t"), 0.0, speed_unified, 0.0, 1);
        a.transform().from_unified(&u).unwrap()
    }

    #[test]
    fn virtual_converges_within_five_tau() {
        let mut a = agent(VehicleKind::Virtual, ImperfectionModel::none());
        let c = cmd(&a, 3.0);
        a.command(c).unwrap();
        let steps = (5.0 * a.speed_lag() / 0.01).ceil() as usize;
        for _ in 0..steps {
            a.step(0.01).unwrap();
        }
        let v = a.publish().speed;
        assert!((v - 3.0).abs() < 0.01 * 0.2 + 1e-9, "{v}");
    }

    #[test]
    fn physical_noise_scales_into_unified() {
        let mut a = agent(VehicleKind::EmulatedPhysical, ImperfectionModel::emulated_physical().with_seed(3));
        let truth = a.truth().clone();
        let n = 4000;
        let mut sq = 0.0;
        for _ in 0..n {
            let s = a.publish();
            let u = a.transform().to_unified(&s).unwrap();
            let t = a.transform().to_unified(&truth).unwrap();
            sq += (u.pose.x - t.pose.x).powi(2);
        }
        let std = (sq / n as f64).sqrt();
        assert!((std - 0.028).abs() < 0.002, "{std}");
    }

    #[test]
    fn same_seed_same_series() {
        let run = |seed| {
            let mut a = agent(VehicleKind::EmulatedPhysical, ImperfectionModel::emulated_physical().with_seed(seed));
            let mut out = Vec::new();
            for k in 0..200 {
                let c = cmd(&a, 2.8 + 0.3 * ((k / 50) % 2) as f64);
                a.command(c).unwrap();
                a.step(0.02).unwrap();
                out.push(a.publish());
            }
            out
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn publish_seq_and_arc() {
        let mut a = agent(VehicleKind::Virtual, ImperfectionModel::none());
        a.command(cmd(&a, 2.8)).unwrap();
        a.step(0.02).unwrap();
        let s = a.publish();
        assert_eq!(s.seq, 1);
        assert!((s.arc_position - 0.056).abs() < 1e-9);
        assert_eq!(s.frame, FrameId::Virtual);
        assert_eq!(a.publish().seq, 2);
    }
}
