//! A 1-DOF double-integrator tracking task: imitate a sinusoidal reference
//! position with the same reward shape as the walking task restricted to
//! the position term. Small enough to train in minutes, which makes it the
//! workhorse for end-to-end checks of the learning stack.

use super::{Env, EnvError, EnvFailure, StepOutcome};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

#[derive(Debug, Clone)]
pub struct SinusoidTracker {
    pub amplitude: f64,
    pub period: f64,
    /// Force applied per unit of action (N); the point mass is 1 kg.
    pub force_scale: f64,
    pub control_dt: f64,
    pub sim_dt: f64,
    pub reward_threshold: f64,
    pos: f64,
    vel: f64,
    t: f64,
    phase0: f64,
}

impl Default for SinusoidTracker {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            period: 6.0,
            force_scale: 10.0,
            control_dt: 0.032,
            sim_dt: 0.001,
            reward_threshold: 0.6,
            pos: 0.0,
            vel: 0.0,
            t: 0.0,
            phase0: 0.0,
        }
    }
}

impl SinusoidTracker {
    fn reference(&self, t: f64) -> (f64, f64) {
        let omega = TAU / self.period;
        let phase = omega * (self.phase0 + t);
        (self.amplitude * phase.sin(), self.amplitude * omega * phase.cos())
    }

    fn observation(&self) -> DVector<f64> {
        let (r, rv) = self.reference(self.t);
        DVector::from_vec(vec![self.pos, self.vel, r, rv])
    }
}

impl Env for SinusoidTracker {
    fn obs_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>, EnvError> {
        self.phase0 = rng.gen_range(0.0..self.period);
        self.t = 0.0;
        let (r, rv) = self.reference(0.0);
        self.pos = r;
        self.vel = rv;
        Ok(self.observation())
    }

    fn step(&mut self, action: &DVector<f64>) -> Result<StepOutcome, EnvError> {
        if action.len() != 1 {
            return Err(EnvError::ActionShape { expected: 1, got: action.len() });
        }
        let force = self.force_scale * action[0].clamp(-1.0, 1.0);
        let substeps = (self.control_dt / self.sim_dt).round() as usize;
        for _ in 0..substeps {
            self.vel += self.sim_dt * force;
            self.pos += self.sim_dt * self.vel;
        }
        self.t += self.control_dt;
        let (r, _) = self.reference(self.t);
        let err = self.pos - r;
        let reward = (-err * err).exp();
        let failure = (reward < self.reward_threshold).then_some(EnvFailure::LowReward);
        Ok(StepOutcome { obs: self.observation(), reward, failure })
    }

    fn control_dt(&self) -> f64 {
        self.control_dt
    }
}
