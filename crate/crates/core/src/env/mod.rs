//! Episode environments: the biped imitation task and a 1-DOF tracking task
//! used for fast end-to-end checks of the training stack.

mod biped;
mod tasks;

pub use biped::{BipedEnv, BipedEnvOptions};
pub use tasks::SinusoidTracker;

pub(crate) use biped::pd_control_period;

use crate::control::ControlError;
use crate::sim::SimError;
use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Failure modes an environment can signal at a control step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvFailure {
    /// Pelvis height left the configured bounds.
    Fell,
    /// Reward dropped below the early-termination threshold.
    LowReward,
}

/// Result of one control step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Raw (un-normalized) observation after the step.
    pub obs: DVector<f64>,
    pub reward: f64,
    pub failure: Option<EnvFailure>,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("action has {got} entries, expected {expected}")]
    ActionShape { expected: usize, got: usize },
}

/// A resettable episodic control task with a fixed-rate action loop.
/// Observations are raw; input normalization is the trainer's concern.
pub trait Env: Send {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Start a new episode (reference-state initialization draws from
    /// `rng`); returns the initial raw observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>, EnvError>;
    /// Advance one control step with action entries in [−1, 1].
    fn step(&mut self, action: &DVector<f64>) -> Result<StepOutcome, EnvError>;
    /// Control period in seconds.
    fn control_dt(&self) -> f64;
}
