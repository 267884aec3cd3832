//! On-policy training: trajectory collection with reference-state
//! initialization and early termination, discounted value targets with
//! bootstrap-on-truncation, advantages, the clipped surrogate objective,
//! and the iteration loop with step-size decay.

mod trainer;

pub use trainer::{IterationMetrics, RunOptions, RunSummary, Trainer, TrainError, METRICS_HEADER};

pub(crate) use trainer::derive_seed;

use crate::env::{Env, EnvError, EnvFailure};
use crate::nn::{GaussianPolicy, Mlp, Normalizer};
use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Why an episode (or a transition within one) ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoneCause {
    Running,
    Fell,
    LowReward,
    TimeLimit,
}

impl DoneCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            DoneCause::Running => "running",
            DoneCause::Fell => "fell",
            DoneCause::LowReward => "low-reward",
            DoneCause::TimeLimit => "time-limit",
        }
    }
}

impl From<EnvFailure> for DoneCause {
    fn from(f: EnvFailure) -> Self {
        match f {
            EnvFailure::Fell => DoneCause::Fell,
            EnvFailure::LowReward => DoneCause::LowReward,
        }
    }
}

/// One step of experience. Observations are stored normalized, exactly as
/// the networks saw them.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: DVector<f64>,
    pub action: DVector<f64>,
    /// Log density of `action` under the behavior policy.
    pub log_prob: f64,
    pub reward: f64,
    pub done: DoneCause,
}

/// An episode's worth of transitions plus its termination bookkeeping.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub cause: DoneCause,
    /// Normalized observation after the final transition; present exactly
    /// when the episode was truncated by the time limit, in which case the
    /// critic bootstraps from it.
    pub final_obs: Option<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// Training hyperparameters. Defaults follow the walking setup: 300-step
/// episodes, 3,000 samples per iteration, 64 minibatch updates of 128, and
/// step sizes decaying 1% per iteration to a floor.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub gamma: f64,
    pub clip_epsilon: f64,
    /// Maximum episode length in control steps (T).
    pub horizon: usize,
    pub samples_per_iter: usize,
    pub batch_size: usize,
    pub updates_per_iter: usize,
    pub actor_lr_init: f64,
    pub actor_lr_floor: f64,
    pub critic_lr_init: f64,
    pub critic_lr_floor: f64,
    /// Multiplicative step-size decay per iteration.
    pub lr_decay: f64,
    pub exploration_variance: f64,
    pub standardize_advantages: bool,
    pub normalizer_samples: usize,
    pub normalizer_floor: f64,
    pub iterations: usize,
    pub checkpoint_every: usize,
    pub workers: usize,
    pub seed: u64,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            clip_epsilon: 0.2,
            horizon: 300,
            samples_per_iter: 3000,
            batch_size: 128,
            updates_per_iter: 64,
            actor_lr_init: 1e-3,
            actor_lr_floor: 1e-4,
            critic_lr_init: 1e-2,
            critic_lr_floor: 1e-3,
            lr_decay: 0.99,
            exploration_variance: 0.018,
            standardize_advantages: true,
            normalizer_samples: 50_000,
            normalizer_floor: 1e-6,
            iterations: 300,
            checkpoint_every: 50,
            workers: 1,
            seed: 0,
            hidden_dim: 256,
        }
    }
}

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("advantage inputs have mismatched lengths: {targets} targets vs {values} values")]
    LengthMismatch { targets: usize, values: usize },
    #[error("empty batch")]
    EmptyBatch,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let fail = |msg: String| Err(PpoError::BadConfig(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.clip_epsilon > 0.0) {
            return fail(format!("clip_epsilon must be positive, got {}", self.clip_epsilon));
        }
        for (name, v) in [
            ("horizon", self.horizon),
            ("samples_per_iter", self.samples_per_iter),
            ("batch_size", self.batch_size),
            ("updates_per_iter", self.updates_per_iter),
            ("workers", self.workers),
            ("hidden_dim", self.hidden_dim),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.actor_lr_floor >= self.actor_lr_init {
            return fail("actor step-size floor must be below the initial value".into());
        }
        if self.critic_lr_floor >= self.critic_lr_init {
            return fail("critic step-size floor must be below the initial value".into());
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if !(self.exploration_variance > 0.0) {
            return fail("exploration variance must be positive".into());
        }
        Ok(())
    }

    /// Actor step size at a 0-based iteration index: init·decay^k, clamped
    /// at the floor.
    pub fn actor_lr(&self, iteration: usize) -> f64 {
        (self.actor_lr_init * self.lr_decay.powi(iteration as i32)).max(self.actor_lr_floor)
    }

    pub fn critic_lr(&self, iteration: usize) -> f64 {
        (self.critic_lr_init * self.lr_decay.powi(iteration as i32)).max(self.critic_lr_floor)
    }
}

/// The clipped surrogate for one transition: min(ρ·Â, clip(ρ, 1−ε, 1+ε)·Â).
#[inline]
pub fn ppo_surrogate(rho: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    (rho * advantage).min(clipped * advantage)
}

/// d(surrogate)/d(log π(a|s)) for one transition. The surrogate depends on
/// the policy only through ρ = exp(log π − log π_old) with dρ/d(log π) = ρ,
/// so the derivative is ρ·Â on the unclipped branch and exactly zero when
/// the clipped branch is active and strictly smaller (the clip is flat
/// there).
#[inline]
pub fn surrogate_logprob_gradient(rho: f64, advantage: f64, epsilon: f64) -> f64 {
    let unclipped = rho * advantage;
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    if unclipped <= clipped {
        unclipped
    } else {
        0.0
    }
}

/// Discounted reward-to-go with a terminal bootstrap:
/// V̂_t = r_t + γ·V̂_{t+1}, seeded past the last step with `bootstrap`.
pub fn discounted_targets(rewards: &[f64], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut targets = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        targets[t] = acc;
    }
    targets
}

/// Value targets for a trajectory. The critic bootstraps only a time-limit
/// truncation; failure terminations treat all remaining rewards as zero.
pub fn value_targets(traj: &Trajectory, gamma: f64, critic: &Mlp) -> Vec<f64> {
    let bootstrap = match (&traj.cause, &traj.final_obs) {
        (DoneCause::TimeLimit, Some(obs)) => critic
            .forward(obs)
            .expect("critic dimension matches observations")[0],
        _ => 0.0,
    };
    let rewards: Vec<f64> = traj.transitions.iter().map(|t| t.reward).collect();
    discounted_targets(&rewards, gamma, bootstrap)
}

/// Â = V̂ − V(s), elementwise.
pub fn advantages(targets: &[f64], values: &[f64]) -> Result<Vec<f64>, PpoError> {
    if targets.len() != values.len() {
        return Err(PpoError::LengthMismatch { targets: targets.len(), values: values.len() });
    }
    Ok(targets.iter().zip(values).map(|(t, v)| t - v).collect())
}

/// Mean squared error between value targets and critic outputs.
pub fn critic_loss(targets: &[f64], values: &[f64]) -> Result<f64, PpoError> {
    if targets.is_empty() {
        return Err(PpoError::EmptyBatch);
    }
    if targets.len() != values.len() {
        return Err(PpoError::LengthMismatch { targets: targets.len(), values: values.len() });
    }
    let sum: f64 = targets.iter().zip(values).map(|(t, v)| (t - v) * (t - v)).sum();
    Ok(sum / targets.len() as f64)
}

/// Roll out one episode of at most `horizon` control steps. Observations
/// are normalized before the policy sees them and stored in that form.
/// `deterministic` switches to the mean action (the test-time policy).
pub fn rollout<E: Env>(
    env: &mut E,
    policy: &GaussianPolicy,
    normalizer: &Normalizer,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    deterministic: bool,
) -> Result<Trajectory, EnvError> {
    let raw = env.reset(rng)?;
    let mut obs = normalizer.normalize(&raw).expect("normalizer fitted to the observation size");
    if horizon == 0 {
        return Ok(Trajectory {
            transitions: Vec::new(),
            cause: DoneCause::TimeLimit,
            final_obs: Some(obs),
        });
    }
    let mut transitions = Vec::with_capacity(horizon.min(4096));
    for step in 0..horizon {
        let action = if deterministic {
            policy.mean(&obs).expect("actor input dimension")
        } else {
            policy.sample(&obs, rng).expect("actor input dimension")
        };
        let log_prob = policy.log_prob(&obs, &action).expect("actor input dimension");
        let outcome = env.step(&action)?;
        let next = normalizer.normalize(&outcome.obs).expect("normalizer dimension");
        let done = match outcome.failure {
            Some(f) => DoneCause::from(f),
            None if step + 1 == horizon => DoneCause::TimeLimit,
            None => DoneCause::Running,
        };
        transitions.push(Transition { obs, action, log_prob, reward: outcome.reward, done });
        obs = next;
        if done != DoneCause::Running {
            let final_obs = (done == DoneCause::TimeLimit).then_some(obs);
            return Ok(Trajectory { transitions, cause: done, final_obs });
        }
    }
    unreachable!("the loop always terminates with a cause by the horizon")
}
