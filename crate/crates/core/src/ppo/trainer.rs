//! The training loop: collect on-policy trajectories up to the sample cap,
//! fit value targets and advantages, then run minibatch Adam updates on the
//! clipped surrogate (actor) and the value regression (critic).

use super::{
    advantages, ppo_surrogate, rollout, surrogate_logprob_gradient, value_targets, DoneCause,
    PpoError, TrainConfig, Trajectory,
};
use crate::env::{Env, EnvError};
use crate::nn::{
    save_checkpoint, AdamState, Checkpoint, CheckpointError, GaussianPolicy, Mlp, Normalizer,
    OutputActivation,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Domain-separated seed derivation (splitmix64 over mixed words), so the
/// normalizer fit, each rollout, and each shuffle get independent streams
/// that depend only on the master seed and their indices.
pub(crate) fn derive_seed(master: u64, stream: u64, a: u64, b: u64) -> u64 {
    let mut x = master
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(a.wrapping_mul(0x94d0_49bb_1331_11eb))
        .wrapping_add(b.wrapping_add(0x2545_f491_4f6c_dd1d));
    for _ in 0..2 {
        x ^= x >> 30;
        x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 27;
        x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
    }
    x
}

const STREAM_INIT: u64 = 1;
const STREAM_NORMALIZER: u64 = 2;
const STREAM_ROLLOUT: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error("iteration {iteration}: all {attempted} rollouts failed; last error: {last}")]
    AllRolloutsFailed { iteration: usize, attempted: usize, last: String },
    #[error("normalizer collection produced no usable states")]
    NormalizerCollectionFailed,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-iteration training metrics, one CSV row each.
#[derive(Debug, Clone)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub transitions: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub mean_episode_steps: f64,
    pub fraction_time_limit: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub wall_seconds: f64,
    /// Rollouts dropped because the simulation diverged.
    pub failed_rollouts: usize,
}

pub const METRICS_HEADER: &str = "iteration,transitions,episodes,mean_return,mean_episode_steps,fraction_time_limit,actor_loss,critic_loss,actor_lr,critic_lr,wall_seconds";

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}",
            self.iteration,
            self.transitions,
            self.episodes,
            self.mean_return,
            self.mean_episode_steps,
            self.fraction_time_limit,
            self.actor_loss,
            self.critic_loss,
            self.actor_lr,
            self.critic_lr,
            self.wall_seconds
        )
    }

    /// Mean reward per transition in this iteration's batch.
    pub fn mean_step_reward(&self) -> f64 {
        if self.mean_episode_steps > 0.0 {
            self.mean_return / self.mean_episode_steps
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Write 0 for wall_seconds so metrics files are byte-reproducible.
    pub zero_timing: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub iterations_run: usize,
    pub final_mean_return: f64,
    pub metrics_path: PathBuf,
    pub final_checkpoint: PathBuf,
}

/// PPO trainer bound to an environment prototype. Every worker rollout
/// clones the prototype and owns its copy for the episode.
pub struct Trainer<E: Env + Clone + Sync> {
    env: E,
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub normalizer: Normalizer,
    pub adam_actor: AdamState,
    pub adam_critic: AdamState,
    cfg: TrainConfig,
    iteration: usize,
}

impl<E: Env + Clone + Sync> Trainer<E> {
    pub fn new(env: E, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INIT, 0, 0));
        let h = cfg.hidden_dim;
        let actor = Mlp::new(&[env.obs_dim(), h, h, env.action_dim()], OutputActivation::Tanh, &mut rng)
            .expect("actor dims are valid");
        let critic = Mlp::new(&[env.obs_dim(), h, h, 1], OutputActivation::Identity, &mut rng)
            .expect("critic dims are valid");
        let adam_actor = AdamState::new(&actor);
        let adam_critic = AdamState::new(&critic);
        let normalizer = Normalizer::identity(env.obs_dim());
        Ok(Self {
            env,
            policy: GaussianPolicy::new(actor, cfg.exploration_variance),
            critic,
            normalizer,
            adam_actor,
            adam_critic,
            cfg,
            iteration: 0,
        })
    }

    /// Restore networks, normalizer, and optimizer state from a checkpoint.
    pub fn resume(env: E, cfg: TrainConfig, checkpoint: Checkpoint) -> Result<Self, TrainError> {
        cfg.validate()?;
        Ok(Self {
            env,
            policy: GaussianPolicy::new(checkpoint.actor, cfg.exploration_variance),
            critic: checkpoint.critic,
            normalizer: checkpoint.normalizer,
            adam_actor: checkpoint.adam_actor,
            adam_critic: checkpoint.adam_critic,
            iteration: checkpoint.iteration as usize,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            iteration: self.iteration as u64,
            actor: self.policy.actor.clone(),
            critic: self.critic.clone(),
            normalizer: self.normalizer.clone(),
            adam_actor: self.adam_actor.clone(),
            adam_critic: self.adam_critic.clone(),
        }
    }

    /// Collect states with the current (untrained) policy and freeze input
    /// statistics from them.
    pub fn fit_normalizer(&mut self) -> Result<(), TrainError> {
        let wanted = self.cfg.normalizer_samples;
        let mut states: Vec<DVector<f64>> = Vec::with_capacity(wanted);
        let mut episode = 0u64;
        let mut consecutive_failures = 0;
        while states.len() < wanted {
            let mut env = self.env.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                self.cfg.seed,
                STREAM_NORMALIZER,
                episode,
                0,
            ));
            episode += 1;
            let raw0 = match env.reset(&mut rng) {
                Ok(o) => o,
                Err(_) => {
                    consecutive_failures += 1;
                    if consecutive_failures > 100 {
                        return Err(TrainError::NormalizerCollectionFailed);
                    }
                    continue;
                }
            };
            consecutive_failures = 0;
            states.push(raw0.clone());
            let mut raw = raw0;
            for _ in 0..self.cfg.horizon {
                if states.len() >= wanted {
                    break;
                }
                let action = self
                    .policy
                    .sample(&self.normalizer.normalize(&raw).expect("dims"), &mut rng)
                    .expect("dims");
                match env.step(&action) {
                    Ok(outcome) => {
                        states.push(outcome.obs.clone());
                        raw = outcome.obs;
                        if outcome.failure.is_some() {
                            break;
                        }
                    }
                    Err(_) => break, // divergence ends the episode; keep what we have
                }
            }
        }
        self.normalizer = Normalizer::fit(&states, self.cfg.normalizer_floor)
            .map_err(|_| TrainError::NormalizerCollectionFailed)?;
        Ok(())
    }

    /// Collect trajectories until the sample cap is reached. Episodes are
    /// seeded by (seed, iteration, episode index), so the collected batch is
    /// identical for any worker count; the final trajectory that crosses the
    /// cap is kept whole.
    fn collect(&self) -> Result<(Vec<Trajectory>, usize), TrainError> {
        let mut kept: Vec<Trajectory> = Vec::new();
        let mut total = 0usize;
        let mut failed = 0usize;
        let mut last_error = String::new();
        let mut next_episode = 0u64;
        let workers = self.cfg.workers.max(1);
        while total < self.cfg.samples_per_iter {
            let indices: Vec<u64> = (next_episode..next_episode + workers as u64).collect();
            next_episode += workers as u64;
            let results: Vec<Result<Trajectory, EnvError>> = if workers == 1 {
                indices.iter().map(|&ep| self.run_episode(ep)).collect()
            } else {
                indices.par_iter().map(|&ep| self.run_episode(ep)).collect()
            };
            for result in results {
                match result {
                    Ok(traj) => {
                        if total < self.cfg.samples_per_iter && !traj.is_empty() {
                            total += traj.len();
                            kept.push(traj);
                        }
                    }
                    Err(e) => {
                        failed += 1;
                        last_error = e.to_string();
                    }
                }
            }
            if failed > 0 && kept.is_empty() && next_episode > 4 * self.cfg.samples_per_iter as u64 {
                break;
            }
        }
        if kept.is_empty() {
            return Err(TrainError::AllRolloutsFailed {
                iteration: self.iteration,
                attempted: next_episode as usize,
                last: last_error,
            });
        }
        if failed > 0 {
            eprintln!(
                "warning: iteration {}: {} rollout(s) dropped after simulator divergence ({})",
                self.iteration, failed, last_error
            );
        }
        Ok((kept, failed))
    }

    fn run_episode(&self, episode: u64) -> Result<Trajectory, EnvError> {
        let mut env = self.env.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.cfg.seed,
            STREAM_ROLLOUT,
            self.iteration as u64,
            episode,
        ));
        rollout(&mut env, &self.policy, &self.normalizer, self.cfg.horizon, &mut rng, false)
    }

    /// One full iteration: collect, compute targets and advantages, run the
    /// configured number of minibatch updates, advance the step-size
    /// schedule.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics, TrainError> {
        let started = Instant::now();
        let (trajectories, failed_rollouts) = self.collect()?;

        let episodes = trajectories.len();
        let total: usize = trajectories.iter().map(|t| t.len()).sum();
        let mean_return =
            trajectories.iter().map(|t| t.total_reward()).sum::<f64>() / episodes as f64;
        let mean_steps = total as f64 / episodes as f64;
        let time_limits =
            trajectories.iter().filter(|t| t.cause == DoneCause::TimeLimit).count();

        // Flatten the batch: observations and actions as columns.
        let obs_dim = self.env.obs_dim();
        let act_dim = self.env.action_dim();
        let mut obs = DMatrix::<f64>::zeros(obs_dim, total);
        let mut actions = DMatrix::<f64>::zeros(act_dim, total);
        let mut old_log_probs = Vec::with_capacity(total);
        let mut targets = Vec::with_capacity(total);
        let mut col = 0;
        for traj in &trajectories {
            let traj_targets = value_targets(traj, self.cfg.gamma, &self.critic);
            for (t, transition) in traj.transitions.iter().enumerate() {
                obs.set_column(col, &transition.obs);
                actions.set_column(col, &transition.action);
                old_log_probs.push(transition.log_prob);
                targets.push(traj_targets[t]);
                col += 1;
            }
        }

        let values_mat = self.critic.forward_batch(&obs).expect("critic dims");
        let values: Vec<f64> = (0..total).map(|j| values_mat[(0, j)]).collect();
        let mut advs = advantages(&targets, &values)?;
        if self.cfg.standardize_advantages {
            let mean = advs.iter().sum::<f64>() / advs.len() as f64;
            let var = advs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / advs.len() as f64;
            let std = var.sqrt().max(1e-8);
            for a in advs.iter_mut() {
                *a = (*a - mean) / std;
            }
        }

        let actor_lr = self.cfg.actor_lr(self.iteration);
        let critic_lr = self.cfg.critic_lr(self.iteration);
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.cfg.seed,
            STREAM_SHUFFLE,
            self.iteration as u64,
            0,
        ));
        let mut pool: Vec<usize> = Vec::new();
        let mut actor_loss_sum = 0.0;
        let mut critic_loss_sum = 0.0;
        let variance = self.policy.variance;

        for _ in 0..self.cfg.updates_per_iter {
            // Sample a minibatch without replacement, reshuffling the pool
            // whenever it runs dry.
            let batch = self.cfg.batch_size.min(total);
            let mut idx = Vec::with_capacity(batch);
            while idx.len() < batch {
                if pool.is_empty() {
                    pool = (0..total).collect();
                    // Fisher-Yates with the iteration's shuffle stream.
                    for i in (1..pool.len()).rev() {
                        let j = shuffle_rng.gen_range(0..=i);
                        pool.swap(i, j);
                    }
                }
                let take = batch - idx.len();
                let start = pool.len().saturating_sub(take);
                idx.extend(pool.drain(start..));
            }

            let mut batch_obs = DMatrix::<f64>::zeros(obs_dim, batch);
            for (k, &j) in idx.iter().enumerate() {
                batch_obs.set_column(k, &obs.column(j));
            }

            // Actor: maximize the clipped surrogate == minimize its negative.
            let cache = self.policy.actor.forward_batch_cached(&batch_obs).expect("dims");
            let means = cache.output();
            let mut upstream = DMatrix::<f64>::zeros(act_dim, batch);
            let mut surrogate_sum = 0.0;
            for (k, &j) in idx.iter().enumerate() {
                let mut log_prob = -0.5 * act_dim as f64 * (std::f64::consts::TAU * variance).ln();
                for r in 0..act_dim {
                    let d = actions[(r, j)] - means[(r, k)];
                    log_prob -= d * d / (2.0 * variance);
                }
                let rho = (log_prob - old_log_probs[j]).exp();
                let adv = advs[j];
                surrogate_sum += ppo_surrogate(rho, adv, self.cfg.clip_epsilon);
                let coef =
                    surrogate_logprob_gradient(rho, adv, self.cfg.clip_epsilon) / batch as f64;
                if coef != 0.0 {
                    for r in 0..act_dim {
                        // d log π / d μ_r = (a_r − μ_r)/σ²; negated for
                        // minimization.
                        upstream[(r, k)] =
                            -coef * (actions[(r, j)] - means[(r, k)]) / variance;
                    }
                }
            }
            actor_loss_sum += -surrogate_sum / batch as f64;
            let grads = self.policy.actor.backward(&cache, &upstream).expect("dims");
            self.adam_actor.step(&mut self.policy.actor, &grads, actor_lr);

            // Critic: minimize mean squared error to the value targets.
            let cache = self.critic.forward_batch_cached(&batch_obs).expect("dims");
            let values = cache.output();
            let mut upstream = DMatrix::<f64>::zeros(1, batch);
            let mut loss = 0.0;
            for (k, &j) in idx.iter().enumerate() {
                let err = values[(0, k)] - targets[j];
                loss += err * err;
                upstream[(0, k)] = 2.0 * err / batch as f64;
            }
            critic_loss_sum += loss / batch as f64;
            let grads = self.critic.backward(&cache, &upstream).expect("dims");
            self.adam_critic.step(&mut self.critic, &grads, critic_lr);
        }

        let metrics = IterationMetrics {
            iteration: self.iteration,
            transitions: total,
            episodes,
            mean_return,
            mean_episode_steps: mean_steps,
            fraction_time_limit: time_limits as f64 / episodes as f64,
            actor_loss: actor_loss_sum / self.cfg.updates_per_iter as f64,
            critic_loss: critic_loss_sum / self.cfg.updates_per_iter as f64,
            actor_lr,
            critic_lr,
            wall_seconds: started.elapsed().as_secs_f64(),
            failed_rollouts,
        };
        self.iteration += 1;
        Ok(metrics)
    }

    /// Run the full pipeline: fit the normalizer (if not already fitted),
    /// write the initial checkpoint, then train for the configured number
    /// of iterations with periodic checkpoints and a metrics CSV.
    pub fn run(&mut self, opts: &RunOptions) -> Result<RunSummary, TrainError> {
        let io_err = |path: &Path, source| TrainError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(&opts.out_dir).map_err(|e| io_err(&opts.out_dir, e))?;
        if self.normalizer.count == 0 {
            self.fit_normalizer()?;
        }
        let initial = opts.out_dir.join("checkpoint_initial.ckpt");
        save_checkpoint(&self.checkpoint(), &initial)?;

        let metrics_path = opts.out_dir.join("metrics.csv");
        let mut metrics_file =
            fs::File::create(&metrics_path).map_err(|e| io_err(&metrics_path, e))?;
        writeln!(metrics_file, "{METRICS_HEADER}").map_err(|e| io_err(&metrics_path, e))?;

        let mut final_mean_return = 0.0;
        let total_iterations = self.cfg.iterations;
        for k in 0..total_iterations {
            let mut metrics = self.train_iteration()?;
            if opts.zero_timing {
                metrics.wall_seconds = 0.0;
            }
            final_mean_return = metrics.mean_return;
            writeln!(metrics_file, "{}", metrics.csv_row()).map_err(|e| io_err(&metrics_path, e))?;
            if self.cfg.checkpoint_every > 0 && (k + 1) % self.cfg.checkpoint_every == 0 {
                let path = opts.out_dir.join(format!("checkpoint_{:06}.ckpt", self.iteration));
                save_checkpoint(&self.checkpoint(), &path)?;
            }
        }
        let final_checkpoint = opts.out_dir.join("checkpoint_final.ckpt");
        save_checkpoint(&self.checkpoint(), &final_checkpoint)?;
        Ok(RunSummary {
            iterations_run: total_iterations,
            final_mean_return,
            metrics_path,
            final_checkpoint,
        })
    }
}
