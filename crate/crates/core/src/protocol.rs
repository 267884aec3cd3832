//! Batch experiment protocols: plain evaluation, sensory-delay sweeps,
//! sinusoidal-terrain sweeps, pelvis-push recovery, and policy
//! interpolation. Every run is reconstructible from its report header:
//! seed, config digest, checkpoint identities, and simulation rate.

use crate::control::{self, DelayBuffer};
use crate::env::{BipedEnv, BipedEnvOptions, EnvError, EnvFailure};
use crate::nn::{Checkpoint, GaussianPolicy, Normalizer};
use crate::ppo::{rollout, DoneCause};
use crate::reference::{blend, ReferenceMotion};
use crate::reward::imitation_reward;
use crate::sim::{PushEvent, RobotModel, SimState, Terrain, Vec2, N_ACTIVE, Q_PELVIS_X, Q_PELVIS_Z};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("sensor delay {delay} s exceeds the delay buffer capacity {capacity} s")]
    DelayExceedsBuffer { delay: f64, capacity: f64 },
    #[error("negative terrain height {0}")]
    NegativeTerrainHeight(f64),
    #[error("checkpoints have different network topologies: {0:?} vs {1:?}")]
    TopologyMismatch(Vec<usize>, Vec<usize>),
    #[error("reference motions are incompatible: {0}")]
    IncompatibleMotions(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A policy ready for evaluation: actor plus the input normalizer it was
/// trained with.
#[derive(Debug, Clone)]
pub struct PolicyBundle {
    pub policy: GaussianPolicy,
    pub normalizer: Normalizer,
}

impl PolicyBundle {
    pub fn from_checkpoint(ck: &Checkpoint, variance: f64) -> Self {
        Self {
            policy: GaussianPolicy::new(ck.actor.clone(), variance),
            normalizer: ck.normalizer.clone(),
        }
    }
}

/// One evaluated episode.
#[derive(Debug, Clone)]
pub struct EpisodeSummary {
    pub episode: usize,
    /// True when the episode hit the time limit (or, for push tests, kept
    /// walking through the recovery window).
    pub survived: bool,
    pub steps: usize,
    pub total_reward: f64,
    pub cause: DoneCause,
}

/// Results for one sweep point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub label: String,
    pub value: f64,
    pub episodes: Vec<EpisodeSummary>,
}

impl SweepRow {
    pub fn mean_reward(&self) -> f64 {
        self.episodes.iter().map(|e| e.total_reward).sum::<f64>() / self.episodes.len().max(1) as f64
    }

    pub fn survival_fraction(&self) -> f64 {
        self.episodes.iter().filter(|e| e.survived).count() as f64
            / self.episodes.len().max(1) as f64
    }
}

/// A complete experiment: metadata sufficient to re-run it bit-identically
/// in single-worker mode, plus per-episode results.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: String,
    pub seed: u64,
    pub config_digest: String,
    pub checkpoint_ids: Vec<String>,
    pub sim_rate_hz: f64,
    pub policy_rate_hz: f64,
    pub rows: Vec<SweepRow>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kind={}", self.kind);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# config_digest={}", self.config_digest);
        let _ = writeln!(out, "# checkpoints={}", self.checkpoint_ids.join(";"));
        let _ = writeln!(out, "# sim_rate_hz={}", self.sim_rate_hz);
        let _ = writeln!(out, "# policy_rate_hz={}", self.policy_rate_hz);
        out.push_str("sweep,value,episode,survived,steps,total_reward,cause\n");
        for row in &self.rows {
            for e in &row.episodes {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.17e},{}",
                    row.label,
                    row.value,
                    e.episode,
                    e.survived,
                    e.steps,
                    e.total_reward,
                    e.cause.as_str()
                );
            }
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment: {}", self.kind);
        let _ = writeln!(out, "seed {} | config {} | sim {} Hz | policy {} Hz",
            self.seed, self.config_digest, self.sim_rate_hz, self.policy_rate_hz);
        let _ = writeln!(out, "checkpoints: {}", self.checkpoint_ids.join(", "));
        for row in &self.rows {
            let _ = writeln!(
                out,
                "  {:<22} episodes {:>3}  survived {:>5.1}%  mean reward {:>8.2}",
                row.label,
                row.episodes.len(),
                100.0 * row.survival_fraction(),
                row.mean_reward()
            );
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), ProtocolError> {
        let io_err = |path: &Path, source| ProtocolError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let csv = dir.join(format!("{}_report.csv", self.kind));
        std::fs::write(&csv, self.to_csv()).map_err(|e| io_err(&csv, e))?;
        let txt = dir.join(format!("{}_summary.txt", self.kind));
        std::fs::write(&txt, self.summary_text()).map_err(|e| io_err(&txt, e))?;
        Ok(())
    }
}

/// Short content hash identifying a checkpoint file.
pub fn checkpoint_id(path: &Path) -> Result<String, ProtocolError> {
    let bytes = std::fs::read(path)
        .map_err(|source| ProtocolError::Io { path: path.display().to_string(), source })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

pub(crate) const STREAM_EVAL: u64 = 10;
pub(crate) const STREAM_INTERP: u64 = 11;

fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::ppo::derive_seed(seed, STREAM_EVAL, episode, 0))
}

/// Episode RNG for interpolation runs (distinct stream from plain eval).
pub fn interpolation_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::ppo::derive_seed(seed, STREAM_INTERP, episode, 0))
}

/// Run `episodes` evaluation episodes on clones of the prototype
/// environment. `deterministic` uses the actor mean (the test-time policy).
pub fn run_eval(
    env_proto: &BipedEnv,
    bundle: &PolicyBundle,
    episodes: usize,
    horizon: usize,
    seed: u64,
    deterministic: bool,
) -> Result<Vec<EpisodeSummary>, ProtocolError> {
    let mut out = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let mut env = env_proto.clone();
        let mut rng = episode_rng(seed, episode as u64);
        let traj = rollout(&mut env, &bundle.policy, &bundle.normalizer, horizon, &mut rng, deterministic)?;
        out.push(EpisodeSummary {
            episode,
            survived: traj.cause == DoneCause::TimeLimit,
            steps: traj.len(),
            total_reward: traj.total_reward(),
            cause: traj.cause,
        });
    }
    Ok(out)
}

/// Sweep sensory delays; each sweep point runs the full episode set.
pub fn delay_sweep(
    env_proto: &BipedEnv,
    bundle: &PolicyBundle,
    delays: &[f64],
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, ProtocolError> {
    let mut rows = Vec::with_capacity(delays.len());
    for &delay in delays {
        let capacity = env_proto.options().delay_buffer_s;
        if delay > capacity {
            return Err(ProtocolError::DelayExceedsBuffer { delay, capacity });
        }
        let mut env = env_proto.clone();
        env.options_mut().delay = delay;
        let episodes = run_eval(&env, bundle, episodes, horizon, seed, true)?;
        rows.push(SweepRow { label: format!("delay={delay}"), value: delay, episodes });
    }
    Ok(rows)
}

/// Sweep sinusoidal terrain heights (ascending); the returned notes name
/// the largest height with zero falls and the first failing height.
pub fn terrain_sweep(
    env_proto: &BipedEnv,
    bundle: &PolicyBundle,
    heights: &[f64],
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<(Vec<SweepRow>, Vec<String>), ProtocolError> {
    let mut heights = heights.to_vec();
    heights.sort_by(|a, b| a.partial_cmp(b).expect("finite terrain heights"));
    let mut rows = Vec::with_capacity(heights.len());
    for &h in &heights {
        if h < 0.0 {
            return Err(ProtocolError::NegativeTerrainHeight(h));
        }
        let mut env = env_proto.clone();
        env.options_mut().terrain =
            Terrain::sinusoidal(h).map_err(|e| ProtocolError::NegativeTerrainHeight(e.0))?;
        let episodes = run_eval(&env, bundle, episodes, horizon, seed, true)?;
        rows.push(SweepRow { label: format!("h={h}"), value: h, episodes });
    }
    let mut largest_clean: Option<f64> = None;
    let mut first_failing: Option<f64> = None;
    for row in &rows {
        if row.survival_fraction() == 1.0 {
            largest_clean = Some(row.value);
        } else if first_failing.is_none() {
            first_failing = Some(row.value);
        }
    }
    let mut notes = Vec::new();
    notes.push(match largest_clean {
        Some(h) => format!("largest height with zero falls: h={h}"),
        None => "no swept height was fall-free".to_string(),
    });
    if let Some(h) = first_failing {
        notes.push(format!("first failing height: h={h}"));
    }
    Ok((rows, notes))
}

/// Directions for pelvis pushes. The planar model has no lateral axis, so
/// sideways pushes from the 3D protocol have no analog here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushDirection {
    Forward,
    Backward,
}

impl PushDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            PushDirection::Forward => "forward",
            PushDirection::Backward => "backward",
        }
    }

    fn unit(&self) -> Vec2 {
        match self {
            PushDirection::Forward => Vec2::new(1.0, 0.0),
            PushDirection::Backward => Vec2::new(-1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PushProtocol {
    /// Push window start (s); randomized per episode when `random_phase`.
    pub start: f64,
    pub duration: f64,
    pub random_phase: bool,
    /// Seconds the robot must keep walking after the push window to count
    /// as recovered.
    pub recovery_window: f64,
}

/// Apply a single pelvis push per episode and report recovery per
/// (direction, magnitude). `survived` in the result means "no termination
/// until the recovery window closed".
#[allow(clippy::too_many_arguments)]
pub fn push_sweep(
    env_proto: &BipedEnv,
    bundle: &PolicyBundle,
    directions: &[PushDirection],
    magnitudes: &[f64],
    protocol: &PushProtocol,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, ProtocolError> {
    let control_dt = env_proto.options().control_dt;
    let mut rows = Vec::new();
    for &direction in directions {
        for &magnitude in magnitudes {
            let mut results = Vec::with_capacity(episodes);
            for episode in 0..episodes {
                let mut rng = episode_rng(seed, (rows.len() * episodes + episode) as u64);
                let start = if protocol.random_phase {
                    // One stride of phase jitter keeps the push mid-gait.
                    protocol.start + rng.gen_range(0.0..env_proto.motion().stride_period())
                } else {
                    protocol.start
                };
                let mut env = env_proto.clone();
                env.options_mut().pushes = vec![PushEvent {
                    force: direction.unit() * magnitude,
                    start,
                    duration: protocol.duration,
                }];
                let needed = ((start + protocol.duration + protocol.recovery_window) / control_dt)
                    .ceil() as usize;
                let run_horizon = horizon.max(needed + 1);
                let traj = rollout(
                    &mut env,
                    &bundle.policy,
                    &bundle.normalizer,
                    run_horizon,
                    &mut rng,
                    true,
                )?;
                let recovered = traj.len() >= needed;
                results.push(EpisodeSummary {
                    episode,
                    survived: recovered,
                    steps: traj.len(),
                    total_reward: traj.total_reward(),
                    cause: traj.cause,
                });
            }
            rows.push(SweepRow {
                label: format!("push={}@{}N", direction.as_str(), magnitude),
                value: magnitude,
                episodes: results,
            });
        }
    }
    Ok(rows)
}

/// How the interpolation coefficient λ evolves during an episode.
#[derive(Debug, Clone, Copy)]
pub enum InterpolationMode {
    /// Constant λ.
    Fixed(f64),
    /// λ(t) = max(0, 1 − rate·t), clamped to [0, 1].
    Schedule { rate: f64 },
    /// λ from the current pelvis speed, mapped linearly between the two
    /// motions' nominal stride speeds.
    SpeedAdaptive,
}

/// λ(t) under the linear ramp schedule.
pub fn schedule_lambda(rate: f64, t: f64) -> f64 {
    (1.0 - rate * t).clamp(0.0, 1.0)
}

impl InterpolationMode {
    fn lambda(&self, t: f64, pelvis_speed: f64, v1: f64, v2: f64) -> f64 {
        match self {
            InterpolationMode::Fixed(l) => l.clamp(0.0, 1.0),
            InterpolationMode::Schedule { rate } => schedule_lambda(*rate, t),
            InterpolationMode::SpeedAdaptive => {
                if (v1 - v2).abs() < 1e-12 {
                    1.0
                } else {
                    ((pelvis_speed - v2) / (v1 - v2)).clamp(0.0, 1.0)
                }
            }
        }
    }
}

/// Interpolated-policy episode: the executed PD targets blend the two
/// policies' targets, each policy observing its own reference motion, while
/// the reward tracks the blended reference.
#[allow(clippy::too_many_arguments)]
pub fn interpolate_episode(
    model: &Arc<RobotModel>,
    motion1: &Arc<ReferenceMotion>,
    motion2: &Arc<ReferenceMotion>,
    bundle1: &PolicyBundle,
    bundle2: &PolicyBundle,
    mode: InterpolationMode,
    opts: &BipedEnvOptions,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeSummary, ProtocolError> {
    if bundle1.policy.actor.dims() != bundle2.policy.actor.dims() {
        return Err(ProtocolError::TopologyMismatch(
            bundle1.policy.actor.dims(),
            bundle2.policy.actor.dims(),
        ));
    }
    let check = blend(motion1, motion2, 0.5, 0.0)
        .map_err(|e| ProtocolError::IncompatibleMotions(e.to_string()))?;
    let _ = check;
    let v1 = motion1.nominal_speed();
    let v2 = motion2.nominal_speed();
    let substeps = (opts.control_dt / opts.sim_dt).round() as usize;

    // Reference-state initialization from the blended motion at λ(0),
    // mixing the stored frames directly so the λ = 1 and λ = 0 endpoints
    // start bit-identically to a plain evaluation episode.
    let index = rng.gen_range(0..motion1.distinct_frames());
    let ref_offset = index as f64 * motion1.frame_dt();
    let lambda0 = mode.lambda(0.0, v1 * 1.0, v1, v2);
    let (f1, f2) = (motion1.frames()[index], motion2.frames()[index]);
    let mut frame0 = f1;
    for i in 0..frame0.pose.len() {
        frame0.pose[i] = lambda0 * f1.pose[i] + (1.0 - lambda0) * f2.pose[i];
        frame0.vel[i] = lambda0 * f1.vel[i] + (1.0 - lambda0) * f2.vel[i];
    }
    let mut q = DVector::from_row_slice(&frame0.pose);
    let v = DVector::from_row_slice(&frame0.vel);
    q[Q_PELVIS_Z] += opts.terrain.height(q[Q_PELVIS_X]);
    let mut state = SimState::new(q, v, 0.0).map_err(EnvError::from)?;
    let mut buffer = DelayBuffer::new(opts.delay_buffer_s);
    buffer.push(-opts.delay_buffer_s, state.clone()).map_err(EnvError::from)?;
    buffer.push(0.0, state.clone()).map_err(EnvError::from)?;

    let mut total_reward = 0.0;
    let mut steps = 0;
    let mut cause = DoneCause::TimeLimit;
    for _ in 0..horizon {
        let t = state.t_sim;
        let lambda = mode.lambda(t, state.v[Q_PELVIS_X], v1, v2);
        let ref_t = ref_offset + t;

        // Each policy sees its own reference concatenated to the shared
        // (delayed) robot state.
        let mean = |bundle: &PolicyBundle, motion: &ReferenceMotion| -> Result<DVector<f64>, ProtocolError> {
            let frame = motion.sample(ref_t);
            let obs = control::observe(&buffer, t, opts.delay, &frame).map_err(EnvError::from)?;
            let normalized = bundle
                .normalizer
                .normalize(&obs.values)
                .expect("normalizer dimension matches observations");
            Ok(bundle.policy.mean(&normalized).expect("actor dimension"))
        };
        let mu1 = mean(bundle1, motion1)?;
        let mu2 = mean(bundle2, motion2)?;
        let mixed = &mu1 * lambda + &mu2 * (1.0 - lambda);

        let blended = blend(motion1, motion2, lambda, ref_t)
            .map_err(|e| ProtocolError::IncompatibleMotions(e.to_string()))?;
        let mut delta = [0.0; N_ACTIVE];
        for i in 0..N_ACTIVE {
            delta[i] = mixed[i].clamp(-1.0, 1.0);
        }
        let targets = control::compose_action(&delta, &blended, opts.delta_scale);
        crate::env::pd_control_period(
            model,
            &mut state,
            &mut buffer,
            &targets,
            &opts.gains,
            &opts.terrain,
            &opts.pushes,
            opts.delay,
            opts.sim_dt,
            substeps,
        )?;
        steps += 1;

        let ref_next = blend(motion1, motion2, mode.lambda(state.t_sim, state.v[Q_PELVIS_X], v1, v2), ref_offset + state.t_sim)
            .map_err(|e| ProtocolError::IncompatibleMotions(e.to_string()))?;
        let reward = imitation_reward(&state, &ref_next, &opts.reward_weights, &opts.reward_scales);
        total_reward += reward;
        let height = state.q[Q_PELVIS_Z] - opts.terrain.height(state.q[Q_PELVIS_X]);
        if height < opts.height_bounds.0 || height > opts.height_bounds.1 {
            cause = DoneCause::from(EnvFailure::Fell);
            break;
        }
        if reward < opts.reward_threshold {
            cause = DoneCause::from(EnvFailure::LowReward);
            break;
        }
    }
    Ok(EpisodeSummary {
        episode: 0,
        survived: cause == DoneCause::TimeLimit,
        steps,
        total_reward,
        cause,
    })
}
