//! The biped imitation environment: policy deltas on reference joint angles
//! tracked by a PD loop at the physics rate, rewards against the moving
//! reference, reference-state initialization, and early termination.

use super::{Env, EnvError, EnvFailure, StepOutcome};
use crate::control::{self, DelayBuffer, Observation, PDGains};
use crate::reference::{ReferenceFrame, ReferenceMotion};
use crate::reward::{imitation_reward, RewardScales, RewardWeights};
use crate::sim::{self, PushEvent, RobotModel, SimState, Terrain, N_ACTIVE, Q_PELVIS_X, Q_PELVIS_Z};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct BipedEnvOptions {
    pub terrain: Terrain,
    pub pushes: Vec<PushEvent>,
    pub gains: PDGains,
    pub delta_scale: f64,
    /// Sensor delay applied to both the policy observation and the PD
    /// loop's measured positions and velocities.
    pub delay: f64,
    /// Time capacity of the delay buffer; must cover the delay.
    pub delay_buffer_s: f64,
    /// Policy period (s).
    pub control_dt: f64,
    /// Physics step (s); the control period must be a whole number of
    /// physics steps.
    pub sim_dt: f64,
    pub reward_weights: RewardWeights,
    pub reward_scales: RewardScales,
    /// Early termination when pelvis height above local ground leaves
    /// (min, max).
    pub height_bounds: (f64, f64),
    /// Early termination when the step reward drops below this value.
    pub reward_threshold: f64,
}

impl BipedEnvOptions {
    pub fn standard(sim_dt: f64) -> Self {
        Self {
            terrain: Terrain::Flat,
            pushes: Vec::new(),
            gains: PDGains::uniform(400.0, 8.0).expect("default gains valid"),
            delta_scale: 1.0,
            delay: 0.0,
            delay_buffer_s: 0.05,
            control_dt: 0.032,
            sim_dt,
            reward_weights: RewardWeights::default(),
            reward_scales: RewardScales::default(),
            height_bounds: (0.6, 1.2),
            reward_threshold: 0.6,
        }
    }

    fn substeps(&self) -> usize {
        let ratio = self.control_dt / self.sim_dt;
        let rounded = ratio.round();
        assert!(
            (ratio - rounded).abs() < 1e-9 && rounded >= 1.0,
            "control_dt must be a whole multiple of sim_dt (got {} / {})",
            self.control_dt,
            self.sim_dt
        );
        rounded as usize
    }
}

/// One simulation episode of the walking task. Owns its simulator state and
/// delay buffer; clone freely for parallel rollouts (the model and motion
/// are shared read-only).
#[derive(Debug, Clone)]
pub struct BipedEnv {
    model: Arc<RobotModel>,
    motion: Arc<ReferenceMotion>,
    opts: BipedEnvOptions,
    substeps: usize,
    state: SimState,
    buffer: DelayBuffer,
    /// Reference time at episode start (reference-state initialization).
    ref_offset: f64,
}

impl BipedEnv {
    pub fn new(model: Arc<RobotModel>, motion: Arc<ReferenceMotion>, opts: BipedEnvOptions) -> Self {
        assert!(
            opts.delay <= opts.delay_buffer_s,
            "delay {} exceeds buffer capacity {}",
            opts.delay,
            opts.delay_buffer_s
        );
        let substeps = opts.substeps();
        let state = SimState::standing(&model);
        let buffer = DelayBuffer::new(opts.delay_buffer_s);
        Self { model, motion, opts, substeps, state, buffer, ref_offset: 0.0 }
    }

    pub fn options(&self) -> &BipedEnvOptions {
        &self.opts
    }

    pub fn options_mut(&mut self) -> &mut BipedEnvOptions {
        &mut self.opts
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn motion(&self) -> &ReferenceMotion {
        &self.motion
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Reference time corresponding to the current simulation clock.
    pub fn reference_time(&self) -> f64 {
        self.ref_offset + self.state.t_sim
    }

    fn reference_frame(&self) -> ReferenceFrame {
        self.motion.sample(self.reference_time())
    }

    /// Place the robot exactly on a stored reference frame (positions and
    /// velocities), pelvis raised by the local terrain height.
    fn apply_reference_init(&mut self, frame_index: usize) -> Result<(), EnvError> {
        let frame = self.motion.frames()[frame_index];
        let mut q = DVector::from_row_slice(&frame.pose);
        let v = DVector::from_row_slice(&frame.vel);
        q[Q_PELVIS_Z] += self.opts.terrain.height(q[Q_PELVIS_X]);
        self.state = SimState::new(q, v, 0.0)?;
        self.ref_offset = frame_index as f64 * self.motion.frame_dt();
        self.buffer = DelayBuffer::new(self.opts.delay_buffer_s);
        // Seed the buffer with the initial pose one capacity in the past so
        // delayed reads at episode start resolve to the initial state.
        self.buffer.push(-self.opts.delay_buffer_s, self.state.clone())?;
        self.buffer.push(0.0, self.state.clone())?;
        Ok(())
    }

    fn observation(&self, frame: &ReferenceFrame) -> Result<Observation, EnvError> {
        Ok(control::observe(&self.buffer, self.state.t_sim, self.opts.delay, frame)?)
    }

    fn height_above_ground(&self) -> f64 {
        self.state.pelvis_z() - self.opts.terrain.height(self.state.pelvis_x())
    }
}

impl Env for BipedEnv {
    fn obs_dim(&self) -> usize {
        control::OBS_DIM
    }

    fn action_dim(&self) -> usize {
        N_ACTIVE
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>, EnvError> {
        let index = rng.gen_range(0..self.motion.distinct_frames());
        self.apply_reference_init(index)?;
        let frame = self.reference_frame();
        Ok(self.observation(&frame)?.values)
    }

    fn step(&mut self, action: &DVector<f64>) -> Result<StepOutcome, EnvError> {
        if action.len() != N_ACTIVE {
            return Err(EnvError::ActionShape { expected: N_ACTIVE, got: action.len() });
        }
        let frame_now = self.reference_frame();
        let mut delta = [0.0; N_ACTIVE];
        for i in 0..N_ACTIVE {
            delta[i] = action[i].clamp(-1.0, 1.0);
        }
        let targets = control::compose_action(&delta, &frame_now, self.opts.delta_scale);

        // Target angles are held for the whole control period while the PD
        // loop runs at the physics rate on (possibly delayed) measurements.
        for _ in 0..self.substeps {
            let torques = {
                let measured = self.buffer.delayed(self.state.t_sim, self.opts.delay)?;
                control::pd_torque(&self.opts.gains, &targets, measured)
            };
            self.state = sim::step(
                &self.model,
                &self.state,
                &torques,
                &self.opts.terrain,
                &self.opts.pushes,
                self.opts.sim_dt,
            )?;
            self.buffer.push(self.state.t_sim, self.state.clone())?;
        }

        let frame_next = self.reference_frame();
        let reward = imitation_reward(
            &self.state,
            &frame_next,
            &self.opts.reward_weights,
            &self.opts.reward_scales,
        );
        let height = self.height_above_ground();
        let failure = if height < self.opts.height_bounds.0 || height > self.opts.height_bounds.1 {
            Some(EnvFailure::Fell)
        } else if reward < self.opts.reward_threshold {
            Some(EnvFailure::LowReward)
        } else {
            None
        };
        let obs = self.observation(&frame_next)?.values;
        Ok(StepOutcome { obs, reward, failure })
    }

    fn control_dt(&self) -> f64 {
        self.opts.control_dt
    }
}

/// Shared inner loop for custom runners (policy interpolation): one control
/// period of PD tracking with delayed measurements.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pd_control_period(
    model: &RobotModel,
    state: &mut SimState,
    buffer: &mut DelayBuffer,
    targets: &[f64; N_ACTIVE],
    gains: &PDGains,
    terrain: &Terrain,
    pushes: &[PushEvent],
    delay: f64,
    sim_dt: f64,
    substeps: usize,
) -> Result<(), EnvError> {
    for _ in 0..substeps {
        let torques = {
            let measured = buffer.delayed(state.t_sim, delay)?;
            control::pd_torque(gains, targets, measured)
        };
        *state = sim::step(model, state, &torques, terrain, pushes, sim_dt)?;
        buffer.push(state.t_sim, state.clone())?;
    }
    Ok(())
}
