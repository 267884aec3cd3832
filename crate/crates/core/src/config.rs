//! Flat key=value configuration covering every tunable constant: robot
//! model, contact, gait, control, reward, training, and test protocols.
//!
//! Files are plain text: one `key = value` per line, `#` starts a comment,
//! unknown keys are errors. The digest hashes the canonical (sorted,
//! fully-expanded) rendering, so two files that mean the same thing share a
//! digest regardless of key order or omitted defaults.

use crate::control::PDGains;
use crate::env::BipedEnvOptions;
use crate::ppo::TrainConfig;
use crate::reference::{
    generate_gait_with, load_csv, GaitParams, LegGeometry, ReferenceIoError, ReferenceMotion,
};
use crate::reward::{RewardScales, RewardWeights};
use crate::sim::{BipedParams, ContactParams, ModelError, RobotModel, Terrain};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?}: cannot parse {value:?} as {expected}")]
    BadValue { line: usize, key: String, value: String, expected: &'static str },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("invalid reward weights: {0}")]
    Weights(String),
    #[error("invalid gains: {0}")]
    Gains(String),
    #[error("reference motion: {0}")]
    Reference(String),
    #[error(transparent)]
    ReferenceIo(#[from] ReferenceIoError),
    #[error("invalid terrain: {0}")]
    Terrain(String),
}

macro_rules! config_keys {
    ($(($field:ident, $key:literal, $ty:ty, $default:expr, $doc:literal)),+ $(,)?) => {
        /// Every tunable constant of the stack, flat. See each field's key
        /// string for the config-file spelling.
        #[derive(Debug, Clone, PartialEq)]
        pub struct Config {
            $(#[doc = $doc] pub $field: $ty),+
        }

        impl Default for Config {
            fn default() -> Self {
                Self { $($field: $default),+ }
            }
        }

        impl Config {
            /// Apply one `key = value` assignment.
            fn assign(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
                match key {
                    $($key => {
                        self.$field = value.parse::<$ty>().map_err(|_| ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: stringify!($ty),
                        })?;
                    })+
                    _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
                }
                Ok(())
            }

            /// Canonical rendering: every key, sorted, one per line.
            pub fn to_canonical_string(&self) -> String {
                let mut pairs: Vec<(String, String)> = vec![
                    $(($key.to_string(), self.$field.to_string())),+
                ];
                pairs.sort();
                let mut out = String::new();
                for (k, v) in pairs {
                    out.push_str(&k);
                    out.push_str(" = ");
                    out.push_str(&v);
                    out.push('\n');
                }
                out
            }

            /// All keys with their documentation, for `--help`-style output.
            pub fn key_docs() -> Vec<(&'static str, &'static str)> {
                vec![$(($key, $doc)),+]
            }
        }
    };
}

config_keys![
    // Simulation rates and gravity.
    (sim_dt_train, "sim.dt_train", f64, 0.001, "Physics step during training (s); 1 kHz."),
    (sim_dt_test, "sim.dt_test", f64, 0.0005, "Physics step during evaluation and tests (s); 2 kHz."),
    (gravity, "sim.gravity", f64, 9.81, "Gravitational acceleration (m/s^2)."),
    // Robot model. These defaults are plausible values at roughly Cassie
    // scale, not measurements of any hardware.
    (torso_mass, "model.torso_mass", f64, 18.0, "Torso mass (kg)."),
    (torso_inertia, "model.torso_inertia", f64, 0.5, "Torso rotational inertia about its COM (kg m^2)."),
    (torso_com_height, "model.torso_com_height", f64, 0.1, "Torso COM height above the pelvis origin (m)."),
    (thigh_length, "model.thigh_length", f64, 0.5, "Thigh length (m)."),
    (thigh_mass, "model.thigh_mass", f64, 3.5, "Thigh mass (kg)."),
    (thigh_inertia, "model.thigh_inertia", f64, 0.073, "Thigh rotational inertia (kg m^2)."),
    (shin_upper_length, "model.shin_upper_length", f64, 0.25, "Upper shin segment length (m)."),
    (shin_upper_mass, "model.shin_upper_mass", f64, 1.8, "Upper shin segment mass (kg)."),
    (shin_upper_inertia, "model.shin_upper_inertia", f64, 0.0094, "Upper shin rotational inertia (kg m^2)."),
    (shin_lower_length, "model.shin_lower_length", f64, 0.20, "Lower shin segment length (m)."),
    (shin_lower_mass, "model.shin_lower_mass", f64, 0.8, "Lower shin segment mass (kg)."),
    (shin_lower_inertia, "model.shin_lower_inertia", f64, 0.0027, "Lower shin rotational inertia (kg m^2)."),
    (foot_mass, "model.foot_mass", f64, 0.9, "Foot mass (kg)."),
    (foot_inertia, "model.foot_inertia", f64, 0.003, "Foot rotational inertia (kg m^2)."),
    (foot_heel_x, "model.foot_heel_x", f64, -0.06, "Heel x offset from the ankle (m)."),
    (foot_toe_x, "model.foot_toe_x", f64, 0.13, "Toe x offset from the ankle (m)."),
    (sole_drop, "model.sole_drop", f64, 0.05, "Sole depth below the ankle joint (m)."),
    (torque_limit_hip, "model.torque_limit_hip", f64, 100.0, "Hip torque limit (N m)."),
    (torque_limit_knee, "model.torque_limit_knee", f64, 100.0, "Knee torque limit (N m)."),
    (torque_limit_ankle, "model.torque_limit_ankle", f64, 50.0, "Ankle torque limit (N m)."),
    (spring_stiffness, "model.spring_stiffness", f64, 1500.0, "Shin spring stiffness (N m/rad)."),
    (spring_damping, "model.spring_damping", f64, 10.0, "Shin spring damping (N m s/rad)."),
    (joint_limit_stiffness, "model.joint_limit_stiffness", f64, 300.0, "Soft joint-range penalty stiffness (N m/rad)."),
    (joint_limit_damping, "model.joint_limit_damping", f64, 2.0, "Soft joint-range penalty damping (N m s/rad)."),
    (hip_range_lo, "model.hip_range_lo", f64, -1.4, "Hip soft range lower bound (rad)."),
    (hip_range_hi, "model.hip_range_hi", f64, 1.4, "Hip soft range upper bound (rad)."),
    (knee_range_lo, "model.knee_range_lo", f64, -2.4, "Knee soft range lower bound (rad)."),
    (knee_range_hi, "model.knee_range_hi", f64, 0.1, "Knee soft range upper bound (rad)."),
    (ankle_range_lo, "model.ankle_range_lo", f64, -1.4, "Ankle soft range lower bound (rad)."),
    (ankle_range_hi, "model.ankle_range_hi", f64, 1.4, "Ankle soft range upper bound (rad)."),
    (spring_range_lo, "model.spring_range_lo", f64, -0.4, "Shin spring soft range lower bound (rad)."),
    (spring_range_hi, "model.spring_range_hi", f64, 0.4, "Shin spring soft range upper bound (rad)."),
    (nominal_pelvis_height, "model.nominal_pelvis_height", f64, 1.0, "Standing pelvis height (m)."),
    // Penalty contact.
    (contact_k_normal, "contact.k_normal", f64, 1e5, "Normal penalty stiffness (N/m)."),
    (contact_d_normal, "contact.d_normal", f64, 1e3, "Normal penalty damping (N s/m)."),
    (contact_mu, "contact.mu", f64, 1.0, "Coulomb friction coefficient."),
    (contact_d_tangent, "contact.d_tangent", f64, 1e3, "Viscous tangential coefficient (N s/m)."),
    // Reference gait.
    (gait_stride_length, "gait.stride_length", f64, 0.5, "Pelvis advance per two-step stride (m)."),
    (gait_stride_period, "gait.stride_period", f64, 0.7, "Stride duration (s)."),
    (gait_step_height, "gait.step_height", f64, 0.15, "Peak swing-foot clearance (m)."),
    (gait_pelvis_height, "gait.pelvis_height", f64, 0.95, "Pelvis height held by the gait (m)."),
    (gait_frame_dt, "gait.frame_dt", f64, 0.032, "Requested reference frame interval (s)."),
    (gait_reference_csv, "gait.reference_csv", String, String::new(), "Optional CSV file to load the reference motion from instead of generating it."),
    (gait_speed_scale, "gait.speed_scale", f64, 1.0, "Retiming factor applied to the reference pelvis x (1 = unchanged)."),
    // Low-level control.
    (control_dt, "control.dt", f64, 0.032, "Policy query period (s); 31.25 Hz."),
    (pd_p_gain, "control.p_gain", f64, 400.0, "PD proportional gain per joint (N m/rad)."),
    (pd_d_gain, "control.d_gain", f64, 8.0, "PD derivative gain per joint (N m s/rad)."),
    (delta_scale, "control.delta_scale", f64, 1.0, "Scale of the policy delta added to reference angles (rad)."),
    (sensor_delay, "control.delay", f64, 0.0, "Sensor delay applied to policy observations and PD measurements (s)."),
    (delay_buffer_s, "control.delay_buffer", f64, 0.05, "Delay buffer capacity (s); must cover control.delay."),
    // Imitation reward.
    (reward_w_joint, "reward.w_joint", f64, 0.5, "Weight of the active-joint term."),
    (reward_w_pelvis_position, "reward.w_pelvis_position", f64, 0.3, "Weight of the pelvis position term."),
    (reward_w_pelvis_orientation, "reward.w_pelvis_orientation", f64, 0.1, "Weight of the pelvis orientation term."),
    (reward_w_spring, "reward.w_spring", f64, 0.1, "Weight of the spring stabilization term."),
    (reward_scale_joint, "reward.scale_joint", f64, 1.0, "Scale on the squared joint error."),
    (reward_scale_pelvis_position, "reward.scale_pelvis_position", f64, 1.0, "Scale on the squared pelvis position error."),
    (reward_scale_pelvis_orientation, "reward.scale_pelvis_orientation", f64, 1.0, "Scale on the squared pelvis orientation error."),
    (reward_scale_spring, "reward.scale_spring", f64, 1.0, "Scale on the squared spring deflection error."),
    (reward_spring_term_enabled, "reward.spring_term_enabled", bool, true, "Compare spring deflections against the reference (true) or pin the term to 1 (false)."),
    // Training.
    (gamma, "ppo.gamma", f64, 0.98, "Discount factor."),
    (clip_epsilon, "ppo.clip_epsilon", f64, 0.2, "Surrogate clip range."),
    (horizon, "ppo.horizon", usize, 300, "Maximum episode length in control steps (T)."),
    (samples_per_iter, "ppo.samples_per_iter", usize, 3000, "Transition cap per iteration."),
    (batch_size, "ppo.batch_size", usize, 128, "Minibatch size."),
    (updates_per_iter, "ppo.updates_per_iter", usize, 64, "Minibatch updates per iteration."),
    (actor_lr_init, "ppo.actor_lr_init", f64, 1e-3, "Initial actor step size."),
    (actor_lr_floor, "ppo.actor_lr_floor", f64, 1e-4, "Actor step-size floor."),
    (critic_lr_init, "ppo.critic_lr_init", f64, 1e-2, "Initial critic step size."),
    (critic_lr_floor, "ppo.critic_lr_floor", f64, 1e-3, "Critic step-size floor."),
    (lr_decay, "ppo.lr_decay", f64, 0.99, "Multiplicative step-size decay per iteration."),
    (exploration_variance, "ppo.exploration_variance", f64, 0.018, "Diagonal variance of the Gaussian policy."),
    (reward_threshold, "ppo.reward_threshold", f64, 0.6, "Early termination when the step reward drops below this."),
    (height_min, "ppo.height_min", f64, 0.6, "Early termination when pelvis height above ground drops below this (m)."),
    (height_max, "ppo.height_max", f64, 1.2, "Early termination when pelvis height above ground exceeds this (m)."),
    (standardize_advantages, "ppo.standardize_advantages", bool, true, "Standardize advantages per batch."),
    (normalizer_samples, "ppo.normalizer_samples", usize, 50_000, "States collected with the random policy to fit input normalization."),
    (normalizer_floor, "ppo.normalizer_floor", f64, 1e-6, "Standard deviation floor for the input normalizer."),
    (iterations, "ppo.iterations", usize, 300, "Training iterations."),
    (checkpoint_every, "ppo.checkpoint_every", usize, 50, "Checkpoint period in iterations (0 = only initial and final)."),
    (hidden_dim, "ppo.hidden_dim", usize, 256, "Hidden layer width of actor and critic."),
    // Robustness-test protocols.
    (protocol_episodes, "protocol.episodes", usize, 10, "Episodes per sweep point."),
    (push_start, "protocol.push_start", f64, 2.0, "Push window start (s of simulation time)."),
    (push_duration, "protocol.push_duration", f64, 0.2, "Push window length (s)."),
    (push_random_phase, "protocol.push_random_phase", bool, false, "Randomize the push start time per episode."),
    (recovery_window, "protocol.recovery_window", f64, 5.0, "Survival window after push end that counts as recovery (s)."),
    (terrain_height, "protocol.terrain_height", f64, 0.0, "Center-to-peak sinusoidal terrain height for plain eval (m)."),
    // Policy interpolation.
    (interp_rate, "interp.rate", f64, 0.625, "Schedule slope: lambda(t) = max(0, 1 - rate*t)."),
    // TVLQR baseline.
    (tvlqr_delta, "tvlqr.delta", f64, 1e-5, "Finite-difference perturbation for linearization."),
    (tvlqr_horizon, "tvlqr.horizon", usize, 100, "Gain horizon in control steps."),
    (tvlqr_q, "tvlqr.q", f64, 1.0, "State cost weight (Q = q I)."),
    (tvlqr_r, "tvlqr.r", f64, 0.1, "Input cost weight (R = r I)."),
    (tvlqr_q_terminal, "tvlqr.q_terminal", f64, 1.0, "Terminal cost weight (Q_T = q_terminal I)."),
    // Run identity.
    (seed, "run.seed", u64, 0, "Master seed for all derived random streams."),
    (workers, "run.workers", usize, 1, "Parallel rollout workers (1 = fully serial)."),
];

impl Config {
    /// Parse overrides on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Malformed { line, text: raw.to_string() });
            };
            config.assign(key.trim(), value.trim(), line)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Hex digest of the canonical rendering; stable under key reordering
    /// and explicit restatement of defaults.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_canonical_string().as_bytes());
        let bytes = hasher.finalize();
        bytes.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn biped_params(&self) -> BipedParams {
        BipedParams {
            torso_mass: self.torso_mass,
            torso_inertia: self.torso_inertia,
            torso_com_height: self.torso_com_height,
            thigh_length: self.thigh_length,
            thigh_mass: self.thigh_mass,
            thigh_inertia: self.thigh_inertia,
            shin_upper_length: self.shin_upper_length,
            shin_upper_mass: self.shin_upper_mass,
            shin_upper_inertia: self.shin_upper_inertia,
            shin_lower_length: self.shin_lower_length,
            shin_lower_mass: self.shin_lower_mass,
            shin_lower_inertia: self.shin_lower_inertia,
            foot_mass: self.foot_mass,
            foot_inertia: self.foot_inertia,
            foot_heel_x: self.foot_heel_x,
            foot_toe_x: self.foot_toe_x,
            sole_drop: self.sole_drop,
            torque_limit_hip: self.torque_limit_hip,
            torque_limit_knee: self.torque_limit_knee,
            torque_limit_ankle: self.torque_limit_ankle,
            spring_stiffness: self.spring_stiffness,
            spring_damping: self.spring_damping,
            joint_limit_stiffness: self.joint_limit_stiffness,
            joint_limit_damping: self.joint_limit_damping,
            hip_range: (self.hip_range_lo, self.hip_range_hi),
            knee_range: (self.knee_range_lo, self.knee_range_hi),
            ankle_range: (self.ankle_range_lo, self.ankle_range_hi),
            spring_range: (self.spring_range_lo, self.spring_range_hi),
            nominal_pelvis_height: self.nominal_pelvis_height,
            gravity: self.gravity,
        }
    }

    pub fn contact_params(&self) -> ContactParams {
        ContactParams {
            k_normal: self.contact_k_normal,
            d_normal: self.contact_d_normal,
            mu: self.contact_mu,
            d_tangent: self.contact_d_tangent,
        }
    }

    pub fn robot_model(&self) -> Result<RobotModel, ConfigError> {
        Ok(RobotModel::new(self.biped_params(), self.contact_params())?)
    }

    /// The training/evaluation reference motion: loaded from CSV when
    /// configured, generated otherwise, then retimed by `gait.speed_scale`.
    pub fn reference_motion(&self) -> Result<ReferenceMotion, ConfigError> {
        let base = if self.gait_reference_csv.is_empty() {
            let geom = LegGeometry::from_params(&self.biped_params());
            let params = GaitParams {
                stride_length: self.gait_stride_length,
                stride_period: self.gait_stride_period,
                step_height: self.gait_step_height,
                pelvis_height: self.gait_pelvis_height,
                nominal_frame_dt: self.gait_frame_dt,
            };
            generate_gait_with(&geom, &params).map_err(|e| ConfigError::Reference(e.to_string()))?
        } else {
            load_csv(Path::new(&self.gait_reference_csv))?
        };
        if self.gait_speed_scale == 1.0 {
            Ok(base)
        } else {
            Ok(base.retime(self.gait_speed_scale))
        }
    }

    pub fn reward_weights(&self) -> Result<RewardWeights, ConfigError> {
        RewardWeights::new(
            self.reward_w_joint,
            self.reward_w_pelvis_position,
            self.reward_w_pelvis_orientation,
            self.reward_w_spring,
        )
        .map_err(|e| ConfigError::Weights(e.to_string()))
    }

    pub fn reward_scales(&self) -> RewardScales {
        RewardScales {
            joint: self.reward_scale_joint,
            pelvis_position: self.reward_scale_pelvis_position,
            pelvis_orientation: self.reward_scale_pelvis_orientation,
            spring: self.reward_scale_spring,
            spring_term_enabled: self.reward_spring_term_enabled,
        }
    }

    pub fn terrain(&self) -> Result<Terrain, ConfigError> {
        Terrain::sinusoidal(self.terrain_height).map_err(|e| ConfigError::Terrain(e.to_string()))
    }

    /// Environment options at the given physics rate (`test_rate` selects
    /// `sim.dt_test`, otherwise `sim.dt_train`).
    pub fn env_options(&self, test_rate: bool) -> Result<BipedEnvOptions, ConfigError> {
        Ok(BipedEnvOptions {
            terrain: self.terrain()?,
            pushes: Vec::new(),
            gains: PDGains::uniform(self.pd_p_gain, self.pd_d_gain)
                .map_err(|e| ConfigError::Gains(e.to_string()))?,
            delta_scale: self.delta_scale,
            delay: self.sensor_delay,
            delay_buffer_s: self.delay_buffer_s,
            control_dt: self.control_dt,
            sim_dt: if test_rate { self.sim_dt_test } else { self.sim_dt_train },
            reward_weights: self.reward_weights()?,
            reward_scales: self.reward_scales(),
            height_bounds: (self.height_min, self.height_max),
            reward_threshold: self.reward_threshold,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma,
            clip_epsilon: self.clip_epsilon,
            horizon: self.horizon,
            samples_per_iter: self.samples_per_iter,
            batch_size: self.batch_size,
            updates_per_iter: self.updates_per_iter,
            actor_lr_init: self.actor_lr_init,
            actor_lr_floor: self.actor_lr_floor,
            critic_lr_init: self.critic_lr_init,
            critic_lr_floor: self.critic_lr_floor,
            lr_decay: self.lr_decay,
            exploration_variance: self.exploration_variance,
            standardize_advantages: self.standardize_advantages,
            normalizer_samples: self.normalizer_samples,
            normalizer_floor: self.normalizer_floor,
            iterations: self.iterations,
            checkpoint_every: self.checkpoint_every,
            workers: self.workers,
            seed: self.seed,
            hidden_dim: self.hidden_dim,
        }
    }
}
