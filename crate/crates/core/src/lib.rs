//! Walking controllers for a planar biped, learned by imitating a reference
//! gait with PPO.
//!
//! The crate is organized around a small number of subsystems:
//!
//! * [`sim`] — planar articulated rigid-body dynamics with penalty ground
//!   contact, terrain, torque limits, and external pushes.
//! * [`reference`] — cyclic reference motions: a scripted kinematic gait
//!   generator, sampling with cyclic extension, retiming, and blending.
//! * [`control`] — PD torque control, policy action composition, observation
//!   assembly, and the sensory delay buffer.
//! * [`nn`] — fully-connected networks with exact gradients, the Gaussian
//!   exploration policy, input normalization, Adam, and checkpointing.
//! * [`reward`] — the imitation reward.
//! * [`ppo`] — rollouts, value targets, advantages, the clipped surrogate,
//!   and the training loop.
//! * [`tvlqr`] — finite-difference linearization and the time-varying LQR
//!   tracking baseline.
//! * [`protocol`] — evaluation and robustness-test protocols (delay, terrain,
//!   push, policy interpolation) and their reports.
//! * [`config`] — flat key=value configuration with a stable digest.

pub mod config;
pub mod control;
pub mod env;
pub mod nn;
pub mod ppo;
pub mod protocol;
pub mod reference;
pub mod reward;
pub mod sim;
pub mod tvlqr;

pub use config::Config;
pub use control::{DelayBuffer, Observation, PDGains};
pub use env::{BipedEnv, Env};
pub use nn::{AdamState, GaussianPolicy, Mlp, Normalizer};
pub use ppo::{TrainConfig, Trainer, Trajectory, Transition};
pub use reference::{ReferenceFrame, ReferenceMotion};
pub use reward::RewardWeights;
pub use sim::{PushEvent, RobotModel, SimState, Terrain};
