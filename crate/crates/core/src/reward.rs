//! The imitation reward: a weighted sum of exponentiated negative squared
//! errors between the simulated state and the reference frame. Velocities
//! are never rewarded. Unlike the observation, the pelvis-position term
//! compares x against the moving reference, which is what drives forward
//! progress.

use crate::reference::ReferenceFrame;
use crate::sim::{SimState, N_ACTIVE, N_PASSIVE};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("reward weights must be non-negative and sum to 1, got {weights:?} (sum {sum})")]
pub struct RewardWeightError {
    weights: [f64; 4],
    sum: f64,
}

/// Term weights (joints, pelvis position, pelvis orientation, springs).
/// Non-negative, summing to 1, so the reward lies in [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct RewardWeights {
    pub joint: f64,
    pub pelvis_position: f64,
    pub pelvis_orientation: f64,
    pub spring: f64,
}

impl RewardWeights {
    pub fn new(joint: f64, pelvis_position: f64, pelvis_orientation: f64, spring: f64) -> Result<Self, RewardWeightError> {
        let weights = [joint, pelvis_position, pelvis_orientation, spring];
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(RewardWeightError { weights, sum });
        }
        Ok(Self { joint, pelvis_position, pelvis_orientation, spring })
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { joint: 0.5, pelvis_position: 0.3, pelvis_orientation: 0.1, spring: 0.1 }
    }
}

/// Optional per-term scales on the squared errors inside the exponentials.
/// All 1 by default; setting `spring_term_enabled = false` pins the spring
/// term to its maximum instead of comparing deflections.
#[derive(Debug, Clone, Copy)]
pub struct RewardScales {
    pub joint: f64,
    pub pelvis_position: f64,
    pub pelvis_orientation: f64,
    pub spring: f64,
    pub spring_term_enabled: bool,
}

impl Default for RewardScales {
    fn default() -> Self {
        Self {
            joint: 1.0,
            pelvis_position: 1.0,
            pelvis_orientation: 1.0,
            spring: 1.0,
            spring_term_enabled: true,
        }
    }
}

/// r = w_joint·exp(−‖Δq_active‖²) + w_rp·exp(−‖Δ(x,z)‖²)
///   + w_ro·exp(−Δpitch²) + w_spring·exp(−‖Δq_passive‖²).
pub fn imitation_reward(
    state: &SimState,
    reference: &ReferenceFrame,
    weights: &RewardWeights,
    scales: &RewardScales,
) -> f64 {
    let q = state.active_angles();
    let q_ref = reference.active_angles();
    let mut joint_err = 0.0;
    for i in 0..N_ACTIVE {
        let d = q[i] - q_ref[i];
        joint_err += d * d;
    }

    let dx = state.pelvis_x() - reference.pelvis_x();
    let dz = state.pelvis_z() - reference.pelvis_z();
    let position_err = dx * dx + dz * dz;

    let dpitch = state.pelvis_pitch() - reference.pelvis_pitch();
    let orientation_err = dpitch * dpitch;

    let spring_term = if scales.spring_term_enabled {
        let s = state.passive_angles();
        let s_ref = reference.passive_angles();
        let mut err = 0.0;
        for i in 0..N_PASSIVE {
            let d = s[i] - s_ref[i];
            err += d * d;
        }
        (-scales.spring * err).exp()
    } else {
        1.0
    };

    weights.joint * (-scales.joint * joint_err).exp()
        + weights.pelvis_position * (-scales.pelvis_position * position_err).exp()
        + weights.pelvis_orientation * (-scales.pelvis_orientation * orientation_err).exp()
        + weights.spring * spring_term
}
