//! Planar rigid-body simulation of the biped: semi-implicit Euler stepping
//! with torque limits, shin springs, soft joint ranges, penalty ground
//! contact, terrain, and external pushes.

pub mod contact;
pub mod model;
pub mod terrain;
pub mod tree;

pub use contact::contact_force;
pub use model::{
    BipedParams, ContactParams, ModelError, RobotModel, ACTIVE_Q, COORD_NAMES, NQ, N_ACTIVE,
    N_PASSIVE, PASSIVE_Q, Q_PELVIS_PITCH, Q_PELVIS_X, Q_PELVIS_Z,
};
pub use terrain::Terrain;
pub use tree::{ExternalForce, Multibody, Vec2};

use nalgebra::DVector;
use thiserror::Error;

/// Generalized positions, velocities, and the simulation clock of the biped.
/// Layout of `q` and `v` follows [`COORD_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub t_sim: f64,
}

impl SimState {
    pub fn new(q: DVector<f64>, v: DVector<f64>, t_sim: f64) -> Result<Self, SimError> {
        if q.len() != NQ || v.len() != NQ {
            return Err(SimError::Dimension { q: q.len(), v: v.len() });
        }
        let state = Self { q, v, t_sim };
        state.check_finite()?;
        Ok(state)
    }

    /// All joints at zero, pelvis at the model's nominal height, at rest.
    pub fn standing(model: &RobotModel) -> Self {
        let mut q = DVector::zeros(NQ);
        q[Q_PELVIS_Z] = model.nominal_pelvis_height();
        Self { q, v: DVector::zeros(NQ), t_sim: 0.0 }
    }

    pub fn pelvis_x(&self) -> f64 {
        self.q[Q_PELVIS_X]
    }

    pub fn pelvis_z(&self) -> f64 {
        self.q[Q_PELVIS_Z]
    }

    pub fn pelvis_pitch(&self) -> f64 {
        self.q[Q_PELVIS_PITCH]
    }

    pub fn active_angles(&self) -> [f64; N_ACTIVE] {
        ACTIVE_Q.map(|i| self.q[i])
    }

    pub fn active_velocities(&self) -> [f64; N_ACTIVE] {
        ACTIVE_Q.map(|i| self.v[i])
    }

    pub fn passive_angles(&self) -> [f64; N_PASSIVE] {
        PASSIVE_Q.map(|i| self.q[i])
    }

    fn check_finite(&self) -> Result<(), SimError> {
        for i in 0..NQ {
            if !self.q[i].is_finite() {
                return Err(SimError::Diverged { coordinate: COORD_NAMES[i], kind: "position", t_sim: self.t_sim });
            }
            if !self.v[i].is_finite() {
                return Err(SimError::Diverged { coordinate: COORD_NAMES[i], kind: "velocity", t_sim: self.t_sim });
            }
        }
        Ok(())
    }
}

/// A planar force applied at the pelvis over a time window.
#[derive(Debug, Clone, Copy)]
pub struct PushEvent {
    pub force: Vec2,
    /// Window start (s of simulation time).
    pub start: f64,
    /// Window length (s); must be positive.
    pub duration: f64,
}

impl PushEvent {
    pub fn new(force: Vec2, start: f64, duration: f64) -> Result<Self, SimError> {
        if !(duration > 0.0) {
            return Err(SimError::BadPushDuration(duration));
        }
        Ok(Self { force, start, duration })
    }

    /// Active on the half-open window [start, start + duration).
    #[inline]
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state dimension mismatch: q has {q}, v has {v}, expected {NQ}")]
    Dimension { q: usize, v: usize },
    #[error("simulation diverged: non-finite {kind} for {coordinate} at t = {t_sim:.4} s")]
    Diverged { coordinate: &'static str, kind: &'static str, t_sim: f64 },
    #[error("push duration must be positive, got {0}")]
    BadPushDuration(f64),
    #[error("dt must be positive, got {0}")]
    BadDt(f64),
    #[error(transparent)]
    Tree(#[from] tree::TreeError),
}

/// Advance the biped by one semi-implicit Euler step.
///
/// Requested torques are clamped to the model limits; passive joints receive
/// only spring/damper torque; soft joint-range penalties apply near the
/// configured limits; contact and push forces enter as external forces.
pub fn step(
    model: &RobotModel,
    state: &SimState,
    torques: &[f64; N_ACTIVE],
    terrain: &Terrain,
    pushes: &[PushEvent],
    dt: f64,
) -> Result<SimState, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::BadDt(dt));
    }
    state.check_finite()?;

    let mut tau = DVector::zeros(NQ);
    for (i, &q_index) in ACTIVE_Q.iter().enumerate() {
        tau[q_index] = torques[i].clamp(-model.torque_limits()[i], model.torque_limits()[i]);
    }
    for s in &model.springs {
        tau[s.q_index] += -s.stiffness * state.q[s.q_index] - s.damping * state.v[s.q_index];
    }
    let p = model.params();
    for r in &model.joint_ranges {
        let q = state.q[r.q_index];
        if q < r.lo {
            tau[r.q_index] +=
                p.joint_limit_stiffness * (r.lo - q) - p.joint_limit_damping * state.v[r.q_index];
        } else if q > r.hi {
            tau[r.q_index] +=
                p.joint_limit_stiffness * (r.hi - q) - p.joint_limit_damping * state.v[r.q_index];
        }
    }

    let motion = model.tree().kinematics(&state.q, &state.v);
    let mut ext = contact::contact_external_forces(model, &motion, terrain);
    for push in pushes {
        if push.active_at(state.t_sim) {
            ext.push(ExternalForce {
                body: model.torso_body(),
                point: motion[model.torso_body()].pos,
                force: push.force,
            });
        }
    }

    let accel = model.tree().forward_dynamics(&state.q, &state.v, &tau, &ext)?;
    let v_next = &state.v + accel * dt;
    let q_next = &state.q + &v_next * dt;
    let next = SimState { q: q_next, v: v_next, t_sim: state.t_sim + dt };
    next.check_finite()?;
    Ok(next)
}
