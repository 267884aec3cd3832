//! Low-level control plumbing: the PD torque law, composition of policy
//! deltas with reference joint angles, observation assembly, and the
//! sensory-delay buffer.
//!
//! Observations exclude the pelvis x position of both the robot and the
//! reference, so the policy is invariant to where along the track the
//! robot stands and sees a stationary (gait-periodic) input distribution;
//! along x only the velocities are observable. The reward still compares
//! absolute x against the moving reference.

use crate::reference::ReferenceFrame;
use crate::sim::{SimState, N_ACTIVE, NQ, Q_PELVIS_X};
use nalgebra::DVector;
use std::collections::VecDeque;
use thiserror::Error;

/// Observation layout: robot positions except pelvis x (10), all robot
/// velocities (11), reference positions except pelvis x (10), all
/// reference velocities (11).
pub const OBS_DIM: usize = (NQ - 1) + NQ + (NQ - 1) + NQ;

/// Per-joint proportional and derivative gains.
#[derive(Debug, Clone, Copy)]
pub struct PDGains {
    pub p: [f64; N_ACTIVE],
    pub d: [f64; N_ACTIVE],
}

impl PDGains {
    pub fn uniform(p: f64, d: f64) -> Result<Self, ControlError> {
        Self::new([p; N_ACTIVE], [d; N_ACTIVE])
    }

    pub fn new(p: [f64; N_ACTIVE], d: [f64; N_ACTIVE]) -> Result<Self, ControlError> {
        for i in 0..N_ACTIVE {
            if !(p[i] > 0.0) || !(d[i] >= 0.0) {
                return Err(ControlError::BadGains { joint: i, p: p[i], d: d[i] });
            }
        }
        Ok(Self { p, d })
    }
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("joint {joint}: P gain must be > 0 and D gain >= 0 (got P={p}, D={d})")]
    BadGains { joint: usize, p: f64, d: f64 },
    #[error("delay buffer underrun: requested state at t = {requested:.4} s but oldest snapshot is t = {oldest:.4} s")]
    DelayUnderrun { requested: f64, oldest: f64 },
    #[error("delay buffer is empty")]
    EmptyBuffer,
    #[error("snapshot timestamps must be strictly increasing: {previous} then {attempted}")]
    NonMonotonicTime { previous: f64, attempted: f64 },
}

/// PD tracking torque: τ[i] = P[i]·(target[i] − q_active[i]) − D[i]·v_active[i].
/// Clamping to the torque limits happens in the simulator.
pub fn pd_torque(gains: &PDGains, target: &[f64; N_ACTIVE], state: &SimState) -> [f64; N_ACTIVE] {
    let q = state.active_angles();
    let v = state.active_velocities();
    let mut tau = [0.0; N_ACTIVE];
    for i in 0..N_ACTIVE {
        tau[i] = gains.p[i] * (target[i] - q[i]) - gains.d[i] * v[i];
    }
    tau
}

/// PD target angles from a policy output in [−1, 1]: the reference active
/// joint angles plus a scaled delta.
pub fn compose_action(
    policy_output: &[f64; N_ACTIVE],
    ref_frame: &ReferenceFrame,
    delta_scale: f64,
) -> [f64; N_ACTIVE] {
    let reference = ref_frame.active_angles();
    let mut target = [0.0; N_ACTIVE];
    for i in 0..N_ACTIVE {
        target[i] = reference[i] + delta_scale * policy_output[i];
    }
    target
}

/// Policy input: delayed robot state (pelvis x dropped) concatenated with a
/// reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: DVector<f64>,
}

impl Observation {
    pub fn from_parts(state: &SimState, ref_frame: &ReferenceFrame) -> Self {
        let mut values = DVector::zeros(OBS_DIM);
        let mut k = 0;
        for i in 0..NQ {
            if i == Q_PELVIS_X {
                continue;
            }
            values[k] = state.q[i];
            k += 1;
        }
        for i in 0..NQ {
            values[k] = state.v[i];
            k += 1;
        }
        for i in 0..NQ {
            if i == Q_PELVIS_X {
                continue;
            }
            values[k] = ref_frame.pose[i];
            k += 1;
        }
        for i in 0..NQ {
            values[k] = ref_frame.vel[i];
            k += 1;
        }
        Self { values }
    }
}

/// Ring of timestamped state snapshots with a fixed time capacity, used to
/// serve sensor readings from a configurable delay in the past.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    snapshots: VecDeque<(f64, SimState)>,
    capacity_s: f64,
}

impl DelayBuffer {
    pub fn new(capacity_s: f64) -> Self {
        Self { snapshots: VecDeque::new(), capacity_s }
    }

    pub fn capacity_s(&self) -> f64 {
        self.capacity_s
    }

    pub fn push(&mut self, t: f64, state: SimState) -> Result<(), ControlError> {
        if let Some(&(last, _)) = self.snapshots.back() {
            if t <= last {
                return Err(ControlError::NonMonotonicTime { previous: last, attempted: t });
            }
        }
        self.snapshots.push_back((t, state));
        // Keep one snapshot older than the window so queries at exactly
        // (newest − capacity) still resolve.
        let cutoff = t - self.capacity_s;
        while self.snapshots.len() > 2 && self.snapshots[1].0 <= cutoff {
            self.snapshots.pop_front();
        }
        Ok(())
    }

    /// Newest snapshot with timestamp ≤ now − delay. A small slack absorbs
    /// the roundoff of accumulating timestamps in fixed steps.
    pub fn delayed(&self, now: f64, delay: f64) -> Result<&SimState, ControlError> {
        let target = now - delay + 1e-9;
        let mut found = None;
        for (t, state) in self.snapshots.iter().rev() {
            if *t <= target {
                found = Some(state);
                break;
            }
        }
        match found {
            Some(state) => Ok(state),
            None => match self.snapshots.front() {
                Some(&(oldest, _)) => {
                    Err(ControlError::DelayUnderrun { requested: now - delay, oldest })
                }
                None => Err(ControlError::EmptyBuffer),
            },
        }
    }

    pub fn latest(&self) -> Result<&SimState, ControlError> {
        self.snapshots.back().map(|(_, s)| s).ok_or(ControlError::EmptyBuffer)
    }
}

/// Build the policy observation from the delayed robot state and the given
/// reference frame. `delay = 0` reads the latest snapshot.
pub fn observe(
    buffer: &DelayBuffer,
    now: f64,
    delay: f64,
    ref_frame: &ReferenceFrame,
) -> Result<Observation, ControlError> {
    let state = buffer.delayed(now, delay)?;
    Ok(Observation::from_parts(state, ref_frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{RobotModel, ACTIVE_Q};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model_state() -> SimState {
        SimState::standing(&RobotModel::default_model())
    }

    #[test]
    fn pd_zero_at_target_at_rest() {
        let gains = PDGains::uniform(100.0, 5.0).unwrap();
        let state = model_state();
        let target = state.active_angles();
        assert_eq!(pd_torque(&gains, &target, &state), [0.0; N_ACTIVE]);
    }

    #[test]
    fn pd_closed_forms() {
        let mut state = model_state();
        state.q[ACTIVE_Q[0]] = 0.0;
        let gains = PDGains::uniform(10.0, 0.0).unwrap();
        let mut target = state.active_angles();
        target[0] += 0.1;
        let tau = pd_torque(&gains, &target, &state);
        assert_relative_eq!(tau[0], 1.0, epsilon = 1e-15);

        let gains = PDGains::new([1e-9; N_ACTIVE], [2.0; N_ACTIVE]).unwrap();
        let mut state = model_state();
        state.v[ACTIVE_Q[0]] = 0.5;
        let target = state.active_angles();
        let tau = pd_torque(&gains, &target, &state);
        assert_relative_eq!(tau[0], -1.0, epsilon = 1e-9);
    }

    #[test]
    fn compose_action_cases() {
        let mut frame = ReferenceFrame::zero();
        frame.pose[ACTIVE_Q[0]] = 0.2;
        let zero = [0.0; N_ACTIVE];
        assert_eq!(compose_action(&zero, &frame, 0.3), frame.active_angles());
        let mut out = [0.0; N_ACTIVE];
        out[0] = 1.0;
        assert_relative_eq!(compose_action(&out, &frame, 0.3)[0], 0.5, epsilon = 1e-15);
        out[0] = -1.0;
        assert_relative_eq!(compose_action(&out, &frame, 0.3)[0], 0.2 - 0.3, epsilon = 1e-15);
    }

    #[test]
    fn observation_drops_pelvis_x_only() {
        let frame = ReferenceFrame::zero();
        let mut a = model_state();
        let mut b = a.clone();
        b.q[Q_PELVIS_X] += 17.3;
        let oa = Observation::from_parts(&a, &frame);
        let ob = Observation::from_parts(&b, &frame);
        assert_eq!(oa, ob);
        // The reference pelvis x is dropped as well: the cyclically
        // extended reference only differs in x across strides, so the
        // observation is gait-periodic.
        let mut shifted = frame;
        shifted.pose[Q_PELVIS_X] += 4.5;
        let oc = Observation::from_parts(&a, &shifted);
        assert_eq!(oa, oc);
        // Pelvis x *velocity* stays observable.
        a.v[Q_PELVIS_X] = 1.0;
        let od = Observation::from_parts(&a, &frame);
        assert_ne!(oa, od);
        assert_eq!(oa.values.len(), OBS_DIM);
        assert_eq!(OBS_DIM, 42);
    }

    #[test]
    fn delay_buffer_returns_exact_age() {
        let mut buffer = DelayBuffer::new(0.05);
        let base = model_state();
        for k in 0..=20 {
            let mut s = base.clone();
            s.t_sim = k as f64 * 0.001;
            s.q[Q_PELVIS_X] = k as f64;
            buffer.push(s.t_sim, s).unwrap();
        }
        let now = 0.020;
        let s5 = buffer.delayed(now, 0.005).unwrap();
        assert_eq!(s5.q[Q_PELVIS_X], 15.0);
        let s10 = buffer.delayed(now, 0.010).unwrap();
        assert_eq!(s10.q[Q_PELVIS_X], 10.0);
        let s0 = buffer.delayed(now, 0.0).unwrap();
        assert_eq!(s0.q[Q_PELVIS_X], 20.0);
    }

    #[test]
    fn delay_underrun_is_an_error() {
        let mut buffer = DelayBuffer::new(0.05);
        let mut s = model_state();
        s.t_sim = 1.0;
        buffer.push(1.0, s).unwrap();
        let err = buffer.delayed(1.0, 0.5).unwrap_err();
        assert!(matches!(err, ControlError::DelayUnderrun { .. }));
        let empty = DelayBuffer::new(0.05);
        assert!(matches!(empty.delayed(0.0, 0.0), Err(ControlError::EmptyBuffer)));
    }

    #[test]
    fn delay_monotonicity() {
        let mut buffer = DelayBuffer::new(0.2);
        let base = model_state();
        for k in 0..=100 {
            let mut s = base.clone();
            s.t_sim = k as f64 * 0.001;
            s.q[Q_PELVIS_X] = k as f64;
            buffer.push(s.t_sim, s).unwrap();
        }
        let now = 0.1;
        let mut prev_stamp = f64::INFINITY;
        for k in 0..50 {
            let delay = k as f64 * 0.0013;
            let s = buffer.delayed(now, delay).unwrap();
            assert!(s.q[Q_PELVIS_X] <= prev_stamp, "newer snapshot for larger delay");
            prev_stamp = s.q[Q_PELVIS_X];
        }
    }

    proptest! {
        #[test]
        fn pd_law_is_affine(
            target in proptest::array::uniform6(-1.0f64..1.0),
            q in proptest::array::uniform6(-1.0f64..1.0),
            v in proptest::array::uniform6(-3.0f64..3.0),
        ) {
            let gains = PDGains::new([80.0, 60.0, 40.0, 80.0, 60.0, 40.0], [4.0, 3.0, 2.0, 4.0, 3.0, 2.0]).unwrap();
            let mut state = model_state();
            for i in 0..N_ACTIVE {
                state.q[ACTIVE_Q[i]] = q[i];
                state.v[ACTIVE_Q[i]] = v[i];
            }
            let tau = pd_torque(&gains, &target, &state);
            for i in 0..N_ACTIVE {
                let direct = gains.p[i] * (target[i] - q[i]) - gains.d[i] * v[i];
                prop_assert!((tau[i] - direct).abs() < 1e-12);
            }
        }
    }
}
