//! Scripted kinematic gait generator: a two-step cyclic stride built from a
//! constant-speed pelvis, alternating smooth swing-foot arcs, and closed-form
//! two-link inverse kinematics. The output is kinematically consistent but
//! makes no claim of dynamic feasibility.

use super::{MotionError, ReferenceFrame, ReferenceMotion};
use crate::sim::{BipedParams, ACTIVE_Q, NQ, Q_PELVIS_X, Q_PELVIS_Z};
use std::f64::consts::PI;
use thiserror::Error;

/// Leg segment lengths used by the inverse kinematics.
#[derive(Debug, Clone, Copy)]
pub struct LegGeometry {
    /// Hip-to-knee length (m).
    pub thigh: f64,
    /// Knee-to-ankle length with the shin spring at zero deflection (m).
    pub shin: f64,
    /// Sole depth below the ankle joint (m).
    pub sole_drop: f64,
}

impl LegGeometry {
    pub fn from_params(p: &BipedParams) -> Self {
        let (thigh, shin) = p.leg_lengths();
        Self { thigh, shin, sole_drop: p.sole_drop }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GaitParams {
    /// Pelvis x advance per stride (two steps), m.
    pub stride_length: f64,
    /// Stride duration, s.
    pub stride_period: f64,
    /// Peak swing-foot clearance above ground, m.
    pub step_height: f64,
    /// Constant pelvis height during the gait, m.
    pub pelvis_height: f64,
    /// Requested frame interval; the actual interval divides the stride
    /// period evenly and is as close to this as possible.
    pub nominal_frame_dt: f64,
}

impl GaitParams {
    pub fn new(stride_length: f64, stride_period: f64, step_height: f64) -> Self {
        Self {
            stride_length,
            stride_period,
            step_height,
            pelvis_height: 0.95,
            nominal_frame_dt: 0.032,
        }
    }
}

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("invalid gait parameter: {0}")]
    BadParams(String),
    #[error(
        "foot target ({x:.3}, {z:.3}) m from the hip is out of reach for leg lengths {thigh:.3} + {shin:.3} m"
    )]
    Unreachable { x: f64, z: f64, thigh: f64, shin: f64 },
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Generate the default stride for the default biped geometry.
pub fn generate_gait(
    stride_length: f64,
    stride_period: f64,
    step_height: f64,
) -> Result<ReferenceMotion, GaitError> {
    let geom = LegGeometry::from_params(&BipedParams::default());
    generate_gait_with(&geom, &GaitParams::new(stride_length, stride_period, step_height))
}

/// Generate a stride for explicit geometry and gait parameters.
pub fn generate_gait_with(
    geom: &LegGeometry,
    params: &GaitParams,
) -> Result<ReferenceMotion, GaitError> {
    if !(params.stride_period > 0.0) {
        return Err(GaitError::BadParams(format!("stride_period = {}", params.stride_period)));
    }
    if !(params.stride_length >= 0.0) {
        return Err(GaitError::BadParams(format!("stride_length = {}", params.stride_length)));
    }
    if !(params.step_height > 0.0) {
        return Err(GaitError::BadParams(format!("step_height = {}", params.step_height)));
    }
    if !(params.nominal_frame_dt > 0.0) {
        return Err(GaitError::BadParams(format!("nominal_frame_dt = {}", params.nominal_frame_dt)));
    }

    let n_intervals = ((params.stride_period / params.nominal_frame_dt).round() as usize).max(2);
    let frame_dt = params.stride_period / n_intervals as f64;

    let mut frames = Vec::with_capacity(n_intervals + 1);
    let delta = 1e-5;
    for i in 0..n_intervals {
        let t = i as f64 * frame_dt;
        let pose = stride_pose(geom, params, t)?;
        let before = stride_pose(geom, params, t - delta)?;
        let after = stride_pose(geom, params, t + delta)?;
        let mut vel = [0.0; NQ];
        for k in 0..NQ {
            vel[k] = (after[k] - before[k]) / (2.0 * delta);
        }
        frames.push(ReferenceFrame { pose, vel });
    }
    // Close the cycle with an exact copy of the first frame, pelvis advanced
    // by the stride length, so the cyclic-consistency invariant holds
    // bit-exactly.
    let mut closing = frames[0];
    closing.pose[Q_PELVIS_X] += params.stride_length;
    frames.push(closing);

    Ok(ReferenceMotion::new(frames, frame_dt)?)
}

/// Continuous stride pose at any time (periodic, with pelvis x unwrapped).
fn stride_pose(geom: &LegGeometry, params: &GaitParams, t: f64) -> Result<[f64; NQ], GaitError> {
    let p = params.stride_period;
    let s = params.stride_length;
    let cycles = (t / p).floor();
    let tau = t - cycles * p;
    let phase = (tau / p).clamp(0.0, 1.0);

    let pelvis_x = s * phase + cycles * s;
    // Left foot: stance over the first half stride, then swing. Right foot
    // mirrors with a half-stride offset.
    let (left_x, left_sole) = foot_track(phase, s, params.step_height, true);
    let (right_x, right_sole) = foot_track(phase, s, params.step_height, false);

    let mut pose = [0.0; NQ];
    pose[Q_PELVIS_X] = pelvis_x;
    pose[Q_PELVIS_Z] = params.pelvis_height;
    let left = leg_ik(geom, left_x + cycles * s - pelvis_x, left_sole + geom.sole_drop - params.pelvis_height)?;
    let right = leg_ik(geom, right_x + cycles * s - pelvis_x, right_sole + geom.sole_drop - params.pelvis_height)?;
    pose[ACTIVE_Q[0]] = left.0;
    pose[ACTIVE_Q[1]] = left.1;
    pose[ACTIVE_Q[2]] = left.2;
    pose[ACTIVE_Q[3]] = right.0;
    pose[ACTIVE_Q[4]] = right.1;
    pose[ACTIVE_Q[5]] = right.2;
    // Passive spring deflections are zero in the reference.
    Ok(pose)
}

/// World x of the ankle and sole height for one foot at the given phase of
/// one stride (cycle offset excluded).
fn foot_track(phase: f64, stride: f64, step_height: f64, left: bool) -> (f64, f64) {
    // Smooth swing progress with zero slope at both ends, so foot velocity
    // is continuous at liftoff and touchdown.
    let sigma = |u: f64| u - (2.0 * PI * u).sin() / (2.0 * PI);
    let lift = |u: f64| step_height * (PI * u).sin().powi(2);
    if left {
        if phase < 0.5 {
            (stride / 4.0, 0.0)
        } else {
            let u = 2.0 * (phase - 0.5);
            (stride / 4.0 + stride * sigma(u), lift(u))
        }
    } else if phase < 0.5 {
        let u = 2.0 * phase;
        (-stride / 4.0 + stride * sigma(u), lift(u))
    } else {
        (3.0 * stride / 4.0, 0.0)
    }
}

/// Two-link inverse kinematics for a hip at the origin: returns (hip, knee,
/// ankle) joint angles for an ankle target (dx, dz), knee bending backward,
/// foot kept level.
fn leg_ik(geom: &LegGeometry, dx: f64, dz: f64) -> Result<(f64, f64, f64), GaitError> {
    let (l1, l2) = (geom.thigh, geom.shin);
    let d2 = dx * dx + dz * dz;
    let d = d2.sqrt();
    if d > l1 + l2 || d < (l1 - l2).abs() {
        return Err(GaitError::Unreachable { x: dx, z: dz, thigh: l1, shin: l2 });
    }
    let alpha = dx.atan2(-dz);
    let cos_beta = ((l1 * l1 + d2 - l2 * l2) / (2.0 * l1 * d)).clamp(-1.0, 1.0);
    let beta = cos_beta.acos();
    let cos_gamma = ((l1 * l1 + l2 * l2 - d2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let gamma = cos_gamma.acos();

    let hip = alpha + beta;
    let knee = gamma - PI; // backward-bending knee: relative angle ≤ 0
    let shin_abs = hip + knee;
    let ankle = -shin_abs; // level foot with zero spring deflection
    Ok((hip, knee, ankle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ik_reconstructs_targets() {
        let geom = LegGeometry { thigh: 0.5, shin: 0.45, sole_drop: 0.05 };
        for &(dx, dz) in &[(0.0, -0.9), (0.2, -0.8), (-0.15, -0.7), (0.3, -0.85)] {
            let (hip, knee, _) = leg_ik(&geom, dx, dz).unwrap();
            let x = geom.thigh * hip.sin() + geom.shin * (hip + knee).sin();
            let z = -geom.thigh * hip.cos() - geom.shin * (hip + knee).cos();
            assert_relative_eq!(x, dx, epsilon = 1e-12);
            assert_relative_eq!(z, dz, epsilon = 1e-12);
            assert!(knee <= 0.0, "knee must bend backward, got {knee}");
        }
    }

    #[test]
    fn ik_rejects_unreachable_targets() {
        let geom = LegGeometry { thigh: 0.5, shin: 0.45, sole_drop: 0.05 };
        assert!(matches!(leg_ik(&geom, 0.0, -1.2), Err(GaitError::Unreachable { .. })));
        assert!(matches!(leg_ik(&geom, 0.0, -0.01), Err(GaitError::Unreachable { .. })));
    }

    #[test]
    fn default_gait_has_requested_stride() {
        let m = generate_gait(0.5, 0.7, 0.1).unwrap();
        assert_relative_eq!(m.stride_length(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.stride_period(), 0.7, epsilon = 1e-12);
        // Frame interval stays close to the requested 32 ms.
        assert!((m.frame_dt() - 0.032).abs() < 0.002);
    }

    #[test]
    fn zero_stride_steps_in_place() {
        let m = generate_gait(0.0, 0.7, 0.1).unwrap();
        assert_eq!(m.stride_length(), 0.0);
        for f in m.frames() {
            assert_eq!(f.pose[Q_PELVIS_X], 0.0);
        }
    }

    #[test]
    fn cyclic_construction_invariant() {
        let m = generate_gait(0.5, 0.7, 0.1).unwrap();
        let first = m.frames()[0];
        let last = *m.frames().last().unwrap();
        assert_eq!(last.pose[Q_PELVIS_X] - first.pose[Q_PELVIS_X], 0.5);
        for i in 1..NQ {
            assert_eq!(first.pose[i], last.pose[i]);
        }
        assert_eq!(first.vel, last.vel);
    }

    #[test]
    fn unreachable_gait_surfaces_kinematics_error() {
        let geom = LegGeometry { thigh: 0.5, shin: 0.45, sole_drop: 0.05 };
        let mut params = GaitParams::new(0.5, 0.7, 0.1);
        params.pelvis_height = 1.2; // above full leg extension
        assert!(matches!(
            generate_gait_with(&geom, &params),
            Err(GaitError::Unreachable { .. })
        ));
    }

    #[test]
    fn interpolated_samples_match_dense_generator_resampling() {
        // The stored frames come from a continuous script. At the stored
        // times sampling must reproduce the script almost exactly; between
        // them the linear-interpolation error is bounded by f''·h²/8, which
        // for the fastest joint profiles on the ~32 ms grid stays below
        // a few hundredths of a radian.
        let geom = LegGeometry::from_params(&BipedParams::default());
        let params = GaitParams::new(0.5, 0.7, 0.1);
        let m = generate_gait_with(&geom, &params).unwrap();
        for i in 0..m.frames().len() {
            let t = i as f64 * m.frame_dt();
            let sampled = m.sample(t);
            let direct = stride_pose(&geom, &params, t).unwrap();
            for k in 0..NQ {
                assert!(
                    (sampled.pose[k] - direct[k]).abs() < 1e-9,
                    "node {i} coordinate {k}: {} vs {}",
                    sampled.pose[k],
                    direct[k]
                );
            }
        }
        for k in 0..200 {
            let t = k as f64 * 0.0037;
            let sampled = m.sample(t);
            let direct = stride_pose(&geom, &params, t).unwrap();
            for i in 0..NQ {
                assert!(
                    (sampled.pose[i] - direct[i]).abs() < 0.05,
                    "coordinate {i} at t={t}: {} vs {}",
                    sampled.pose[i],
                    direct[i]
                );
            }
        }
    }
}
