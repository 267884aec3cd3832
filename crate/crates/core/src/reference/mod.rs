//! Reference motions: fixed-rate cyclic strides that the policy imitates.
//!
//! A motion stores one two-step stride. Sampling extends it cyclically in
//! time while the pelvis x position keeps advancing by the stride length per
//! loop, so the extended reference moves forward indefinitely.

mod gait;
mod io;

pub use gait::{generate_gait, generate_gait_with, GaitError, GaitParams, LegGeometry};
pub use io::{load_csv, save_csv, ReferenceIoError};

use crate::sim::{ACTIVE_Q, NQ, N_ACTIVE, N_PASSIVE, PASSIVE_Q, Q_PELVIS_PITCH, Q_PELVIS_X, Q_PELVIS_Z};
use thiserror::Error;

/// One sample of the reference trajectory. `pose` and `vel` use the same
/// 11-coordinate layout as the simulator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFrame {
    pub pose: [f64; NQ],
    pub vel: [f64; NQ],
}

impl ReferenceFrame {
    pub const DIM: usize = 2 * NQ;

    pub fn zero() -> Self {
        Self { pose: [0.0; NQ], vel: [0.0; NQ] }
    }

    pub fn pelvis_x(&self) -> f64 {
        self.pose[Q_PELVIS_X]
    }

    pub fn pelvis_z(&self) -> f64 {
        self.pose[Q_PELVIS_Z]
    }

    pub fn pelvis_pitch(&self) -> f64 {
        self.pose[Q_PELVIS_PITCH]
    }

    pub fn active_angles(&self) -> [f64; N_ACTIVE] {
        ACTIVE_Q.map(|i| self.pose[i])
    }

    pub fn passive_angles(&self) -> [f64; N_PASSIVE] {
        PASSIVE_Q.map(|i| self.pose[i])
    }

    /// Flatten to the canonical 22-value layout: pose then velocities.
    pub fn to_array(&self) -> [f64; Self::DIM] {
        let mut out = [0.0; Self::DIM];
        out[..NQ].copy_from_slice(&self.pose);
        out[NQ..].copy_from_slice(&self.vel);
        out
    }

    pub fn from_array(values: &[f64; Self::DIM]) -> Self {
        let mut frame = Self::zero();
        frame.pose.copy_from_slice(&values[..NQ]);
        frame.vel.copy_from_slice(&values[NQ..]);
        frame
    }

    fn lerp(&self, other: &Self, w: f64) -> Self {
        let mut out = Self::zero();
        for i in 0..NQ {
            out.pose[i] = self.pose[i] + w * (other.pose[i] - self.pose[i]);
            out.vel[i] = self.vel[i] + w * (other.vel[i] - self.vel[i]);
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.pose.iter().chain(self.vel.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("a reference motion needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame interval must be positive, got {0}")]
    BadFrameDt(f64),
    #[error("frame {index} contains non-finite values")]
    NonFinite { index: usize },
    #[error("first and last frame differ in {coordinate} ({first} vs {last}); only pelvis x may differ")]
    NotCyclic { coordinate: &'static str, first: f64, last: f64 },
    #[error("motions are incompatible: {0}")]
    Incompatible(String),
}

/// A cyclic stride sampled at a fixed frame interval. The final stored frame
/// equals the first with the pelvis advanced by the stride length; sampling
/// repeats the stride while accumulating that advance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMotion {
    frames: Vec<ReferenceFrame>,
    frame_dt: f64,
    stride_length: f64,
    stride_period: f64,
}

impl ReferenceMotion {
    pub fn new(frames: Vec<ReferenceFrame>, frame_dt: f64) -> Result<Self, MotionError> {
        if frames.len() < 2 {
            return Err(MotionError::TooFewFrames(frames.len()));
        }
        if !(frame_dt > 0.0) {
            return Err(MotionError::BadFrameDt(frame_dt));
        }
        for (index, f) in frames.iter().enumerate() {
            if !f.is_finite() {
                return Err(MotionError::NonFinite { index });
            }
        }
        let first = frames[0];
        let last = frames[frames.len() - 1];
        for i in 0..NQ {
            if i != Q_PELVIS_X && first.pose[i] != last.pose[i] {
                return Err(MotionError::NotCyclic {
                    coordinate: crate::sim::COORD_NAMES[i],
                    first: first.pose[i],
                    last: last.pose[i],
                });
            }
            if first.vel[i] != last.vel[i] {
                return Err(MotionError::NotCyclic {
                    coordinate: crate::sim::COORD_NAMES[i],
                    first: first.vel[i],
                    last: last.vel[i],
                });
            }
        }
        let stride_length = last.pose[Q_PELVIS_X] - first.pose[Q_PELVIS_X];
        let stride_period = (frames.len() - 1) as f64 * frame_dt;
        Ok(Self { frames, frame_dt, stride_length, stride_period })
    }

    pub fn frames(&self) -> &[ReferenceFrame] {
        &self.frames
    }

    pub fn frame_dt(&self) -> f64 {
        self.frame_dt
    }

    pub fn stride_length(&self) -> f64 {
        self.stride_length
    }

    pub fn stride_period(&self) -> f64 {
        self.stride_period
    }

    /// Average pelvis speed over one stride.
    pub fn nominal_speed(&self) -> f64 {
        self.stride_length / self.stride_period
    }

    /// Number of distinct frames in one stride (excludes the duplicated
    /// closing frame).
    pub fn distinct_frames(&self) -> usize {
        self.frames.len() - 1
    }

    /// Sample the cyclically extended motion at time t ≥ 0, interpolating
    /// linearly between stored frames. Pelvis x advances by the stride
    /// length per completed loop.
    pub fn sample(&self, t: f64) -> ReferenceFrame {
        debug_assert!(t >= 0.0, "reference time must be non-negative");
        let cycles = (t / self.stride_period).floor();
        let local = t - cycles * self.stride_period;
        // Guard the edge where floating-point puts local at the period.
        let (cycles, local) = if local >= self.stride_period {
            (cycles + 1.0, local - self.stride_period)
        } else {
            (cycles, local)
        };
        let pos = local / self.frame_dt;
        let index = (pos.floor() as usize).min(self.frames.len() - 2);
        let w = pos - index as f64;
        let mut frame = if w == 0.0 {
            self.frames[index]
        } else {
            self.frames[index].lerp(&self.frames[index + 1], w)
        };
        frame.pose[Q_PELVIS_X] += cycles * self.stride_length;
        frame
    }

    /// Scale pelvis x positions and velocities by `speed_scale` about the
    /// initial x; all other coordinates and timing are unchanged. The result
    /// may be physically infeasible (feet slide), which is acceptable.
    pub fn retime(&self, speed_scale: f64) -> Self {
        assert!(speed_scale >= 0.0, "speed scale must be non-negative");
        let x0 = self.frames[0].pose[Q_PELVIS_X];
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let mut g = *f;
                g.pose[Q_PELVIS_X] = x0 + speed_scale * (f.pose[Q_PELVIS_X] - x0);
                g.vel[Q_PELVIS_X] = speed_scale * f.vel[Q_PELVIS_X];
                g
            })
            .collect();
        Self {
            frames,
            frame_dt: self.frame_dt,
            stride_length: speed_scale * self.stride_length,
            stride_period: self.stride_period,
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<(), MotionError> {
        if self.frames.len() != other.frames.len() {
            return Err(MotionError::Incompatible(format!(
                "frame counts differ: {} vs {}",
                self.frames.len(),
                other.frames.len()
            )));
        }
        let tol = 1e-12 * self.stride_period.max(other.stride_period);
        if (self.stride_period - other.stride_period).abs() > tol {
            return Err(MotionError::Incompatible(format!(
                "stride periods differ: {} vs {}",
                self.stride_period, other.stride_period
            )));
        }
        Ok(())
    }
}

/// Coordinate-wise convex combination of two motions sampled at the same
/// time: λ·m1 + (1−λ)·m2. The motions must share stride structure.
pub fn blend(
    m1: &ReferenceMotion,
    m2: &ReferenceMotion,
    lambda: f64,
    t: f64,
) -> Result<ReferenceFrame, MotionError> {
    m1.check_compatible(m2)?;
    assert!((0.0..=1.0).contains(&lambda), "lambda must lie in [0, 1]");
    let a = m1.sample(t);
    let b = m2.sample(t);
    let mut out = ReferenceFrame::zero();
    for i in 0..NQ {
        out.pose[i] = lambda * a.pose[i] + (1.0 - lambda) * b.pose[i];
        out.vel[i] = lambda * a.vel[i] + (1.0 - lambda) * b.vel[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_motion() -> ReferenceMotion {
        generate_gait(0.5, 0.7, 0.1).unwrap()
    }

    #[test]
    fn sample_at_zero_is_first_frame() {
        let m = test_motion();
        assert_eq!(m.sample(0.0), m.frames()[0]);
    }

    #[test]
    fn sample_at_period_offsets_pelvis_x_exactly() {
        let m = test_motion();
        let f0 = m.frames()[0];
        let f = m.sample(m.stride_period());
        assert_eq!(f.pose[Q_PELVIS_X], f0.pose[Q_PELVIS_X] + m.stride_length());
        for i in 1..NQ {
            assert_eq!(f.pose[i], f0.pose[i]);
            assert_eq!(f.vel[i], f0.vel[i]);
        }
    }

    #[test]
    fn cyclic_extension_periodicity() {
        let m = test_motion();
        for &t in &[0.0, 0.11, 0.3456, 0.671, 1.9] {
            let a = m.sample(t);
            let b = m.sample(t + m.stride_period());
            assert_relative_eq!(
                b.pose[Q_PELVIS_X] - a.pose[Q_PELVIS_X],
                m.stride_length(),
                epsilon = 1e-12
            );
            for i in 1..NQ {
                assert_relative_eq!(a.pose[i], b.pose[i], epsilon = 1e-12);
                assert_relative_eq!(a.vel[i], b.vel[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pelvis_x_monotone_in_time() {
        let m = test_motion();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..2000 {
            let x = m.sample(k as f64 * 0.004).pose[Q_PELVIS_X];
            assert!(x >= prev, "pelvis x regressed at sample {k}");
            prev = x;
        }
    }

    #[test]
    fn retime_identity_and_scaling() {
        let m = test_motion();
        assert_eq!(m.retime(1.0), m);
        let fast = m.retime(2.0);
        assert_relative_eq!(fast.stride_length(), 1.0, epsilon = 1e-12);
        assert_eq!(fast.stride_period(), m.stride_period());
        let frozen = m.retime(0.0);
        assert_eq!(frozen.stride_length(), 0.0);
        for f in frozen.frames() {
            assert_eq!(f.pose[Q_PELVIS_X], m.frames()[0].pose[Q_PELVIS_X]);
            assert_eq!(f.vel[Q_PELVIS_X], 0.0);
        }
    }

    #[test]
    fn blend_endpoints_exact() {
        let m1 = test_motion();
        let m2 = m1.retime(2.0);
        for &t in &[0.0, 0.2, 0.95] {
            assert_eq!(blend(&m1, &m2, 1.0, t).unwrap(), m1.sample(t));
            assert_eq!(blend(&m1, &m2, 0.0, t).unwrap(), m2.sample(t));
        }
    }

    #[test]
    fn blend_midpoint_arithmetic() {
        let m1 = test_motion();
        let m2 = m1.retime(2.0);
        // Construct a time where the two pelvis x values are known and
        // check the midpoint directly.
        let t = 0.31;
        let a = m1.sample(t).pose[Q_PELVIS_X];
        let b = m2.sample(t).pose[Q_PELVIS_X];
        let mid = blend(&m1, &m2, 0.5, t).unwrap().pose[Q_PELVIS_X];
        assert_relative_eq!(mid, 0.5 * a + 0.5 * b, epsilon = 1e-12);
    }

    #[test]
    fn blend_rejects_mismatched_motions() {
        let m1 = test_motion();
        let m2 = generate_gait(0.5, 0.9, 0.1).unwrap();
        assert!(blend(&m1, &m2, 0.5, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn retime_composes_multiplicatively(a in 0.0f64..3.0, b in 0.0f64..3.0, idx in 0usize..22) {
            let m = test_motion();
            let double = m.retime(a).retime(b);
            let direct = m.retime(a * b);
            let f1 = double.frames()[idx.min(double.frames().len() - 1)];
            let f2 = direct.frames()[idx.min(direct.frames().len() - 1)];
            for i in 0..NQ {
                prop_assert!((f1.pose[i] - f2.pose[i]).abs() <= 1e-12 * (1.0 + f2.pose[i].abs()));
                prop_assert!((f1.vel[i] - f2.vel[i]).abs() <= 1e-12 * (1.0 + f2.vel[i].abs()));
            }
        }

        #[test]
        fn blend_monotone_in_lambda(l1 in 0.0f64..1.0, l2 in 0.0f64..1.0, t in 0.0f64..2.0) {
            let m1 = test_motion();
            let m2 = m1.retime(2.0);
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let a = blend(&m1, &m2, lo, t).unwrap();
            let b = blend(&m1, &m2, hi, t).unwrap();
            let end1 = m1.sample(t);
            let end2 = m2.sample(t);
            for i in 0..NQ {
                // Between the endpoint values, moving λ toward 1 moves each
                // coordinate monotonically toward the m1 endpoint.
                let direction = end1.pose[i] - end2.pose[i];
                let delta = b.pose[i] - a.pose[i];
                prop_assert!(delta * direction >= -1e-12 * (1.0 + direction.abs()));
            }
        }
    }
}
