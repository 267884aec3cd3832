//! The planar biped: a torso and two legs (thigh, shin, foot) with actuated
//! hips, knees, and ankles and a passive spring joint inside each shin.
//!
//! The shin is realized as two segments joined by the spring joint so the
//! spring deflection is a real degree of freedom; morphologically it is one
//! link. Together with the 3-DOF floating base (x, z, pitch) this gives 11
//! generalized coordinates in the fixed layout below.

use super::tree::{Body, JointKind, Multibody, TreeError, Vec2};
use thiserror::Error;

/// Number of generalized coordinates.
pub const NQ: usize = 11;
/// Number of actuated joints.
pub const N_ACTIVE: usize = 6;
/// Number of passive spring joints.
pub const N_PASSIVE: usize = 2;

pub const Q_PELVIS_X: usize = 0;
pub const Q_PELVIS_Z: usize = 1;
pub const Q_PELVIS_PITCH: usize = 2;
/// q indices of the actuated joints, in the canonical order
/// left hip, left knee, left ankle, right hip, right knee, right ankle.
pub const ACTIVE_Q: [usize; N_ACTIVE] = [3, 4, 5, 6, 7, 8];
/// q indices of the shin spring joints: left, right.
pub const PASSIVE_Q: [usize; N_PASSIVE] = [9, 10];

pub const COORD_NAMES: [&str; NQ] = [
    "pelvis_x",
    "pelvis_z",
    "pelvis_pitch",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_shin_spring",
    "right_shin_spring",
];

/// Penalty-contact constants.
#[derive(Debug, Clone, Copy)]
pub struct ContactParams {
    /// Normal penalty stiffness (N/m).
    pub k_normal: f64,
    /// Normal penalty damping (N·s/m).
    pub d_normal: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Viscous tangential coefficient (N·s/m), clamped by μ·N.
    pub d_tangent: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { k_normal: 1e5, d_normal: 1e3, mu: 1.0, d_tangent: 1e3 }
    }
}

/// Physical parameters of the default biped. These are plausible values at
/// roughly Cassie scale (total mass ≈ 32 kg, pelvis at 1 m), chosen for this
/// model rather than measured from any hardware.
#[derive(Debug, Clone, Copy)]
pub struct BipedParams {
    pub torso_mass: f64,
    pub torso_inertia: f64,
    /// Torso COM height above the pelvis origin (m).
    pub torso_com_height: f64,
    pub thigh_length: f64,
    pub thigh_mass: f64,
    pub thigh_inertia: f64,
    pub shin_upper_length: f64,
    pub shin_upper_mass: f64,
    pub shin_upper_inertia: f64,
    pub shin_lower_length: f64,
    pub shin_lower_mass: f64,
    pub shin_lower_inertia: f64,
    pub foot_mass: f64,
    pub foot_inertia: f64,
    /// Heel and toe x offsets from the ankle, in the foot frame (m).
    pub foot_heel_x: f64,
    pub foot_toe_x: f64,
    /// Sole depth below the ankle joint (m).
    pub sole_drop: f64,
    pub torque_limit_hip: f64,
    pub torque_limit_knee: f64,
    pub torque_limit_ankle: f64,
    /// Shin spring stiffness (N·m/rad) and damping (N·m·s/rad).
    pub spring_stiffness: f64,
    pub spring_damping: f64,
    /// Soft joint-range penalty gains.
    pub joint_limit_stiffness: f64,
    pub joint_limit_damping: f64,
    pub hip_range: (f64, f64),
    pub knee_range: (f64, f64),
    pub ankle_range: (f64, f64),
    pub spring_range: (f64, f64),
    pub nominal_pelvis_height: f64,
    pub gravity: f64,
}

impl Default for BipedParams {
    fn default() -> Self {
        Self {
            torso_mass: 18.0,
            torso_inertia: 0.5,
            torso_com_height: 0.1,
            thigh_length: 0.5,
            thigh_mass: 3.5,
            thigh_inertia: 0.073,
            shin_upper_length: 0.25,
            shin_upper_mass: 1.8,
            shin_upper_inertia: 0.0094,
            shin_lower_length: 0.20,
            shin_lower_mass: 0.8,
            shin_lower_inertia: 0.0027,
            foot_mass: 0.9,
            foot_inertia: 0.003,
            foot_heel_x: -0.06,
            foot_toe_x: 0.13,
            sole_drop: 0.05,
            torque_limit_hip: 100.0,
            torque_limit_knee: 100.0,
            torque_limit_ankle: 50.0,
            spring_stiffness: 1500.0,
            spring_damping: 10.0,
            joint_limit_stiffness: 300.0,
            joint_limit_damping: 2.0,
            hip_range: (-1.4, 1.4),
            knee_range: (-2.4, 0.1),
            ankle_range: (-1.4, 1.4),
            spring_range: (-0.4, 0.4),
            nominal_pelvis_height: 1.0,
            gravity: 9.81,
        }
    }
}

impl BipedParams {
    /// Combined thigh-to-ankle leg segment lengths used by inverse
    /// kinematics (spring at zero deflection).
    pub fn leg_lengths(&self) -> (f64, f64) {
        (self.thigh_length, self.shin_upper_length + self.shin_lower_length)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("joint range for {name} is empty: ({0}, {1})", .range.0, .range.1)]
    EmptyRange { name: &'static str, range: (f64, f64) },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SpringJoint {
    pub q_index: usize,
    pub stiffness: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct JointRange {
    pub q_index: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FootSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ContactPoint {
    pub body: usize,
    pub local: Vec2,
    pub side: FootSide,
}

/// The assembled robot: kinematic tree plus actuation, spring, joint-range,
/// and contact metadata. Immutable after construction.
#[derive(Debug, Clone)]
pub struct RobotModel {
    tree: Multibody,
    params: BipedParams,
    pub contact: ContactParams,
    torque_limits: [f64; N_ACTIVE],
    pub(crate) springs: [SpringJoint; N_PASSIVE],
    pub(crate) joint_ranges: Vec<JointRange>,
    pub(crate) contact_points: Vec<ContactPoint>,
    pub(crate) torso_body: usize,
}

impl RobotModel {
    pub fn new(params: BipedParams, contact: ContactParams) -> Result<Self, ModelError> {
        fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ModelError::NonPositive { name, value })
            }
        }
        positive("torso_mass", params.torso_mass)?;
        positive("torso_inertia", params.torso_inertia)?;
        positive("thigh_length", params.thigh_length)?;
        positive("thigh_mass", params.thigh_mass)?;
        positive("thigh_inertia", params.thigh_inertia)?;
        positive("shin_upper_length", params.shin_upper_length)?;
        positive("shin_upper_mass", params.shin_upper_mass)?;
        positive("shin_upper_inertia", params.shin_upper_inertia)?;
        positive("shin_lower_length", params.shin_lower_length)?;
        positive("shin_lower_mass", params.shin_lower_mass)?;
        positive("shin_lower_inertia", params.shin_lower_inertia)?;
        positive("foot_mass", params.foot_mass)?;
        positive("foot_inertia", params.foot_inertia)?;
        positive("torque_limit_hip", params.torque_limit_hip)?;
        positive("torque_limit_knee", params.torque_limit_knee)?;
        positive("torque_limit_ankle", params.torque_limit_ankle)?;
        positive("spring_stiffness", params.spring_stiffness)?;
        positive("nominal_pelvis_height", params.nominal_pelvis_height)?;
        positive("gravity", params.gravity)?;
        for (name, range) in [
            ("hip", params.hip_range),
            ("knee", params.knee_range),
            ("ankle", params.ankle_range),
            ("spring", params.spring_range),
        ] {
            if range.0 >= range.1 {
                return Err(ModelError::EmptyRange { name, range });
            }
        }

        let p = &params;
        let mut bodies = Vec::new();
        // Floating base: two massless prismatic carriers, then the torso.
        bodies.push(Body {
            parent: None,
            joint: JointKind::PrismaticX,
            q_index: Q_PELVIS_X,
            anchor: Vec2::zeros(),
            mass: 0.0,
            inertia: 0.0,
            com: Vec2::zeros(),
        });
        bodies.push(Body {
            parent: Some(0),
            joint: JointKind::PrismaticZ,
            q_index: Q_PELVIS_Z,
            anchor: Vec2::zeros(),
            mass: 0.0,
            inertia: 0.0,
            com: Vec2::zeros(),
        });
        bodies.push(Body {
            parent: Some(1),
            joint: JointKind::Revolute,
            q_index: Q_PELVIS_PITCH,
            anchor: Vec2::zeros(),
            mass: p.torso_mass,
            inertia: p.torso_inertia,
            com: Vec2::new(0.0, p.torso_com_height),
        });
        let torso_body = 2;

        let mut contact_points = Vec::new();
        let mut leg = |bodies: &mut Vec<Body>, active: [usize; 3], spring_q: usize, side: FootSide| {
            let [hip_q, knee_q, ankle_q] = active;
            let thigh = bodies.len();
            bodies.push(Body {
                parent: Some(torso_body),
                joint: JointKind::Revolute,
                q_index: hip_q,
                anchor: Vec2::zeros(),
                mass: p.thigh_mass,
                inertia: p.thigh_inertia,
                com: Vec2::new(0.0, -p.thigh_length / 2.0),
            });
            let shin_upper = bodies.len();
            bodies.push(Body {
                parent: Some(thigh),
                joint: JointKind::Revolute,
                q_index: knee_q,
                anchor: Vec2::new(0.0, -p.thigh_length),
                mass: p.shin_upper_mass,
                inertia: p.shin_upper_inertia,
                com: Vec2::new(0.0, -p.shin_upper_length / 2.0),
            });
            let shin_lower = bodies.len();
            bodies.push(Body {
                parent: Some(shin_upper),
                joint: JointKind::Revolute,
                q_index: spring_q,
                anchor: Vec2::new(0.0, -p.shin_upper_length),
                mass: p.shin_lower_mass,
                inertia: p.shin_lower_inertia,
                com: Vec2::new(0.0, -p.shin_lower_length / 2.0),
            });
            let foot = bodies.len();
            bodies.push(Body {
                parent: Some(shin_lower),
                joint: JointKind::Revolute,
                q_index: ankle_q,
                anchor: Vec2::new(0.0, -p.shin_lower_length),
                mass: p.foot_mass,
                inertia: p.foot_inertia,
                com: Vec2::new((p.foot_heel_x + p.foot_toe_x) / 2.0, -p.sole_drop),
            });
            contact_points.push(ContactPoint {
                body: foot,
                local: Vec2::new(p.foot_heel_x, -p.sole_drop),
                side,
            });
            contact_points.push(ContactPoint {
                body: foot,
                local: Vec2::new(p.foot_toe_x, -p.sole_drop),
                side,
            });
        };
        leg(&mut bodies, [ACTIVE_Q[0], ACTIVE_Q[1], ACTIVE_Q[2]], PASSIVE_Q[0], FootSide::Left);
        leg(&mut bodies, [ACTIVE_Q[3], ACTIVE_Q[4], ACTIVE_Q[5]], PASSIVE_Q[1], FootSide::Right);

        let tree = Multibody::new(bodies, NQ, p.gravity)?;
        let torque_limits = [
            p.torque_limit_hip,
            p.torque_limit_knee,
            p.torque_limit_ankle,
            p.torque_limit_hip,
            p.torque_limit_knee,
            p.torque_limit_ankle,
        ];
        let springs = [
            SpringJoint { q_index: PASSIVE_Q[0], stiffness: p.spring_stiffness, damping: p.spring_damping },
            SpringJoint { q_index: PASSIVE_Q[1], stiffness: p.spring_stiffness, damping: p.spring_damping },
        ];
        let mut joint_ranges = Vec::new();
        for (i, &q) in ACTIVE_Q.iter().enumerate() {
            let range = match i % 3 {
                0 => p.hip_range,
                1 => p.knee_range,
                _ => p.ankle_range,
            };
            joint_ranges.push(JointRange { q_index: q, lo: range.0, hi: range.1 });
        }
        for &q in &PASSIVE_Q {
            joint_ranges.push(JointRange { q_index: q, lo: p.spring_range.0, hi: p.spring_range.1 });
        }

        Ok(Self {
            tree,
            params,
            contact,
            torque_limits,
            springs,
            joint_ranges,
            contact_points,
            torso_body,
        })
    }

    pub fn default_model() -> Self {
        Self::new(BipedParams::default(), ContactParams::default())
            .expect("default biped parameters are valid")
    }

    pub fn tree(&self) -> &Multibody {
        &self.tree
    }

    pub fn params(&self) -> &BipedParams {
        &self.params
    }

    pub fn torque_limits(&self) -> &[f64; N_ACTIVE] {
        &self.torque_limits
    }

    pub fn torso_body(&self) -> usize {
        self.torso_body
    }

    pub fn nominal_pelvis_height(&self) -> f64 {
        self.params.nominal_pelvis_height
    }

    /// Total mechanical energy: kinetic + gravitational + spring potential.
    pub fn mechanical_energy(&self, state: &super::SimState) -> f64 {
        let mut e = self.tree.energy(&state.q, &state.v);
        for s in &self.springs {
            e += 0.5 * s.stiffness * state.q[s.q_index] * state.q[s.q_index];
        }
        e
    }
}
