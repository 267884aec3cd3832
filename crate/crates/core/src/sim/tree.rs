//! Planar articulated-body machinery: kinematics, inverse dynamics, mass
//! matrix, and forward dynamics for trees of 1-DOF joints.
//!
//! Coordinates live in the x–z plane. Rotations use the matrix
//! `R(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]` acting on (x, z) vectors, so a
//! link that points along (0, −1) at θ = 0 swings toward +x for positive θ.
//! Gravity acts along −z.

use nalgebra::{DMatrix, DVector, Vector2};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// 2D cross-product helper: ω × r for a scalar angular rate.
#[inline]
fn cross(omega: f64, r: Vec2) -> Vec2 {
    Vec2::new(-omega * r.y, omega * r.x)
}

#[inline]
fn rotate(theta: f64, v: Vec2) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// How a body connects to its parent. Prismatic axes are fixed in the parent
/// frame; revolute joints rotate the child frame about the anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    PrismaticX,
    PrismaticZ,
    Revolute,
}

/// One rigid body in the tree. Bodies with zero mass and inertia are legal
/// and serve as massless intermediates (e.g. the floating-base chain), as
/// long as every generalized coordinate still moves some mass.
#[derive(Debug, Clone)]
pub struct Body {
    /// Index of the parent body; `None` attaches to the fixed world.
    pub parent: Option<usize>,
    pub joint: JointKind,
    /// Index of this joint's coordinate in the generalized vectors.
    pub q_index: usize,
    /// Joint anchor point expressed in the parent frame.
    pub anchor: Vec2,
    pub mass: f64,
    /// Rotational inertia about the center of mass.
    pub inertia: f64,
    /// Center of mass in the body frame.
    pub com: Vec2,
}

/// World-frame motion of one body, produced by the kinematics pass.
#[derive(Debug, Clone, Copy)]
pub struct BodyMotion {
    pub theta: f64,
    pub pos: Vec2,
    pub omega: f64,
    pub vel: Vec2,
}

impl BodyMotion {
    /// World position of a point given in the body frame.
    #[inline]
    pub fn point(&self, local: Vec2) -> Vec2 {
        self.pos + rotate(self.theta, local)
    }

    /// World velocity of a point given in the body frame.
    #[inline]
    pub fn point_velocity(&self, local: Vec2) -> Vec2 {
        self.vel + cross(self.omega, rotate(self.theta, local))
    }
}

/// An external force applied at a world-frame point of one body.
#[derive(Debug, Clone, Copy)]
pub struct ExternalForce {
    pub body: usize,
    pub point: Vec2,
    pub force: Vec2,
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("body {body}: parent index {parent} does not precede it")]
    BadParent { body: usize, parent: usize },
    #[error("body {body}: q index {q_index} out of range for {nq} coordinates")]
    BadQIndex { body: usize, q_index: usize, nq: usize },
    #[error("q index {q_index} used by more than one joint")]
    DuplicateQIndex { q_index: usize },
    #[error("body {body}: negative mass or inertia")]
    NegativeInertia { body: usize },
    #[error("mass matrix is not positive definite at the given configuration")]
    SingularMassMatrix,
}

/// A kinematic tree of planar bodies with one generalized coordinate per
/// joint. Immutable after construction; all queries are `&self`.
#[derive(Debug, Clone)]
pub struct Multibody {
    bodies: Vec<Body>,
    nq: usize,
    pub gravity: f64,
}

impl Multibody {
    pub fn new(bodies: Vec<Body>, nq: usize, gravity: f64) -> Result<Self, TreeError> {
        let mut seen = vec![false; nq];
        for (i, b) in bodies.iter().enumerate() {
            if let Some(p) = b.parent {
                if p >= i {
                    return Err(TreeError::BadParent { body: i, parent: p });
                }
            }
            if b.q_index >= nq {
                return Err(TreeError::BadQIndex { body: i, q_index: b.q_index, nq });
            }
            if seen[b.q_index] {
                return Err(TreeError::DuplicateQIndex { q_index: b.q_index });
            }
            seen[b.q_index] = true;
            if b.mass < 0.0 || b.inertia < 0.0 {
                return Err(TreeError::NegativeInertia { body: i });
            }
        }
        Ok(Self { bodies, nq, gravity })
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    /// Outward pass: world pose and velocity of every body.
    pub fn kinematics(&self, q: &DVector<f64>, v: &DVector<f64>) -> Vec<BodyMotion> {
        assert_eq!(q.len(), self.nq);
        assert_eq!(v.len(), self.nq);
        let mut out: Vec<BodyMotion> = Vec::with_capacity(self.bodies.len());
        for b in &self.bodies {
            let parent = b
                .parent
                .map(|p| out[p])
                .unwrap_or(BodyMotion { theta: 0.0, pos: Vec2::zeros(), omega: 0.0, vel: Vec2::zeros() });
            let r = rotate(parent.theta, b.anchor);
            let (qj, vj) = (q[b.q_index], v[b.q_index]);
            let m = match b.joint {
                JointKind::Revolute => BodyMotion {
                    theta: parent.theta + qj,
                    pos: parent.pos + r,
                    omega: parent.omega + vj,
                    vel: parent.vel + cross(parent.omega, r),
                },
                JointKind::PrismaticX | JointKind::PrismaticZ => {
                    let axis = self.prismatic_axis(b, parent.theta);
                    let d = r + axis * qj;
                    BodyMotion {
                        theta: parent.theta,
                        pos: parent.pos + d,
                        omega: parent.omega,
                        vel: parent.vel + cross(parent.omega, d) + axis * vj,
                    }
                }
            };
            out.push(m);
        }
        out
    }

    #[inline]
    fn prismatic_axis(&self, b: &Body, parent_theta: f64) -> Vec2 {
        let local = match b.joint {
            JointKind::PrismaticX => Vec2::new(1.0, 0.0),
            JointKind::PrismaticZ => Vec2::new(0.0, 1.0),
            JointKind::Revolute => unreachable!(),
        };
        rotate(parent_theta, local)
    }

    /// Inverse dynamics: the generalized forces required to realize `a` at
    /// state (q, v) under gravity and the given external forces.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        a: &DVector<f64>,
        ext: &[ExternalForce],
    ) -> DVector<f64> {
        let nb = self.bodies.len();
        let motion = self.kinematics(q, v);

        // Outward pass for accelerations.
        let mut alpha = vec![0.0_f64; nb];
        let mut acc = vec![Vec2::zeros(); nb];
        for (i, b) in self.bodies.iter().enumerate() {
            let (p_th, p_om, p_al, p_acc) = match b.parent {
                Some(p) => (motion[p].theta, motion[p].omega, alpha[p], acc[p]),
                None => (0.0, 0.0, 0.0, Vec2::zeros()),
            };
            let r = rotate(p_th, b.anchor);
            match b.joint {
                JointKind::Revolute => {
                    alpha[i] = p_al + a[b.q_index];
                    acc[i] = p_acc + cross(p_al, r) - p_om * p_om * r;
                }
                JointKind::PrismaticX | JointKind::PrismaticZ => {
                    let axis = self.prismatic_axis(b, p_th);
                    let d = r + axis * q[b.q_index];
                    alpha[i] = p_al;
                    acc[i] = p_acc + cross(p_al, d) - p_om * p_om * d
                        + cross(2.0 * p_om, axis * v[b.q_index])
                        + axis * a[b.q_index];
                }
            }
        }

        // Per-body external wrench about the body origin.
        let mut ext_force = vec![Vec2::zeros(); nb];
        let mut ext_moment = vec![0.0_f64; nb];
        for e in ext {
            ext_force[e.body] += e.force;
            let arm = e.point - motion[e.body].pos;
            ext_moment[e.body] += arm.x * e.force.y - arm.y * e.force.x;
        }

        // Inward pass: wrench each joint must transmit to its body, with the
        // force resolved at the joint point (= body origin for revolute
        // joints; prismatic bodies use their origin as well).
        let gravity = Vec2::new(0.0, -self.gravity);
        let mut f = vec![Vec2::zeros(); nb];
        let mut n = vec![0.0_f64; nb];
        let mut tau = DVector::zeros(self.nq);
        for i in (0..nb).rev() {
            let b = &self.bodies[i];
            let rc = rotate(motion[i].theta, b.com);
            let com_acc = acc[i] + cross(alpha[i], rc) - motion[i].omega * motion[i].omega * rc;
            // Children have already accumulated into f[i], n[i] (moments
            // about this body's origin).
            let fi = b.mass * (com_acc - gravity) - ext_force[i] + f[i];
            let ni = b.inertia * alpha[i] + rc.x * (b.mass * (com_acc - gravity)).y
                - rc.y * (b.mass * (com_acc - gravity)).x
                - ext_moment[i]
                + n[i];
            match b.joint {
                JointKind::Revolute => tau[b.q_index] = ni,
                JointKind::PrismaticX | JointKind::PrismaticZ => {
                    let p_th = b.parent.map(|p| motion[p].theta).unwrap_or(0.0);
                    let axis = self.prismatic_axis(b, p_th);
                    tau[b.q_index] = fi.dot(&axis);
                }
            }
            if let Some(p) = b.parent {
                let arm = motion[i].pos - motion[p].pos;
                f[p] += fi;
                n[p] += ni + arm.x * fi.y - arm.y * fi.x;
            }
        }
        tau
    }

    /// Joint-space mass matrix, assembled from body Jacobians.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let nb = self.bodies.len();
        let v0 = DVector::zeros(self.nq);
        let motion = self.kinematics(q, &v0);

        // Origin Jacobians: jw[b] is 1×nq, jv[b] is 2×nq (rows x, z).
        let mut jw = vec![DVector::<f64>::zeros(self.nq); nb];
        let mut jvx = vec![DVector::<f64>::zeros(self.nq); nb];
        let mut jvz = vec![DVector::<f64>::zeros(self.nq); nb];
        for (i, b) in self.bodies.iter().enumerate() {
            if let Some(p) = b.parent {
                let d = motion[i].pos - motion[p].pos;
                jw[i] = jw[p].clone();
                // Transport parent origin Jacobian to this body's origin.
                jvx[i] = &jvx[p] - &jw[p] * d.y;
                jvz[i] = &jvz[p] + &jw[p] * d.x;
            }
            match b.joint {
                JointKind::Revolute => jw[i][b.q_index] += 1.0,
                JointKind::PrismaticX | JointKind::PrismaticZ => {
                    let p_th = b.parent.map(|p| motion[p].theta).unwrap_or(0.0);
                    let axis = self.prismatic_axis(b, p_th);
                    jvx[i][b.q_index] += axis.x;
                    jvz[i][b.q_index] += axis.y;
                }
            }
        }

        let mut m = DMatrix::zeros(self.nq, self.nq);
        for (i, b) in self.bodies.iter().enumerate() {
            if b.mass == 0.0 && b.inertia == 0.0 {
                continue;
            }
            let rc = rotate(motion[i].theta, b.com);
            // COM Jacobian = origin Jacobian + ω-column × rc.
            let jcx = &jvx[i] - &jw[i] * rc.y;
            let jcz = &jvz[i] + &jw[i] * rc.x;
            for r in 0..self.nq {
                for c in r..self.nq {
                    m[(r, c)] +=
                        b.mass * (jcx[r] * jcx[c] + jcz[r] * jcz[c]) + b.inertia * jw[i][r] * jw[i][c];
                }
            }
        }
        for r in 0..self.nq {
            for c in 0..r {
                m[(r, c)] = m[(c, r)];
            }
        }
        m
    }

    /// Bias forces (Coriolis, centrifugal, gravity, minus externals): the
    /// generalized force needed to hold zero acceleration.
    pub fn bias_forces(&self, q: &DVector<f64>, v: &DVector<f64>, ext: &[ExternalForce]) -> DVector<f64> {
        self.inverse_dynamics(q, v, &DVector::zeros(self.nq), ext)
    }

    /// Forward dynamics: solve M(q) a = τ − bias(q, v, ext).
    pub fn forward_dynamics(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        tau: &DVector<f64>,
        ext: &[ExternalForce],
    ) -> Result<DVector<f64>, TreeError> {
        let m = self.mass_matrix(q);
        let rhs = tau - self.bias_forces(q, v, ext);
        let chol = m.cholesky().ok_or(TreeError::SingularMassMatrix)?;
        Ok(chol.solve(&rhs))
    }

    /// Kinetic plus gravitational potential energy.
    pub fn energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let motion = self.kinematics(q, v);
        let mut e = 0.0;
        for (i, b) in self.bodies.iter().enumerate() {
            let rc = rotate(motion[i].theta, b.com);
            let com_vel = motion[i].vel + cross(motion[i].omega, rc);
            let com_z = motion[i].pos.y + rc.y;
            e += 0.5 * b.mass * com_vel.norm_squared()
                + 0.5 * b.inertia * motion[i].omega * motion[i].omega
                + b.mass * self.gravity * com_z;
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn point_mass(m: f64) -> Multibody {
        let bodies = vec![
            Body {
                parent: None,
                joint: JointKind::PrismaticX,
                q_index: 0,
                anchor: Vec2::zeros(),
                mass: 0.0,
                inertia: 0.0,
                com: Vec2::zeros(),
            },
            Body {
                parent: Some(0),
                joint: JointKind::PrismaticZ,
                q_index: 1,
                anchor: Vec2::zeros(),
                mass: m,
                inertia: 0.0,
                com: Vec2::zeros(),
            },
        ];
        Multibody::new(bodies, 2, 9.81).unwrap()
    }

    /// A uniform rod of mass m and length l pivoting about one end.
    pub(crate) fn rod_pendulum(m: f64, l: f64) -> Multibody {
        let bodies = vec![Body {
            parent: None,
            joint: JointKind::Revolute,
            q_index: 0,
            anchor: Vec2::zeros(),
            mass: m,
            inertia: m * l * l / 12.0,
            com: Vec2::new(0.0, -l / 2.0),
        }];
        Multibody::new(bodies, 1, 9.81).unwrap()
    }

    #[test]
    fn free_fall_semi_implicit_step() {
        let tree = point_mass(1.0);
        let q = DVector::from_vec(vec![0.0, 1.0]);
        let v = DVector::zeros(2);
        let a = tree.forward_dynamics(&q, &v, &DVector::zeros(2), &[]).unwrap();
        let dt = 0.001;
        let v1 = &v + &a * dt;
        let q1 = &q + &v1 * dt;
        assert_relative_eq!(v1[1], -0.00981, max_relative = 1e-12);
        assert_relative_eq!(q1[1], 0.99999019, max_relative = 1e-12);
    }

    #[test]
    fn pendulum_hangs_at_rest() {
        let tree = rod_pendulum(2.0, 1.5);
        let q = DVector::zeros(1);
        let v = DVector::zeros(1);
        let a = tree.forward_dynamics(&q, &v, &DVector::zeros(1), &[]).unwrap();
        assert_eq!(a[0], 0.0);
    }

    #[test]
    fn pendulum_accel_matches_closed_form() {
        // θ̈ = −(3 g / 2 l) sin θ for a uniform rod about its end.
        let (m, l) = (1.3, 0.8);
        let tree = rod_pendulum(m, l);
        for &theta in &[0.3, -1.1, 2.0] {
            let q = DVector::from_vec(vec![theta]);
            let v = DVector::from_vec(vec![0.4]);
            let a = tree.forward_dynamics(&q, &v, &DVector::zeros(1), &[]).unwrap();
            let expected = -(3.0 * 9.81 / (2.0 * l)) * theta.sin();
            assert_relative_eq!(a[0], expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn mass_matrix_matches_inverse_dynamics_columns() {
        // Two independent routes to M(q): Jacobian assembly vs unit-accel
        // inverse dynamics. A three-link chain with a prismatic base makes
        // the comparison nontrivial.
        let bodies = vec![
            Body {
                parent: None,
                joint: JointKind::PrismaticX,
                q_index: 0,
                anchor: Vec2::zeros(),
                mass: 0.0,
                inertia: 0.0,
                com: Vec2::zeros(),
            },
            Body {
                parent: Some(0),
                joint: JointKind::Revolute,
                q_index: 1,
                anchor: Vec2::new(0.1, 0.0),
                mass: 2.0,
                inertia: 0.05,
                com: Vec2::new(0.0, -0.3),
            },
            Body {
                parent: Some(1),
                joint: JointKind::Revolute,
                q_index: 2,
                anchor: Vec2::new(0.0, -0.6),
                mass: 1.0,
                inertia: 0.02,
                com: Vec2::new(0.05, -0.2),
            },
        ];
        let tree = Multibody::new(bodies, 3, 9.81).unwrap();
        let q = DVector::from_vec(vec![0.4, 0.7, -1.2]);
        let m_jac = tree.mass_matrix(&q);
        let zero = DVector::zeros(3);
        let g0 = tree.inverse_dynamics(&q, &zero, &zero, &[]);
        for j in 0..3 {
            let mut ej = DVector::zeros(3);
            ej[j] = 1.0;
            let col = tree.inverse_dynamics(&q, &zero, &ej, &[]) - &g0;
            for i in 0..3 {
                assert_relative_eq!(m_jac[(i, j)], col[i], epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn external_force_maps_to_generalized_force() {
        // A horizontal pull at the pendulum tip must produce the moment
        // l·F·cos θ about the pivot.
        let (m, l) = (1.0, 2.0);
        let tree = rod_pendulum(m, l);
        let theta: f64 = 0.6;
        let q = DVector::from_vec(vec![theta]);
        let v = DVector::zeros(1);
        let motion = tree.kinematics(&q, &v);
        let tip = motion[0].point(Vec2::new(0.0, -l));
        let ext = [ExternalForce { body: 0, point: tip, force: Vec2::new(3.0, 0.0) }];
        let bias_with = tree.bias_forces(&q, &v, &ext);
        let bias_without = tree.bias_forces(&q, &v, &[]);
        let generalized = bias_without[0] - bias_with[0];
        assert_relative_eq!(generalized, 3.0 * l * theta.cos(), max_relative = 1e-10);
    }
}
