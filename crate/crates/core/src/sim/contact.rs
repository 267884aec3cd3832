//! Penalty ground contact: a normal spring-damper clamped to be repulsive,
//! plus viscous tangential friction clamped to the Coulomb cone.

use super::model::{FootSide, RobotModel};
use super::terrain::Terrain;
use super::tree::{BodyMotion, ExternalForce, Vec2};
use super::SimState;

/// Contact force at one candidate point. Zero when the point is above the
/// ground surface.
pub(crate) fn point_force(
    model: &RobotModel,
    terrain: &Terrain,
    point: Vec2,
    velocity: Vec2,
) -> Vec2 {
    let penetration = terrain.height(point.x) - point.y;
    if penetration <= 0.0 {
        return Vec2::zeros();
    }
    // Surface normal from the height-field gradient; tangent points downhill
    // of +x for positive slope.
    let slope = terrain.slope(point.x);
    let inv_len = 1.0 / (1.0 + slope * slope).sqrt();
    let normal = Vec2::new(-slope * inv_len, inv_len);
    let tangent = Vec2::new(normal.y, -normal.x);

    let c = &model.contact;
    let v_n = velocity.dot(&normal);
    let f_n = (c.k_normal * penetration - c.d_normal * v_n).max(0.0);
    let v_t = velocity.dot(&tangent);
    let f_t = (-c.d_tangent * v_t).clamp(-c.mu * f_n, c.mu * f_n);
    normal * f_n + tangent * f_t
}

/// All active contact forces as external forces on the tree.
pub(crate) fn contact_external_forces(
    model: &RobotModel,
    motion: &[BodyMotion],
    terrain: &Terrain,
) -> Vec<ExternalForce> {
    let mut forces = Vec::with_capacity(model.contact_points.len());
    for cp in &model.contact_points {
        let point = motion[cp.body].point(cp.local);
        let velocity = motion[cp.body].point_velocity(cp.local);
        let force = point_force(model, terrain, point, velocity);
        if force != Vec2::zeros() {
            forces.push(ExternalForce { body: cp.body, point, force });
        }
    }
    forces
}

/// Net planar ground-reaction force per foot: (left, right).
pub fn contact_force(model: &RobotModel, state: &SimState, terrain: &Terrain) -> (Vec2, Vec2) {
    let motion = model.tree().kinematics(&state.q, &state.v);
    let mut left = Vec2::zeros();
    let mut right = Vec2::zeros();
    for cp in &model.contact_points {
        let point = motion[cp.body].point(cp.local);
        let velocity = motion[cp.body].point_velocity(cp.local);
        let force = point_force(model, terrain, point, velocity);
        match cp.side {
            FootSide::Left => left += force,
            FootSide::Right => right += force,
        }
    }
    (left, right)
}
