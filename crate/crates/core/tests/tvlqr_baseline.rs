//! The model-based baseline wired to the biped: linearize the control-step
//! map along the reference stride and run the time-varying LQR feedback in
//! closed loop. On this underactuated, contact-rich system tracking an
//! infeasible kinematic reference, the linear policy is expected to lose
//! the reference quickly — it is a demonstrative comparison, not a
//! working controller; the numerical correctness tests for this module
//! live on smooth systems.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use strider::config::Config;
use strider::control::{pd_torque, PDGains};
use strider::reference::ReferenceMotion;
use strider::sim::{self, RobotModel, SimState, Terrain, N_ACTIVE, NQ};
use strider::tvlqr::{linearize, riccati_backward, tvlqr_control, LinearizedDynamics};

const CONTROL_DT: f64 = 0.032;
const SIM_DT: f64 = 0.001;

fn pack(state: &SimState) -> DVector<f64> {
    let mut x = DVector::zeros(2 * NQ);
    x.rows_mut(0, NQ).copy_from(&state.q);
    x.rows_mut(NQ, NQ).copy_from(&state.v);
    x
}

fn unpack(x: &DVector<f64>, t: f64) -> SimState {
    SimState::new(x.rows(0, NQ).into_owned(), x.rows(NQ, NQ).into_owned(), t).unwrap()
}

/// One control period: PD tracking of (reference angles + u) through the
/// physics substeps. Returns NaNs if the simulation diverges so the
/// linearizer can report the offending column.
fn control_step_map(
    model: &RobotModel,
    gains: &PDGains,
    ref_angles: [f64; N_ACTIVE],
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> DVector<f64> {
    let mut state = unpack(x, 0.0);
    let mut targets = [0.0; N_ACTIVE];
    for i in 0..N_ACTIVE {
        targets[i] = ref_angles[i] + u[i];
    }
    let substeps = (CONTROL_DT / SIM_DT).round() as usize;
    for _ in 0..substeps {
        let torques = pd_torque(gains, &targets, &state);
        match sim::step(model, &state, &torques, &Terrain::Flat, &[], SIM_DT) {
            Ok(next) => state = next,
            Err(_) => return DVector::from_element(2 * NQ, f64::NAN),
        }
    }
    pack(&state)
}

fn nominal_state(motion: &ReferenceMotion, t: f64) -> DVector<f64> {
    let frame = motion.sample(t);
    let mut x = DVector::zeros(2 * NQ);
    for i in 0..NQ {
        x[i] = frame.pose[i];
        x[NQ + i] = frame.vel[i];
    }
    x
}

#[test]
fn tvlqr_tracks_the_biped_reference_demonstratively() {
    let config = Config::default();
    let model = Arc::new(config.robot_model().unwrap());
    let motion = config.reference_motion().unwrap();
    let gains_pd = PDGains::uniform(config.pd_p_gain, config.pd_d_gain).unwrap();
    let horizon = 12;

    // Linearize the closed PD loop about the reference at each control step.
    let mut a_seq = Vec::with_capacity(horizon);
    let mut b_seq = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let t = k as f64 * CONTROL_DT;
        let x_nom = nominal_state(&motion, t);
        let ref_angles = motion.sample(t).active_angles();
        let f = |x: &DVector<f64>, u: &DVector<f64>| {
            control_step_map(&model, &gains_pd, ref_angles, x, u)
        };
        let (a, b) = linearize(f, &x_nom, &DVector::zeros(N_ACTIVE), config.tvlqr_delta)
            .expect("linearization stays finite near the reference");
        a_seq.push(a);
        b_seq.push(b);
    }
    let lin = LinearizedDynamics::new(a_seq, b_seq).unwrap();
    let q = DMatrix::identity(2 * NQ, 2 * NQ) * config.tvlqr_q;
    let r = DMatrix::identity(N_ACTIVE, N_ACTIVE) * config.tvlqr_r;
    let q_term = DMatrix::identity(2 * NQ, 2 * NQ) * config.tvlqr_q_terminal;
    let gains = riccati_backward(&lin, &q, &r, &q_term).unwrap();
    assert_eq!(gains.k.len(), horizon);
    for k in &gains.k {
        assert!(k.iter().all(|v| v.is_finite()), "non-finite feedback gain");
    }

    // Close the loop from the reference start. The reference is not
    // dynamically feasible, so deviation grows; the run must stay finite
    // and the feedback must engage (nonzero corrections).
    let mut state = unpack(&nominal_state(&motion, 0.0), 0.0);
    let mut engaged = false;
    let mut steps_survived = 0;
    for k in 0..horizon {
        let t = k as f64 * CONTROL_DT;
        let x = pack(&state);
        let x_nom = nominal_state(&motion, t);
        let u = tvlqr_control(&gains, &x, &x_nom, &DVector::zeros(N_ACTIVE), k).unwrap();
        assert!(u.iter().all(|v| v.is_finite()));
        if u.amax() > 1e-6 {
            engaged = true;
        }
        let ref_angles = motion.sample(t).active_angles();
        let next = control_step_map(&model, &gains_pd, ref_angles, &x, &u);
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        state = unpack(&next, (k + 1) as f64 * CONTROL_DT);
        steps_survived += 1;
        // Stop early once clearly fallen; the comparison point is made.
        if state.pelvis_z() < 0.4 {
            break;
        }
    }
    assert!(steps_survived >= 1, "the closed loop must run at least one control step");
    assert!(engaged, "feedback corrections should be nonzero on an infeasible reference");
    println!(
        "TVLQR baseline survived {steps_survived}/{horizon} control steps before losing the reference"
    );
}
