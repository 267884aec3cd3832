//! Throughput of the paths that dominate training time: the physics step,
//! batched network passes, a full environment control step, and the Riccati
//! recursion.

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use std::sync::Arc;
use strider::env::{BipedEnv, BipedEnvOptions, Env};
use strider::nn::{Mlp, OutputActivation};
use strider::reference::generate_gait;
use strider::sim::{self, RobotModel, SimState, Terrain};
use strider::tvlqr::{riccati_backward, LinearizedDynamics};

fn bench_sim_step(c: &mut Criterion) {
    let model = RobotModel::default_model();
    let mut state = SimState::standing(&model);
    state.q[1] -= 0.002;
    let torques = [5.0, -3.0, 1.0, -5.0, 3.0, -1.0];
    c.bench_function("sim_step_1khz", |b| {
        b.iter(|| {
            let next =
                sim::step(&model, black_box(&state), &torques, &Terrain::Flat, &[], 0.001).unwrap();
            black_box(next.q[0])
        })
    });
}

fn bench_env_control_step(c: &mut Criterion) {
    let model = Arc::new(RobotModel::default_model());
    let motion = Arc::new(generate_gait(0.5, 0.7, 0.1).unwrap());
    let proto = BipedEnv::new(model, motion, BipedEnvOptions::standard(0.001));
    let action = DVector::from_vec(vec![0.05, -0.05, 0.02, -0.02, 0.05, 0.0]);
    c.bench_function("env_control_step_32ms", |b| {
        let mut env = proto.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng).unwrap();
        let mut steps = 0usize;
        b.iter(|| {
            if env.step(black_box(&action)).map(|o| o.failure.is_some()).unwrap_or(true) {
                env.reset(&mut rng).unwrap();
            }
            steps += 1;
            black_box(steps)
        })
    });
}

fn bench_mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = Mlp::new(&[42, 256, 256, 6], OutputActivation::Tanh, &mut rng).unwrap();
    let x = DVector::from_fn(42, |_, _| rng.gen_range(-1.0..1.0));
    c.bench_function("mlp_forward_single", |b| {
        b.iter(|| black_box(net.forward(black_box(&x)).unwrap()))
    });

    let batch = DMatrix::from_fn(42, 128, |_, _| rng.gen_range(-1.0..1.0));
    c.bench_function("mlp_forward_batch128", |b| {
        b.iter(|| black_box(net.forward_batch(black_box(&batch)).unwrap()))
    });

    let upstream = DMatrix::from_fn(6, 128, |_, _| rng.gen_range(-0.1..0.1));
    c.bench_function("mlp_forward_backward_batch128", |b| {
        b.iter(|| {
            let cache = net.forward_batch_cached(black_box(&batch)).unwrap();
            black_box(net.backward(&cache, &upstream).unwrap())
        })
    });
}

fn bench_riccati(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let horizon = 100;
    let a: Vec<DMatrix<f64>> =
        (0..horizon).map(|_| DMatrix::from_fn(22, 22, |_, _| rng.gen_range(-0.2..0.2))).collect();
    let b: Vec<DMatrix<f64>> =
        (0..horizon).map(|_| DMatrix::from_fn(22, 6, |_, _| rng.gen_range(-0.5..0.5))).collect();
    let lin = LinearizedDynamics::new(a, b).unwrap();
    let q = DMatrix::identity(22, 22);
    let r = DMatrix::identity(6, 6) * 0.1;
    c.bench_function("riccati_backward_h100_n22", |bch| {
        bch.iter(|| black_box(riccati_backward(black_box(&lin), &q, &r, &q).unwrap()))
    });
}

criterion_group!(benches, bench_sim_step, bench_env_control_step, bench_mlp, bench_riccati);
criterion_main!(benches);
