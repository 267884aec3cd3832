// Development probe for the biped learning loop: trains with the default
// configuration, periodically evaluates the deterministic policy at both
// physics rates, and saves checkpoints for offline inspection. Ignored by
// default; driven by PROBE_* environment variables.

use std::sync::Arc;
use strider::config::Config;
use strider::env::BipedEnv;
use strider::nn::{save_checkpoint, GaussianPolicy};
use strider::ppo::{TrainConfig, Trainer};
use strider::protocol::{run_eval, PolicyBundle};

#[test]
#[ignore]
fn probe_biped_full() {
    let envn = |name: &str, default: usize| -> usize {
        std::env::var(name).ok().and_then(|s| s.parse().ok()).unwrap_or(default)
    };
    let iters = envn("PROBE_ITERS", 600);
    let eval_every = envn("PROBE_EVAL_EVERY", 25);
    let ck_dir = std::env::var("PROBE_CK_DIR").unwrap_or_else(|_| "/tmp/probe_ck".to_string());
    std::fs::create_dir_all(&ck_dir).unwrap();

    let config = Config::default();
    let model = Arc::new(config.robot_model().unwrap());
    let motion = Arc::new(config.reference_motion().unwrap());
    let train_env = BipedEnv::new(model.clone(), motion.clone(), config.env_options(false).unwrap());
    let eval_env_test = BipedEnv::new(model.clone(), motion.clone(), config.env_options(true).unwrap());
    let eval_env_train = BipedEnv::new(model, motion, config.env_options(false).unwrap());

    let cfg = TrainConfig { seed: 0, workers: 8, iterations: iters, ..config.train_config() };
    let mut trainer = Trainer::new(train_env, cfg).unwrap();
    let t0 = std::time::Instant::now();
    trainer.fit_normalizer().unwrap();
    println!("normalizer fit in {:.1}s", t0.elapsed().as_secs_f64());

    for k in 0..iters {
        let m = trainer.train_iteration().unwrap();
        if k % 5 == 0 {
            println!(
                "iter {k:4}  step_reward {:.4}  mean_steps {:6.1}  tl {:.2}  eps {:3}  wall {:.2}s",
                m.mean_step_reward(),
                m.mean_episode_steps,
                m.fraction_time_limit,
                m.episodes,
                m.wall_seconds
            );
        }
        if k % eval_every == eval_every - 1 {
            let bundle = PolicyBundle {
                policy: GaussianPolicy::new(trainer.policy.actor.clone(), 0.018),
                normalizer: trainer.normalizer.clone(),
            };
            for (name, env) in [("2kHz", &eval_env_test), ("1kHz", &eval_env_train)] {
                let results = run_eval(env, &bundle, 10, 300, 1234, true).unwrap();
                let steps: Vec<usize> = results.iter().map(|e| e.steps).collect();
                let full = steps.iter().filter(|&&s| s == 300).count();
                let mean_r: f64 =
                    results.iter().map(|e| e.total_reward).sum::<f64>() / results.len() as f64;
                println!("  eval[{name}] iter {k}: full {full}/10, steps {steps:?}, mean total reward {mean_r:.1}");
            }
            let path = std::path::Path::new(&ck_dir).join(format!("ck_{k:04}.ckpt"));
            save_checkpoint(&trainer.checkpoint(), &path).unwrap();
        }
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
