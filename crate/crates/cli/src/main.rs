//! Batch harness for the walking stack: train policies, evaluate
//! checkpoints, and run the robustness protocols (sensory delay, sinusoidal
//! terrain, pelvis pushes, policy interpolation).
//!
//! Training simulates at 1 kHz; evaluation and all test protocols at 2 kHz.
//! The policy runs at 31.25 Hz in both. Every report records the seed,
//! config digest, and checkpoint identities needed to re-run it.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use strider::config::Config;
use strider::env::{BipedEnv, BipedEnvOptions};
use strider::nn::{load_checkpoint, Checkpoint};
use strider::ppo::{RunOptions, Trainer};
use strider::protocol::{
    self, checkpoint_id, delay_sweep, push_sweep, run_eval, terrain_sweep, ExperimentReport,
    InterpolationMode, PolicyBundle, PushDirection, SweepRow,
};
use strider::reference::save_csv;

#[derive(Parser)]
#[command(name = "strider", version, about = "Walking controllers for a planar biped")]
struct Cli {
    /// Configuration file (key = value lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides run.seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for checkpoints, metrics, and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Parallel rollout workers; overrides run.workers from the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Force fully reproducible output: serial rollouts and zeroed wall
    /// times in the metrics CSV.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a walking policy from scratch (1 kHz physics).
    Train,
    /// Retime the reference by a speed factor, then train on it.
    TrainSpeed {
        /// Pelvis-x scale of the reference motion (2 doubles the stride).
        #[arg(long)]
        speed_scale: f64,
    },
    /// Evaluate a checkpoint over full-length episodes (2 kHz physics).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Sample actions from the Gaussian policy instead of using the
        /// actor mean.
        #[arg(long)]
        stochastic: bool,
    },
    /// Sweep sensory delays applied to observations and PD measurements.
    TestDelay {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Delays in seconds.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.005, 0.010])]
        delays: Vec<f64>,
    },
    /// Sweep sinusoidal terrain heights z = h·sin(x).
    TestTerrain {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Center-to-peak heights in meters.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.05, 0.07, 0.10, 0.15])]
        heights: Vec<f64>,
    },
    /// Apply a single pelvis push per episode and report recovery.
    TestPush {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Push directions: forward and/or backward.
        #[arg(long, value_delimiter = ',', default_values = ["forward", "backward"])]
        directions: Vec<String>,
        /// Push magnitudes in newtons.
        #[arg(long, value_delimiter = ',', default_values_t = vec![20.0, 50.0, 90.0, 140.0])]
        magnitudes: Vec<f64>,
    },
    /// Blend two policies trained for different stride speeds.
    Interpolate {
        #[arg(long)]
        checkpoint1: PathBuf,
        #[arg(long)]
        checkpoint2: PathBuf,
        /// Hold λ constant instead of following the ramp schedule.
        #[arg(long)]
        lambda: Option<f64>,
        /// Choose λ from the current pelvis speed.
        #[arg(long, conflicts_with = "lambda")]
        speed_adaptive: bool,
        /// Stride scale of the first policy's reference.
        #[arg(long, default_value_t = 1.0)]
        speed_scale1: f64,
        /// Stride scale of the second policy's reference.
        #[arg(long, default_value_t = 2.0)]
        speed_scale2: f64,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Write the reference motion to CSV.
    ExportReference {
        /// Output file; defaults to <out>/reference.csv.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        speed_scale: f64,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => Config::load(path).context("loading configuration")?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if cli.deterministic {
        config.workers = 1;
    }

    match &cli.command {
        Command::Train => {
            let summary = train(&config, &cli.out, cli.deterministic)?;
            println!(
                "trained {} iterations; final mean return {:.2}; metrics at {}",
                summary.iterations_run,
                summary.final_mean_return,
                summary.metrics_path.display()
            );
        }
        Command::TrainSpeed { speed_scale } => {
            let mut config = config.clone();
            config.gait_speed_scale = *speed_scale;
            let out = cli.out.join(format!("speed_{speed_scale}"));
            let summary = train(&config, &out, cli.deterministic)?;
            println!(
                "trained at speed {speed_scale}x (stride {:.3} m); metrics at {}",
                config.reference_motion()?.stride_length(),
                summary.metrics_path.display()
            );
        }
        Command::Eval { checkpoint, episodes, stochastic } => {
            let report = eval(&config, checkpoint, *episodes, !*stochastic)?;
            report.write(&cli.out)?;
            print!("{}", report.summary_text());
        }
        Command::TestDelay { checkpoint, delays } => {
            let (env, bundle, id) = eval_setup(&config, checkpoint)?;
            let rows = delay_sweep(
                &env,
                &bundle,
                delays,
                config.protocol_episodes,
                config.horizon,
                config.seed,
            )?;
            let report = make_report(&config, "test-delay", vec![id], rows, Vec::new());
            report.write(&cli.out)?;
            print!("{}", report.summary_text());
        }
        Command::TestTerrain { checkpoint, heights } => {
            let (env, bundle, id) = eval_setup(&config, checkpoint)?;
            let (rows, notes) = terrain_sweep(
                &env,
                &bundle,
                heights,
                config.protocol_episodes,
                config.horizon,
                config.seed,
            )?;
            let report = make_report(&config, "test-terrain", vec![id], rows, notes);
            report.write(&cli.out)?;
            print!("{}", report.summary_text());
        }
        Command::TestPush { checkpoint, directions, magnitudes } => {
            let (env, bundle, id) = eval_setup(&config, checkpoint)?;
            let directions = directions
                .iter()
                .map(|d| match d.as_str() {
                    "forward" => Ok(PushDirection::Forward),
                    "backward" => Ok(PushDirection::Backward),
                    other => bail!(
                        "unknown push direction {other:?} (the planar model supports forward/backward)"
                    ),
                })
                .collect::<Result<Vec<_>>>()?;
            let protocol = protocol::PushProtocol {
                start: config.push_start,
                duration: config.push_duration,
                random_phase: config.push_random_phase,
                recovery_window: config.recovery_window,
            };
            let rows = push_sweep(
                &env,
                &bundle,
                &directions,
                magnitudes,
                &protocol,
                config.protocol_episodes,
                config.horizon,
                config.seed,
            )?;
            let report = make_report(&config, "test-push", vec![id], rows, Vec::new());
            report.write(&cli.out)?;
            print!("{}", report.summary_text());
        }
        Command::Interpolate {
            checkpoint1,
            checkpoint2,
            lambda,
            speed_adaptive,
            speed_scale1,
            speed_scale2,
            episodes,
        } => {
            let report = interpolate(
                &config,
                checkpoint1,
                checkpoint2,
                *lambda,
                *speed_adaptive,
                *speed_scale1,
                *speed_scale2,
                *episodes,
            )?;
            report.write(&cli.out)?;
            print!("{}", report.summary_text());
        }
        Command::ExportReference { file, speed_scale } => {
            let mut config = config.clone();
            config.gait_speed_scale = *speed_scale;
            let motion = config.reference_motion()?;
            let path = match file {
                Some(f) => f.clone(),
                None => {
                    std::fs::create_dir_all(&cli.out)?;
                    cli.out.join("reference.csv")
                }
            };
            save_csv(&motion, &path)?;
            println!(
                "wrote {} frames ({} m stride, {} s period) to {}",
                motion.frames().len(),
                motion.stride_length(),
                motion.stride_period(),
                path.display()
            );
        }
    }
    Ok(())
}

fn train(config: &Config, out: &Path, deterministic: bool) -> Result<strider::ppo::RunSummary> {
    let model = Arc::new(config.robot_model()?);
    let motion = Arc::new(config.reference_motion()?);
    let env = BipedEnv::new(model, motion, config.env_options(false)?);
    let mut trainer = Trainer::new(env, config.train_config())?;
    let summary = trainer.run(&RunOptions { out_dir: out.to_path_buf(), zero_timing: deterministic })?;
    std::fs::write(out.join("config_digest.txt"), format!("{}\n", config.digest()))?;
    Ok(summary)
}

/// Build the 2 kHz evaluation environment plus the policy bundle for a
/// checkpoint.
fn eval_setup(config: &Config, checkpoint: &Path) -> Result<(BipedEnv, PolicyBundle, String)> {
    let ck = load_checkpoint(checkpoint).context("loading checkpoint")?;
    let id = checkpoint_id(checkpoint)?;
    let env = make_test_env(config, &ck)?;
    let bundle = PolicyBundle::from_checkpoint(&ck, config.exploration_variance);
    Ok((env, bundle, id))
}

fn make_test_env(config: &Config, ck: &Checkpoint) -> Result<BipedEnv> {
    let model = Arc::new(config.robot_model()?);
    let motion = Arc::new(config.reference_motion()?);
    let env = BipedEnv::new(model, motion, config.env_options(true)?);
    if ck.actor.input_dim() != strider::control::OBS_DIM {
        bail!(
            "checkpoint actor expects {} inputs but the biped observation has {}",
            ck.actor.input_dim(),
            strider::control::OBS_DIM
        );
    }
    Ok(env)
}

fn eval(
    config: &Config,
    checkpoint: &Path,
    episodes: usize,
    deterministic: bool,
) -> Result<ExperimentReport> {
    let (env, bundle, id) = eval_setup(config, checkpoint)?;
    let results = run_eval(&env, &bundle, episodes, config.horizon, config.seed, deterministic)?;
    let rows = vec![SweepRow { label: "eval".to_string(), value: 0.0, episodes: results }];
    Ok(make_report(config, "eval", vec![id], rows, Vec::new()))
}

#[allow(clippy::too_many_arguments)]
fn interpolate(
    config: &Config,
    checkpoint1: &Path,
    checkpoint2: &Path,
    lambda: Option<f64>,
    speed_adaptive: bool,
    speed_scale1: f64,
    speed_scale2: f64,
    episodes: usize,
) -> Result<ExperimentReport> {
    let ck1 = load_checkpoint(checkpoint1).context("loading first checkpoint")?;
    let ck2 = load_checkpoint(checkpoint2).context("loading second checkpoint")?;
    let ids = vec![checkpoint_id(checkpoint1)?, checkpoint_id(checkpoint2)?];
    let model = Arc::new(config.robot_model()?);
    let mut base = config.clone();
    base.gait_speed_scale = 1.0;
    let unscaled = base.reference_motion()?;
    let motion1 = Arc::new(unscaled.retime(speed_scale1));
    let motion2 = Arc::new(unscaled.retime(speed_scale2));
    let bundle1 = PolicyBundle::from_checkpoint(&ck1, config.exploration_variance);
    let bundle2 = PolicyBundle::from_checkpoint(&ck2, config.exploration_variance);
    let mode = if let Some(l) = lambda {
        InterpolationMode::Fixed(l)
    } else if speed_adaptive {
        InterpolationMode::SpeedAdaptive
    } else {
        InterpolationMode::Schedule { rate: config.interp_rate }
    };
    let opts: BipedEnvOptions = config.env_options(true)?;
    let mut results = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let mut rng = protocol::interpolation_rng(config.seed, episode as u64);
        let mut summary = protocol::interpolate_episode(
            &model,
            &motion1,
            &motion2,
            &bundle1,
            &bundle2,
            mode,
            &opts,
            config.horizon,
            &mut rng,
        )?;
        summary.episode = episode;
        results.push(summary);
    }
    let label = match mode {
        InterpolationMode::Fixed(l) => format!("lambda={l}"),
        InterpolationMode::Schedule { rate } => format!("schedule rate={rate}"),
        InterpolationMode::SpeedAdaptive => "speed-adaptive".to_string(),
    };
    let rows = vec![SweepRow { label, value: 0.0, episodes: results }];
    Ok(make_report(config, "interpolate", ids, rows, Vec::new()))
}

fn make_report(
    config: &Config,
    kind: &str,
    checkpoint_ids: Vec<String>,
    rows: Vec<SweepRow>,
    notes: Vec<String>,
) -> ExperimentReport {
    ExperimentReport {
        kind: kind.to_string(),
        seed: config.seed,
        config_digest: config.digest(),
        checkpoint_ids,
        sim_rate_hz: 1.0 / config.sim_dt_test,
        policy_rate_hz: 1.0 / config.control_dt,
        rows,
        notes,
    }
}
