//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers on success (failures panic with the same detail).
//!
//! Full-scale published results come from tens of millions of training steps
//! plus real hardware flights; they are reproduced here only as qualitative
//! ordering targets. The suite instead pins property-based and desk-scale
//! checks with every tolerance written into the assertions below.

use std::sync::OnceLock;

use nalgebra::Vector3;
use padfall::config::RunConfig;
use padfall::ekf::{ekf_predict, ekf_update, EkfModel, EkfState};
use padfall::env::{reset_env, Action, EpisodeSetup};
use padfall::env::Outcome;
use padfall::eval::{
    landing_metrics, pearson, run_episode, run_scenario, scenario_by_name, Controller,
    EpisodeRecord,
};
use padfall::neural::{
    backward, forward, init_params, soft_update, MlpSpec, OutputActivation, ParamGrads, ParamSet,
};
use padfall::reward::{compute_reward, repulsive_potential, RewardContext, RewardParams};
use padfall::rng::{stream, Purpose};
use padfall::td3::{
    critic_targets, evaluate_policy, train, training_log_csv, update_actor_and_targets,
    update_critics, Learner, ReplayBuffer, SchedulePhase, Td3Config, Transition, ACT_DIM, OBS_DIM,
};
use padfall::wind::{gust_force_at_step, sample_episode_windiness, GustConfig};
use rand::Rng;

fn pass(criterion: u32, detail: &str) {
    println!("ACCEPTANCE {criterion:>2} PASS  {detail}");
}

fn base_setup() -> EpisodeSetup {
    RunConfig::default().base_setup()
}

/// The documented desk-scale training recipe (also in the README): reduced
/// networks and a near-unit discount so the progress shaping telescopes
/// instead of rewarding hover, on the reduced SPL-EASY task.
fn desk_td3_config() -> Td3Config {
    Td3Config {
        hidden_dims: vec![64, 64],
        discount: 0.999,
        eval_interval: 5_000,
        eval_episodes: 20,
        ..Td3Config::default()
    }
}

const DESK_STEPS: u64 = 150_000;
const DESK_SEED: u64 = 7;

struct TrainedArtifacts {
    actor: ParamSet,
    log: Vec<padfall::td3::TrainLogRow>,
    setup: EpisodeSetup,
}

/// Criteria 6 and 9 share one training run.
fn trained() -> &'static TrainedArtifacts {
    static CELL: OnceLock<TrainedArtifacts> = OnceLock::new();
    CELL.get_or_init(|| {
        let scenario = scenario_by_name("SPL-EASY").expect("catalog scenario");
        let setup = scenario.bind(&base_setup());
        let schedule = vec![SchedulePhase {
            name: scenario.name.clone(),
            setup: setup.clone(),
            steps: DESK_STEPS,
        }];
        let result = train(&schedule, &desk_td3_config(), DESK_SEED, None, "acceptance")
            .expect("training runs");
        TrainedArtifacts {
            actor: result.learner.actor,
            log: result.log,
            setup,
        }
    })
}

#[test]
fn criterion_01_scale_substitution_is_declared() {
    // Published tables/figures rest on ~35M-step training and hardware
    // flights; this artifact substitutes property-based and desk-scale
    // checks. The desk recipe referenced by the substitution must exist and
    // stay inside the stated budget.
    const { assert!(DESK_STEPS <= 500_000) };
    let cfg = desk_td3_config();
    assert!(cfg.validate().is_ok());
    pass(
        1,
        &format!(
            "published-scale results are ordering targets only; desk recipe: {DESK_STEPS} steps, hidden {:?}",
            cfg.hidden_dims
        ),
    );
}

#[test]
fn criterion_02_wind_gating_statistics() {
    let started = std::time::Instant::now();
    let cfg = GustConfig::default();

    let n_episodes = 100_000usize;
    let mut episode_rng = stream(2024, Purpose::WindEpisode, 0);
    let windy = (0..n_episodes)
        .filter(|_| sample_episode_windiness(&mut episode_rng, &cfg))
        .count();
    let windy_fraction = windy as f64 / n_episodes as f64;
    assert!(
        (0.19..=0.21).contains(&windy_fraction),
        "windy fraction {windy_fraction}"
    );

    // Step-level gate inside windy episodes.
    let n_steps = 100_000usize;
    let mut step_rng = stream(2024, Purpose::WindStep, 0);
    let mut active = 0usize;
    for _ in 0..n_steps {
        let f = gust_force_at_step(&mut step_rng, true, &cfg);
        if f != Vector3::zeros() {
            active += 1;
        }
        for i in 0..3 {
            assert!(
                f[i].abs() <= cfg.component_range,
                "gust component {} exceeded ±{}",
                f[i],
                cfg.component_range
            );
        }
    }
    let active_fraction = active as f64 / n_steps as f64;
    assert!(
        (0.19..=0.21).contains(&active_fraction),
        "active-step fraction {active_fraction}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        2,
        &format!(
            "windy {windy_fraction:.4}, active {active_fraction:.4}, zero bound violations in {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_03_reward_branch_suite() {
    let started = std::time::Instant::now();
    let params = RewardParams::default();

    // Branch (i) constant across far-field distances.
    let far: Vec<f64> = [2.1, 3.0, 10.0]
        .iter()
        .map(|&r| compute_reward(&RewardContext::at_rest(r), &params).unwrap())
        .collect();
    assert!(far.windows(2).all(|w| w[0] == w[1]), "far branch varies: {far:?}");

    // Branch (ii) antisymmetry to 1e-12.
    for delta in [1e-4, 0.01, 0.3, 0.8] {
        let fwd = compute_reward(
            &RewardContext {
                previous_distance: 1.0 + delta,
                ..RewardContext::at_rest(1.0)
            },
            &params,
        )
        .unwrap();
        let bwd = compute_reward(
            &RewardContext {
                previous_distance: 1.0 - delta,
                ..RewardContext::at_rest(1.0)
            },
            &params,
        )
        .unwrap();
        assert!((fwd + bwd).abs() < 1e-12, "antisymmetry residual {}", fwd + bwd);
    }

    // Repulsive zero branch exact at and beyond the cutoff; pinned value at
    // (η = 1, Q_max = 0.5, σ = 0.25).
    assert_eq!(repulsive_potential(0.5, 1.0, 0.5).unwrap(), 0.0);
    assert_eq!(repulsive_potential(0.75, 1.0, 0.5).unwrap(), 0.0);
    let pinned = repulsive_potential(0.25, 1.0, 0.5).unwrap();
    assert!((pinned - 2.0).abs() < 1e-12, "repulsive value {pinned}");

    // Safety penalty strictly lowers near-field reward.
    let base = RewardContext::at_rest(0.05);
    let hazard = RewardContext {
        drone_below_pad_surface: true,
        ..base
    };
    let r_base = compute_reward(&base, &params).unwrap();
    let r_hazard = compute_reward(&hazard, &params).unwrap();
    assert!(r_hazard < r_base, "beta did not bite: {r_hazard} vs {r_base}");

    // Outputs stay inside the open interval.
    let mut rng = stream(3, Purpose::Spawn, 0);
    for _ in 0..10_000 {
        let ctx = RewardContext {
            current_distance: rng.gen_range(0.0..15.0),
            previous_distance: rng.gen_range(0.0..15.0),
            nearest_obstacle_distance: rng.gen_range(0.001..3.0),
            relative_velocity: Vector3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ),
            drone_below_pad_surface: rng.r#gen(),
            near_pad_edge: rng.r#gen(),
        };
        let r = compute_reward(&ctx, &params).unwrap();
        assert!(r > -1.0 && r < 1.0, "reward {r} left (−1, 1)");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(3, &format!("branch constants, antisymmetry, η/Q_max value, β dominance in {elapsed:?}"));
}

/// Central finite differences on the f32-stored parameters; coordinates
/// whose ±h probes flip a rectifier gate are excluded (the two-sided
/// quotient is meaningless across the kink).
fn finite_difference_max_rel_error(spec: &MlpSpec, seed: u64, coords_per_layer: usize) -> f64 {
    let mut rng = stream(seed, Purpose::NetInit, 0);
    let mut params = init_params(spec, &mut rng).unwrap();
    let input: Vec<f32> = (0..spec.input_dim)
        .map(|_| (rng.r#gen::<f64>() * 2.0 - 1.0) as f32)
        .collect();
    let target: Vec<f64> = (0..spec.output_dim)
        .map(|_| rng.r#gen::<f64>() * 2.0 - 1.0)
        .collect();

    let loss_and_gates = |p: &ParamSet| {
        let (y, cache) = forward(p, &input).unwrap();
        let loss: f64 = y
            .iter()
            .zip(&target)
            .map(|(a, b)| 0.5 * (a - b) * (a - b))
            .sum();
        (loss, cache.relu_gates())
    };

    let (_, base_gates) = loss_and_gates(&params);
    let (y, cache) = forward(&params, &input).unwrap();
    let d_out: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
    let mut grads = ParamGrads::zeros(spec);
    backward(&params, &cache, &d_out, &mut grads).unwrap();

    let h = 1e-3f32;
    let mut max_rel: f64 = 0.0;
    let mut checked = 0usize;
    for li in 0..params.layers().len() {
        let w_len = params.layers()[li].weights.len();
        let step = (w_len / coords_per_layer).max(1);
        for idx in (0..w_len).step_by(step) {
            let orig = params.layers()[li].weights[idx];
            *params.weight_mut(li, idx) = orig + h;
            let w_plus = params.layers()[li].weights[idx];
            let (loss_plus, gates_plus) = loss_and_gates(&params);
            *params.weight_mut(li, idx) = orig - h;
            let w_minus = params.layers()[li].weights[idx];
            let (loss_minus, gates_minus) = loss_and_gates(&params);
            *params.weight_mut(li, idx) = orig;
            if gates_plus != base_gates || gates_minus != base_gates {
                continue;
            }
            let numeric = (loss_plus - loss_minus) / (w_plus as f64 - w_minus as f64);
            let analytic = grads.d_weights[li][idx];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max((analytic - numeric).abs() / denom);
            checked += 1;
        }
    }
    assert!(checked > 0, "every sampled coordinate hit a kink");
    max_rel
}

#[test]
fn criterion_04_gradient_correctness() {
    let started = std::time::Instant::now();
    // Three architectures, the published stack included (sampled
    // coordinates keep the big net inside budget).
    let cases = [
        (MlpSpec::new(4, &[8, 8], 2, OutputActivation::Tanh), usize::MAX),
        (MlpSpec::new(6, &[32, 16], 1, OutputActivation::Linear), usize::MAX),
        (MlpSpec::actor(OBS_DIM, &[512, 512, 256, 128], ACT_DIM), 24),
    ];
    let mut worst: f64 = 0.0;
    for (spec, coords) in &cases {
        for seed in 0..10 {
            let rel = finite_difference_max_rel_error(spec, seed, *coords);
            worst = worst.max(rel);
            assert!(
                rel < 1e-4,
                "finite differences disagree: rel {rel} on {spec:?} seed {seed}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(
        4,
        &format!("10 seeds x 3 architectures, max relative error {worst:.2e} in {elapsed:?}"),
    );
}

#[test]
fn criterion_05_td3_mechanics() {
    let started = std::time::Instant::now();

    // Terminal target is exactly the reward.
    let tiny = Td3Config {
        hidden_dims: vec![8],
        target_noise_std: 0.0,
        ..Td3Config::default()
    };
    let learner = Learner::new(&tiny, 3).unwrap();
    let done = Transition {
        obs: [0.2; OBS_DIM],
        action: [0.1; ACT_DIM],
        reward: -0.375,
        next_obs: [0.1; OBS_DIM],
        done: true,
    };
    let mut noise_rng = stream(0, Purpose::TargetNoise, 0);
    let y = critic_targets(&[&done], &learner, &mut noise_rng).unwrap();
    assert_eq!(y, vec![-0.375]);

    // Twin minimum: constant critics at 3 and 5 bootstrap from 3.
    let constant_critic = |value: f32| {
        let spec = MlpSpec::critic(OBS_DIM, &[8], ACT_DIM);
        let mut raw: Vec<(Vec<f32>, Vec<f32>)> = spec
            .layer_dims()
            .iter()
            .map(|(i, o)| (vec![0.0; i * o], vec![0.0; *o]))
            .collect();
        raw.last_mut().unwrap().1[0] = value;
        ParamSet::from_layers(spec, raw).unwrap()
    };
    let zero_actor = {
        let spec = MlpSpec::actor(OBS_DIM, &[8], ACT_DIM);
        let raw = spec
            .layer_dims()
            .iter()
            .map(|(i, o)| (vec![0.0; i * o], vec![0.0; *o]))
            .collect();
        ParamSet::from_layers(spec, raw).unwrap()
    };
    let twin = Learner::from_networks(&tiny, zero_actor, constant_critic(3.0), constant_critic(5.0))
        .unwrap();
    let not_done = Transition {
        done: false,
        ..done
    };
    let y = critic_targets(&[&not_done], &twin, &mut noise_rng).unwrap();
    assert!((y[0] - (-0.375 + tiny.discount * 3.0)).abs() < 1e-12, "y = {}", y[0]);

    // Exact τ-blend on a 1-parameter network.
    let one = MlpSpec::new(1, &[], 1, OutputActivation::Linear);
    let online = ParamSet::from_layers(one.clone(), vec![(vec![1.0], vec![0.0])]).unwrap();
    let mut target = ParamSet::from_layers(one.clone(), vec![(vec![0.0], vec![0.0])]).unwrap();
    soft_update(&mut target, &online, 0.005).unwrap();
    assert_eq!(target.layers()[0].weights[0], 0.005f64 as f32);
    let mut copied = ParamSet::from_layers(one, vec![(vec![-2.0], vec![0.5])]).unwrap();
    soft_update(&mut copied, &online, 1.0).unwrap();
    assert_eq!(copied.layers(), online.layers());

    // Actor and targets move only on delay boundaries.
    let mut learner = Learner::new(&tiny, 5).unwrap();
    let mut buffer = ReplayBuffer::new(64);
    for i in 0..16 {
        buffer.push(Transition {
            obs: [i as f32 / 16.0; OBS_DIM],
            action: [0.0; ACT_DIM],
            reward: 0.01 * i as f64,
            next_obs: [(i + 1) as f32 / 16.0; OBS_DIM],
            done: false,
        });
    }
    let mut replay_rng = stream(1, Purpose::Replay, 0);
    for update in 1..=4u64 {
        let batch = buffer.sample_batch(&mut replay_rng, 8).unwrap();
        let targets = critic_targets(&batch, &learner, &mut noise_rng).unwrap();
        update_critics(&mut learner, &batch, &targets).unwrap();
        let before = learner.actor.clone();
        let moved = update_actor_and_targets(&mut learner, &batch, update)
            .unwrap()
            .is_some();
        assert_eq!(moved, update % tiny.policy_delay == 0, "update {update}");
        if !moved {
            assert_eq!(before.layers(), learner.actor.layers());
        }
    }

    // A seeded 1000-step training run is bit-reproducible.
    let cfg = Td3Config {
        hidden_dims: vec![16, 16],
        batch_size: 32,
        learning_starts: 64,
        eval_interval: 500,
        eval_episodes: 2,
        ..Td3Config::default()
    };
    let scenario = scenario_by_name("SPL-EASY").unwrap();
    let mut setup = scenario.bind(&base_setup());
    setup.episode.max_duration = 4.0;
    let schedule = vec![SchedulePhase {
        name: "SPL-EASY".into(),
        setup,
        steps: 1000,
    }];
    let a = train(&schedule, &cfg, 13, None, "").unwrap();
    let b = train(&schedule, &cfg, 13, None, "").unwrap();
    assert_eq!(training_log_csv(&a.log), training_log_csv(&b.log));
    assert_eq!(a.learner.actor.layers(), b.learner.actor.layers());
    assert_eq!(a.learner.critic1.layers(), b.learner.critic1.layers());

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(5, &format!("targets, twin-min, τ-blend, delay gating, bit-identical 1000-step run in {elapsed:?}"));
}

#[test]
fn criterion_06_desk_scale_learning() {
    let started = std::time::Instant::now();
    let artifacts = trained();

    // ≥ 80% landings over 100 noise-free evaluation episodes on a fresh
    // seeded suite.
    let final_seed = padfall::rng::derive_seed(DESK_SEED, Purpose::Eval, 1);
    let (mean_reward, mean_len, success) =
        evaluate_policy(&artifacts.actor, &artifacts.setup, final_seed, 100).unwrap();
    assert!(
        success >= 0.80,
        "desk-scale success {success} below 0.80 (reward {mean_reward}, len {mean_len})"
    );

    // Learning-curve stand-in: eval mean reward non-decreasing across the
    // final three evaluation checkpoints.
    let tail: Vec<f64> = artifacts
        .log
        .iter()
        .rev()
        .take(3)
        .map(|r| r.mean_eval_reward)
        .collect();
    assert!(tail.len() == 3, "need at least three evaluation checkpoints");
    assert!(
        tail[2] <= tail[1] && tail[1] <= tail[0],
        "eval reward tail not non-decreasing: {:?}",
        tail.iter().rev().collect::<Vec<_>>()
    );

    let elapsed = started.elapsed();
    pass(
        6,
        &format!(
            "success {:.0}% over 100 episodes after {DESK_STEPS} steps, reward tail {:?} in {elapsed:?}",
            success * 100.0,
            tail.iter().rev().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_07_ekf_quality() {
    let started = std::time::Instant::now();
    let dt = 1.0 / 30.0;
    let model = EkfModel {
        dt_factor: dt,
        ..EkfModel::default()
    };

    // Synthetic constant-velocity 3D track with σ = 0.01 m measurements.
    let sigma = 0.01;
    let truth_v = Vector3::new(0.3, -0.15, 0.08);
    let truth_p0 = Vector3::new(0.5, -0.2, 0.4);
    let mut rng = stream(2025, Purpose::Spawn, 0);
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    use rand_distr::Distribution;

    let mut state: Option<EkfState> = None;
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    let mut min_eig = f64::INFINITY;
    let mut final_vel = Vector3::zeros();
    for k in 0..500 {
        let truth = truth_p0 + truth_v * (k as f64 * dt);
        let z = truth
            + Vector3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
        state = Some(match state.take() {
            None => EkfState::from_first_measurement(z, &model),
            Some(prev) => ekf_update(&ekf_predict(&prev, &model), z, &model).unwrap(),
        });
        let s = state.as_ref().unwrap();
        min_eig = min_eig.min(s.p.symmetric_eigen().eigenvalues.min());
        if k >= 100 {
            sq_sum += (s.position() - truth).norm_squared();
            count += 1;
        }
        final_vel = s.velocity();
    }
    let rmse = (sq_sum / count as f64).sqrt();
    let vel_err = (final_vel - truth_v).norm() / truth_v.norm();
    assert!(rmse < 0.01, "position RMSE {rmse} not below measurement σ");
    assert!(vel_err < 0.05, "velocity error {vel_err} above 5%");
    assert!(min_eig >= -1e-9, "covariance indefinite: min eigenvalue {min_eig}");

    // Fidelity mode reproduces the reference transition matrix entry for entry.
    let a = EkfModel::paper_fidelity().a_matrix();
    for r in 0..6 {
        for c in 0..6 {
            let expected = if r == c || c == r + 3 { 1.0 } else { 0.0 };
            assert_eq!(a[(r, c)], expected, "A[{r}][{c}]");
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    pass(
        7,
        &format!("RMSE {rmse:.5} m, velocity error {:.2}%, min eig {min_eig:.1e} in {elapsed:?}", vel_err * 100.0),
    );
}

fn baseline_controller() -> Controller {
    Controller::EkfBaseline {
        model: EkfModel::default(),
        cfg: Default::default(),
    }
}

fn scenario_with_episodes(name: &str, episodes: u64) -> padfall::eval::ScenarioSpec {
    let mut s = scenario_by_name(name).unwrap();
    s.episodes = episodes;
    s
}

#[test]
fn criterion_08_baseline_end_to_end() {
    let started = std::time::Instant::now();
    let base = base_setup();
    let baseline = baseline_controller();

    let spl = run_scenario(&baseline, &scenario_with_episodes("SPL", 20), &base, 1).unwrap();
    let spl_metrics = landing_metrics(&spl).unwrap();
    assert!(
        spl_metrics.success_rate >= 0.80,
        "baseline SPL success {}",
        spl_metrics.success_rate
    );

    let lmpl = run_scenario(&baseline, &scenario_with_episodes("LMPL", 20), &base, 1).unwrap();
    let lmpl_metrics = landing_metrics(&lmpl).unwrap();
    assert!(
        lmpl_metrics.success_rate <= spl_metrics.success_rate,
        "ordering violated: LMPL {} > SPL {}",
        lmpl_metrics.success_rate,
        spl_metrics.success_rate
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(
        8,
        &format!(
            "baseline SPL {:.0}%, LMPL {:.0}% (ordering holds) in {elapsed:?}",
            spl_metrics.success_rate * 100.0,
            lmpl_metrics.success_rate * 100.0
        ),
    );
}

#[test]
fn criterion_09_comparative_ordering() {
    let artifacts = trained();
    let started = std::time::Instant::now();
    let base = base_setup();
    let scenario = scenario_with_episodes("LMPL", 20);

    let policy = Controller::Policy(artifacts.actor.clone());
    let policy_records = run_scenario(&policy, &scenario, &base, 1).unwrap();
    let policy_metrics = landing_metrics(&policy_records).unwrap();

    let baseline_records = run_scenario(&baseline_controller(), &scenario, &base, 1).unwrap();
    let baseline_metrics = landing_metrics(&baseline_records).unwrap();

    assert!(
        policy_metrics.success_rate >= baseline_metrics.success_rate,
        "policy LMPL {} below baseline {}",
        policy_metrics.success_rate,
        baseline_metrics.success_rate
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    pass(
        9,
        &format!(
            "policy LMPL {:.0}% >= baseline {:.0}% on the identical suite in {elapsed:?}",
            policy_metrics.success_rate * 100.0,
            baseline_metrics.success_rate * 100.0
        ),
    );
}

#[test]
fn criterion_10_metrics_oracles() {
    let started = std::time::Instant::now();

    // Independent two-pass reference implementation.
    fn two_pass(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (xi, yi) in x.iter().zip(y) {
            sxx += (xi - mx) * (xi - mx);
            syy += (yi - my) * (yi - my);
            sxy += (xi - mx) * (yi - my);
        }
        (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
    }

    let mut rng = stream(10, Purpose::Spawn, 0);
    for _ in 0..1000 {
        let n = rng.gen_range(2..60);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        match (pearson(&x, &y).unwrap(), two_pass(&x, &y)) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-10, "{a} vs {b}"),
            (a, b) => assert_eq!(a.is_none(), b.is_none()),
        }
    }

    let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.13).sin() * 2.0 + i as f64 * 0.01).collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((pearson(&x, &x).unwrap().unwrap() - 1.0).abs() <= 1e-12);
    assert!((pearson(&x, &neg).unwrap().unwrap() + 1.0).abs() <= 1e-12);
    assert_eq!(pearson(&[3.5; 40], &x[..40]).unwrap(), None);

    // Precision stats on the hand-built {2, 4, 6} cm set.
    let record = |cm: f64| EpisodeRecord {
        scenario: "SPL".into(),
        episode_index: 0,
        rows: vec![],
        outcome: Outcome::Landed,
        windy_episode: false,
        valid: true,
        touchdown_xy_cm: Some(cm),
        touchdown_rel_speed: Some(0.1),
        impeller_offset: None,
    };
    let metrics = landing_metrics(&[record(2.0), record(4.0), record(6.0)]).unwrap();
    let p = metrics.precision.unwrap();
    assert!((p.mean_cm - 4.0).abs() < 1e-12);
    assert!((p.std_cm - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(p.min_cm, 2.0);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    pass(10, &format!("pearson two-pass agreement, exact ±1, undefined-on-constant, precision arithmetic in {elapsed:?}"));
}

#[test]
fn criterion_11_determinism_umbrella() {
    let started = std::time::Instant::now();

    // Reset.
    let setup = base_setup();
    let (_, obs_a) = reset_env(&setup, 404, 9).unwrap();
    let (_, obs_b) = reset_env(&setup, 404, 9).unwrap();
    assert_eq!(obs_a.0, obs_b.0);

    // Rollout under a scripted action sequence.
    let rollout = || {
        let (mut ep, _) = reset_env(&setup, 404, 9).unwrap();
        let mut trace = Vec::new();
        for k in 0..120 {
            if ep.terminated() {
                break;
            }
            let a = Action::new([(k as f64 * 0.31).sin(), 0.2, -0.8]);
            let r = ep.step(&a).unwrap();
            trace.push((r.observation.0, r.reward.to_bits(), r.outcome));
        }
        trace
    };
    assert_eq!(rollout(), rollout());

    // Training log (seeded, repeated).
    let cfg = Td3Config {
        hidden_dims: vec![8, 8],
        batch_size: 16,
        learning_starts: 32,
        eval_interval: 300,
        eval_episodes: 1,
        ..Td3Config::default()
    };
    let scenario = scenario_by_name("SPL-EASY").unwrap();
    let mut train_setup = scenario.bind(&setup);
    train_setup.episode.max_duration = 3.0;
    let schedule = vec![SchedulePhase {
        name: "SPL-EASY".into(),
        setup: train_setup,
        steps: 600,
    }];
    let log_a = training_log_csv(&train(&schedule, &cfg, 77, None, "").unwrap().log);
    let log_b = training_log_csv(&train(&schedule, &cfg, 77, None, "").unwrap().log);
    assert_eq!(log_a, log_b);

    // Reports: identical across reruns and across worker counts.
    let eval_scenario = scenario_with_episodes("CMPL", 6);
    let serial = run_scenario(&Controller::ScriptedOracle, &eval_scenario, &setup, 1).unwrap();
    let parallel = run_scenario(&Controller::ScriptedOracle, &eval_scenario, &setup, 4).unwrap();
    assert_eq!(serial, parallel, "worker count changed rollout results");
    let csv_once: Vec<String> = serial.iter().map(padfall::eval::episode_to_csv).collect();
    let csv_again: Vec<String> = parallel.iter().map(padfall::eval::episode_to_csv).collect();
    assert_eq!(csv_once, csv_again);

    let report_a = padfall::eval::report_tables(&[padfall::eval::metrics_report(
        "CMPL",
        "scripted-oracle",
        &serial,
    )
    .unwrap()]);
    let report_b = padfall::eval::report_tables(&[padfall::eval::metrics_report(
        "CMPL",
        "scripted-oracle",
        &parallel,
    )
    .unwrap()]);
    assert_eq!(report_a, report_b);

    // One scripted episode replayed through persistence stays identical.
    let rec_a = run_episode(&Controller::ScriptedOracle, &eval_scenario, &setup, 2).unwrap();
    let rec_b = run_episode(&Controller::ScriptedOracle, &eval_scenario, &setup, 2).unwrap();
    assert_eq!(rec_a, rec_b);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    pass(11, &format!("reset, rollout, training log, reports bit-identical (workers 1 vs 4) in {elapsed:?}"));
}
