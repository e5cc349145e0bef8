//! Twin Delayed DDPG learner.
//!
//! Standard TD3 machinery over the episode loop in [`crate::env`]: a ring
//! replay buffer, twin critics trained on the pessimistic min of smoothed
//! target actions, a delayed actor, and soft target updates. Rollouts run
//! single-threaded; that interleaving is the reference all determinism tests
//! compare against.
//!
//! Timeouts are truncations, not environment terminals: their transitions
//! carry `done = false` so value bootstrapping continues past the episode
//! cap. Landing and crash outcomes carry `done = true`.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{reset_env, Action, EpisodeSetup, NormalizedObs};
use crate::error::{Error, Result};
use crate::neural::{
    adam_update, backward, forward, init_params, soft_update, AdamState, MlpSpec, OutputActivation,
    ParamGrads, ParamSet,
};
use crate::rng::{derive_seed, stream, Purpose};

/// Observation width fed to the networks.
pub const OBS_DIM: usize = 15;
/// Action width produced by the actor.
pub const ACT_DIM: usize = 3;

/// One replay tuple. Observations are stored normalized, exactly as the
/// networks consume them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: [f32; OBS_DIM],
    pub action: [f32; ACT_DIM],
    pub reward: f64,
    pub next_obs: [f32; OBS_DIM],
    /// True only for environment terminals (landed / crash), never timeouts.
    pub done: bool,
}

/// Fixed-capacity ring buffer; oldest entries are overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 20)),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Entries in insertion order, oldest first.
    pub fn iter_in_order(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    /// Uniform with-replacement sample of `batch_size` entries. `None` until
    /// the buffer holds at least one transition.
    pub fn sample_batch(
        &self,
        rng: &mut ChaCha8Rng,
        batch_size: usize,
    ) -> Option<Vec<&Transition>> {
        if self.is_empty() {
            return None;
        }
        Some(
            (0..batch_size)
                .map(|_| &self.storage[rng.gen_range(0..self.storage.len())])
                .collect(),
        )
    }
}

/// Training protocol configuration. Values not fixed by the training recipe
/// being reproduced follow the canonical defaults of the framework it names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Td3Config {
    pub batch_size: usize,
    pub learning_starts: usize,
    pub discount: f64,
    pub soft_update_tau: f64,
    pub policy_delay: u64,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub exploration_noise_std: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub buffer_capacity: usize,
    /// Hidden widths shared by actor and critics.
    pub hidden_dims: Vec<usize>,
    /// Decision steps between noise-free evaluation rounds.
    pub eval_interval: u64,
    /// Episodes per evaluation round (a fixed seeded suite).
    pub eval_episodes: u64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            batch_size: 100,
            learning_starts: 100,
            discount: 0.99,
            soft_update_tau: 0.005,
            policy_delay: 2,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            exploration_noise_std: 0.1,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            buffer_capacity: 1_000_000,
            hidden_dims: vec![512, 512, 256, 128],
            eval_interval: 10_000,
            eval_episodes: 20,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount.is_finite() && self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config("discount must be in (0, 1]".into()));
        }
        if !(self.soft_update_tau.is_finite() && self.soft_update_tau > 0.0 && self.soft_update_tau <= 1.0) {
            return Err(Error::Config("soft_update_tau must be in (0, 1]".into()));
        }
        if self.policy_delay == 0 {
            return Err(Error::Config("policy_delay must be >= 1".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("batch_size and buffer_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// Actor, twin critics, their targets, and the optimizer states.
#[derive(Debug, Clone)]
pub struct Learner {
    pub actor: ParamSet,
    pub critic1: ParamSet,
    pub critic2: ParamSet,
    pub target_actor: ParamSet,
    pub target_critic1: ParamSet,
    pub target_critic2: ParamSet,
    adam_actor: AdamState,
    adam_critic1: AdamState,
    adam_critic2: AdamState,
    cfg: Td3Config,
}

impl Learner {
    pub fn new(cfg: &Td3Config, master_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let actor_spec = MlpSpec::actor(OBS_DIM, &cfg.hidden_dims, ACT_DIM);
        let critic_spec = MlpSpec::critic(OBS_DIM, &cfg.hidden_dims, ACT_DIM);
        let actor = init_params(&actor_spec, &mut stream(master_seed, Purpose::NetInit, 0))?;
        let critic1 = init_params(&critic_spec, &mut stream(master_seed, Purpose::NetInit, 1))?;
        let critic2 = init_params(&critic_spec, &mut stream(master_seed, Purpose::NetInit, 2))?;
        Ok(Self {
            target_actor: actor.clone(),
            target_critic1: critic1.clone(),
            target_critic2: critic2.clone(),
            adam_actor: AdamState::new(&actor_spec, cfg.actor_lr),
            adam_critic1: AdamState::new(&critic_spec, cfg.critic_lr),
            adam_critic2: AdamState::new(&critic_spec, cfg.critic_lr),
            actor,
            critic1,
            critic2,
            cfg: cfg.clone(),
        })
    }

    /// Wrap externally built networks (hand-crafted nets in tests).
    pub fn from_networks(
        cfg: &Td3Config,
        actor: ParamSet,
        critic1: ParamSet,
        critic2: ParamSet,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            target_actor: actor.clone(),
            target_critic1: critic1.clone(),
            target_critic2: critic2.clone(),
            adam_actor: AdamState::new(&actor.spec, cfg.actor_lr),
            adam_critic1: AdamState::new(&critic1.spec, cfg.critic_lr),
            adam_critic2: AdamState::new(&critic2.spec, cfg.critic_lr),
            actor,
            critic1,
            critic2,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.cfg
    }
}

/// Deterministic policy action (no exploration noise).
pub fn policy_action(actor: &ParamSet, obs: &NormalizedObs) -> Result<Action> {
    let (y, _) = forward(actor, &obs.0)?;
    Ok(Action::new([y[0], y[1], y[2]]))
}

/// Policy action with clipped Gaussian exploration noise.
pub fn exploration_action(
    actor: &ParamSet,
    obs: &NormalizedObs,
    rng: &mut ChaCha8Rng,
    noise_std: f64,
) -> Result<Action> {
    let (y, _) = forward(actor, &obs.0)?;
    let mut c = [0.0f64; ACT_DIM];
    for (i, slot) in c.iter_mut().enumerate() {
        let eps = if noise_std > 0.0 {
            Normal::new(0.0, noise_std)
                .expect("finite std")
                .sample(rng)
        } else {
            0.0
        };
        *slot = (y[i] + eps).clamp(-1.0, 1.0);
    }
    Ok(Action::new(c))
}

/// Uniform action over the cube, used to fill the buffer before learning
/// starts (the warmup convention of the framework this training protocol
/// follows).
pub fn warmup_action(rng: &mut ChaCha8Rng) -> Action {
    Action::new([
        rng.gen_range(-1.0..=1.0),
        rng.gen_range(-1.0..=1.0),
        rng.gen_range(-1.0..=1.0),
    ])
}

fn critic_input(obs: &[f32; OBS_DIM], action: &[f32; ACT_DIM]) -> [f32; OBS_DIM + ACT_DIM] {
    let mut input = [0.0f32; OBS_DIM + ACT_DIM];
    input[..OBS_DIM].copy_from_slice(obs);
    input[OBS_DIM..].copy_from_slice(action);
    input
}

/// Bootstrapped TD targets: y = r + γ·(1 − done)·min(Q'₁, Q'₂) at the target
/// policy's smoothed action.
pub fn critic_targets(
    batch: &[&Transition],
    learner: &Learner,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let cfg = &learner.cfg;
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        if t.done {
            targets.push(t.reward);
            continue;
        }
        let (pi, _) = forward(&learner.target_actor, &t.next_obs)?;
        let mut a = [0.0f32; ACT_DIM];
        for (i, slot) in a.iter_mut().enumerate() {
            let eps = if cfg.target_noise_std > 0.0 {
                Normal::new(0.0, cfg.target_noise_std)
                    .expect("finite std")
                    .sample(rng)
                    .clamp(-cfg.target_noise_clip, cfg.target_noise_clip)
            } else {
                0.0
            };
            *slot = (pi[i] + eps).clamp(-1.0, 1.0) as f32;
        }
        let input = critic_input(&t.next_obs, &a);
        let (q1, _) = forward(&learner.target_critic1, &input)?;
        let (q2, _) = forward(&learner.target_critic2, &input)?;
        targets.push(t.reward + cfg.discount * q1[0].min(q2[0]));
    }
    Ok(targets)
}

/// One Adam step per critic on the mean squared TD error. Returns the two
/// loss values.
pub fn update_critics(
    learner: &mut Learner,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<(f64, f64)> {
    if batch.len() != targets.len() {
        return Err(Error::Shape {
            expected: batch.len(),
            got: targets.len(),
        });
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut losses = [0.0f64; 2];
    for (ci, (critic, adam)) in [
        (&mut learner.critic1, &mut learner.adam_critic1),
        (&mut learner.critic2, &mut learner.adam_critic2),
    ]
    .into_iter()
    .enumerate()
    {
        let mut grads = ParamGrads::zeros(&critic.spec);
        let mut loss = 0.0;
        for (t, &y) in batch.iter().zip(targets) {
            let input = critic_input(&t.obs, &t.action);
            let (q, cache) = forward(critic, &input)?;
            let err = q[0] - y;
            loss += err * err * inv_b;
            backward(critic, &cache, &[2.0 * err * inv_b], &mut grads)?;
        }
        adam_update(critic, &grads, adam)?;
        losses[ci] = loss;
    }
    Ok((losses[0], losses[1]))
}

/// Delayed actor step and soft target updates. A no-op unless
/// `step_index % policy_delay == 0`. Returns the actor loss when it ran.
pub fn update_actor_and_targets(
    learner: &mut Learner,
    batch: &[&Transition],
    step_index: u64,
) -> Result<Option<f64>> {
    if !step_index.is_multiple_of(learner.cfg.policy_delay) {
        return Ok(None);
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut actor_grads = ParamGrads::zeros(&learner.actor.spec);
    let mut loss = 0.0;
    for t in batch {
        let (a, actor_cache) = forward(&learner.actor, &t.obs)?;
        let a32 = [a[0] as f32, a[1] as f32, a[2] as f32];
        let input = critic_input(&t.obs, &a32);
        let (q, critic_cache) = forward(&learner.critic1, &input)?;
        loss -= q[0] * inv_b;

        // dL/da through the critic input, then through the actor.
        let mut throwaway = ParamGrads::zeros(&learner.critic1.spec);
        let d_input = backward(&learner.critic1, &critic_cache, &[-inv_b], &mut throwaway)?;
        let d_action = &d_input[OBS_DIM..];
        backward(&learner.actor, &actor_cache, d_action, &mut actor_grads)?;
    }
    adam_update(&mut learner.actor, &actor_grads, &mut learner.adam_actor)?;

    let tau = learner.cfg.soft_update_tau;
    soft_update(&mut learner.target_actor, &learner.actor, tau)?;
    soft_update(&mut learner.target_critic1, &learner.critic1, tau)?;
    soft_update(&mut learner.target_critic2, &learner.critic2, tau)?;
    Ok(Some(loss))
}

/// One phase of a training schedule: a task and a decision-step budget.
#[derive(Debug, Clone)]
pub struct SchedulePhase {
    pub name: String,
    pub setup: EpisodeSetup,
    pub steps: u64,
}

/// One row of the training log, produced at every evaluation round.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub mean_eval_reward: f64,
    pub mean_episode_length: f64,
    pub eval_success_rate: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub learner: Learner,
    pub log: Vec<TrainLogRow>,
    pub episodes_completed: u64,
    pub total_steps: u64,
    /// Terminal outcome counts over the training rollouts.
    pub train_outcomes: std::collections::BTreeMap<&'static str, u64>,
}

/// Noise-free evaluation over a fixed seeded episode suite. Returns
/// (mean total reward, mean episode length, success rate).
pub fn evaluate_policy(
    actor: &ParamSet,
    setup: &EpisodeSetup,
    eval_seed: u64,
    episodes: u64,
) -> Result<(f64, f64, f64)> {
    let mut total_reward = 0.0;
    let mut total_len = 0.0;
    let mut successes = 0u64;
    for idx in 0..episodes {
        let (mut ep, mut obs) = reset_env(setup, eval_seed, idx)?;
        let mut ep_reward = 0.0;
        let mut len = 0u64;
        while !ep.terminated() {
            let action = policy_action(actor, &obs)?;
            let r = ep.step(&action)?;
            ep_reward += r.reward;
            obs = r.observation;
            len += 1;
        }
        if ep.outcome() == crate::env::Outcome::Landed {
            successes += 1;
        }
        total_reward += ep_reward;
        total_len += len as f64;
    }
    let n = episodes.max(1) as f64;
    Ok((
        total_reward / n,
        total_len / n,
        successes as f64 / n,
    ))
}

/// Run the TD3 training loop over a scenario schedule.
///
/// When `out_dir` is given, writes `training_log.csv` plus a versioned
/// checkpoint directory at every evaluation round and at the end.
pub fn train(
    schedule: &[SchedulePhase],
    cfg: &Td3Config,
    master_seed: u64,
    out_dir: Option<&Path>,
    config_hash: &str,
) -> Result<TrainResult> {
    cfg.validate()?;
    for phase in schedule {
        phase.setup.validate()?;
    }
    let mut learner = Learner::new(cfg, master_seed)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut replay_rng = stream(master_seed, Purpose::Replay, 0);
    let mut explore_rng = stream(master_seed, Purpose::Exploration, 0);
    let mut target_rng = stream(master_seed, Purpose::TargetNoise, 0);
    let eval_seed = derive_seed(master_seed, Purpose::Eval, 0);

    let mut log = Vec::new();
    let mut global_step = 0u64;
    let mut updates = 0u64;
    let mut episodes_completed = 0u64;
    let mut loss_acc = LossAccumulator::default();
    let mut train_outcomes = std::collections::BTreeMap::new();

    let total_budget: u64 = schedule.iter().map(|p| p.steps).sum();

    for phase in schedule {
        let mut phase_steps = 0u64;
        while phase_steps < phase.steps {
            let (mut ep, mut obs) = reset_env(&phase.setup, master_seed, episodes_completed)?;
            episodes_completed += 1;
            while !ep.terminated() && phase_steps < phase.steps {
                let action = if (global_step as usize) < cfg.learning_starts {
                    warmup_action(&mut explore_rng)
                } else {
                    exploration_action(
                        &learner.actor,
                        &obs,
                        &mut explore_rng,
                        cfg.exploration_noise_std,
                    )?
                };
                let result = ep.step(&action)?;
                buffer.push(Transition {
                    obs: obs.0,
                    action: action.as_f32(),
                    reward: result.reward,
                    next_obs: result.observation.0,
                    done: result.outcome.is_environment_terminal(),
                });
                obs = result.observation;
                global_step += 1;
                phase_steps += 1;

                if buffer.len() >= cfg.learning_starts.max(1) {
                    let batch = buffer
                        .sample_batch(&mut replay_rng, cfg.batch_size)
                        .expect("buffer non-empty");
                    let targets = critic_targets(&batch, &learner, &mut target_rng)?;
                    let (l1, l2) = update_critics(&mut learner, &batch, &targets)?;
                    updates += 1;
                    let actor_loss = update_actor_and_targets(&mut learner, &batch, updates)?;
                    loss_acc.add(l1, l2, actor_loss);
                    if !(l1.is_finite() && l2.is_finite()) {
                        return Err(Error::NonFiniteLoss {
                            step: global_step,
                            detail: format!("critic losses ({l1}, {l2})"),
                        });
                    }
                }

                if global_step.is_multiple_of(cfg.eval_interval) {
                    let (reward, len, success) =
                        evaluate_policy(&learner.actor, &phase.setup, eval_seed, cfg.eval_episodes)?;
                    let (critic_loss, actor_loss) = loss_acc.drain();
                    log.push(TrainLogRow {
                        step: global_step,
                        mean_eval_reward: reward,
                        mean_episode_length: len,
                        eval_success_rate: success,
                        critic_loss,
                        actor_loss,
                    });
                    if let Some(dir) = out_dir {
                        write_checkpoint(dir, &learner, global_step, master_seed, config_hash)?;
                        write_training_log(dir, &log)?;
                    }
                }
            }
            if ep.terminated() {
                *train_outcomes.entry(ep.outcome().as_str()).or_insert(0) += 1;
            }
        }
    }

    // A final eval row when the budget did not end exactly on the cadence.
    if log.last().map(|r| r.step) != Some(global_step) {
        if let Some(phase) = schedule.last() {
            let (reward, len, success) =
                evaluate_policy(&learner.actor, &phase.setup, eval_seed, cfg.eval_episodes)?;
            let (critic_loss, actor_loss) = loss_acc.drain();
            log.push(TrainLogRow {
                step: global_step,
                mean_eval_reward: reward,
                mean_episode_length: len,
                eval_success_rate: success,
                critic_loss,
                actor_loss,
            });
        }
    }
    if let Some(dir) = out_dir {
        write_checkpoint(dir, &learner, global_step, master_seed, config_hash)?;
        write_training_log(dir, &log)?;
        let final_dir = dir.join("checkpoint_final");
        copy_checkpoint(&checkpoint_dir(dir, global_step), &final_dir)?;
    }

    debug_assert_eq!(global_step, total_budget);
    Ok(TrainResult {
        learner,
        log,
        episodes_completed,
        total_steps: global_step,
        train_outcomes,
    })
}

#[derive(Default)]
struct LossAccumulator {
    critic_sum: f64,
    critic_n: u64,
    actor_sum: f64,
    actor_n: u64,
}

impl LossAccumulator {
    fn add(&mut self, l1: f64, l2: f64, actor: Option<f64>) {
        self.critic_sum += 0.5 * (l1 + l2);
        self.critic_n += 1;
        if let Some(a) = actor {
            self.actor_sum += a;
            self.actor_n += 1;
        }
    }

    fn drain(&mut self) -> (f64, f64) {
        let critic = if self.critic_n > 0 {
            self.critic_sum / self.critic_n as f64
        } else {
            0.0
        };
        let actor = if self.actor_n > 0 {
            self.actor_sum / self.actor_n as f64
        } else {
            0.0
        };
        *self = Self::default();
        (critic, actor)
    }
}

fn checkpoint_dir(out_dir: &Path, step: u64) -> std::path::PathBuf {
    out_dir.join(format!("checkpoint_{step:010}"))
}

/// Write all six networks plus the run manifest.
pub fn write_checkpoint(
    out_dir: &Path,
    learner: &Learner,
    step: u64,
    master_seed: u64,
    config_hash: &str,
) -> Result<()> {
    let dir = checkpoint_dir(out_dir, step);
    std::fs::create_dir_all(&dir)?;
    let nets: [(&str, &ParamSet); 6] = [
        ("actor.bin", &learner.actor),
        ("critic1.bin", &learner.critic1),
        ("critic2.bin", &learner.critic2),
        ("target_actor.bin", &learner.target_actor),
        ("target_critic1.bin", &learner.target_critic1),
        ("target_critic2.bin", &learner.target_critic2),
    ];
    for (name, params) in nets {
        crate::neural::save_params(&dir.join(name), params)?;
    }
    let manifest = serde_json::json!({
        "format": "padfall-checkpoint-v1",
        "step": step,
        "master_seed": master_seed,
        "config_hash": config_hash,
        "networks": ["actor.bin", "critic1.bin", "critic2.bin",
                     "target_actor.bin", "target_critic1.bin", "target_critic2.bin"],
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("static json"),
    )?;
    Ok(())
}

fn copy_checkpoint(from: &Path, to: &Path) -> Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        std::fs::copy(entry.path(), to.join(entry.file_name()))?;
    }
    Ok(())
}

/// Load the actor network from a checkpoint directory.
pub fn load_actor(checkpoint: &Path) -> Result<ParamSet> {
    let path = if checkpoint.is_dir() {
        checkpoint.join("actor.bin")
    } else {
        checkpoint.to_path_buf()
    };
    let params = crate::neural::load_params(&path)?;
    if params.spec.input_dim != OBS_DIM
        || params.spec.output_dim != ACT_DIM
        || params.spec.output_activation != OutputActivation::Tanh
    {
        return Err(Error::Checkpoint(format!(
            "not an actor network: {:?}",
            params.spec
        )));
    }
    Ok(params)
}

/// Render the training log in its stable CSV schema.
pub fn training_log_csv(log: &[TrainLogRow]) -> String {
    let mut out =
        String::from("step,mean_eval_reward,mean_episode_length,eval_success_rate,critic_loss,actor_loss\n");
    for row in log {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.step,
            row.mean_eval_reward,
            row.mean_episode_length,
            row.eval_success_rate,
            row.critic_loss,
            row.actor_loss
        ));
    }
    out
}

fn write_training_log(out_dir: &Path, log: &[TrainLogRow]) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("training_log.csv"), training_log_csv(log))?;
    Ok(())
}
