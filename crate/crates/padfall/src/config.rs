//! The run configuration: one TOML file driving simulation, training,
//! baseline, and evaluation, with full defaulting and strict key checking.
//!
//! `reference_config()` renders every default with a comment; the parser
//! round-trips it back to `RunConfig::default()` exactly, and unknown keys
//! anywhere in the tree are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ekf::{BaselineConfig, EkfModel};
use crate::env::{EpisodeConfig, EpisodeSetup, NormalizationRanges};
use crate::error::{Error, Result};
use crate::eval::{scenario_catalog, ScenarioSpec};
use crate::reward::{LandscapeGrid, RewardParams};
use crate::sim::{DroneParams, SimConfig};
use crate::td3::Td3Config;

/// One training phase: a scenario name and its decision-step budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePhaseConfig {
    pub scenario: String,
    pub steps: u64,
}

/// Training-run section: the scenario schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub schedule: Vec<SchedulePhaseConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: vec![SchedulePhaseConfig {
                scenario: "SPL-EASY".into(),
                steps: 150_000,
            }],
        }
    }
}

/// Baseline section: filter model plus pursuit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub model: EkfModel,
    pub control: BaselineConfig,
}

/// The whole run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for episode-parallel evaluation. Never changes results.
    pub workers: usize,
    pub sim: SimConfig,
    pub drone: DroneParams,
    pub episode: EpisodeConfig,
    pub reward: RewardParams,
    pub normalization: NormalizationRanges,
    pub td3: Td3Config,
    pub baseline: BaselineSection,
    pub train: TrainConfig,
    pub landscape: LandscapeGrid,
    /// Episode-count override applied to catalog scenarios (0 = keep each
    /// scenario's own default).
    pub scenario_episodes: u64,
    /// Extra or replacement scenarios; matched to the catalog by name.
    pub scenarios: Vec<ScenarioSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            output_dir: PathBuf::from("padfall_out"),
            workers: 1,
            sim: SimConfig::default(),
            drone: DroneParams::default(),
            episode: EpisodeConfig::default(),
            reward: RewardParams::default(),
            normalization: NormalizationRanges::default(),
            td3: Td3Config::default(),
            baseline: BaselineSection::default(),
            train: TrainConfig::default(),
            landscape: LandscapeGrid::default(),
            scenario_episodes: 0,
            scenarios: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.drone.validate(&self.sim)?;
        self.reward.validate()?;
        self.normalization.validate()?;
        self.td3.validate()?;
        self.baseline.control.validate()?;
        for s in &self.scenarios {
            s.validate()?;
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// The base task template every scenario binds onto.
    pub fn base_setup(&self) -> EpisodeSetup {
        EpisodeSetup {
            sim: self.sim.clone(),
            drone: self.drone.clone(),
            episode: self.episode,
            reward: self.reward,
            ranges: self.normalization,
            trajectory: crate::platform::TrajectorySpec::default(),
            gusts: crate::wind::GustConfig::off(),
            impeller: None,
        }
    }

    /// Resolve a scenario by name: config-defined scenarios shadow the
    /// catalog; the global episode override applies afterwards.
    pub fn scenario(&self, name: &str) -> Result<ScenarioSpec> {
        let mut spec = match self
            .scenarios
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
        {
            Some(custom) => custom.clone(),
            None => crate::eval::scenario_by_name(name)?,
        };
        if self.scenario_episodes > 0 {
            spec.episodes = self.scenario_episodes;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Every known scenario name (catalog plus config-defined).
    pub fn scenario_names(&self) -> Vec<String> {
        let mut names: Vec<String> = scenario_catalog().into_iter().map(|s| s.name).collect();
        for s in &self.scenarios {
            if !names.iter().any(|n| n.eq_ignore_ascii_case(&s.name)) {
                names.push(s.name.clone());
            }
        }
        names
    }

    /// Short content hash binding outputs to the configuration that
    /// produced them.
    pub fn content_hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse a TOML config, rejecting unknown keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Apply dotted-key overrides (`sim.physics_dt=0.005`, `td3.hidden_dims=[64,64]`)
/// on top of a parsed TOML document, then re-validate strictly.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut value: toml::Value =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    for spec in overrides {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
        let parsed: toml::Value = toml::from_str(&format!("v = {raw}"))
            .map(|t: toml::Table| t["v"].clone())
            .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
        set_path(&mut value, path.trim(), parsed)?;
    }
    let cfg: RunConfig = value
        .try_into()
        .map_err(|e| Error::Config(format!("config after overrides: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn set_path(root: &mut toml::Value, path: &str, new_value: toml::Value) -> Result<()> {
    let mut current = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = current
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), new_value);
            return Ok(());
        }
        current = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::Config(format!("empty override path '{path}'")))
}

/// The generated reference config: every key present at its default, with a
/// comment stating what it does. Parsing it yields `RunConfig::default()`.
pub fn reference_config() -> String {
    let d = RunConfig::default();
    let dims = format!("{:?}", d.td3.hidden_dims);
    format!(
        r#"# padfall run configuration (all values are the built-in defaults)

# Master seed every stream derives from.
master_seed = {master_seed}
# Output root; the PADFALL_OUT environment variable overrides it.
output_dir = "{output_dir}"
# Worker threads for episode-parallel evaluation (never changes results).
workers = {workers}
# Episode-count override for catalog scenarios (0 keeps their defaults).
scenario_episodes = {scen_eps}

[sim]
# Physics substep, s.
physics_dt = {physics_dt}
# Control decision period, s (must be an integer multiple of physics_dt).
control_period = {control_period}
# Gravity, m/s^2.
gravity = {gravity}

[sim.world_bounds]
# Setpoints are clamped into this box, m.
min = [{wb_min}]
max = [{wb_max}]

[drone]
# Vehicle mass, kg.
mass = {mass}
# Inertia diagonal, kg m^2.
inertia_diag = [{inertia}]
# Total thrust authority, N (must exceed hover weight).
max_total_thrust = {max_thrust}
# Linear drag per world axis, N s/m.
linear_drag_coeff = [{drag}]
# First-order attitude-loop time constant, s.
attitude_time_constant = {att_tc}
# Roll/pitch command limit, rad.
max_tilt = {max_tilt}
# Ground-effect gain k_g in 1 + k_g (r_prop / 4z)^2; 0 disables.
ground_effect_coeff = {ge}
# Propeller radius for the ground-effect model, m.
prop_radius = {prop}

[drone.pid_gains]
# Position-loop gains per axis, N/m, N/(m s), N s/m.
kp = [{kp}]
ki = [{ki}]
kd = [{kd}]
# Anti-windup clamp on each error integral, m s.
integrator_limit = {integ}

[episode]
# Episode wall-clock cap, s.
max_duration = {max_dur}
# Horizontal touchdown tolerance, m.
success_xy_tolerance = {xy_tol}
# Vertical touchdown window around the pad surface, m.
touchdown_height = {td_h}
# Maximum pad-relative touchdown speed, m/s.
max_touchdown_speed = {td_v}
# Abort distance from the pad, m.
out_of_bounds_distance = {oob}
# Crash depth below the pad surface while over it, m.
below_pad_margin = {bpm}

[episode.spawn_region]
# Drone spawn box as offsets from the pad start, m.
min = [{spawn_min}]
max = [{spawn_max}]

[reward]
# Far-field penalty argument.
gamma = {gamma}
# Progress-shaping scale, 1/m.
alpha = {alpha}
# Safety penalty below the pad or at its edge.
beta_penalty = {beta}
# Attractive potential strength, 1/m^2.
zeta = {zeta}
# Repulsive potential strength.
eta = {eta}
# Repulsive cutoff distance, m.
q_max = {q_max}
# Far/near field thresholds, m.
far_threshold = {far}
near_threshold = {near}
# Relative-speed penalty coefficient, s/m.
speed_coeff = {speed}
# Edge-proximity band width, m.
edge_margin = {edge}
# Evaluate the shaping band literally (identically zero) for fidelity runs.
literal_shaping = {literal}

[normalization]
# Observation clip bounds before scaling into [-1, 1].
theta = {n_theta}
v_xy = {n_vxy}
v_z = {n_vz}
omega = {n_omega}
d = {n_d}
delta_v = {n_dv}

[td3]
batch_size = {batch}
learning_starts = {starts}
discount = {discount}
soft_update_tau = {tau}
policy_delay = {delay}
target_noise_std = {tnoise}
target_noise_clip = {tclip}
exploration_noise_std = {enoise}
actor_lr = {alr}
critic_lr = {clr}
buffer_capacity = {cap}
# Hidden layer widths shared by actor and critics.
hidden_dims = {dims}
# Decision steps between evaluation rounds, and episodes per round.
eval_interval = {eint}
eval_episodes = {eeps}

[baseline.model]
# Position-velocity coupling; 1.0 reproduces the reference matrix.
dt_factor = {dtf}
q_pos = {qpos}
q_vel = {qvel}
r_meas = {rmeas}
p0_pos = {p0pos}
p0_vel = {p0vel}

[baseline.control]
pursuit_gain = {pgain}
vertical_gain = {vgain}
lookahead_horizon = {look}
descend_trigger_radius = {trig}
descent_rate = {drate}
approach_height = {appr}

[landscape]
# Reward-landscape export grid.
half_extent = {lhe}
resolution = {lres}

[train]
# Training phases: scenario name and decision-step budget, run in order.
[[train.schedule]]
scenario = "{sched_scen}"
steps = {sched_steps}
"#,
        master_seed = d.master_seed,
        output_dir = d.output_dir.display(),
        workers = d.workers,
        physics_dt = d.sim.physics_dt,
        control_period = d.sim.control_period,
        gravity = d.sim.gravity,
        wb_min = join(&d.sim.world_bounds.min),
        wb_max = join(&d.sim.world_bounds.max),
        mass = d.drone.mass,
        inertia = join(&d.drone.inertia_diag),
        max_thrust = d.drone.max_total_thrust,
        drag = join(&d.drone.linear_drag_coeff),
        att_tc = d.drone.attitude_time_constant,
        max_tilt = d.drone.max_tilt,
        ge = d.drone.ground_effect_coeff,
        prop = d.drone.prop_radius,
        kp = join(&d.drone.pid_gains.kp),
        ki = join(&d.drone.pid_gains.ki),
        kd = join(&d.drone.pid_gains.kd),
        integ = d.drone.pid_gains.integrator_limit,
        max_dur = d.episode.max_duration,
        xy_tol = d.episode.success_xy_tolerance,
        td_h = d.episode.touchdown_height,
        td_v = d.episode.max_touchdown_speed,
        oob = d.episode.out_of_bounds_distance,
        bpm = d.episode.below_pad_margin,
        spawn_min = join(&d.episode.spawn_region.min),
        spawn_max = join(&d.episode.spawn_region.max),
        gamma = d.reward.gamma,
        alpha = d.reward.alpha,
        beta = d.reward.beta_penalty,
        zeta = d.reward.zeta,
        eta = d.reward.eta,
        q_max = d.reward.q_max,
        far = d.reward.far_threshold,
        near = d.reward.near_threshold,
        speed = d.reward.speed_coeff,
        edge = d.reward.edge_margin,
        literal = d.reward.literal_shaping,
        n_theta = d.normalization.theta,
        n_vxy = d.normalization.v_xy,
        n_vz = d.normalization.v_z,
        n_omega = d.normalization.omega,
        n_d = d.normalization.d,
        n_dv = d.normalization.delta_v,
        batch = d.td3.batch_size,
        starts = d.td3.learning_starts,
        discount = d.td3.discount,
        tau = d.td3.soft_update_tau,
        delay = d.td3.policy_delay,
        tnoise = d.td3.target_noise_std,
        tclip = d.td3.target_noise_clip,
        enoise = d.td3.exploration_noise_std,
        alr = d.td3.actor_lr,
        clr = d.td3.critic_lr,
        cap = d.td3.buffer_capacity,
        dims = dims,
        eint = d.td3.eval_interval,
        eeps = d.td3.eval_episodes,
        dtf = d.baseline.model.dt_factor,
        qpos = d.baseline.model.q_pos,
        qvel = d.baseline.model.q_vel,
        rmeas = d.baseline.model.r_meas,
        p0pos = d.baseline.model.p0_pos,
        p0vel = d.baseline.model.p0_vel,
        pgain = d.baseline.control.pursuit_gain,
        vgain = d.baseline.control.vertical_gain,
        look = d.baseline.control.lookahead_horizon,
        trig = d.baseline.control.descend_trigger_radius,
        drate = d.baseline.control.descent_rate,
        appr = d.baseline.control.approach_height,
        lhe = d.landscape.half_extent,
        lres = d.landscape.resolution,
        scen_eps = d.scenario_episodes,
        sched_scen = d.train.schedule[0].scenario,
        sched_steps = d.train.schedule[0].steps,
    )
}

fn join(values: &[f64; 3]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(", ")
}
