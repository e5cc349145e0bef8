//! The episode loop: observation building, action mapping, disturbance
//! injection, reward evaluation, and termination.
//!
//! One `Episode` is one rollout. All of its randomness (spawn point, wind
//! coins, trajectory realization) derives from `(master_seed, episode_index)`
//! substreams, so distinct episodes never share state and identical inputs
//! replay bit-identically.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::{pad_frame_offset, PadState, TrajectoryCursor, TrajectorySpec};
use crate::reward::{compute_reward, RewardContext, RewardParams};
use crate::rng::{derive_seed, stream, Purpose};
use crate::sim::{step_physics, Aabb, DroneParams, DroneState, PidState, SimConfig};
use crate::wind::{GustConfig, ImpellerSpec, WindSchedule};

/// Meters of setpoint displacement per unit of action component.
pub const ACTION_POSITION_SCALE: f64 = 0.1;

/// The 15-dimensional raw observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Drone attitude (roll, pitch, yaw), rad.
    pub theta: Vector3<f64>,
    /// Drone linear velocity, m/s.
    pub v: Vector3<f64>,
    /// Drone angular velocity, rad/s.
    pub omega: Vector3<f64>,
    /// Pad position relative to the drone, m.
    pub d: Vector3<f64>,
    /// Pad velocity relative to the drone, m/s.
    pub delta_v: Vector3<f64>,
}

impl Observation {
    pub fn to_array(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        for i in 0..3 {
            out[i] = self.theta[i];
            out[3 + i] = self.v[i];
            out[6 + i] = self.omega[i];
            out[9 + i] = self.d[i];
            out[12 + i] = self.delta_v[i];
        }
        out
    }
}

/// Observation after clip-and-scale, every component in [−1, 1], stored at
/// the 32-bit precision the networks consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedObs(pub [f32; 15]);

/// Per-component clip bounds for normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationRanges {
    pub theta: f64,
    pub v_xy: f64,
    pub v_z: f64,
    pub omega: f64,
    pub d: f64,
    pub delta_v: f64,
}

impl Default for NormalizationRanges {
    fn default() -> Self {
        Self {
            theta: std::f64::consts::PI,
            v_xy: 3.0,
            v_z: 2.0,
            omega: 2.0 * std::f64::consts::PI,
            d: 2.0,
            delta_v: 3.46,
        }
    }
}

impl NormalizationRanges {
    pub fn validate(&self) -> Result<()> {
        let bounds = [
            self.theta, self.v_xy, self.v_z, self.omega, self.d, self.delta_v,
        ];
        if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::Config("normalization bounds must be > 0".into()));
        }
        Ok(())
    }
}

/// Copy drone and pad kinematics into the raw observation.
pub fn build_observation(drone: &DroneState, pad: &PadState) -> Observation {
    Observation {
        theta: drone.attitude,
        v: drone.velocity,
        omega: drone.angular_velocity,
        d: pad_frame_offset(drone.position, pad),
        delta_v: pad.velocity - drone.velocity,
    }
}

fn clip_scale(x: f64, bound: f64) -> f32 {
    (x.clamp(-bound, bound) / bound) as f32
}

/// Clip each component to its bound, then scale into [−1, 1].
pub fn normalize_observation(raw: &Observation, ranges: &NormalizationRanges) -> NormalizedObs {
    let mut out = [0.0f32; 15];
    for i in 0..3 {
        out[i] = clip_scale(raw.theta[i], ranges.theta);
        out[3 + i] = clip_scale(
            raw.v[i],
            if i == 2 { ranges.v_z } else { ranges.v_xy },
        );
        out[6 + i] = clip_scale(raw.omega[i], ranges.omega);
        out[9 + i] = clip_scale(raw.d[i], ranges.d);
        out[12 + i] = clip_scale(raw.delta_v[i], ranges.delta_v);
    }
    NormalizedObs(out)
}

/// A 3-component setpoint-delta command, each component clamped to [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action(pub [f64; 3]);

impl Action {
    pub fn new(c: [f64; 3]) -> Self {
        Self([
            c[0].clamp(-1.0, 1.0),
            c[1].clamp(-1.0, 1.0),
            c[2].clamp(-1.0, 1.0),
        ])
    }

    pub fn zero() -> Self {
        Self([0.0; 3])
    }

    pub fn as_f32(&self) -> [f32; 3] {
        [self.0[0] as f32, self.0[1] as f32, self.0[2] as f32]
    }
}

/// Map an action to an absolute position setpoint: current position plus
/// 0.1 m per unit command, clamped into the world bounds.
pub fn apply_action(drone: &DroneState, action: &Action, bounds: &Aabb) -> Vector3<f64> {
    let c = Action::new(action.0);
    let setpoint = drone.position
        + Vector3::new(c.0[0], c.0[1], c.0[2]) * ACTION_POSITION_SCALE;
    bounds.clamp(setpoint)
}

/// Why an episode ended (or that it has not).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    InProgress,
    Landed,
    OutOfBounds,
    BelowPadFloor,
    Timeout,
}

impl Outcome {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Outcome::InProgress)
    }

    /// Whether value bootstrapping should stop at this outcome. Timeouts are
    /// artificial truncations, not environment terminals, so learning keeps
    /// bootstrapping through them.
    pub fn is_environment_terminal(&self) -> bool {
        matches!(
            self,
            Outcome::Landed | Outcome::OutOfBounds | Outcome::BelowPadFloor
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::InProgress => "in_progress",
            Outcome::Landed => "landed",
            Outcome::OutOfBounds => "out_of_bounds",
            Outcome::BelowPadFloor => "below_pad_floor",
            Outcome::Timeout => "timeout",
        }
    }
}

/// Episode-level limits and the success predicate constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    /// Wall-clock cap per episode, s.
    pub max_duration: f64,
    /// Drone spawn box, as offsets from the pad's start position, m.
    pub spawn_region: Aabb,
    /// Horizontal touchdown tolerance, m.
    pub success_xy_tolerance: f64,
    /// Vertical window around the pad top surface that counts as touching, m.
    pub touchdown_height: f64,
    /// Maximum pad-relative speed at touchdown, m/s.
    pub max_touchdown_speed: f64,
    /// Target distance beyond which the episode aborts, m.
    pub out_of_bounds_distance: f64,
    /// How far below the pad surface (while over the pad) counts as a crash, m.
    pub below_pad_margin: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_duration: 20.0,
            spawn_region: Aabb::new([-1.0, -1.0, 0.5], [1.0, 1.0, 1.5]),
            success_xy_tolerance: 0.25,
            touchdown_height: 0.01,
            max_touchdown_speed: 0.5,
            out_of_bounds_distance: 4.0,
            below_pad_margin: 0.05,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, pad_half_extent: f64) -> Result<()> {
        if !(self.max_duration.is_finite() && self.max_duration > 0.0) {
            return Err(Error::Config("max_duration must be > 0".into()));
        }
        if self.success_xy_tolerance > pad_half_extent {
            return Err(Error::Config(format!(
                "success_xy_tolerance {} exceeds pad half extent {pad_half_extent}",
                self.success_xy_tolerance
            )));
        }
        Ok(())
    }
}

/// Everything needed to instantiate episodes of one task variant.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSetup {
    pub sim: SimConfig,
    pub drone: DroneParams,
    pub episode: EpisodeConfig,
    pub reward: RewardParams,
    pub ranges: NormalizationRanges,
    pub trajectory: TrajectorySpec,
    pub gusts: GustConfig,
    pub impeller: Option<ImpellerSpec>,
}

impl EpisodeSetup {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.drone.validate(&self.sim)?;
        self.episode.validate(self.trajectory.half_extent)?;
        self.reward.validate()?;
        self.ranges.validate()?;
        self.trajectory.validate()?;
        self.gusts.validate()?;
        if let Some(imp) = &self.impeller {
            imp.validate()?;
        }
        Ok(())
    }
}

/// Diagnostics attached to every step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    /// Simulation time after the step, s.
    pub time: f64,
    /// 3D distance to the pad center after the step, m.
    pub distance_to_pad: f64,
    /// External disturbance applied at the first substep (gust + jet), N.
    pub applied_force: Vector3<f64>,
    /// True when any disturbance force acted during this decision step.
    pub wind_active: bool,
    pub drone: DroneState,
    pub pad: PadState,
    /// The absolute setpoint held during this decision.
    pub setpoint: Vector3<f64>,
}

/// Outcome of one decision step.
#[derive(Debug, Clone, Copy)]
pub struct StepResult {
    pub observation: NormalizedObs,
    pub reward: f64,
    pub terminated: bool,
    pub outcome: Outcome,
    pub info: StepInfo,
}

/// One rollout in progress.
#[derive(Debug, Clone)]
pub struct Episode {
    setup: EpisodeSetup,
    cursor: TrajectoryCursor,
    wind: WindSchedule,
    drone: DroneState,
    pid: PidState,
    time: f64,
    decision_step: usize,
    prev_distance: f64,
    outcome: Outcome,
    episode_index: u64,
}

/// Spawn the drone, place the pad at its t = 0 pose, and sample the episode's
/// wind coin. Returns the episode plus the initial normalized observation.
pub fn reset_env(
    setup: &EpisodeSetup,
    master_seed: u64,
    episode_index: u64,
) -> Result<(Episode, NormalizedObs)> {
    setup.validate()?;

    let mut trajectory = setup.trajectory.clone();
    trajectory.seed = derive_seed(master_seed, Purpose::Trajectory, episode_index);
    let mut cursor = TrajectoryCursor::new(trajectory);
    let pad0 = cursor.state_at(0.0)?;

    let mut spawn_rng = stream(master_seed, Purpose::Spawn, episode_index);
    let region = &setup.episode.spawn_region;
    let offset = Vector3::new(
        spawn_rng.gen_range(region.min[0]..=region.max[0]),
        spawn_rng.gen_range(region.min[1]..=region.max[1]),
        spawn_rng.gen_range(region.min[2]..=region.max[2]),
    );
    let drone = DroneState::at_rest(pad0.position + offset);

    let mut wind_episode_rng = stream(master_seed, Purpose::WindEpisode, episode_index);
    let wind_step_rng = stream(master_seed, Purpose::WindStep, episode_index);
    let wind = WindSchedule::sample(&mut wind_episode_rng, wind_step_rng, setup.gusts);

    let prev_distance = (pad0.position - drone.position).norm();
    let obs = normalize_observation(&build_observation(&drone, &pad0), &setup.ranges);
    Ok((
        Episode {
            setup: setup.clone(),
            cursor,
            wind,
            drone,
            pid: PidState::default(),
            time: 0.0,
            decision_step: 0,
            prev_distance,
            outcome: Outcome::InProgress,
            episode_index,
        },
        obs,
    ))
}

impl Episode {
    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn terminated(&self) -> bool {
        self.outcome.is_terminal()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn decision_step(&self) -> usize {
        self.decision_step
    }

    pub fn drone(&self) -> &DroneState {
        &self.drone
    }

    pub fn episode_index(&self) -> u64 {
        self.episode_index
    }

    pub fn is_windy(&self) -> bool {
        self.wind.is_windy()
    }

    pub fn current_pad(&mut self) -> Result<PadState> {
        self.cursor.state_at(self.time)
    }

    pub fn setup(&self) -> &EpisodeSetup {
        &self.setup
    }

    /// Advance one control decision using the standard action mapping.
    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        let setpoint = apply_action(&self.drone, action, &self.setup.sim.world_bounds);
        self.step_with_setpoint(setpoint)
    }

    /// Advance one control decision holding an explicit absolute setpoint.
    /// This is the hook scripted controllers (oracle, baseline) drive; the
    /// learned-action path is `step`.
    pub fn step_with_setpoint(&mut self, raw_setpoint: Vector3<f64>) -> Result<StepResult> {
        if self.terminated() {
            return Err(Error::Usage("step on a terminated episode".into()));
        }
        let setup = &self.setup;
        let setpoint = setup.sim.world_bounds.clamp(raw_setpoint);
        let dt = setup.sim.physics_dt;
        let gust = self.wind.force_at(self.decision_step);

        let mut applied_first = Vector3::zeros();
        let mut wind_active = gust.norm() > 0.0;
        let mut outcome = Outcome::InProgress;

        for k in 0..setup.sim.substeps_per_decision() {
            let pad_now = self.cursor.state_at(self.time)?;
            let jet = match &setup.impeller {
                Some(spec) => crate::wind::impeller_force(self.drone.position, &pad_now, spec),
                None => Vector3::zeros(),
            };
            let force = gust + jet;
            if jet.norm() > 1e-6 {
                wind_active = true;
            }
            if k == 0 {
                applied_first = force;
            }

            let over_pad = horizontal_distance(self.drone.position, pad_now.position)
                <= pad_now.half_extent;
            let ground_ref = over_pad.then_some(pad_now.position.z);

            self.drone = step_physics(
                &self.drone,
                setpoint,
                force,
                ground_ref,
                &mut self.pid,
                &setup.drone,
                &setup.sim,
            )?;
            self.time += dt;

            let pad_next = self.cursor.state_at(self.time)?;
            outcome = self.check_spatial_termination(&pad_next);
            if outcome.is_terminal() {
                break;
            }
        }

        if !outcome.is_terminal() && self.time >= setup.episode.max_duration - 1e-9 {
            outcome = Outcome::Timeout;
        }
        self.outcome = outcome;
        self.decision_step += 1;

        let pad = self.cursor.state_at(self.time)?;
        let distance = (pad.position - self.drone.position).norm();
        let ctx = RewardContext {
            current_distance: distance,
            previous_distance: self.prev_distance,
            nearest_obstacle_distance: f64::INFINITY,
            relative_velocity: self.drone.velocity - pad.velocity,
            drone_below_pad_surface: self.drone.position.z < pad.position.z,
            near_pad_edge: self.near_pad_edge(&pad),
        };
        let reward = compute_reward(&ctx, &setup.reward)?;
        self.prev_distance = distance;

        let observation = normalize_observation(&build_observation(&self.drone, &pad), &setup.ranges);
        Ok(StepResult {
            observation,
            reward,
            terminated: outcome.is_terminal(),
            outcome,
            info: StepInfo {
                time: self.time,
                distance_to_pad: distance,
                applied_force: applied_first,
                wind_active,
                drone: self.drone,
                pad,
                setpoint,
            },
        })
    }

    fn check_spatial_termination(&self, pad: &PadState) -> Outcome {
        let cfg = &self.setup.episode;
        let hd = horizontal_distance(self.drone.position, pad.position);
        let dz = self.drone.position.z - pad.position.z;
        let rel_speed = (self.drone.velocity - pad.velocity).norm();

        if hd <= cfg.success_xy_tolerance
            && dz.abs() <= cfg.touchdown_height
            && rel_speed <= cfg.max_touchdown_speed
        {
            return Outcome::Landed;
        }
        if (pad.position - self.drone.position).norm() > cfg.out_of_bounds_distance {
            return Outcome::OutOfBounds;
        }
        if hd <= pad.half_extent && dz < -cfg.below_pad_margin {
            return Outcome::BelowPadFloor;
        }
        Outcome::InProgress
    }

    /// Hugging the pad rim: horizontally within `edge_margin` of the pad
    /// boundary while near the pad plane.
    fn near_pad_edge(&self, pad: &PadState) -> bool {
        let hd = horizontal_distance(self.drone.position, pad.position);
        let dz = self.drone.position.z - pad.position.z;
        (hd - pad.half_extent).abs() <= self.setup.reward.edge_margin && dz < 0.1
    }
}

fn horizontal_distance(a: Vector3<f64>, b: Vector3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::TrajectoryKind;
    use approx::assert_abs_diff_eq;

    pub(crate) fn test_setup() -> EpisodeSetup {
        EpisodeSetup {
            sim: SimConfig::default(),
            drone: DroneParams {
                ground_effect_coeff: 0.0,
                ..DroneParams::default()
            },
            episode: EpisodeConfig::default(),
            reward: RewardParams::default(),
            ranges: NormalizationRanges::default(),
            trajectory: TrajectorySpec::default(),
            gusts: GustConfig::off(),
            impeller: None,
        }
    }

    fn drone_at(p: [f64; 3]) -> DroneState {
        DroneState::at_rest(Vector3::from(p))
    }

    fn static_pad() -> PadState {
        PadState {
            position: Vector3::new(0.0, 0.0, 0.5),
            velocity: Vector3::zeros(),
            half_extent: 0.25,
        }
    }

    #[test]
    fn observation_on_pad_center_is_null() {
        let pad = static_pad();
        let drone = drone_at([0.0, 0.0, 0.5]);
        let obs = build_observation(&drone, &pad);
        assert_eq!(obs.d, Vector3::zeros());
        assert_eq!(obs.delta_v, Vector3::zeros());
    }

    #[test]
    fn observation_sees_pad_velocity() {
        let mut pad = static_pad();
        pad.velocity = Vector3::new(0.46, 0.0, 0.0);
        let obs = build_observation(&drone_at([0.0, 0.0, 1.0]), &pad);
        assert_eq!(obs.delta_v, Vector3::new(0.46, 0.0, 0.0));
    }

    #[test]
    fn observation_matches_subtraction_oracle() {
        use rand::Rng;
        let mut rng = stream(4, Purpose::Spawn, 2);
        for _ in 0..1000 {
            let dp: [f64; 3] = rng.r#gen();
            let dv: [f64; 3] = rng.r#gen();
            let pp: [f64; 3] = rng.r#gen();
            let pv: [f64; 3] = rng.r#gen();
            let drone = DroneState {
                position: Vector3::from(dp),
                velocity: Vector3::from(dv),
                attitude: Vector3::zeros(),
                angular_velocity: Vector3::zeros(),
            };
            let pad = PadState {
                position: Vector3::from(pp),
                velocity: Vector3::from(pv),
                half_extent: 0.25,
            };
            let obs = build_observation(&drone, &pad);
            for i in 0..3 {
                assert_eq!(obs.d[i], pp[i] - dp[i]);
                assert_eq!(obs.delta_v[i], pv[i] - dv[i]);
            }
        }
    }

    #[test]
    fn normalization_cases() {
        let ranges = NormalizationRanges::default();
        let raw = Observation {
            theta: Vector3::zeros(),
            v: Vector3::new(3.0, 0.0, -5.0),
            omega: Vector3::zeros(),
            d: Vector3::new(0.0, -3.0, 1.0),
            delta_v: Vector3::zeros(),
        };
        let n = normalize_observation(&raw, &ranges).0;
        assert_eq!(n[3], 1.0); // v_x at the bound
        assert_eq!(n[4], 0.0); // zero maps to zero
        assert_eq!(n[5], -1.0); // v_z clipped
        assert_eq!(n[10], -1.0); // d_y clipped at ±2
        assert_eq!(n[11], 0.5); // d_z = 1 against bound 2
    }

    #[test]
    fn normalized_components_always_bounded() {
        use rand::Rng;
        let ranges = NormalizationRanges::default();
        let mut rng = stream(6, Purpose::Spawn, 3);
        for _ in 0..2000 {
            let mut big = || {
                Vector3::new(
                    rng.gen_range(-100.0..100.0),
                    rng.gen_range(-100.0..100.0),
                    rng.gen_range(-100.0..100.0),
                )
            };
            let raw = Observation {
                theta: big(),
                v: big(),
                omega: big(),
                d: big(),
                delta_v: big(),
            };
            let n = normalize_observation(&raw, &ranges).0;
            assert!(n.iter().all(|c| (-1.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn action_mapping_cases() {
        let bounds = SimConfig::default().world_bounds;
        let drone = drone_at([0.0, 0.0, 1.0]);
        let sp = apply_action(&drone, &Action::new([1.0, 0.0, -1.0]), &bounds);
        assert_abs_diff_eq!(
            (sp - Vector3::new(0.1, 0.0, 0.9)).norm(),
            0.0,
            epsilon = 1e-15
        );

        let hold = apply_action(&drone, &Action::zero(), &bounds);
        assert_eq!(hold, drone.position);

        let from_ones = apply_action(&drone_at([1.0, 1.0, 1.0]), &Action::new([0.5, 0.5, 0.0]), &bounds);
        assert_abs_diff_eq!(
            (from_ones - Vector3::new(1.05, 1.05, 1.0)).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn action_components_clamped_and_step_bounded() {
        let bounds = SimConfig::default().world_bounds;
        let drone = drone_at([0.0, 0.0, 1.0]);
        let sp = apply_action(&drone, &Action::new([7.0, -3.0, 0.2]), &bounds);
        let delta = sp - drone.position;
        assert!(delta.norm() <= ACTION_POSITION_SCALE * 3.0f64.sqrt() + 1e-12);
        assert_abs_diff_eq!(delta.x, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(delta.y, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn reset_is_deterministic_per_seed_and_index() {
        let setup = test_setup();
        let (_, a) = reset_env(&setup, 99, 3).unwrap();
        let (_, b) = reset_env(&setup, 99, 3).unwrap();
        assert_eq!(a.0, b.0);
        let (_, c) = reset_env(&setup, 99, 4).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn distinct_indices_spawn_distinct_points() {
        let setup = test_setup();
        let mut seen = Vec::new();
        for idx in 0..1000u64 {
            let (ep, _) = reset_env(&setup, 7, idx).unwrap();
            seen.push(ep.drone.position);
        }
        for i in 0..seen.len() {
            for j in i + 1..seen.len() {
                assert_ne!(seen[i], seen[j], "episodes {i} and {j} collided");
            }
        }
    }

    #[test]
    fn calm_scenario_never_applies_gusts() {
        let setup = test_setup();
        let (mut ep, _) = reset_env(&setup, 5, 0).unwrap();
        assert!(!ep.is_windy());
        for _ in 0..10 {
            let r = ep.step(&Action::zero()).unwrap();
            assert_eq!(r.info.applied_force, Vector3::zeros());
            assert!(!r.info.wind_active);
            if r.terminated {
                break;
            }
        }
    }

    #[test]
    fn spawned_on_pad_lands_immediately() {
        let mut setup = test_setup();
        // Spawn box degenerate at the pad center itself.
        setup.episode.spawn_region = Aabb::new([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let (mut ep, _) = reset_env(&setup, 1, 0).unwrap();
        let r = ep.step(&Action::zero()).unwrap();
        assert_eq!(r.outcome, Outcome::Landed);
        assert!(r.terminated);
    }

    #[test]
    fn far_spawn_aborts_out_of_bounds() {
        let mut setup = test_setup();
        setup.episode.spawn_region = Aabb::new([5.0, 0.0, 0.5], [5.0, 0.0, 0.5]);
        let (mut ep, _) = reset_env(&setup, 1, 0).unwrap();
        let r = ep.step(&Action::zero()).unwrap();
        assert_eq!(r.outcome, Outcome::OutOfBounds);
    }

    #[test]
    fn hovering_times_out_at_the_cap() {
        let setup = test_setup();
        let (mut ep, _) = reset_env(&setup, 11, 2).unwrap();
        let mut steps = 0;
        loop {
            let r = ep.step(&Action::zero()).unwrap();
            steps += 1;
            if r.terminated {
                assert_eq!(r.outcome, Outcome::Timeout);
                break;
            }
            assert!(steps < 1000, "episode never terminated");
        }
        let cap = (setup.episode.max_duration / setup.sim.control_period).ceil() as usize;
        assert_eq!(steps, cap);
        assert_abs_diff_eq!(ep.time(), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn stepping_after_termination_is_usage_error() {
        let mut setup = test_setup();
        setup.episode.spawn_region = Aabb::new([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let (mut ep, _) = reset_env(&setup, 1, 0).unwrap();
        ep.step(&Action::zero()).unwrap();
        assert!(matches!(
            ep.step(&Action::zero()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn full_episode_bit_determinism() {
        let setup = test_setup();
        let script: Vec<Action> = (0..40)
            .map(|i| Action::new([(i as f64 * 0.37).sin(), -0.2, -0.6]))
            .collect();
        let run = || {
            let (mut ep, obs0) = reset_env(&setup, 31, 9).unwrap();
            let mut trace = vec![format!("{:?}", obs0.0)];
            for a in &script {
                if ep.terminated() {
                    break;
                }
                let r = ep.step(a).unwrap();
                trace.push(format!(
                    "{:?}|{}|{:?}|{:?}",
                    r.observation.0, r.reward, r.outcome, r.info.drone.position
                ));
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn guided_descent_lands_within_tolerance() {
        // Scripted pursuit: aim straight for the pad center. Landing must
        // only ever fire inside the success cylinder.
        let setup = test_setup();
        for idx in 0..5u64 {
            let (mut ep, _) = reset_env(&setup, 17, idx).unwrap();
            let mut landed = false;
            for _ in 0..1200 {
                if ep.terminated() {
                    break;
                }
                let pad = ep.current_pad().unwrap();
                let r = ep.step_with_setpoint(pad.position).unwrap();
                if r.outcome == Outcome::Landed {
                    let hd = horizontal_distance(r.info.drone.position, r.info.pad.position);
                    assert!(hd <= setup.episode.success_xy_tolerance + 1e-12);
                    let rel = (r.info.drone.velocity - r.info.pad.velocity).norm();
                    assert!(rel <= setup.episode.max_touchdown_speed + 1e-12);
                    landed = true;
                }
            }
            assert!(landed, "episode {idx} never landed under scripted pursuit");
        }
    }

    #[test]
    fn moving_pad_setup_also_lands_with_lead_pursuit() {
        let mut setup = test_setup();
        setup.trajectory = TrajectorySpec {
            kind: TrajectoryKind::Linear,
            speed: 0.3,
            ..TrajectorySpec::default()
        };
        let (mut ep, _) = reset_env(&setup, 23, 1).unwrap();
        let mut outcome = Outcome::InProgress;
        for _ in 0..1200 {
            if ep.terminated() {
                outcome = ep.outcome();
                break;
            }
            let pad = ep.current_pad().unwrap();
            // Lead the pad slightly to offset tracking lag.
            let target = pad.position + pad.velocity * 0.4;
            ep.step_with_setpoint(target).unwrap();
        }
        assert_eq!(outcome, Outcome::Landed);
    }
}
