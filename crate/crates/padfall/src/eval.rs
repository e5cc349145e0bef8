//! Scenario runner and the four metric families: landing success, touchdown
//! precision, drone/pad velocity correlation, and wind-recognition
//! correlation.
//!
//! Episodes within a scenario run in parallel when asked to (results are
//! keyed by episode index, so the worker count can never change any output
//! byte). Aggregation is a sequential fold over index order.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ekf::{BaselineConfig, BaselineController, EkfModel};
use crate::env::{reset_env, Action, EpisodeSetup, Outcome, ACTION_POSITION_SCALE};
use crate::error::{Error, Result};
use crate::neural::ParamSet;
use crate::platform::{TrajectoryKind, TrajectorySpec, ZProfile};
use crate::sim::Aabb;
use crate::td3::policy_action;
use crate::wind::{GustConfig, ImpellerSpec};

/// A named test scenario: trajectory family, disturbances, episode count,
/// and its canonical seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub impeller: Option<ImpellerSpec>,
    #[serde(default = "GustConfig::off")]
    pub gusts: GustConfig,
    #[serde(default = "default_episode_count")]
    pub episodes: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Optional spawn-box override (offsets from the pad start), m.
    #[serde(default)]
    pub spawn_region: Option<Aabb>,
}

fn default_episode_count() -> u64 {
    15
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.trajectory.validate()?;
        self.gusts.validate()?;
        if let Some(imp) = &self.impeller {
            imp.validate()?;
        }
        if self.name.contains("WD") && self.impeller.is_none() {
            return Err(Error::Config(format!(
                "wind-disturbance scenario {} must carry an impeller",
                self.name
            )));
        }
        if self.name == "CTL"
            && (self.trajectory.kind != TrajectoryKind::Complex3d || self.impeller.is_none())
        {
            return Err(Error::Config(
                "CTL must pair a complex3d trajectory with an impeller".into(),
            ));
        }
        if self.episodes == 0 {
            return Err(Error::Config("scenario needs at least one episode".into()));
        }
        Ok(())
    }

    /// Bind this scenario onto a base task template (vehicle, physics,
    /// episode rules, reward, normalization).
    pub fn bind(&self, base: &EpisodeSetup) -> EpisodeSetup {
        let mut setup = base.clone();
        setup.trajectory = self.trajectory.clone();
        setup.gusts = self.gusts;
        setup.impeller = self.impeller;
        if let Some(region) = self.spawn_region {
            setup.episode.spawn_region = region;
        }
        setup
    }
}

fn moving(kind: TrajectoryKind, speed: f64) -> TrajectorySpec {
    TrajectorySpec {
        kind,
        speed,
        z_profile: matches!(kind, TrajectoryKind::Complex3d).then(ZProfile::default),
        ..TrajectorySpec::default()
    }
}

/// The built-in scenario catalog: the six test families (with both impeller
/// levels for the WD pair) plus the reduced training task `SPL-EASY`.
pub fn scenario_catalog() -> Vec<ScenarioSpec> {
    let imp = |rpm: u32| Some(ImpellerSpec::at_rpm_level(rpm).expect("known level"));
    let base = |name: &str, traj: TrajectorySpec, impeller, seed: u64| ScenarioSpec {
        name: name.into(),
        trajectory: traj,
        impeller,
        gusts: GustConfig::off(),
        episodes: 15,
        master_seed: seed,
        spawn_region: None,
    };
    vec![
        base("SPL", moving(TrajectoryKind::Static, 0.0), None, 101),
        base("LMPL", moving(TrajectoryKind::Linear, 0.30), None, 102),
        base("CMPL", moving(TrajectoryKind::Curved, 0.30), None, 103),
        base("CTL", moving(TrajectoryKind::Complex3d, 0.25), imp(4500), 104),
        base("SPL-WD-4500", moving(TrajectoryKind::Static, 0.0), imp(4500), 105),
        base("SPL-WD-8500", moving(TrajectoryKind::Static, 0.0), imp(8500), 106),
        base("LMPL-WD-4500", moving(TrajectoryKind::Linear, 0.30), imp(4500), 107),
        base("LMPL-WD-8500", moving(TrajectoryKind::Linear, 0.30), imp(8500), 108),
        ScenarioSpec {
            name: "SPL-EASY".into(),
            trajectory: moving(TrajectoryKind::Static, 0.0),
            impeller: None,
            gusts: GustConfig::off(),
            episodes: 15,
            master_seed: 100,
            // Spawns at most 0.98 m from the pad center. The low end of the
            // height band starts right above touchdown so that exploration
            // actually encounters landings early in training.
            spawn_region: Some(Aabb::new([-0.4, -0.4, 0.02], [0.4, 0.4, 0.8])),
        },
        ScenarioSpec {
            name: "SPL-TOUCH".into(),
            trajectory: moving(TrajectoryKind::Static, 0.0),
            impeller: None,
            gusts: GustConfig::off(),
            episodes: 15,
            master_seed: 109,
            // Curriculum stage for the final decimeters: spawns hug the pad
            // so touchdown mechanics dominate the replay distribution.
            spawn_region: Some(Aabb::new([-0.15, -0.15, 0.02], [0.15, 0.15, 0.3])),
        },
    ]
}

pub fn scenario_by_name(name: &str) -> Result<ScenarioSpec> {
    let catalog = scenario_catalog();
    catalog
        .iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .cloned()
        .ok_or_else(|| {
            let names: Vec<&str> = catalog.iter().map(|s| s.name.as_str()).collect();
            Error::Config(format!(
                "unknown scenario '{name}' (valid: {})",
                names.join(", ")
            ))
        })
}

/// A controller under evaluation.
#[derive(Debug, Clone)]
pub enum Controller {
    /// A trained actor network.
    Policy(ParamSet),
    /// The Kalman-tracker + pursuit baseline.
    EkfBaseline {
        model: EkfModel,
        cfg: BaselineConfig,
    },
    /// Harness self-test: the setpoint teleports onto the pad center.
    ScriptedOracle,
    /// Harness self-test: never moves the setpoint.
    ZeroAction,
}

impl Controller {
    pub fn label(&self) -> &'static str {
        match self {
            Controller::Policy(_) => "policy",
            Controller::EkfBaseline { .. } => "ekf-baseline",
            Controller::ScriptedOracle => "scripted-oracle",
            Controller::ZeroAction => "zero-action",
        }
    }
}

/// One decision-step row of an episode record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub t: f64,
    pub drone_pos: [f64; 3],
    pub drone_vel: [f64; 3],
    pub drone_att: [f64; 3],
    pub pad_pos: [f64; 3],
    pub pad_vel: [f64; 3],
    pub action: [f64; 3],
    pub setpoint: [f64; 3],
    pub reward: f64,
    pub force: [f64; 3],
    pub wind_active: bool,
}

/// Complete record of one evaluated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub episode_index: u64,
    pub rows: Vec<StepRow>,
    pub outcome: Outcome,
    pub windy_episode: bool,
    /// False when the controller emitted a non-finite action and the episode
    /// was aborted. Invalid episodes count as failures, never as landings.
    pub valid: bool,
    /// Horizontal distance from the pad center at touchdown, cm.
    pub touchdown_xy_cm: Option<f64>,
    /// Pad-relative speed at touchdown, m/s.
    pub touchdown_rel_speed: Option<f64>,
    /// Impeller mount offset (for plotting), when the scenario has one.
    pub impeller_offset: Option<[f64; 3]>,
}

impl EpisodeRecord {
    pub fn landed(&self) -> bool {
        self.valid && self.outcome == Outcome::Landed
    }
}

/// Roll out one episode of `scenario` under `controller`, deterministically
/// in `(scenario.master_seed, episode_index)`.
pub fn run_episode(
    controller: &Controller,
    scenario: &ScenarioSpec,
    base: &EpisodeSetup,
    episode_index: u64,
) -> Result<EpisodeRecord> {
    scenario.validate()?;
    let setup = scenario.bind(base);
    let (mut ep, mut obs) = reset_env(&setup, scenario.master_seed, episode_index)?;
    let mut baseline = match controller {
        Controller::EkfBaseline { model, cfg } => Some(BaselineController::new(*model, *cfg)),
        _ => None,
    };

    let mut rows = Vec::new();
    let mut valid = true;
    while !ep.terminated() {
        let pad_now = ep.current_pad()?;
        let drone_pos = ep.drone().position;

        let (action, result) = match controller {
            Controller::Policy(actor) => {
                let action = policy_action(actor, &obs)?;
                if !action.0.iter().all(|c| c.is_finite()) {
                    valid = false;
                    break;
                }
                (action, ep.step(&action)?)
            }
            Controller::ZeroAction => {
                let action = Action::zero();
                (action, ep.step(&action)?)
            }
            Controller::ScriptedOracle => {
                // Center over the pad first, then press the setpoint
                // slightly through the surface so the ground-effect cushion
                // cannot hold the vehicle outside the touchdown window.
                let dx = drone_pos.x - pad_now.position.x;
                let dy = drone_pos.y - pad_now.position.y;
                let centered = (dx * dx + dy * dy).sqrt() < 0.01;
                let dz = if centered { -0.15 } else { 0.25 };
                let setpoint = pad_now.position + Vector3::new(0.0, 0.0, dz);
                let action = setpoint_as_action(drone_pos, setpoint);
                (action, ep.step_with_setpoint(setpoint)?)
            }
            Controller::EkfBaseline { .. } => {
                let ctl = baseline.as_mut().expect("constructed above");
                ctl.observe(pad_now.position)?;
                let setpoint = ctl.setpoint(ep.drone(), setup.sim.control_period)?;
                let action = setpoint_as_action(drone_pos, setpoint);
                (action, ep.step_with_setpoint(setpoint)?)
            }
        };

        obs = result.observation;
        rows.push(StepRow {
            t: result.info.time,
            drone_pos: result.info.drone.position.into(),
            drone_vel: result.info.drone.velocity.into(),
            drone_att: result.info.drone.attitude.into(),
            pad_pos: result.info.pad.position.into(),
            pad_vel: result.info.pad.velocity.into(),
            action: action.0,
            setpoint: result.info.setpoint.into(),
            reward: result.reward,
            force: result.info.applied_force.into(),
            wind_active: result.info.wind_active,
        });
    }

    let outcome = ep.outcome();
    let (touchdown_xy_cm, touchdown_rel_speed) = if valid && outcome == Outcome::Landed {
        let last = rows.last().expect("landed episodes have steps");
        let dx = last.drone_pos[0] - last.pad_pos[0];
        let dy = last.drone_pos[1] - last.pad_pos[1];
        let rel = Vector3::from(last.drone_vel) - Vector3::from(last.pad_vel);
        (Some((dx * dx + dy * dy).sqrt() * 100.0), Some(rel.norm()))
    } else {
        (None, None)
    };

    Ok(EpisodeRecord {
        scenario: scenario.name.clone(),
        episode_index,
        rows,
        outcome,
        windy_episode: ep.is_windy(),
        valid,
        touchdown_xy_cm,
        touchdown_rel_speed,
        impeller_offset: scenario.impeller.map(|i| i.origin_offset),
    })
}

/// The action equivalent of a raw setpoint, for logging scripted controllers
/// in the same schema as the policy.
fn setpoint_as_action(drone_pos: Vector3<f64>, setpoint: Vector3<f64>) -> Action {
    let delta = (setpoint - drone_pos) / ACTION_POSITION_SCALE;
    Action::new([delta.x, delta.y, delta.z])
}

/// Run every episode of a scenario. `workers` > 1 parallelizes across
/// episodes; outputs are identical for every worker count.
pub fn run_scenario(
    controller: &Controller,
    scenario: &ScenarioSpec,
    base: &EpisodeSetup,
    workers: usize,
) -> Result<Vec<EpisodeRecord>> {
    scenario.validate()?;
    let indices: Vec<u64> = (0..scenario.episodes).collect();
    let run_one = |idx: &u64| run_episode(controller, scenario, base, *idx);
    if workers <= 1 {
        indices.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| indices.par_iter().map(run_one).collect())
    }
}

// --- Metrics ----------------------------------------------------------------

/// Sample Pearson correlation via single-pass co-moments. `Ok(None)` when a
/// series is constant (the correlation is undefined there, never zero).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Usage("pearson needs at least 2 samples".into()));
    }
    let mut mean_x = 0.0;
    let mut mean_y = 0.0;
    let mut m2x = 0.0;
    let mut m2y = 0.0;
    let mut cxy = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = xi - mean_x;
        mean_x += dx / n;
        let dy = yi - mean_y;
        mean_y += dy / n;
        m2x += dx * (xi - mean_x);
        m2y += dy * (yi - mean_y);
        cxy += dx * (yi - mean_y);
    }
    if m2x <= 0.0 || m2y <= 0.0 {
        return Ok(None);
    }
    Ok(Some(cxy / (m2x * m2y).sqrt()))
}

/// Success rate plus touchdown precision over landed episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingMetrics {
    pub total: usize,
    pub landed: usize,
    pub success_rate: f64,
    /// Present only when at least one episode landed.
    pub precision: Option<PrecisionStats>,
}

/// Touchdown distances in centimeters. The spread is the population
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionStats {
    pub min_cm: f64,
    pub mean_cm: f64,
    pub std_cm: f64,
}

pub fn landing_metrics(records: &[EpisodeRecord]) -> Result<LandingMetrics> {
    if records.is_empty() {
        return Err(Error::Usage("landing_metrics needs records".into()));
    }
    let total = records.len();
    let distances: Vec<f64> = records
        .iter()
        .filter(|r| r.landed())
        .filter_map(|r| r.touchdown_xy_cm)
        .collect();
    let landed = distances.len();
    let precision = if landed > 0 {
        let mean = distances.iter().sum::<f64>() / landed as f64;
        let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / landed as f64;
        Some(PrecisionStats {
            min_cm: distances.iter().cloned().fold(f64::INFINITY, f64::min),
            mean_cm: mean,
            std_cm: var.sqrt(),
        })
    } else {
        None
    };
    Ok(LandingMetrics {
        total,
        landed,
        success_rate: landed as f64 / total as f64,
        precision,
    })
}

/// Aggregate of per-episode drone/pad speed correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCorrelationStats {
    pub per_episode: Vec<Option<f64>>,
    pub defined: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Per episode, the Pearson correlation between drone and pad speed
/// magnitude series. Episodes with a constant pad speed (static pads) report
/// no correlation and are excluded from the aggregate, with the defined
/// count retained.
pub fn velocity_correlation_stats(records: &[EpisodeRecord]) -> Result<VelocityCorrelationStats> {
    let mut per_episode = Vec::with_capacity(records.len());
    for r in records {
        if r.rows.len() < 2 {
            per_episode.push(None);
            continue;
        }
        let drone: Vec<f64> = r
            .rows
            .iter()
            .map(|row| Vector3::from(row.drone_vel).norm())
            .collect();
        let pad: Vec<f64> = r
            .rows
            .iter()
            .map(|row| Vector3::from(row.pad_vel).norm())
            .collect();
        per_episode.push(pearson(&drone, &pad)?);
    }
    let defined: Vec<f64> = per_episode.iter().flatten().copied().collect();
    let stats = if defined.is_empty() {
        VelocityCorrelationStats {
            per_episode,
            defined: 0,
            mean: None,
            median: None,
            std: None,
            min: None,
            max: None,
        }
    } else {
        let n = defined.len() as f64;
        let mean = defined.iter().sum::<f64>() / n;
        let var = defined.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        let mut sorted = defined.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("correlations are finite"));
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        VelocityCorrelationStats {
            defined: defined.len(),
            mean: Some(mean),
            median: Some(median),
            std: Some(var.sqrt()),
            min: sorted.first().copied(),
            max: sorted.last().copied(),
            per_episode,
        }
    };
    Ok(stats)
}

/// Commanded-vs-realized position correlation split by wind activity.
#[derive(Debug, Clone, PartialEq)]
pub struct WindRecognition {
    /// Mean per-episode r per axis over wind-active steps.
    pub wind: [Option<f64>; 3],
    /// Mean per-episode r per axis over wind-free steps.
    pub calm: [Option<f64>; 3],
    pub episodes_with_wind: usize,
    pub episodes_with_calm: usize,
}

/// Per axis and per partition, correlate the commanded setpoint against the
/// realized position at the end of the same decision step, then average
/// across the episodes where the partition is defined.
pub fn wind_recognition_correlation(records: &[EpisodeRecord]) -> Result<WindRecognition> {
    let mut wind_sums = [(0.0f64, 0usize); 3];
    let mut calm_sums = [(0.0f64, 0usize); 3];
    let mut episodes_with_wind = 0;
    let mut episodes_with_calm = 0;

    for r in records {
        let mut any_wind_axis = false;
        let mut any_calm_axis = false;
        for axis in 0..3 {
            let mut wind_cmd = Vec::new();
            let mut wind_real = Vec::new();
            let mut calm_cmd = Vec::new();
            let mut calm_real = Vec::new();
            for row in &r.rows {
                if row.wind_active {
                    wind_cmd.push(row.setpoint[axis]);
                    wind_real.push(row.drone_pos[axis]);
                } else {
                    calm_cmd.push(row.setpoint[axis]);
                    calm_real.push(row.drone_pos[axis]);
                }
            }
            if wind_cmd.len() >= 2 {
                if let Some(rho) = pearson(&wind_cmd, &wind_real)? {
                    wind_sums[axis].0 += rho;
                    wind_sums[axis].1 += 1;
                    any_wind_axis = true;
                }
            }
            if calm_cmd.len() >= 2 {
                if let Some(rho) = pearson(&calm_cmd, &calm_real)? {
                    calm_sums[axis].0 += rho;
                    calm_sums[axis].1 += 1;
                    any_calm_axis = true;
                }
            }
        }
        if any_wind_axis {
            episodes_with_wind += 1;
        }
        if any_calm_axis {
            episodes_with_calm += 1;
        }
    }

    let fold = |sums: [(f64, usize); 3]| -> [Option<f64>; 3] {
        std::array::from_fn(|i| {
            let (sum, n) = sums[i];
            (n > 0).then(|| sum / n as f64)
        })
    };
    Ok(WindRecognition {
        wind: fold(wind_sums),
        calm: fold(calm_sums),
        episodes_with_wind,
        episodes_with_calm,
    })
}

/// Full metric set for one (scenario, controller) pair.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub scenario: String,
    pub controller: String,
    pub landing: LandingMetrics,
    pub velocity: VelocityCorrelationStats,
    pub wind: WindRecognition,
}

pub fn metrics_report(
    scenario: &str,
    controller: &str,
    records: &[EpisodeRecord],
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        scenario: scenario.to_string(),
        controller: controller.to_string(),
        landing: landing_metrics(records)?,
        velocity: velocity_correlation_stats(records)?,
        wind: wind_recognition_correlation(records)?,
    })
}

/// Success-rate cell formatting: integral percentages bare ("100%"),
/// fractional ones with two decimals ("91.67%").
pub fn format_percent(rate: f64) -> String {
    let pct = rate * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}%", pct.round() as i64)
    } else {
        format!("{pct:.2}%")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "absent".into(),
    }
}

/// Render the report tables as CSV files, mirroring the familiar columns:
/// success rates, precision, wind-scenario precision (with Min), velocity
/// correlation summary, and the wind-recognition split.
pub fn report_tables(reports: &[MetricsReport]) -> Vec<(String, String)> {
    let mut success = String::from("scenario,controller,success_rate,landed,episodes\n");
    let mut precision = String::from("scenario,controller,mean_cm,std_cm\n");
    let mut precision_wind = String::from("scenario,controller,min_cm,mean_cm,std_cm\n");
    let mut velocity =
        String::from("scenario,controller,mean,median,std,min,max,defined_episodes\n");
    let mut wind = String::from(
        "scenario,controller,partition,r_x,r_y,r_z,episodes\n",
    );

    for r in reports {
        success.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario,
            r.controller,
            format_percent(r.landing.success_rate),
            r.landing.landed,
            r.landing.total
        ));
        match r.landing.precision {
            Some(p) => {
                precision.push_str(&format!(
                    "{},{},{:.4},{:.4}\n",
                    r.scenario, r.controller, p.mean_cm, p.std_cm
                ));
                precision_wind.push_str(&format!(
                    "{},{},{:.4},{:.4},{:.4}\n",
                    r.scenario, r.controller, p.min_cm, p.mean_cm, p.std_cm
                ));
            }
            None => {
                precision.push_str(&format!("{},{},absent,absent\n", r.scenario, r.controller));
                precision_wind.push_str(&format!(
                    "{},{},absent,absent,absent\n",
                    r.scenario, r.controller
                ));
            }
        }
        velocity.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.controller,
            fmt_opt(r.velocity.mean),
            fmt_opt(r.velocity.median),
            fmt_opt(r.velocity.std),
            fmt_opt(r.velocity.min),
            fmt_opt(r.velocity.max),
            r.velocity.defined
        ));
        for (partition, values, n) in [
            ("wind", &r.wind.wind, r.wind.episodes_with_wind),
            ("no_wind", &r.wind.calm, r.wind.episodes_with_calm),
        ] {
            wind.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.scenario,
                r.controller,
                partition,
                fmt_opt(values[0]),
                fmt_opt(values[1]),
                fmt_opt(values[2]),
                n
            ));
        }
    }

    vec![
        ("success_rates.csv".into(), success),
        ("precision.csv".into(), precision),
        ("precision_wind.csv".into(), precision_wind),
        ("velocity_correlation.csv".into(), velocity),
        ("wind_recognition.csv".into(), wind),
    ]
}

// --- Episode record persistence ---------------------------------------------

const EPISODE_HEADER: &str = "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,pad_px,pad_py,pad_pz,pad_vx,pad_vy,pad_vz,cx,cy,cz,spx,spy,spz,reward,fx,fy,fz,wind_active,outcome";

/// Serialize an episode record: one CSV row per decision step, then a footer
/// of `# key,value` lines carrying the episode-level fields.
pub fn episode_to_csv(record: &EpisodeRecord) -> String {
    let mut out = String::from(EPISODE_HEADER);
    out.push('\n');
    for (i, row) in record.rows.iter().enumerate() {
        let outcome = if i + 1 == record.rows.len() {
            record.outcome
        } else {
            Outcome::InProgress
        };
        let fields: Vec<String> = [row.t]
            .iter()
            .copied()
            .chain(row.drone_pos)
            .chain(row.drone_vel)
            .chain(row.drone_att)
            .chain(row.pad_pos)
            .chain(row.pad_vel)
            .chain(row.action)
            .chain(row.setpoint)
            .chain([row.reward])
            .chain(row.force)
            .map(|v| format!("{v}"))
            .collect();
        out.push_str(&fields.join(","));
        out.push_str(&format!(
            ",{},{}\n",
            if row.wind_active { 1 } else { 0 },
            outcome.as_str()
        ));
    }
    out.push_str(&format!("# scenario,{}\n", record.scenario));
    out.push_str(&format!("# episode_index,{}\n", record.episode_index));
    out.push_str(&format!("# outcome,{}\n", record.outcome.as_str()));
    out.push_str(&format!(
        "# windy_episode,{}\n",
        if record.windy_episode { 1 } else { 0 }
    ));
    out.push_str(&format!("# valid,{}\n", if record.valid { 1 } else { 0 }));
    if let Some(v) = record.touchdown_xy_cm {
        out.push_str(&format!("# touchdown_xy_cm,{v}\n"));
    }
    if let Some(v) = record.touchdown_rel_speed {
        out.push_str(&format!("# touchdown_rel_speed,{v}\n"));
    }
    if let Some(off) = record.impeller_offset {
        out.push_str(&format!("# impeller_offset,{},{},{}\n", off[0], off[1], off[2]));
    }
    out
}

fn parse_outcome(s: &str) -> Result<Outcome> {
    Ok(match s {
        "in_progress" => Outcome::InProgress,
        "landed" => Outcome::Landed,
        "out_of_bounds" => Outcome::OutOfBounds,
        "below_pad_floor" => Outcome::BelowPadFloor,
        "timeout" => Outcome::Timeout,
        other => return Err(Error::Config(format!("unknown outcome '{other}'"))),
    })
}

/// Parse a record written by [`episode_to_csv`]; the round trip is exact.
pub fn episode_from_csv(text: &str) -> Result<EpisodeRecord> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty episode csv".into()))?;
    if header != EPISODE_HEADER {
        return Err(Error::Config("unexpected episode csv header".into()));
    }

    let mut rows = Vec::new();
    let mut footer = std::collections::BTreeMap::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("bad footer line '{line}'")))?;
            footer.insert(key.to_string(), value.to_string());
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 28 {
            return Err(Error::Config(format!(
                "episode row has {} fields, expected 28",
                parts.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("field {i}: {e}")))
        };
        let triple = |i: usize| -> Result<[f64; 3]> { Ok([num(i)?, num(i + 1)?, num(i + 2)?]) };
        rows.push(StepRow {
            t: num(0)?,
            drone_pos: triple(1)?,
            drone_vel: triple(4)?,
            drone_att: triple(7)?,
            pad_pos: triple(10)?,
            pad_vel: triple(13)?,
            action: triple(16)?,
            setpoint: triple(19)?,
            reward: num(22)?,
            force: triple(23)?,
            wind_active: parts[26] == "1",
        });
    }

    let get = |key: &str| -> Result<&String> {
        footer
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing footer key '{key}'")))
    };
    let touchdown_xy_cm = footer
        .get("touchdown_xy_cm")
        .map(|v| v.parse::<f64>())
        .transpose()
        .map_err(|e| Error::Config(format!("touchdown_xy_cm: {e}")))?;
    let touchdown_rel_speed = footer
        .get("touchdown_rel_speed")
        .map(|v| v.parse::<f64>())
        .transpose()
        .map_err(|e| Error::Config(format!("touchdown_rel_speed: {e}")))?;
    let impeller_offset = footer
        .get("impeller_offset")
        .map(|v| -> Result<[f64; 3]> {
            let xs: Vec<f64> = v
                .split(',')
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("impeller_offset: {e}")))?;
            if xs.len() != 3 {
                return Err(Error::Config("impeller_offset needs 3 fields".into()));
            }
            Ok([xs[0], xs[1], xs[2]])
        })
        .transpose()?;

    Ok(EpisodeRecord {
        scenario: get("scenario")?.clone(),
        episode_index: get("episode_index")?
            .parse()
            .map_err(|e| Error::Config(format!("episode_index: {e}")))?,
        rows,
        outcome: parse_outcome(get("outcome")?)?,
        windy_episode: get("windy_episode")? == "1",
        valid: get("valid")? == "1",
        touchdown_xy_cm,
        touchdown_rel_speed,
        impeller_offset,
    })
}
