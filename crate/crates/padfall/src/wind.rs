//! Stochastic disturbances: two-level gust injection and the impeller jet.
//!
//! Gusts follow a two-coin scheme: an episode-level coin decides whether the
//! episode is windy at all, then a per-decision-step coin gates a bounded
//! uniform force draw. The signed-magnitude composition of the per-step force
//! collapses to the uniform draw itself: sgn(f)·|f| = f, so each active
//! component is simply uniform on ±`component_range`.
//!
//! The drawn force is held constant across the physics substeps of one
//! decision; redrawing per substep would average the injected impulse to
//! nearly zero and make the wind invisible to the agent.
//!
//! The impeller is a constant jet anchored to the pad, aimed at the pad
//! center, with Gaussian radial and exponential axial decay. The profile
//! shape is a modeling choice; the mount point, aiming, and rpm levels follow
//! the physical rig being reproduced.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::PadState;

/// Gust probabilities and per-axis force bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GustConfig {
    /// Probability that an episode is windy at all.
    pub p_episode: f64,
    /// Probability that a windy episode applies force at a given decision step.
    pub p_step: f64,
    /// Per-axis force bound, N. Components are uniform on ±this value.
    /// The source material gives the ±0.005 range without a unit; Newtons is
    /// this artifact's reading (≈1.9% of the default vehicle's weight).
    pub component_range: f64,
}

impl Default for GustConfig {
    fn default() -> Self {
        Self {
            p_episode: 0.2,
            p_step: 0.2,
            component_range: 0.005,
        }
    }
}

impl GustConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_episode", self.p_episode), ("p_step", self.p_step)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.component_range < 0.0 {
            return Err(Error::Config("component_range must be >= 0".into()));
        }
        Ok(())
    }

    /// Disabled gusts (every draw is zero).
    pub fn off() -> Self {
        Self {
            p_episode: 0.0,
            ..Self::default()
        }
    }
}

/// Impeller jet anchored to the pad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpellerSpec {
    /// Mount offset from the pad center in the pad's travel plane, m.
    pub origin_offset: [f64; 3],
    /// Jet strength at the mouth, N.
    pub magnitude: f64,
    /// Gaussian radial scale of the jet, m.
    pub jet_radius: f64,
    /// Exponential axial decay length, m.
    pub axial_falloff_length: f64,
}

impl Default for ImpellerSpec {
    fn default() -> Self {
        Self {
            origin_offset: [0.3, 0.0, 0.0],
            magnitude: IMPELLER_FORCE_4500_RPM,
            jet_radius: 0.15,
            axial_falloff_length: 0.6,
        }
    }
}

/// Calibrated jet strength for the 4500 rpm impeller level, N.
pub const IMPELLER_FORCE_4500_RPM: f64 = 0.02;
/// Calibrated jet strength for the 8500 rpm impeller level, N.
pub const IMPELLER_FORCE_8500_RPM: f64 = 0.05;

impl ImpellerSpec {
    pub fn at_rpm_level(rpm: u32) -> Result<Self> {
        let magnitude = match rpm {
            4500 => IMPELLER_FORCE_4500_RPM,
            8500 => IMPELLER_FORCE_8500_RPM,
            other => {
                return Err(Error::Config(format!(
                    "unknown impeller level {other} rpm (known: 4500, 8500)"
                )))
            }
        };
        Ok(Self {
            magnitude,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.magnitude < 0.0 {
            return Err(Error::Config("impeller magnitude must be >= 0".into()));
        }
        if !(self.jet_radius.is_finite() && self.jet_radius > 0.0) {
            return Err(Error::Config("jet_radius must be > 0".into()));
        }
        if !(self.axial_falloff_length.is_finite() && self.axial_falloff_length > 0.0) {
            return Err(Error::Config("axial_falloff_length must be > 0".into()));
        }
        Ok(())
    }
}

/// Episode-level coin: windy with probability `p_episode`.
pub fn sample_episode_windiness(rng: &mut ChaCha8Rng, cfg: &GustConfig) -> bool {
    let u: f64 = rng.r#gen();
    u < cfg.p_episode
}

/// Per-episode gust record. Forces are drawn lazily, one per decision step,
/// and held constant across that step's physics substeps. In a non-windy
/// episode every recorded force is exactly zero.
#[derive(Debug, Clone)]
pub struct WindSchedule {
    windy: bool,
    cfg: GustConfig,
    rng: ChaCha8Rng,
    forces: Vec<Vector3<f64>>,
}

impl WindSchedule {
    /// Sample the episode-level coin from `episode_rng` and bind the
    /// per-step stream.
    pub fn sample(episode_rng: &mut ChaCha8Rng, step_rng: ChaCha8Rng, cfg: GustConfig) -> Self {
        let windy = sample_episode_windiness(episode_rng, &cfg);
        Self {
            windy,
            cfg,
            rng: step_rng,
            forces: Vec::new(),
        }
    }

    pub fn is_windy(&self) -> bool {
        self.windy
    }

    /// Gust force held across decision step `step` (0-based).
    pub fn force_at(&mut self, step: usize) -> Vector3<f64> {
        while self.forces.len() <= step {
            let f = gust_force_at_step(&mut self.rng, self.windy, &self.cfg);
            self.forces.push(f);
        }
        self.forces[step]
    }

    /// Sum of every force drawn so far (exact zero for calm episodes).
    pub fn cumulative(&self) -> Vector3<f64> {
        self.forces.iter().sum()
    }
}

/// Per-decision-step gust draw. Zero unless the episode is windy and the
/// step-level coin fires; otherwise each component is uniform on
/// ±`component_range`.
pub fn gust_force_at_step(rng: &mut ChaCha8Rng, windy: bool, cfg: &GustConfig) -> Vector3<f64> {
    if !windy {
        return Vector3::zeros();
    }
    let u: f64 = rng.r#gen();
    if u >= cfg.p_step {
        return Vector3::zeros();
    }
    let r = cfg.component_range;
    Vector3::new(
        rng.gen_range(-r..=r),
        rng.gen_range(-r..=r),
        rng.gen_range(-r..=r),
    )
}

/// Jet force on the drone. The impeller rides at `pad.position + offset`,
/// aimed at the pad center; `s` is the along-axis distance from the mouth
/// (zero force behind the mouth) and `r` the radial distance from the axis.
pub fn impeller_force(
    drone_position: Vector3<f64>,
    pad: &PadState,
    spec: &ImpellerSpec,
) -> Vector3<f64> {
    let offset = Vector3::from(spec.origin_offset);
    if spec.magnitude == 0.0 || offset.norm() < 1e-12 {
        return Vector3::zeros();
    }
    let mouth = pad.position + offset;
    let aim = -offset.normalize();
    let rel = drone_position - mouth;
    let s = rel.dot(&aim);
    if s < 0.0 {
        return Vector3::zeros();
    }
    let radial = rel - aim * s;
    let r = radial.norm();
    let axial = (-s / spec.axial_falloff_length).exp();
    let lateral = (-(r / spec.jet_radius).powi(2)).exp();
    aim * (spec.magnitude * axial * lateral)
}
