//! Branched potential-field reward.
//!
//! The per-step reward is a tanh-squashed composition of four regimes keyed
//! on the current target distance `R`:
//!
//! 1. far field (`R > far_threshold`): a constant penalty `tanh(γ)`;
//! 2. shaping band (`near_threshold < R ≤ far_threshold`): progress shaping
//!    `tanh(α·(previous_distance − R))`;
//! 3. near field (`R < near_threshold`): `tanh(−U − β + Δ)` where `U` sums
//!    the attractive and repulsive potentials, `β` fires when the drone is
//!    below the pad surface or hugging the pad edge, and `Δ` penalizes
//!    horizontal relative speed and relative ascent (descent is exempt);
//! 4. the band boundary (`R == near_threshold`): `tanh(−U + Δ)`.
//!
//! Reading the shaping term as previous-minus-current distance is a
//! deliberate interpretation: taking both symbols as the current distance
//! would make the band identically zero. That literal mode is still
//! available behind `literal_shaping` for fidelity experiments.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All reward constants in one block. None of these values are published
/// numbers; they are artifact defaults, overridable in config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    /// Far-field penalty argument (tanh of this is the far reward).
    pub gamma: f64,
    /// Shaping scale on per-step progress, 1/m.
    pub alpha: f64,
    /// Safety penalty applied below the pad surface or at the pad edge.
    pub beta_penalty: f64,
    /// Attractive potential strength, 1/m².
    pub zeta: f64,
    /// Repulsive potential strength.
    pub eta: f64,
    /// Repulsive potential cutoff distance, m.
    pub q_max: f64,
    /// Far-field distance threshold, m.
    pub far_threshold: f64,
    /// Near-field distance threshold, m.
    pub near_threshold: f64,
    /// Relative-speed penalty coefficient, s/m.
    pub speed_coeff: f64,
    /// Horizontal band around the pad edge that counts as "near the edge", m.
    pub edge_margin: f64,
    /// Fidelity mode: evaluate the shaping band literally (identically zero).
    pub literal_shaping: bool,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            gamma: -1.0,
            alpha: 1.0,
            beta_penalty: 1.0,
            zeta: 1.0,
            eta: 1.0,
            q_max: 0.5,
            far_threshold: 2.0,
            near_threshold: 0.1,
            speed_coeff: 0.5,
            edge_margin: 0.05,
            literal_shaping: false,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.far_threshold > self.near_threshold && self.near_threshold > 0.0) {
            return Err(Error::Config(
                "need far_threshold > near_threshold > 0".into(),
            ));
        }
        if !(self.q_max.is_finite() && self.q_max > 0.0) {
            return Err(Error::Config("q_max must be > 0".into()));
        }
        if self.zeta < 0.0 || self.eta < 0.0 {
            return Err(Error::Config("zeta and eta must be >= 0".into()));
        }
        Ok(())
    }
}

/// Geometry and kinematics the reward is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardContext {
    /// Current 3D distance to the pad center, m.
    pub current_distance: f64,
    /// Distance at the previous decision step, m.
    pub previous_distance: f64,
    /// Distance to the nearest obstacle, m (infinite when none configured).
    pub nearest_obstacle_distance: f64,
    /// Drone velocity minus pad velocity, m/s.
    pub relative_velocity: Vector3<f64>,
    pub drone_below_pad_surface: bool,
    pub near_pad_edge: bool,
}

impl RewardContext {
    /// Stationary context at distance `r`, above the pad, away from the edge.
    pub fn at_rest(r: f64) -> Self {
        Self {
            current_distance: r,
            previous_distance: r,
            nearest_obstacle_distance: f64::INFINITY,
            relative_velocity: Vector3::zeros(),
            drone_below_pad_surface: false,
            near_pad_edge: false,
        }
    }
}

/// Attractive potential ½·ζ·R².
pub fn attractive_potential(r: f64, zeta: f64) -> f64 {
    0.5 * zeta * r * r
}

/// Repulsive potential ½·η·(1/σ − 1/Q_max)² inside the cutoff, zero outside.
/// σ = 0 is obstacle contact and is reported as an error.
pub fn repulsive_potential(sigma: f64, eta: f64, q_max: f64) -> Result<f64> {
    if sigma == 0.0 {
        return Err(Error::SingularInput);
    }
    if sigma >= q_max {
        return Ok(0.0);
    }
    let inv = 1.0 / sigma - 1.0 / q_max;
    Ok(0.5 * eta * inv * inv)
}

/// Speed discouragement Δ: penalizes horizontal relative speed and relative
/// ascent, exempting descent toward the pad. Always ≤ 0.
pub fn speed_term(relative_velocity: Vector3<f64>, speed_coeff: f64) -> f64 {
    let horizontal = (relative_velocity.x * relative_velocity.x
        + relative_velocity.y * relative_velocity.y)
        .sqrt();
    let ascent = relative_velocity.z.max(0.0);
    -speed_coeff * (horizontal + ascent)
}

/// tanh with its argument clamped so the result stays strictly inside
/// (−1, 1) in f64 (plain tanh rounds to exactly ±1 beyond |x| ≈ 19).
fn squash(x: f64) -> f64 {
    x.clamp(-18.0, 18.0).tanh()
}

/// The branched reward. Output is always inside (−1, 1).
pub fn compute_reward(ctx: &RewardContext, params: &RewardParams) -> Result<f64> {
    let r = ctx.current_distance;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::NonFinite(format!("current distance {r}")));
    }

    if r > params.far_threshold {
        return Ok(squash(params.gamma));
    }

    if r > params.near_threshold {
        let progress = if params.literal_shaping {
            // Both symbols in the source formula denote the current
            // distance, so the literal band term is identically zero.
            0.0
        } else {
            ctx.previous_distance - r
        };
        return Ok(squash(params.alpha * progress));
    }

    let u = attractive_potential(r, params.zeta)
        + repulsive_potential(ctx.nearest_obstacle_distance, params.eta, params.q_max)?;
    let delta = speed_term(ctx.relative_velocity, params.speed_coeff);

    if r < params.near_threshold {
        let beta_eff = if ctx.drone_below_pad_surface || ctx.near_pad_edge {
            params.beta_penalty
        } else {
            0.0
        };
        Ok(squash(-u - beta_eff + delta))
    } else {
        // Exactly on the near boundary.
        Ok(squash(-u + delta))
    }
}

/// A sampled XY reward landscape around the pad center.
#[derive(Debug, Clone)]
pub struct RewardLandscape {
    /// Grid coordinates relative to the pad center, m.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major values: `values[iy * xs.len() + ix]`.
    pub values: Vec<f64>,
}

/// Grid request for the landscape export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeGrid {
    /// Half side length of the sampled square, m.
    pub half_extent: f64,
    /// Samples per axis.
    pub resolution: usize,
}

impl Default for LandscapeGrid {
    fn default() -> Self {
        Self {
            half_extent: 2.5,
            resolution: 101,
        }
    }
}

/// Evaluate the reward over an XY grid of stationary, above-pad contexts
/// centered on the pad.
pub fn export_reward_landscape(
    params: &RewardParams,
    grid: &LandscapeGrid,
) -> Result<RewardLandscape> {
    if grid.resolution < 2 || !grid.half_extent.is_finite() || grid.half_extent <= 0.0 {
        return Err(Error::Config(format!(
            "bad landscape grid: half_extent {}, resolution {}",
            grid.half_extent, grid.resolution
        )));
    }
    let n = grid.resolution;
    let coord = |i: usize| -grid.half_extent + 2.0 * grid.half_extent * i as f64 / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(coord).collect();
    let ys = xs.clone();
    let mut values = Vec::with_capacity(n * n);
    for &y in &ys {
        for &x in &xs {
            let r = (x * x + y * y).sqrt();
            values.push(compute_reward(&RewardContext::at_rest(r), params)?);
        }
    }
    Ok(RewardLandscape { xs, ys, values })
}
