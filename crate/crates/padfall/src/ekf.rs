//! Comparison controller: a constant-velocity Kalman tracker on the pad plus
//! a PID pursuit-and-descend law.
//!
//! The filter state is pad position and velocity (6 states). The transition
//! matrix couples position to velocity through `dt_factor`; with
//! `dt_factor = 1` it reproduces the reference matrix entry for entry, while
//! the default scales the coupling by the control period so the filter runs
//! in seconds.
//!
//! The pursuit law is deliberately simple: chase the filter's lookahead
//! prediction horizontally, hold an approach altitude until the horizontal
//! error is small, then descend at a constant rate. Its setpoint deltas are
//! clamped to the same per-decision envelope the learned agent gets.

use nalgebra::{SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::DroneState;

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Mat3x6 = SMatrix<f64, 3, 6>;

/// Constant-velocity transition/observation model and noise levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfModel {
    /// Position-velocity coupling in the transition matrix. 1.0 reproduces
    /// the reference matrix; the default equals the control period.
    pub dt_factor: f64,
    /// Process variance on the position states.
    pub q_pos: f64,
    /// Process variance on the velocity states.
    pub q_vel: f64,
    /// Measurement variance per axis, m².
    pub r_meas: f64,
    /// Initial covariance on position states.
    pub p0_pos: f64,
    /// Initial covariance on velocity states.
    pub p0_vel: f64,
}

impl Default for EkfModel {
    fn default() -> Self {
        Self {
            dt_factor: 1.0 / 30.0,
            // Tuned once against the synthetic constant-velocity track and
            // frozen (σ = 0.01 m measurements).
            q_pos: 1e-6,
            q_vel: 1e-4,
            r_meas: 1e-4,
            p0_pos: 1e-2,
            p0_vel: 1e-1,
        }
    }
}

impl EkfModel {
    /// Fidelity mode: unit position-velocity coupling.
    pub fn paper_fidelity() -> Self {
        Self {
            dt_factor: 1.0,
            ..Self::default()
        }
    }

    /// State transition matrix A.
    pub fn a_matrix(&self) -> Mat6 {
        let mut a = Mat6::identity();
        for i in 0..3 {
            a[(i, i + 3)] = self.dt_factor;
        }
        a
    }

    /// Observation matrix H (position extraction).
    pub fn h_matrix(&self) -> Mat3x6 {
        let mut h = Mat3x6::zeros();
        for i in 0..3 {
            h[(i, i)] = 1.0;
        }
        h
    }

    fn q_matrix(&self) -> Mat6 {
        let mut q = Mat6::zeros();
        for i in 0..3 {
            q[(i, i)] = self.q_pos;
            q[(i + 3, i + 3)] = self.q_vel;
        }
        q
    }

    fn r_matrix(&self) -> SMatrix<f64, 3, 3> {
        SMatrix::<f64, 3, 3>::identity() * self.r_meas
    }
}

/// Filter state: pad position+velocity estimate and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    pub x: Vec6,
    pub p: Mat6,
}

impl EkfState {
    /// Initialize at a first position fix with zero velocity.
    pub fn from_first_measurement(z: Vector3<f64>, model: &EkfModel) -> Self {
        let mut x = Vec6::zeros();
        let mut p = Mat6::zeros();
        for i in 0..3 {
            x[i] = z[i];
            p[(i, i)] = model.p0_pos;
            p[(i + 3, i + 3)] = model.p0_vel;
        }
        Self { x, p }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x[0], self.x[1], self.x[2])
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.x[3], self.x[4], self.x[5])
    }
}

fn symmetrize(p: &mut Mat6) {
    let pt = p.transpose();
    *p = (*p + pt) * 0.5;
}

/// Time update: x ← A·x, P ← A·P·Aᵀ + Q.
pub fn ekf_predict(state: &EkfState, model: &EkfModel) -> EkfState {
    let a = model.a_matrix();
    let x = a * state.x;
    let mut p = a * state.p * a.transpose() + model.q_matrix();
    symmetrize(&mut p);
    EkfState { x, p }
}

/// Measurement update with the Kalman gain.
pub fn ekf_update(state: &EkfState, measurement: Vector3<f64>, model: &EkfModel) -> Result<EkfState> {
    if !measurement.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("ekf measurement".into()));
    }
    let h = model.h_matrix();
    let s = h * state.p * h.transpose() + model.r_matrix();
    let s_inv = s.try_inverse().ok_or(Error::FilterDivergence)?;
    let k = state.p * h.transpose() * s_inv;
    let innovation = measurement - h * state.x;
    let x = state.x + k * innovation;
    let mut p = (Mat6::identity() - k * h) * state.p;
    symmetrize(&mut p);
    Ok(EkfState { x, p })
}

/// Pursuit-and-descend parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Horizontal pursuit gain on the lookahead error (1/decision).
    pub pursuit_gain: f64,
    /// Vertical gain toward the approach altitude.
    pub vertical_gain: f64,
    /// Seconds of filter-velocity lead applied to the chase target.
    pub lookahead_horizon: f64,
    /// Horizontal error below which the descent begins, m.
    pub descend_trigger_radius: f64,
    /// Commanded descent rate, m/s.
    pub descent_rate: f64,
    /// Approach altitude above the estimated pad surface, m.
    pub approach_height: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            pursuit_gain: 1.0,
            vertical_gain: 1.0,
            lookahead_horizon: 0.5,
            descend_trigger_radius: 0.15,
            descent_rate: 0.3,
            approach_height: 0.4,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.descent_rate.is_finite() && self.descent_rate > 0.0) {
            return Err(Error::Config("descent_rate must be > 0".into()));
        }
        let finite = [
            self.pursuit_gain,
            self.vertical_gain,
            self.lookahead_horizon,
            self.descend_trigger_radius,
            self.approach_height,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("baseline gains must be finite".into()));
        }
        Ok(())
    }
}

/// Per-axis setpoint-delta envelope shared with the learned agent, m.
pub const SETPOINT_ENVELOPE: f64 = crate::env::ACTION_POSITION_SCALE;

/// Pure pursuit law: filter estimate in, absolute setpoint out.
///
/// `descent_ref` is the controller's vertical descent reference: `None`
/// until the descent triggers, then a ramp falling at `descent_rate`
/// regardless of where the vehicle actually is (so ground-effect cushioning
/// cannot stall the approach; the ramp floors 0.3 m below the estimated pad).
/// The updated reference comes back alongside the setpoint.
pub fn baseline_action(
    drone: &DroneState,
    ekf: &EkfState,
    cfg: &BaselineConfig,
    control_period: f64,
    descent_ref: Option<f64>,
) -> (Vector3<f64>, Option<f64>) {
    let target = ekf.position() + ekf.velocity() * cfg.lookahead_horizon;
    let clamp = |v: f64| v.clamp(-SETPOINT_ENVELOPE, SETPOINT_ENVELOPE);

    let ex = target.x - drone.position.x;
    let ey = target.y - drone.position.y;
    let horizontal_error = (ex * ex + ey * ey).sqrt();

    // Hysteresis: the descent arms below the trigger radius and only
    // disarms once the horizontal error doubles it, so tracking jitter on a
    // moving pad cannot chatter the vertical mode.
    let descending = if descent_ref.is_some() {
        horizontal_error < 2.0 * cfg.descend_trigger_radius
    } else {
        horizontal_error < cfg.descend_trigger_radius
    };

    let (dz, next_ref) = if descending {
        let floor = ekf.position().z - 0.3;
        let z_ref = (descent_ref.unwrap_or(drone.position.z) - cfg.descent_rate * control_period)
            .max(floor);
        (clamp(z_ref - drone.position.z), Some(z_ref))
    } else {
        let approach_altitude = ekf.position().z + cfg.approach_height;
        (
            clamp(cfg.vertical_gain * (approach_altitude - drone.position.z)),
            None,
        )
    };

    (
        Vector3::new(
            drone.position.x + clamp(cfg.pursuit_gain * ex),
            drone.position.y + clamp(cfg.pursuit_gain * ey),
            drone.position.z + dz,
        ),
        next_ref,
    )
}

/// Stateful wrapper marrying the filter to the pursuit law, one instance per
/// episode.
#[derive(Debug, Clone)]
pub struct BaselineController {
    pub model: EkfModel,
    pub cfg: BaselineConfig,
    state: Option<EkfState>,
    descent_ref: Option<f64>,
}

impl BaselineController {
    pub fn new(model: EkfModel, cfg: BaselineConfig) -> Self {
        Self {
            model,
            cfg,
            state: None,
            descent_ref: None,
        }
    }

    /// Fold in one pad position measurement (predict + update; the first
    /// fix initializes the filter).
    pub fn observe(&mut self, measurement: Vector3<f64>) -> Result<()> {
        self.state = Some(match self.state.take() {
            None => EkfState::from_first_measurement(measurement, &self.model),
            Some(prev) => {
                let predicted = ekf_predict(&prev, &self.model);
                ekf_update(&predicted, measurement, &self.model)?
            }
        });
        Ok(())
    }

    pub fn filter(&self) -> Option<&EkfState> {
        self.state.as_ref()
    }

    /// Setpoint for the current decision. Requires at least one observation.
    pub fn setpoint(&mut self, drone: &DroneState, control_period: f64) -> Result<Vector3<f64>> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::Usage("baseline_action before first measurement".into()))?;
        let (setpoint, next_ref) =
            baseline_action(drone, state, &self.cfg, control_period, self.descent_ref);
        self.descent_ref = next_ref;
        Ok(setpoint)
    }
}
