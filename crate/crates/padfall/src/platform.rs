//! Moving landing-pad geometry and scripted trajectory families.
//!
//! The pad is kinematic: a pure function of `(TrajectorySpec, t)` with no
//! feedback from the vehicle. Four families are provided:
//!
//! - `static`: fixed pose, zero velocity.
//! - `linear`: piecewise-constant-velocity runs, heading resampled from the
//!   seeded stream every `direction_change_interval` (position continuous,
//!   velocity direction jumps at the changes).
//! - `curved`: constant-speed circular arcs with seeded curvature, same
//!   heading resampling cadence.
//! - `complex3d`: constant-speed arcs in seeded, slightly tilted planes, so
//!   the XY track stays curved while z oscillates smoothly within a bounded
//!   band.
//!
//! Every candidate segment is rejected unless its sampled sweep stays inside
//! the waypoint region, so positions never leave the configured box.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::sim::Aabb;

/// Pose and velocity of the pad-center top surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub half_extent: f64,
}

/// Trajectory family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Static,
    Linear,
    Curved,
    Complex3d,
}

/// Altitude-oscillation parameters for the `complex3d` family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZProfile {
    /// Peak vertical excursion of a segment's tilted arc, m.
    pub amplitude: f64,
}

impl Default for ZProfile {
    fn default() -> Self {
        Self { amplitude: 0.15 }
    }
}

/// A scripted pad trajectory. `pad_state_at` is a pure function of this spec
/// and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub seed: u64,
    /// Pad speed, m/s. Zero means the pad rests at `origin` for every kind.
    pub speed: f64,
    /// Seconds between heading resamples.
    pub direction_change_interval: f64,
    /// Box the pad must stay inside.
    pub waypoint_region: Aabb,
    /// Pad-center top-surface position at t = 0.
    pub origin: [f64; 3],
    /// Pad half side length, m.
    pub half_extent: f64,
    /// `complex3d` altitude parameters; ignored by the planar kinds.
    pub z_profile: Option<ZProfile>,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Static,
            seed: 0,
            speed: 0.0,
            direction_change_interval: 3.0,
            waypoint_region: Aabb::new([-1.2, -1.2, 0.35], [1.2, 1.2, 0.8]),
            origin: [0.0, 0.0, 0.5],
            half_extent: 0.25,
            z_profile: None,
        }
    }
}

/// Maximum pad speed used by training-scenario generation, m/s.
pub const MAX_PAD_SPEED: f64 = 0.46;

/// Curvature magnitude range for arc segments, 1/m.
const CURVATURE_RANGE: (f64, f64) = (0.3, 1.5);
/// Containment margin for candidate acceptance, m.
const REGION_MARGIN: f64 = 0.02;
/// Points sampled along a candidate segment for the containment check.
const CONTAINMENT_SAMPLES: usize = 17;
const MAX_CANDIDATES: usize = 64;

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_PAD_SPEED).contains(&self.speed) {
            return Err(Error::Config(format!(
                "pad speed {} outside [0, {MAX_PAD_SPEED}]",
                self.speed
            )));
        }
        if !(self.direction_change_interval.is_finite() && self.direction_change_interval > 0.0) {
            return Err(Error::Config(
                "direction_change_interval must be > 0".into(),
            ));
        }
        if !(self.half_extent.is_finite() && self.half_extent > 0.0) {
            return Err(Error::Config("half_extent must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum SegmentPath {
    Hold,
    Line {
        dir: Vector3<f64>,
    },
    /// Circular arc about `axis` (unit), starting at `center + radial`.
    Arc {
        center: Vector3<f64>,
        axis: Vector3<f64>,
        radial: Vector3<f64>,
        /// Signed angular rate, rad/s (= ±curvature·speed).
        omega: f64,
    },
}

#[derive(Debug, Clone)]
struct Segment {
    start_pos: Vector3<f64>,
    path: SegmentPath,
}

impl Segment {
    fn position(&self, speed: f64, tau: f64) -> Vector3<f64> {
        match &self.path {
            SegmentPath::Hold => self.start_pos,
            SegmentPath::Line { dir } => self.start_pos + dir * (speed * tau),
            SegmentPath::Arc {
                center,
                axis,
                radial,
                omega,
            } => {
                let theta = omega * tau;
                let (s, c) = theta.sin_cos();
                // axis ⟂ radial by construction, so Rodrigues reduces to
                // radial·cosθ + (axis × radial)·sinθ.
                center + radial * c + axis.cross(radial) * s
            }
        }
    }

    fn velocity(&self, speed: f64, tau: f64) -> Vector3<f64> {
        match &self.path {
            SegmentPath::Hold => Vector3::zeros(),
            SegmentPath::Line { dir } => dir * speed,
            SegmentPath::Arc {
                axis,
                radial,
                omega,
                ..
            } => {
                let theta = omega * tau;
                let (s, c) = theta.sin_cos();
                (axis.cross(radial) * c - radial * s) * *omega
            }
        }
    }
}

/// Incremental trajectory evaluator. Segments are constructed lazily in
/// order, so repeated queries at advancing times cost O(1) amortized while
/// remaining bit-identical to the pure `pad_state_at`.
#[derive(Debug, Clone)]
pub struct TrajectoryCursor {
    spec: TrajectorySpec,
    segments: Vec<Segment>,
}

impl TrajectoryCursor {
    pub fn new(spec: TrajectorySpec) -> Self {
        Self {
            spec,
            segments: Vec::new(),
        }
    }

    pub fn spec(&self) -> &TrajectorySpec {
        &self.spec
    }

    pub fn state_at(&mut self, t: f64) -> Result<PadState> {
        if t < 0.0 {
            return Err(Error::Usage(format!("trajectory time {t} < 0")));
        }
        let spec = &self.spec;
        if matches!(spec.kind, TrajectoryKind::Static) || spec.speed == 0.0 {
            return Ok(PadState {
                position: Vector3::from(spec.origin),
                velocity: Vector3::zeros(),
                half_extent: spec.half_extent,
            });
        }
        let interval = spec.direction_change_interval;
        let idx = (t / interval).floor() as usize;
        while self.segments.len() <= idx {
            let k = self.segments.len();
            let start_pos = if k == 0 {
                Vector3::from(self.spec.origin)
            } else {
                self.segments[k - 1].position(self.spec.speed, interval)
            };
            let seg = build_segment(&self.spec, k as u64, start_pos);
            self.segments.push(seg);
        }
        let tau = t - idx as f64 * interval;
        let seg = &self.segments[idx];
        Ok(PadState {
            position: seg.position(spec.speed, tau),
            velocity: seg.velocity(spec.speed, tau),
            half_extent: spec.half_extent,
        })
    }
}

/// Pad pose and velocity at time `t`. Pure in `(spec, t)`.
pub fn pad_state_at(spec: &TrajectorySpec, t: f64) -> Result<PadState> {
    TrajectoryCursor::new(spec.clone()).state_at(t)
}

/// World-frame offset from the drone to the pad center: the d⃗ the
/// observation builder consumes (pad velocity supplies the Δv⃗ half).
pub fn pad_frame_offset(drone_position: Vector3<f64>, pad: &PadState) -> Vector3<f64> {
    pad.position - drone_position
}

fn build_segment(spec: &TrajectorySpec, index: u64, start_pos: Vector3<f64>) -> Segment {
    let mut rng = stream(spec.seed, Purpose::TrajectorySegment, index);
    let region = spec.waypoint_region.shrunk(REGION_MARGIN);
    let duration = spec.direction_change_interval;

    for _ in 0..MAX_CANDIDATES {
        let heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let candidate = match spec.kind {
            TrajectoryKind::Static => SegmentPath::Hold,
            TrajectoryKind::Linear => SegmentPath::Line {
                dir: Vector3::new(heading.cos(), heading.sin(), 0.0),
            },
            TrajectoryKind::Curved => {
                let curvature = rng.gen_range(CURVATURE_RANGE.0..=CURVATURE_RANGE.1);
                let sign = if rng.r#gen::<bool>() { 1.0 } else { -1.0 };
                planar_arc(start_pos, heading, curvature * sign, spec.speed)
            }
            TrajectoryKind::Complex3d => {
                let curvature = rng.gen_range(CURVATURE_RANGE.0..=CURVATURE_RANGE.1);
                let sign = if rng.r#gen::<bool>() { 1.0 } else { -1.0 };
                let amplitude = spec.z_profile.unwrap_or_default().amplitude;
                tilted_arc(start_pos, heading, curvature * sign, spec.speed, amplitude)
            }
        };
        let seg = Segment {
            start_pos,
            path: candidate,
        };
        if segment_contained(&seg, spec.speed, duration, &region) {
            return seg;
        }
    }

    // Recovery: head straight for the region center. For default-sized
    // regions the rejection loop above essentially never exhausts.
    let to_center = region.center() - start_pos;
    let dir = if to_center.norm() > 1e-9 {
        to_center.normalize()
    } else {
        Vector3::new(1.0, 0.0, 0.0)
    };
    Segment {
        start_pos,
        path: SegmentPath::Line { dir },
    }
}

fn planar_arc(start: Vector3<f64>, heading: f64, signed_curvature: f64, speed: f64) -> SegmentPath {
    let dir = Vector3::new(heading.cos(), heading.sin(), 0.0);
    let axis = Vector3::new(0.0, 0.0, signed_curvature.signum());
    let radius = 1.0 / signed_curvature.abs();
    // Left-perpendicular of dir about +z, flipped with the turn sign.
    let center = start + axis.cross(&dir) * radius;
    SegmentPath::Arc {
        center,
        axis,
        radial: start - center,
        omega: signed_curvature.abs() * speed * signed_curvature.signum(),
    }
}

/// Arc in a plane tilted from horizontal just enough to give the requested
/// vertical amplitude at this radius.
fn tilted_arc(
    start: Vector3<f64>,
    heading: f64,
    signed_curvature: f64,
    speed: f64,
    z_amplitude: f64,
) -> SegmentPath {
    let radius = 1.0 / signed_curvature.abs();
    let tilt = (z_amplitude / radius).clamp(0.0, 0.7).asin();
    let (st, ct) = tilt.sin_cos();
    // Tilt the turn axis away from vertical, about the initial heading line
    // so the starting velocity keeps its commanded azimuth.
    let (sh, ch) = heading.sin_cos();
    let axis_up = Vector3::new(-st * sh, st * ch, ct) * signed_curvature.signum();
    let dir = Vector3::new(ch, sh, 0.0);
    let center = start + axis_up.cross(&dir) * radius;
    SegmentPath::Arc {
        center,
        axis: axis_up,
        radial: start - center,
        omega: signed_curvature.abs() * speed * signed_curvature.signum(),
    }
}

fn segment_contained(seg: &Segment, speed: f64, duration: f64, region: &Aabb) -> bool {
    (0..=CONTAINMENT_SAMPLES).all(|i| {
        let tau = duration * i as f64 / CONTAINMENT_SAMPLES as f64;
        region.contains(seg.position(speed, tau))
    })
}
