//! Ambient update operators `x̃_{t+1} = Φ_h(x_t)` for the synthetic domains.
//!
//! None of these updates enforce the constraint. Each family has a smooth
//! on-manifold motion, an off-manifold pull, additive noise and a weak
//! relaxation toward the constraint set so that off-manifold deviation decays
//! geometrically (factor `1 − h·relaxation` per step) instead of accumulating
//! without bound. The volatile variants add a localized event that makes a
//! few steps dominate the defect profile.

pub mod noise;

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use noise::NoiseStream;

use crate::domain::{DomainId, DomainSpec};
use crate::error::{Error, Result};
use crate::geometry::{AmbientPose, Rotation, State, TerrainPoint};
use crate::pdm::{self, PdmParams};

/// Noise components consumed per step by the rotation block.
const ROT_NOISE: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsParams {
    /// Step size h.
    pub step_size: f64,
    /// Rollout length T (number of update locations).
    pub horizon: usize,
    pub noise_scale: f64,
    /// Magnitude of the off-manifold pull.
    pub drift_scale: f64,
    /// Relative amplitude of the slow drift modulation, in `[0, 1)`.
    pub drift_modulation: f64,
    /// Modulation periods per rollout.
    pub drift_cycles: f64,
    /// Angular speed of the on-manifold rotation field.
    pub spin_rate: f64,
    /// Relaxation rate toward the constraint set.
    pub relaxation: f64,
    /// Localized event window `[start, end)` in steps. Amplifies the drift for
    /// so3-impulse and the spin for se3-lever.
    pub impulse_start: usize,
    pub impulse_end: usize,
    pub impulse_magnitude: f64,
    pub translation_speed: f64,
    pub translation_noise: f64,
    /// Tracking gain of the translation toward the lever tip.
    pub lever_gain: f64,
    /// Planar speed over the terrain.
    pub terrain_speed: f64,
    /// Heading oscillation amplitude (radians) over the terrain.
    pub terrain_turn: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdm: Option<PdmParams>,
}

impl DynamicsParams {
    pub fn default_for(id: DomainId) -> Self {
        let horizon = 200;
        let base = DynamicsParams {
            step_size: 0.05,
            horizon,
            noise_scale: 0.01,
            drift_scale: 0.2,
            drift_modulation: 0.8,
            drift_cycles: 2.0,
            spin_rate: 1.0,
            relaxation: 10.0,
            impulse_start: 2 * horizon / 5,
            impulse_end: 2 * horizon / 5 + horizon / 20,
            impulse_magnitude: 1.0,
            translation_speed: 1.0,
            translation_noise: 0.02,
            lever_gain: 10.0,
            terrain_speed: 0.6,
            terrain_turn: 0.5,
            pdm: None,
        };
        match id {
            DomainId::So3 | DomainId::Se3 | DomainId::Terrain => base,
            DomainId::So3Impulse => DynamicsParams {
                impulse_magnitude: 20.0,
                ..base
            },
            DomainId::Se3Lever => DynamicsParams {
                impulse_magnitude: 14.0,
                ..base
            },
            DomainId::TerrainRidge => base,
            DomainId::PdmLite => {
                let p = PdmParams::default();
                DynamicsParams {
                    horizon: p.levels * p.inner_steps,
                    impulse_start: 0,
                    impulse_end: 0,
                    pdm: Some(p),
                    ..base
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if self.horizon < 2 {
            return bad("horizon must be at least 2");
        }
        if !(self.noise_scale >= 0.0) || !(self.translation_noise >= 0.0) {
            return bad("noise scales must be nonnegative");
        }
        if self.impulse_start > self.impulse_end || self.impulse_end > self.horizon {
            return bad("impulse window must lie inside [0, horizon)");
        }
        if !(0.0..1.0).contains(&self.drift_modulation) {
            return bad("drift_modulation must be in [0, 1)");
        }
        if let Some(p) = &self.pdm {
            p.validate()?;
            if p.levels * p.inner_steps != self.horizon {
                return bad("pdm horizon must equal levels × inner_steps");
            }
        }
        Ok(())
    }

    fn in_impulse(&self, t: usize) -> bool {
        (self.impulse_start..self.impulse_end).contains(&t)
    }

    /// Slowly varying drift envelope `1 + μ sin(2π c t/T + φ)`.
    fn envelope(&self, t: usize, phase: f64) -> f64 {
        let s = t as f64 / self.horizon as f64;
        1.0 + self.drift_modulation * (TAU * self.drift_cycles * s + phase).sin()
    }
}

/// Noise components drawn per step for `id`.
pub fn noise_width(id: DomainId, params: &DynamicsParams) -> usize {
    match id {
        DomainId::So3 | DomainId::So3Impulse => ROT_NOISE,
        DomainId::Se3 | DomainId::Se3Lever => ROT_NOISE + 3,
        DomainId::Terrain | DomainId::TerrainRidge => 3,
        DomainId::PdmLite => params.pdm.as_ref().map_or(0, |p| 2 * p.waypoints),
    }
}

// Constant slots (see `NoiseStream::constant`).
const C_SPIN_PHASE: usize = 0;
const C_SPIN_PHASE2: usize = 1;
const C_DRIFT_PHASE: usize = 2;
const C_DRIFT_DIR: usize = 3; // 6 normals -> slots 3..15
const C_TRANS_PHASE: usize = 16;
const C_INIT_AXIS: usize = 17; // 3 normals -> slots 17..23
const C_INIT_ANGLE: usize = 24;
const C_TERRAIN_START: usize = 25; // u, v, heading
const C_TERRAIN_PHASE: usize = 28;

fn spin_vector(t: usize, params: &DynamicsParams, noise: &NoiseStream) -> Vector3<f64> {
    let s = t as f64 / params.horizon as f64;
    let p1 = TAU * noise.constant(C_SPIN_PHASE);
    let p2 = TAU * noise.constant(C_SPIN_PHASE2);
    Vector3::new((TAU * s + p1).cos(), (TAU * s + p1).sin(), 0.5 * (2.0 * TAU * s + p2).cos()) * params.spin_rate
}

/// Seeded unit-Frobenius symmetric direction of the off-manifold pull.
fn drift_direction(noise: &NoiseStream) -> Matrix3<f64> {
    let g: Vec<f64> = (0..6).map(|k| noise.constant_normal(C_DRIFT_DIR + 2 * k)).collect();
    let m = Matrix3::new(g[0], g[3], g[4], g[3], g[1], g[5], g[4], g[5], g[2]);
    let n = m.norm();
    if n > 0.0 {
        m / n
    } else {
        Matrix3::identity() / 3f64.sqrt()
    }
}

/// Rotation-block update shared by the SO(3) and SE(3) families.
fn rotation_update(
    a: &Matrix3<f64>,
    t: usize,
    params: &DynamicsParams,
    noise: &NoiseStream,
    drift_gain: f64,
    spin_gain: f64,
) -> Matrix3<f64> {
    let h = params.step_size;
    let omega = crate::geometry::so3::skew(&(spin_vector(t, params, noise) * spin_gain));
    let envelope = params.envelope(t, TAU * noise.constant(C_DRIFT_PHASE));
    let drift = drift_direction(noise) * (params.drift_scale * envelope * drift_gain);
    let gram = a.transpose() * a - Matrix3::identity();
    let relax = a * gram * (0.5 * params.relaxation);
    let scale = params.noise_scale * h.sqrt();
    let xi = Matrix3::from_fn(|r, c| noise.normal(t as u64, 3 * r + c));
    a + (omega * a + drift * a - relax) * h + xi * scale
}

fn propose_rotation(a: &Matrix3<f64>, t: usize, id: DomainId, params: &DynamicsParams, noise: &NoiseStream) -> Matrix3<f64> {
    let drift_gain = if id == DomainId::So3Impulse && params.in_impulse(t) {
        params.impulse_magnitude
    } else {
        1.0
    };
    rotation_update(a, t, params, noise, drift_gain, 1.0)
}

fn propose_pose(p: &AmbientPose, t: usize, spec: &DomainSpec, params: &DynamicsParams, noise: &NoiseStream) -> AmbientPose {
    let h = params.step_size;
    let spin_gain = if spec.id == DomainId::Se3Lever && params.in_impulse(t) {
        params.impulse_magnitude
    } else {
        1.0
    };
    let rot = rotation_update(&p.rot, t, params, noise, 1.0, spin_gain);
    let xi = Vector3::from_fn(|i, _| noise.normal(t as u64, ROT_NOISE + i)) * (params.translation_noise * h.sqrt());
    let trans = match (&spec.lever, spec.id) {
        (Some(arm), DomainId::Se3Lever) => {
            // lagged tracking of the tip of the (unprojected) rotation block
            let tip = arm.tip(&p.rot);
            p.trans + (tip - p.trans) * (h * params.lever_gain) + xi
        }
        _ => {
            let s = t as f64 / params.horizon as f64;
            let ph = TAU * noise.constant(C_TRANS_PHASE);
            let vel = Vector3::new((TAU * s + ph).cos(), (TAU * s + ph).sin(), 0.3 * (2.0 * TAU * s).sin())
                * params.translation_speed;
            p.trans + vel * h + xi
        }
    };
    AmbientPose { rot, trans }
}

fn propose_terrain(pt: &TerrainPoint, t: usize, spec: &DomainSpec, params: &DynamicsParams, noise: &NoiseStream) -> Result<TerrainPoint> {
    let field = spec
        .field
        .as_ref()
        .ok_or_else(|| Error::Config(format!("domain {} has no height field", spec.id)))?;
    let h = params.step_size;
    let s = t as f64 / params.horizon as f64;
    let heading0 = (noise.constant(C_TERRAIN_START + 2) - 0.5) * 0.6;
    let heading = heading0 + params.terrain_turn * (TAU * s + TAU * noise.constant(C_TERRAIN_PHASE)).sin();
    let (du, dv) = (params.terrain_speed * heading.cos(), params.terrain_speed * heading.sin());
    // explicit tangent-plane rate for z plus relaxation toward the surface
    let grad = field.gradient(pt.u, pt.v);
    let zdot = grad.x * du + grad.y * dv + params.relaxation * (field.height(pt.u, pt.v) - pt.z);
    let scale = params.noise_scale * h.sqrt();
    Ok(TerrainPoint {
        u: pt.u + h * du + scale * noise.normal(t as u64, 0),
        v: pt.v + h * dv + scale * noise.normal(t as u64, 1),
        z: pt.z + h * zdot + scale * noise.normal(t as u64, 2),
    })
}

/// One ambient update. Deterministic in `(x, t, params, seed, spec)`.
pub fn propose_update(x: &State, t: usize, params: &DynamicsParams, noise: &NoiseStream, spec: &DomainSpec) -> Result<State> {
    if t >= params.horizon {
        return Err(Error::StepOutOfRange {
            t,
            horizon: params.horizon,
        });
    }
    if !x.is_finite() {
        return Err(Error::NonFiniteStep {
            step: t,
            context: "input state".into(),
        });
    }
    let next = match (spec.id, x) {
        (DomainId::So3 | DomainId::So3Impulse, State::Matrix(a)) => State::Matrix(propose_rotation(a, t, spec.id, params, noise)),
        (DomainId::Se3 | DomainId::Se3Lever, State::Pose(p)) => State::Pose(propose_pose(p, t, spec, params, noise)),
        (DomainId::Terrain | DomainId::TerrainRidge, State::Terrain(p)) => State::Terrain(propose_terrain(p, t, spec, params, noise)?),
        (DomainId::PdmLite, State::Trajectory(traj)) => {
            let p = params
                .pdm
                .as_ref()
                .ok_or_else(|| Error::Config("pdm-lite requires pdm parameters".into()))?;
            let (level, inner) = (t / p.inner_steps, t % p.inner_steps);
            State::Trajectory(pdm::langevin_update(traj, level, inner, p, noise)?)
        }
        _ => return Err(Error::StateMismatch(format!("{} (got {} state)", spec.id, x.kind()))),
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteStep {
            step: t,
            context: format!("{} proposal", spec.id),
        });
    }
    Ok(next)
}

fn random_rotation(noise: &NoiseStream) -> Rotation {
    let axis = Vector3::new(
        noise.constant_normal(C_INIT_AXIS),
        noise.constant_normal(C_INIT_AXIS + 2),
        noise.constant_normal(C_INIT_AXIS + 4),
    );
    let angle = std::f64::consts::PI * noise.constant(C_INIT_ANGLE);
    Rotation::from_axis_angle(&axis, angle)
}

/// Feasible seeded starting state.
pub fn initial_state(spec: &DomainSpec, params: &DynamicsParams, noise: &NoiseStream) -> Result<State> {
    Ok(match spec.id {
        DomainId::So3 | DomainId::So3Impulse => State::Matrix(random_rotation(noise).into_inner()),
        DomainId::Se3 | DomainId::Se3Lever => {
            let rot = random_rotation(noise);
            let trans = match &spec.lever {
                Some(arm) if spec.id == DomainId::Se3Lever => arm.tip(rot.matrix()),
                _ => Vector3::zeros(),
            };
            State::Pose(AmbientPose {
                rot: rot.into_inner(),
                trans,
            })
        }
        DomainId::Terrain | DomainId::TerrainRidge => {
            let field = spec
                .field
                .as_ref()
                .ok_or_else(|| Error::Config(format!("domain {} has no height field", spec.id)))?;
            let u = -3.0 + noise.constant(C_TERRAIN_START);
            let v = -1.0 + 2.0 * noise.constant(C_TERRAIN_START + 1);
            State::Terrain(TerrainPoint::new(u, v, field.height(u, v)))
        }
        DomainId::PdmLite => {
            let p = params
                .pdm
                .as_ref()
                .ok_or_else(|| Error::Config("pdm-lite requires pdm parameters".into()))?;
            let obstacles = spec
                .obstacles
                .as_ref()
                .ok_or_else(|| Error::Config("pdm-lite requires obstacles".into()))?;
            State::Trajectory(pdm::initial_trajectory(p, obstacles, noise)?)
        }
    })
}
