//! Constraint sets, their projections, defects and state distances.

pub mod se3;
pub mod so3;
pub mod terrain;
pub mod trajectory;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use se3::{defect_se3, dist_se3, project_se3, AmbientPose, LeverArm, Pose};
pub use so3::{defect_so3, dist_so3, project_so3, Rotation};
pub use terrain::{defect_terrain, project_terrain, HeightField, TerrainPoint};
pub use trajectory::{project_trajectory, trajectory_defect, Circle, ObstacleSet, Trajectory};

use crate::domain::{DomainId, DomainSpec};
use crate::error::{Error, Result};

/// A point in one of the supported ambient spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRepr", try_from = "StateRepr")]
pub enum State {
    Matrix(Matrix3<f64>),
    Pose(AmbientPose),
    Terrain(TerrainPoint),
    Trajectory(Trajectory),
}

impl State {
    pub fn is_finite(&self) -> bool {
        match self {
            State::Matrix(m) => m.iter().all(|v| v.is_finite()),
            State::Pose(p) => p.is_finite(),
            State::Terrain(p) => p.is_finite(),
            State::Trajectory(t) => t.is_finite(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            State::Matrix(_) => "matrix",
            State::Pose(_) => "pose",
            State::Terrain(_) => "terrain",
            State::Trajectory(_) => "trajectory",
        }
    }
}

/// Flat wire form. Matrices are stored column-major; poses append the
/// translation after the nine rotation entries.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
enum StateRepr {
    Matrix(Vec<f64>),
    Pose(Vec<f64>),
    Terrain([f64; 3]),
    Trajectory(Vec<[f64; 2]>),
}

impl From<State> for StateRepr {
    fn from(s: State) -> Self {
        match s {
            State::Matrix(m) => StateRepr::Matrix(m.as_slice().to_vec()),
            State::Pose(p) => {
                let mut v = p.rot.as_slice().to_vec();
                v.extend_from_slice(p.trans.as_slice());
                StateRepr::Pose(v)
            }
            State::Terrain(p) => StateRepr::Terrain([p.u, p.v, p.z]),
            State::Trajectory(t) => StateRepr::Trajectory(t.waypoints().to_vec()),
        }
    }
}

impl TryFrom<StateRepr> for State {
    type Error = String;

    fn try_from(r: StateRepr) -> std::result::Result<Self, String> {
        match r {
            StateRepr::Matrix(v) if v.len() == 9 => Ok(State::Matrix(Matrix3::from_column_slice(&v))),
            StateRepr::Pose(v) if v.len() == 12 => Ok(State::Pose(AmbientPose {
                rot: Matrix3::from_column_slice(&v[..9]),
                trans: Vector3::from_column_slice(&v[9..]),
            })),
            StateRepr::Terrain([u, v, z]) => Ok(State::Terrain(TerrainPoint { u, v, z })),
            StateRepr::Trajectory(w) => Trajectory::new(w).map(State::Trajectory).map_err(|e| e.to_string()),
            _ => Err("state payload has the wrong length".into()),
        }
    }
}

fn mismatch(spec: &DomainSpec, x: &State) -> Error {
    Error::StateMismatch(format!("{} (got {} state)", spec.id, x.kind()))
}

fn field_of(spec: &DomainSpec) -> Result<&HeightField> {
    spec.field
        .as_ref()
        .ok_or_else(|| Error::Config(format!("domain {} has no height field", spec.id)))
}

fn obstacles_of(spec: &DomainSpec) -> Result<&ObstacleSet> {
    spec.obstacles
        .as_ref()
        .ok_or_else(|| Error::Config(format!("domain {} has no obstacle set", spec.id)))
}

/// Applies the domain projection Π.
pub fn project(x: &State, spec: &DomainSpec) -> Result<State> {
    match (spec.id, x) {
        (DomainId::So3 | DomainId::So3Impulse, State::Matrix(m)) => Ok(State::Matrix(project_so3(m)?.into_inner())),
        (DomainId::Se3 | DomainId::Se3Lever, State::Pose(p)) => {
            Ok(State::Pose(project_se3(p, spec.lever.as_ref())?.into()))
        }
        (DomainId::Terrain | DomainId::TerrainRidge, State::Terrain(p)) => {
            Ok(State::Terrain(project_terrain(p, field_of(spec)?)?))
        }
        (DomainId::PdmLite, State::Trajectory(t)) => Ok(State::Trajectory(project_trajectory(t, obstacles_of(spec)?)?)),
        _ => Err(mismatch(spec, x)),
    }
}

/// Dispatches to the domain's closed-form defect; pdm-lite uses the
/// projection residual.
pub fn defect_generic(x: &State, spec: &DomainSpec) -> Result<f64> {
    match (spec.id, x) {
        (DomainId::So3 | DomainId::So3Impulse, State::Matrix(m)) => defect_so3(m),
        (DomainId::Se3 | DomainId::Se3Lever, State::Pose(p)) => defect_se3(p, spec.alpha, spec.lever.as_ref()),
        (DomainId::Terrain | DomainId::TerrainRidge, State::Terrain(p)) => defect_terrain(p, field_of(spec)?),
        (DomainId::PdmLite, State::Trajectory(t)) => trajectory_defect(t, obstacles_of(spec)?),
        _ => Err(mismatch(spec, x)),
    }
}

/// Domain state distance ρ. Both arguments must already be feasible.
pub fn distance(a: &State, b: &State, spec: &DomainSpec) -> Result<f64> {
    match (spec.id, a, b) {
        (DomainId::So3 | DomainId::So3Impulse, State::Matrix(m1), State::Matrix(m2)) => dist_so3(m1, m2),
        (DomainId::Se3 | DomainId::Se3Lever, State::Pose(p1), State::Pose(p2)) => dist_se3(p1, p2, spec.alpha),
        (DomainId::Terrain | DomainId::TerrainRidge, State::Terrain(p1), State::Terrain(p2)) => {
            Ok(terrain::dist_terrain(p1, p2))
        }
        (DomainId::PdmLite, State::Trajectory(t1), State::Trajectory(t2)) => t1.distance(t2),
        _ => Err(mismatch(spec, a)),
    }
}
