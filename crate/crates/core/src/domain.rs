//! Experiment domains: identifiers, constraint parameters and a name-keyed
//! registry of domain factories.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsParams;
use crate::error::{Error, Result};
use crate::geometry::{HeightField, LeverArm, ObstacleSet};
use crate::pdm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainId {
    So3,
    Se3,
    Terrain,
    So3Impulse,
    Se3Lever,
    TerrainRidge,
    PdmLite,
}

impl DomainId {
    pub const ALL: [DomainId; 7] = [
        DomainId::So3,
        DomainId::Se3,
        DomainId::Terrain,
        DomainId::So3Impulse,
        DomainId::Se3Lever,
        DomainId::TerrainRidge,
        DomainId::PdmLite,
    ];

    /// The six synthetic domains (everything but pdm-lite).
    pub const SYNTHETIC: [DomainId; 6] = [
        DomainId::So3,
        DomainId::Se3,
        DomainId::Terrain,
        DomainId::So3Impulse,
        DomainId::Se3Lever,
        DomainId::TerrainRidge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainId::So3 => "so3",
            DomainId::Se3 => "se3",
            DomainId::Terrain => "terrain",
            DomainId::So3Impulse => "so3-impulse",
            DomainId::Se3Lever => "se3-lever",
            DomainId::TerrainRidge => "terrain-ridge",
            DomainId::PdmLite => "pdm-lite",
        }
    }

    /// Base domain of a volatile variant.
    pub fn base(self) -> Option<DomainId> {
        match self {
            DomainId::So3Impulse => Some(DomainId::So3),
            DomainId::Se3Lever => Some(DomainId::Se3),
            DomainId::TerrainRidge => Some(DomainId::Terrain),
            _ => None,
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DomainId::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDomain(s.to_string()))
    }
}

/// Constraint-set parameters for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub id: DomainId,
    /// Translation weight in the SE(3) defect and metric.
    pub alpha: f64,
    pub field: Option<HeightField>,
    pub lever: Option<LeverArm>,
    pub obstacles: Option<ObstacleSet>,
}

pub fn default_field() -> HeightField {
    HeightField {
        amplitude: 0.5,
        frequency: 1.2,
        ..HeightField::flat()
    }
}

pub fn ridge_field() -> HeightField {
    HeightField {
        ridge_amplitude: 1.0,
        ridge_sharpness: 20.0,
        ridge_offset: 0.0,
        ridge_sway: 0.3,
        ridge_wavenumber: 0.5,
        ..default_field()
    }
}

impl DomainSpec {
    pub fn default_for(id: DomainId) -> Self {
        let mut spec = DomainSpec {
            id,
            alpha: 1.0,
            field: None,
            lever: None,
            obstacles: None,
        };
        match id {
            DomainId::So3 | DomainId::So3Impulse | DomainId::Se3 => {}
            DomainId::Se3Lever => {
                spec.lever = Some(LeverArm {
                    length: 1.0,
                    anchor: [0.0; 3],
                })
            }
            DomainId::Terrain => spec.field = Some(default_field()),
            DomainId::TerrainRidge => spec.field = Some(ridge_field()),
            DomainId::PdmLite => spec.obstacles = Some(pdm::default_obstacles()),
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("{}: alpha must be positive", self.id)));
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{}: {what}", self.id)))
            }
        };
        match self.id {
            DomainId::Terrain | DomainId::TerrainRidge => need(self.field.is_some(), "height field required"),
            DomainId::Se3Lever => need(
                self.lever.as_ref().is_some_and(|l| l.length.is_finite() && l.anchor.iter().all(|a| a.is_finite())),
                "finite lever arm required",
            ),
            DomainId::PdmLite => need(self.obstacles.is_some(), "obstacle set required"),
            _ => Ok(()),
        }
    }
}

/// A fully parameterized domain: constraint set plus ambient dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub spec: DomainSpec,
    pub params: DynamicsParams,
}

impl Domain {
    pub fn default_for(id: DomainId) -> Self {
        Domain {
            spec: DomainSpec::default_for(id),
            params: DynamicsParams::default_for(id),
        }
    }

    pub fn id(&self) -> DomainId {
        self.spec.id
    }

    pub fn horizon(&self) -> usize {
        self.params.horizon
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.params.validate()?;
        if self.spec.id == DomainId::PdmLite {
            let p = self
                .params
                .pdm
                .as_ref()
                .ok_or_else(|| Error::Config("pdm-lite requires pdm parameters".into()))?;
            if let Some(obs) = &self.spec.obstacles {
                obs.validate(p.start, p.goal)?;
            }
        }
        Ok(())
    }
}

pub type DomainFactory = fn() -> Domain;

/// Name-keyed domain constructors. The defaults register every built-in
/// domain; callers may add their own under new names.
#[derive(Clone)]
pub struct DomainRegistry {
    entries: BTreeMap<String, DomainFactory>,
}

impl Default for DomainRegistry {
    fn default() -> Self {
        let mut r = DomainRegistry {
            entries: BTreeMap::new(),
        };
        r.register("so3", || Domain::default_for(DomainId::So3));
        r.register("se3", || Domain::default_for(DomainId::Se3));
        r.register("terrain", || Domain::default_for(DomainId::Terrain));
        r.register("so3-impulse", || Domain::default_for(DomainId::So3Impulse));
        r.register("se3-lever", || Domain::default_for(DomainId::Se3Lever));
        r.register("terrain-ridge", || Domain::default_for(DomainId::TerrainRidge));
        r.register("pdm-lite", || Domain::default_for(DomainId::PdmLite));
        r
    }
}

impl DomainRegistry {
    pub fn register(&mut self, name: &str, factory: DomainFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn create(&self, name: &str) -> Result<Domain> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::UnknownDomain(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in DomainId::ALL {
            assert_eq!(id.name().parse::<DomainId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
        assert!(matches!("so4".parse::<DomainId>(), Err(Error::UnknownDomain(_))));
    }

    #[test]
    fn defaults_validate() {
        let reg = DomainRegistry::default();
        for id in DomainId::ALL {
            let d = reg.create(id.name()).unwrap();
            assert_eq!(d.id(), id);
            d.validate().unwrap();
        }
        assert_eq!(reg.names().count(), 7);
        assert!(reg.create("nope").is_err());
    }

    #[test]
    fn alpha_must_be_positive() {
        let mut s = DomainSpec::default_for(DomainId::Se3);
        s.alpha = 0.0;
        assert!(s.validate().is_err());
        let mut s = DomainSpec::default_for(DomainId::Terrain);
        s.field = None;
        assert!(s.validate().is_err());
    }
}
