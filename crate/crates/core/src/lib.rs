//! Budgeted adaptive correction scheduling for constrained rollouts.
//!
//! A rollout alternates an ambient update with an optional projection onto a
//! constraint set. Schedules decide when to project under a fixed budget; the
//! adaptive schedule spends corrections where the online defect exceeds a
//! calibrated, time- and budget-dependent threshold.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod pdm;
pub mod rollout;
pub mod schedule;

pub use domain::{Domain, DomainId, DomainRegistry, DomainSpec};
pub use dynamics::{DynamicsParams, NoiseStream};
pub use error::{Error, Result};
pub use geometry::State;
