//! Preferential attachment with communities and two vertex types.
//!
//! Newcomers join a community, attach `m` edges preferentially (weighted by
//! degree and an attractiveness matrix between communities) and take a type
//! from the types of the vertices they attached to. The crate contains the
//! fixed-point analysis of the type rule, the community structure
//! (edge-end measure, reachability), a fast simulator, the deterministic
//! mean-field flow with its stationary points, and a command line front end.

pub mod cli;
pub mod error;
pub mod field;
pub mod numerics;
pub mod rules;
pub mod sim;
pub mod structure;

pub use error::{Error, Result};
pub use field::{FieldPoint, StationaryPoint};
pub use rules::{FixedPoint, FixedPointKind, FixedPointSet, Linearity, TypeRule};
pub use sim::{GraphState, Simulation, SnapshotSchedule, Trajectory};
pub use structure::{CommunityStructure, NuMeasure};
