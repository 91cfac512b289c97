//! Closed-loop simulation and evaluation for vision-based aircraft detect
//! and avoid.

pub mod cas;
pub mod dataset_io;
pub mod encounters;
pub mod geometry;
pub mod metrics;
pub mod perception;
pub mod rng;
pub mod simulator;
pub mod units;

pub use cas::{query_policy, value_iteration, Advisory, CasState, PolicyTable};
pub use encounters::{Conditions, Encounter, EncounterConfig, EncounterFeatures};
pub use geometry::{AircraftKind, AircraftState, BoundingBox, CameraModel, RelativeGeometry};
pub use perception::{IntruderEstimate, Perception};
pub use simulator::{run_batch, run_encounter, EncounterResult, Policy, SimConfig};
