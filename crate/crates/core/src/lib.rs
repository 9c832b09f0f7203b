//! Hazard analysis and safety-executive verification for guarded robotic
//! imaging workflows.
//!
//! The crate is organised around one process model (`model`), a timed
//! safety executive that runs it (`exec`), two hazard-analysis front ends
//! (`shard`, `stpa`) and a fault-injection harness that checks the executive
//! against requirement monitors (`sim`).

pub mod acceptance;
pub mod data;
pub mod exec;
mod level;
pub mod model;
pub mod report;
pub mod shard;
pub mod sim;
pub mod stpa;

pub use level::{HazardLevel, UnknownLevel};
