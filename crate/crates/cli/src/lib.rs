//! Scenario-file parsing, experiment orchestration and CSV emission for the
//! DoS estimation and security-control simulator. The `dossim` binary is a
//! thin wrapper over these modules.

pub mod corpus;
pub mod emit;
pub mod runner;
pub mod scenario;
