//! Third-order Active Flux scheme for two-dimensional ideal MHD with the Godunov-Powell
//! source term and positivity-preserving limiters.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod limiters;
pub mod llf;
pub mod physics;
pub mod problems;
pub mod scheme;
pub mod solver;
pub mod stepper;

pub use config::RunConfig;
pub use error::{Location, Result, SolverError};
pub use grid::{BoundaryKind, BoundaryPolicy, DoFField, Mesh2D};
pub use physics::{ConservedState, GasModel, PrimitiveState};
pub use problems::{build_problem, ProblemParams, ProblemSpec};
pub use solver::{run, RunSummary, Simulation};
pub use stepper::{StageOptions, StepStats, Stepper};
