//! Restarted primal-dual hybrid gradient solver for conic programs.

pub mod cli;
pub mod cones;
pub mod engine;
pub mod error;
pub mod format;
pub mod linalg;
pub mod model;
pub mod restart;
pub mod scaling;
pub mod termination;

pub use engine::{solve, Method, SolverOptions, SolveResult};
pub use error::{Result, SolverError};
pub use model::{ConeKind, ConeSpec, ConicProblem};
pub use termination::ExitCode;
