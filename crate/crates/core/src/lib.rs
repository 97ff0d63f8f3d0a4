//! Two-scale exponential integrators for charged particles in strong,
//! nonuniform magnetic fields, with direct reference solvers and a
//! convergence-study harness.

pub mod bench;
pub mod error;
pub mod integrators;
pub mod phi;
pub mod problems;
pub mod reference;
pub mod tau;
pub mod twoscale;

pub use error::{CpdError, Result};
pub use integrators::{solve, Method, SolveOptions, Tableau, Trajectory};
pub use problems::{problem_by_name, Problem, Problem2D, Problem3D};
pub use tau::{TauField, TauGrid};
pub use twoscale::{TwoScaleRhs, TwoScaleState};
