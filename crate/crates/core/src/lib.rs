pub mod duality;
pub mod error;
pub mod io;
pub mod operators;
pub mod perturb;
pub mod scenarios;
pub mod splitting;
pub mod vecspace;

pub use error::{Error, Result};
pub use operators::{OperatorSpec, ProjectableSet};
pub use splitting::{OperatorPair, SolveReport, SolveStatus, SolverOptions};
pub use vecspace::{Matrix, Vector};
