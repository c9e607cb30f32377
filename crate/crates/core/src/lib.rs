//! Lock-free asynchronous proximal block coordinate descent with variance
//! reduction for composite objectives `F(x) = f(x) + g(x)`.
//!
//! The core is generic over the scalar type; `f64` aliases are provided at
//! the crate root.

pub mod bench;
pub mod check;
pub mod data;
pub mod error;
pub mod io;
pub mod lipschitz;
pub mod partition;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod theory;

pub use data::{DatasetMatrix, SparseVec};
pub use error::{Error, Result};
pub use lipschitz::{estimate_closed_form, validate_by_sampling, LipschitzEstimates, ValidationReport};
pub use partition::BlockPartition;
pub use problem::{CompositeProblem, Loss, Regularizer};
pub use scalar::Scalar;
pub use solver::{run, run_sequential, solve_high_accuracy, SolverConfig};
pub use theory::{gamma_bound, linear_rate, sublinear_bound, GammaBound, TheoryParams};

pub type Problem = CompositeProblem<f64>;
pub type Problem32 = CompositeProblem<f32>;
pub type Dataset = DatasetMatrix<f64>;
pub type Config = SolverConfig<f64>;
pub type Config32 = SolverConfig<f32>;
