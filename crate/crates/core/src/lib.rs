//! Neural solvers for elliptic optimal control problems.
//!
//! The coupled approach trains a state network and an adjoint network on the residual of
//! the reduced optimality system and recovers the control from the adjoint. Three
//! baselines share the same engine: the adjoint-oriented alternating scheme, the penalty
//! method and the augmented Lagrangian method.

pub mod error;
pub mod geometry;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type FieldEval64 = nn::FieldEval<f64>;
pub type LossBreakdown64 = loss::LossBreakdown<f64>;
pub type SolveReport64 = solvers::SolveReport<f64>;
pub type SolveReport32 = solvers::SolveReport<f32>;
