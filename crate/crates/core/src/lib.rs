//! Stochastic hierarchical planning of power-system operations: day-ahead and
//! short-term unit commitment with hour-ahead economic dispatch, solved in a
//! rolling horizon against actual renewable output.
//!
//! The optimization layers ([`lp`], [`mip`], [`sp`]) are generic over the
//! floating-point type; the aliases below fix it to `f64` or `f32`.

pub mod error;
pub mod formulation;
pub mod grid;
pub mod hierarchy;
pub mod lp;
pub mod metrics;
pub mod mip;
pub mod scalar;
pub mod scenario;
pub mod sp;
pub mod timeseries;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LinearProgramF64 = lp::LinearProgram<f64>;
pub type LinearProgramF32 = lp::LinearProgram<f32>;
pub type LpSolutionF64 = lp::LpSolution<f64>;
pub type LpSolutionF32 = lp::LpSolution<f32>;
pub type MixedIntegerProgramF64 = mip::MixedIntegerProgram<f64>;
pub type MixedIntegerProgramF32 = mip::MixedIntegerProgram<f32>;
pub type MipSolutionF64 = mip::MipSolution<f64>;
pub type MipSolutionF32 = mip::MipSolution<f32>;
pub type TwoStageProblemF64 = sp::TwoStageProblem<f64>;
pub type TwoStageProblemF32 = sp::TwoStageProblem<f32>;
pub type ScenariosF64 = sp::Scenarios<f64>;
pub type ScenariosF32 = sp::Scenarios<f32>;
