//! Composite self-concordant minimization: `min_x f(x) + g(x)` with `f`
//! standard self-concordant and `g` convex with a tractable proximal map.

// `!(x > 0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod counters;
pub mod error;
pub mod io;
pub mod linalg;
pub mod problem;
pub mod prox_grad;
pub mod prox_newton;
pub mod prox_ops;
pub mod scalar;
pub mod subsolver;
pub mod trace;
pub mod sc_core;

pub use counters::{CounterSnapshot, Counters};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NewtonConfigF64 = prox_newton::NewtonConfig<f64>;
pub type NewtonConfigF32 = prox_newton::NewtonConfig<f32>;
pub type GradConfigF64 = prox_grad::GradConfig<f64>;
pub type GradConfigF32 = prox_grad::GradConfig<f32>;
pub type GraphProblemF64 = apps::GraphProblem<f64>;
pub type GraphProblemF32 = apps::GraphProblem<f32>;
pub type PoissonProblemF64 = apps::PoissonProblem<f64>;
pub type PoissonProblemF32 = apps::PoissonProblem<f32>;
pub type HetLassoProblemF64 = apps::HetLassoProblem<f64>;
pub type HetLassoProblemF32 = apps::HetLassoProblem<f32>;
pub type ProblemInstanceF64<'a> = problem::ProblemInstance<'a, f64>;
pub type ProblemInstanceF32<'a> = problem::ProblemInstance<'a, f32>;
