//! End-to-end solvers: sparse inverse covariance, Poisson intensity
//! reconstruction and the LASSO with unknown variance.

mod graph;
mod hetlasso;
mod poisson;
pub mod synth;

pub use graph::{
    dpngs_solve, dual_decrement_sq, newton_graph_solve, proxgrad_graph_solve, DpngsDirection, GraphProblem, GraphSolution,
};
pub use hetlasso::{hetlasso_solve, HetLassoProblem, HetLassoSolution};
pub use poisson::{default_start, poisson_fixed_point_residual, poisson_solve, PoissonConfig, PoissonProblem, PoissonSolution};
pub use synth::{blur_matrix, phantom, synth_gmrf, synth_hetlasso, synth_poisson, Blur, SynthGmrf, SynthHetLasso, SynthPoisson};
