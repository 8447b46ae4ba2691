//! Discrepancy measures between probability distributions.

mod closed_form;
mod gaussian;
mod kl;
mod quantile;
mod sinkhorn;

pub use closed_form::{w2_delta_uniform, w2_shifted_deltas_uniform, w2_symmetric_deltas_uniform};
pub use gaussian::{sqrtm, w2_gaussian_closed_form, GaussianMeasure};
pub use kl::kl_divergence;
pub use quantile::{w1_1d_quantile, w2_1d_quantile, wasserstein_1d_atoms, wasserstein_1d_empirical};
pub use sinkhorn::{
    sinkhorn_ot_cost, sinkhorn_solve, wasserstein_p, SinkhornConfig, SinkhornSolution, SinkhornSolver,
    DEFAULT_JITTER, DEFAULT_MAX_ITERATIONS, DEFAULT_RELATIVE_EPSILON, DEFAULT_TOLERANCE,
};
