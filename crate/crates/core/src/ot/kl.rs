use crate::error::{Error, Result};
use crate::grid::GridDistribution;

/// `KL(posterior || prior)` on a shared lattice, with `0 log(0/q) = 0`.
///
/// Posterior mass on a node where the prior has none is reported as a
/// [`Error::SupportViolation`] instead of an infinite divergence.
pub fn kl_divergence(posterior: &GridDistribution, prior: &GridDistribution) -> Result<f64> {
    if posterior.lattice() != prior.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let mut kl = 0.0;
    for (i, (&p, &q)) in posterior.weights().iter().zip(prior.weights()).enumerate() {
        if p > 0.0 {
            if q <= 0.0 {
                return Err(Error::SupportViolation(format!(
                    "posterior mass {p:e} on node {i} where the prior is zero"
                )));
            }
            kl += p * (p / q).ln();
        }
    }
    Ok(kl.max(0.0))
}
