//! Posterior-versus-prior utilities evaluated against one frozen prior.
//!
//! [`UtilityEvaluator`] does the per-stage work once: it restricts the prior
//! to its support, and for transport utilities builds a coarse histogram
//! lattice over the support's bounding box together with a reusable
//! Sinkhorn solver. Each outcome then costs one pass over the support plus,
//! for W1/W2, one small transport solve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridDistribution, Lattice};
use crate::inference::PosteriorState;
use crate::ot::{SinkhornConfig, SinkhornSolution, SinkhornSolver};

/// Discrepancy between posterior and prior used as the design reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Kl,
    W1,
    W2,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 3] = [UtilityKind::Kl, UtilityKind::W1, UtilityKind::W2];

    pub fn as_str(self) -> &'static str {
        match self {
            UtilityKind::Kl => "kl",
            UtilityKind::W1 => "w1",
            UtilityKind::W2 => "w2",
        }
    }

    /// Ground-cost exponent, `None` for KL.
    pub fn exponent(self) -> Option<u32> {
        match self {
            UtilityKind::Kl => None,
            UtilityKind::W1 => Some(1),
            UtilityKind::W2 => Some(2),
        }
    }
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kl" => Ok(UtilityKind::Kl),
            "w1" => Ok(UtilityKind::W1),
            "w2" => Ok(UtilityKind::W2),
            other => Err(Error::InvalidConfig(format!("unknown utility kind '{other}' (expected kl, w1 or w2)"))),
        }
    }
}

/// Marginal tolerance of utility transport solves. The dual cost error is
/// second order in the violation, so this already fixes the cost to about
/// 1e-6 relative, far below the Monte-Carlo error of an expected utility.
pub const UTILITY_TOLERANCE: f64 = 1e-5;
pub const UTILITY_MAX_ITERATIONS: usize = 50_000;

/// Transport settings for W1/W2 utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtSettings {
    /// Histogram cells per axis over the prior's support box.
    pub bins: usize,
    /// `epsilon = relative_epsilon * diameter^p` of the histogram lattice.
    pub relative_epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Nodes whose prior weight is below `support_cutoff * max weight` do not
    /// widen the histogram box.
    pub support_cutoff: f64,
    /// Spacing, in units of the noise standard deviation, of the outcome
    /// grid on which expected W utilities are solved and then interpolated
    /// to the Monte-Carlo outcomes. Zero solves at every outcome.
    pub outcome_step: f64,
}

impl Default for OtSettings {
    fn default() -> Self {
        OtSettings {
            bins: 16,
            relative_epsilon: crate::ot::DEFAULT_RELATIVE_EPSILON,
            tolerance: UTILITY_TOLERANCE,
            max_iterations: UTILITY_MAX_ITERATIONS,
            support_cutoff: 1e-10,
            outcome_step: 0.5,
        }
    }
}

impl OtSettings {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.bins < 2 {
            out.push(format!("ot.bins must be >= 2, got {}", self.bins));
        }
        if !(self.relative_epsilon > 0.0) || !self.relative_epsilon.is_finite() {
            out.push(format!("ot.relative_epsilon must be > 0, got {}", self.relative_epsilon));
        }
        if !(self.tolerance > 0.0) {
            out.push(format!("ot.tolerance must be > 0, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            out.push("ot.max_iterations must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.support_cutoff) {
            out.push(format!("ot.support_cutoff must lie in [0, 1), got {}", self.support_cutoff));
        }
        if !(self.outcome_step >= 0.0) || !self.outcome_step.is_finite() {
            out.push(format!("ot.outcome_step must be >= 0, got {}", self.outcome_step));
        }
        out
    }
}

/// Histogram lattice and solver shared by every transport evaluation of a stage.
struct Transport {
    p: u32,
    /// Histogram cell of each support node.
    bin_of: Vec<usize>,
    prior_hist: Vec<f64>,
    solver: SinkhornSolver,
    lattice: Lattice,
}

/// Utility of posteriors against one fixed prior.
pub struct UtilityEvaluator {
    kind: UtilityKind,
    /// Lattice indices with positive prior weight.
    support: Vec<usize>,
    support_points: Vec<[f64; 2]>,
    prior: Vec<f64>,
    prior_total: f64,
    transport: Option<Transport>,
    outcome_step: f64,
}

/// Cell-centred axis of `bins` cells covering node coordinates `lo..=hi`
/// with node spacing `h`.
fn hist_axis(lo: f64, hi: f64, h: f64, bins: usize) -> Result<Axis> {
    let nodes = ((hi - lo) / h).round() as usize + 1;
    Axis::cell_centers(lo - 0.5 * h, hi + 0.5 * h, bins.min(nodes).max(1))
}

impl UtilityEvaluator {
    pub fn new(prior: &PosteriorState, kind: UtilityKind, ot: &OtSettings) -> Result<Self> {
        let lattice = prior.lattice();
        let weights = prior.weights();
        let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        let support_points: Vec<[f64; 2]> = support.iter().map(|&i| lattice.point(i)).collect();
        let prior_w: Vec<f64> = support.iter().map(|&i| weights[i]).collect();
        let transport = match kind.exponent() {
            None => None,
            Some(p) => Some(Self::transport(lattice, weights, &support, &support_points, &prior_w, p, ot)?),
        };
        let prior_total = prior_w.iter().sum();
        Ok(UtilityEvaluator { kind, support, support_points, prior: prior_w, prior_total, transport, outcome_step: ot.outcome_step })
    }

    fn transport(
        lattice: &Lattice,
        weights: &[f64],
        support: &[usize],
        points: &[[f64; 2]],
        prior: &[f64],
        p: u32,
        ot: &OtSettings,
    ) -> Result<Transport> {
        let problems = ot.problems();
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems.join("; ")));
        }
        let Lattice::Plane(ax, ay) = lattice else {
            return Err(Error::Dimension("transport utilities need a planar lattice".into()));
        };
        let top = weights.iter().copied().fold(0.0, f64::max);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for (&i, pt) in support.iter().zip(points) {
            if weights[i] >= ot.support_cutoff * top {
                for k in 0..2 {
                    lo[k] = lo[k].min(pt[k]);
                    hi[k] = hi[k].max(pt[k]);
                }
            }
        }
        let hx = hist_axis(lo[0], hi[0], ax.spacing, ot.bins)?;
        let hy = hist_axis(lo[1], hi[1], ay.spacing, ot.bins)?;
        let hist = Lattice::plane(hx, hy);
        let bin_of: Vec<usize> = points.iter().map(|&pt| hist.nearest(pt)).collect();
        let mut prior_hist = vec![0.0; hist.len()];
        for (&b, &w) in bin_of.iter().zip(prior) {
            prior_hist[b] += w;
        }
        let (blo, bhi) = hist.bounds();
        let diam = ((bhi[0] - blo[0]).powi(2) + (bhi[1] - blo[1]).powi(2)).sqrt().max(ax.spacing.min(ay.spacing));
        let config = SinkhornConfig {
            max_iterations: ot.max_iterations,
            convergence_tolerance: ot.tolerance,
            ..SinkhornConfig::relative(ot.relative_epsilon, diam, p)
        };
        let solver = SinkhornSolver::new(&hist, &hist, p, config)?;
        Ok(Transport { p, bin_of, prior_hist, solver, lattice: hist })
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    /// Locations of the prior's support, in lattice order.
    pub fn support_points(&self) -> &[[f64; 2]] {
        &self.support_points
    }

    /// Lattice indices of the prior's support.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn prior_weights(&self) -> &[f64] {
        &self.prior
    }

    /// Outcome grid spacing for interpolated expected utilities, in units
    /// of the noise standard deviation (zero for KL or when disabled).
    pub fn outcome_step(&self) -> f64 {
        if self.transport.is_some() {
            self.outcome_step
        } else {
            0.0
        }
    }

    /// Histogram lattice used by W1/W2, if any.
    pub fn histogram_lattice(&self) -> Option<&Lattice> {
        self.transport.as_ref().map(|t| &t.lattice)
    }

    /// Entropic self-distance bound of the binned prior, zero for KL.
    pub fn self_distance_bound(&self) -> f64 {
        match &self.transport {
            None => 0.0,
            Some(t) => {
                let hist = GridDistribution::from_masses(t.lattice.clone(), t.prior_hist.clone())
                    .expect("prior histogram has mass");
                t.solver.config().self_distance_bound(&hist, t.p)
            }
        }
    }

    /// Utility of the posterior with log-likelihood `-(y - g_i)^2 / (2 sigma^2)`
    /// at support node `i`, where `g` holds predictions on the support.
    ///
    /// `warm` carries transport potentials between calls; pass the same slot
    /// for similar outcomes.
    pub fn utility(&self, g: &[f64], y: f64, sigma: f64, warm: &mut Option<SinkhornSolution>) -> Result<f64> {
        debug_assert_eq!(g.len(), self.support.len());
        let scale = 0.5 / (sigma * sigma);
        let mut best = f64::INFINITY;
        for &gi in g {
            best = best.min((y - gi) * (y - gi));
        }
        // log-likelihood minus its maximum, <= 0.
        let shifted = |gi: f64| -scale * ((y - gi) * (y - gi) - best);
        match &self.transport {
            None => {
                let (mut s0, mut s1) = (0.0, 0.0);
                for (&gi, &p) in g.iter().zip(&self.prior) {
                    let l = shifted(gi);
                    let e = p * l.exp();
                    s0 += e;
                    s1 += e * l;
                }
                if !(s0 > 0.0) {
                    return Err(Error::DegeneratePosterior("posterior mass underflowed".into()));
                }
                // Dividing by the prior total (summed in the same order) makes a
                // constant likelihood give exactly zero.
                Ok((s1 / s0 - (s0 / self.prior_total).ln()).max(0.0))
            }
            Some(t) => {
                let mut hist = vec![0.0; t.prior_hist.len()];
                let mut total = 0.0;
                for ((&gi, &p), &b) in g.iter().zip(&self.prior).zip(&t.bin_of) {
                    let e = p * shifted(gi).exp();
                    hist[b] += e;
                    total += e;
                }
                if !(total > 0.0) {
                    return Err(Error::DegeneratePosterior("posterior mass underflowed".into()));
                }
                hist.iter_mut().for_each(|x| *x /= total);
                let sol = match warm.as_ref() {
                    Some(prev) => t.solver.solve_warm(&hist, &t.prior_hist, prev)?,
                    None => t.solver.solve(&hist, &t.prior_hist)?,
                };
                let cost = sol.cost;
                *warm = Some(sol);
                Ok(if t.p == 2 { cost.sqrt() } else { cost })
            }
        }
    }

    /// Utility of an explicit posterior on the prior's lattice.
    pub fn utility_of(&self, posterior: &PosteriorState) -> Result<f64> {
        let w = posterior.weights();
        match &self.transport {
            None => {
                let mut kl = 0.0;
                for (&i, &q) in self.support.iter().zip(&self.prior) {
                    let p = w[i];
                    if p > 0.0 {
                        kl += p * (p / q).ln();
                    }
                }
                let outside: f64 = w.iter().enumerate().filter(|(i, _)| self.support.binary_search(i).is_err()).map(|(_, p)| p).sum();
                if outside > 0.0 {
                    return Err(Error::SupportViolation("posterior has mass outside the prior support".into()));
                }
                Ok(kl.max(0.0))
            }
            Some(t) => {
                let mut hist = vec![0.0; t.prior_hist.len()];
                for (&i, &b) in self.support.iter().zip(&t.bin_of) {
                    hist[b] += w[i];
                }
                let cost = t.solver.solve(&hist, &t.prior_hist)?.cost;
                Ok(if t.p == 2 { cost.sqrt() } else { cost })
            }
        }
    }
}
