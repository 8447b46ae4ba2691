//! Lattice Bayesian inference over the source location.

use std::io::Write;

use crate::error::{Error, Result};
use crate::forward::{toy_observe, Design, ForwardModel, Measurement, ToyModel};
use crate::grid::{GridDistribution, Lattice};

/// Nodes per axis of the default location lattice.
pub const DEFAULT_LATTICE_N: usize = 100;
/// Unnormalized evidence below this is treated as an incompatible measurement.
pub const MIN_EVIDENCE: f64 = 1e-300;
/// Smoothing width of the toy ring likelihood, in observation units.
pub const RING_KERNEL_WIDTH: f64 = 0.02;
/// Nodes per axis of the toy lattice over `[0, 3]^2`.
pub const TOY_LATTICE_N: usize = 150;

/// `n x n` cell-centred lattice tiling the parameter square `[0, 1]^2`.
pub fn parameter_lattice(n: usize) -> Result<Lattice> {
    Lattice::cells(0.0, 1.0, n)
}

/// Belief over `theta_G` after `stage` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub distribution: GridDistribution,
    pub stage: usize,
}

impl PosteriorState {
    pub fn new(distribution: GridDistribution, stage: usize) -> Result<Self> {
        if distribution.lattice().dim() != 2 {
            return Err(Error::Dimension("posterior lattice must be two-dimensional".into()));
        }
        Ok(PosteriorState { distribution, stage })
    }

    /// Uniform prior on the default `100 x 100` lattice.
    pub fn uniform_prior() -> Self {
        Self::uniform_on(parameter_lattice(DEFAULT_LATTICE_N).expect("static lattice"))
    }

    pub fn uniform_on(lattice: Lattice) -> Self {
        PosteriorState { distribution: GridDistribution::uniform(lattice), stage: 0 }
    }

    pub fn weights(&self) -> &[f64] {
        self.distribution.weights()
    }

    pub fn lattice(&self) -> &Lattice {
        self.distribution.lattice()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.lattice().points()
    }

    /// CSV with header `theta_x,theta_y,weight`, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "theta_x,theta_y,weight")?;
        for (i, &p) in self.weights().iter().enumerate() {
            let [x, y] = self.lattice().point(i);
            writeln!(w, "{x},{y},{p}")?;
        }
        Ok(())
    }
}

/// Measurements in stage order with strictly increasing times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    measurements: Vec<Measurement>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn push(&mut self, m: Measurement) -> Result<()> {
        if let Some(last) = self.measurements.last() {
            if !(m.design.time > last.design.time) {
                return Err(Error::InvalidConfig(format!(
                    "measurement at t = {} does not follow t = {}",
                    m.design.time, last.design.time
                )));
            }
        }
        self.measurements.push(m);
        Ok(())
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

fn check_noise(noise_std: f64) -> Result<()> {
    if !(noise_std > 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidConfig(format!("noise_std must be > 0, got {noise_std}")));
    }
    Ok(())
}

/// `log N(y; g, sigma^2)`.
#[inline]
pub fn gaussian_log_density(y: f64, mean: f64, sigma: f64) -> f64 {
    let z = (y - mean) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// `N(y; predict(theta_G, theta_E, d), noise_std^2)`.
pub fn likelihood<M: ForwardModel + ?Sized>(
    model: &M,
    y: f64,
    design: &Design,
    theta_g: [f64; 2],
    theta_e: f64,
    noise_std: f64,
) -> Result<f64> {
    check_noise(noise_std)?;
    let g = model.predict(theta_g, theta_e, design)?;
    Ok(gaussian_log_density(y, g, noise_std).exp())
}

/// Multiplies `prior` by `exp(log_lik)` and renormalizes.
///
/// The largest log-likelihood over the prior's support is subtracted before
/// exponentiation, so tails far beyond double range are handled. Returns the
/// normalized weights and the log evidence.
pub fn bayes_weights(prior: &[f64], log_lik: &[f64]) -> Result<(Vec<f64>, f64)> {
    debug_assert_eq!(prior.len(), log_lik.len());
    let mut top = f64::NEG_INFINITY;
    for (&p, &l) in prior.iter().zip(log_lik) {
        if p > 0.0 {
            if l.is_nan() {
                return Err(Error::NonFinite("log-likelihood".into()));
            }
            top = top.max(l);
        }
    }
    if top == f64::NEG_INFINITY {
        return Err(Error::DegeneratePosterior("likelihood vanishes on the prior support".into()));
    }
    let mut w: Vec<f64> = prior.iter().zip(log_lik).map(|(&p, &l)| if p > 0.0 { p * (l - top).exp() } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    let log_evidence = top + total.ln();
    if !(total > 0.0) || log_evidence < MIN_EVIDENCE.ln() {
        return Err(Error::DegeneratePosterior(format!("log evidence {log_evidence:.1}")));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok((w, log_evidence))
}

/// Log-likelihood of `y` at every node given model predictions `g`.
pub fn log_likelihoods(predictions: &[f64], y: f64, noise_std: f64) -> Vec<f64> {
    predictions.iter().map(|&g| gaussian_log_density(y, g, noise_std)).collect()
}

fn with_weights(state: &PosteriorState, weights: Vec<f64>, stage: usize) -> Result<PosteriorState> {
    Ok(PosteriorState { distribution: GridDistribution::new(state.lattice().clone(), weights)?, stage })
}

/// One Bayes step with measurement `m` under strength `theta_E`.
pub fn posterior_update<M: ForwardModel + ?Sized>(
    model: &M,
    prior: &PosteriorState,
    m: &Measurement,
    theta_e: f64,
) -> Result<PosteriorState> {
    check_noise(m.noise_std)?;
    let g = model.predict_many(&prior.points(), theta_e, &m.design)?;
    let (w, _) = bayes_weights(prior.weights(), &log_likelihoods(&g, m.value, m.noise_std))?;
    with_weights(prior, w, prior.stage + 1)
}

/// Posterior from `initial` and every measurement in `history`, with the
/// likelihood product accumulated in log space.
pub fn reupdate<M: ForwardModel + ?Sized>(
    model: &M,
    initial: &PosteriorState,
    history: &[Measurement],
    theta_e: f64,
) -> Result<PosteriorState> {
    if history.is_empty() {
        return Err(Error::InvalidConfig("re-update needs at least one measurement".into()));
    }
    let points = initial.points();
    let mut log_lik = vec![0.0; points.len()];
    for m in history {
        check_noise(m.noise_std)?;
        let g = model.predict_many(&points, theta_e, &m.design)?;
        for (acc, gi) in log_lik.iter_mut().zip(g) {
            *acc += gaussian_log_density(m.value, gi, m.noise_std);
        }
    }
    let (w, _) = bayes_weights(initial.weights(), &log_lik)?;
    with_weights(initial, w, initial.stage + history.len())
}

/// Index of the heaviest node; the first in x-major order wins ties.
pub fn map_index(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > weights[best] {
            best = i;
        }
    }
    best
}

/// Heaviest lattice node, ties going to the lexicographically smallest.
pub fn map_estimate(state: &PosteriorState) -> [f64; 2] {
    state.lattice().point(map_index(state.weights()))
}

pub fn distance_metric(theta_star: [f64; 2], theta_dagger: [f64; 2]) -> f64 {
    (theta_star[0] - theta_dagger[0]).hypot(theta_star[1] - theta_dagger[1])
}

/// Weighted covariance of a planar lattice distribution.
///
/// Moments are taken in index units and scaled by the spacings, so the
/// result does not depend on where the lattice sits.
pub fn covariance(dist: &GridDistribution) -> [[f64; 2]; 2] {
    let (sx, sy, ny) = match dist.lattice() {
        Lattice::Plane(x, y) => (x.spacing, y.spacing, y.len),
        Lattice::Line(a) => (a.spacing, 0.0, 1),
    };
    let w = dist.weights();
    let (mut mx, mut my) = (0.0, 0.0);
    for (k, &p) in w.iter().enumerate() {
        mx += p * (k / ny) as f64;
        my += p * (k % ny) as f64;
    }
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for (k, &p) in w.iter().enumerate() {
        if p > 0.0 {
            let dx = (k / ny) as f64 - mx;
            let dy = (k % ny) as f64 - my;
            cxx += p * dx * dx;
            cxy += p * dx * dy;
            cyy += p * dy * dy;
        }
    }
    [[cxx * sx * sx, cxy * sx * sy], [cxy * sx * sy, cyy * sy * sy]]
}

/// `sigma_eq = (lambda_1 lambda_2)^(1/4)` of the posterior covariance.
pub fn uncertainty_metric(state: &PosteriorState) -> f64 {
    equivalent_std(covariance(&state.distribution))
}

/// `(lambda_1 lambda_2)^(1/4)` with eigenvalues floored at zero.
pub fn equivalent_std(c: [[f64; 2]; 2]) -> f64 {
    let half_trace = 0.5 * (c[0][0] + c[1][1]);
    let gap = (0.25 * (c[0][0] - c[1][1]).powi(2) + c[0][1] * c[1][0]).max(0.0).sqrt();
    let l1 = (half_trace + gap).max(0.0);
    let l2 = (half_trace - gap).max(0.0);
    (l1 * l2).sqrt().sqrt()
}

/// Ring-shaped posterior of the isotropic toy model after reading `y` at
/// `sensor`: weights `exp(-(f(|sensor - theta|) - y)^2 / (2 w^2))`.
pub fn ring_posterior(
    sensor: [f64; 2],
    y: f64,
    model: ToyModel,
    kernel_width: f64,
    lattice: Lattice,
) -> Result<PosteriorState> {
    if !(kernel_width > 0.0) || !kernel_width.is_finite() {
        return Err(Error::InvalidConfig(format!("kernel width must be > 0, got {kernel_width}")));
    }
    let attainable = match model {
        ToyModel::LinearDecay { b } => y <= b,
        ToyModel::GaussianDecay => y > 0.0 && y <= 1.0,
    };
    if !attainable || !y.is_finite() {
        return Err(Error::InvalidConfig(format!("observation {y} is not attainable by {model:?}")));
    }
    let mut near = false;
    let log_w: Vec<f64> = lattice
        .points()
        .into_iter()
        .map(|theta| {
            let r = (toy_observe(sensor, theta, model) - y) / kernel_width;
            near |= r.abs() <= 10.0;
            -0.5 * r * r
        })
        .collect();
    if !near {
        return Err(Error::DegeneratePosterior("no lattice node within 10 kernel widths of the ring".into()));
    }
    let uniform = vec![1.0; log_w.len()];
    let (w, _) = bayes_weights(&uniform, &log_w)?;
    PosteriorState::new(GridDistribution::new(lattice, w)?, 1)
}
