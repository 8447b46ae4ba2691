//! False-reward scan of the isotropic toy model.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{toy_observe, ToyModel};
use crate::grid::{Axis, GridDistribution, Lattice};
use crate::inference::{ring_posterior, PosteriorState, RING_KERNEL_WIDTH, TOY_LATTICE_N};
use crate::ot::{kl_divergence, wasserstein_p, SinkhornConfig, DEFAULT_RELATIVE_EPSILON, DEFAULT_TOLERANCE};

pub const TOY_TRUTH: [f64; 2] = [0.9, 1.2];
pub const TOY_DOMAIN: [f64; 2] = [0.0, 3.0];

/// Settings of the toy scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySettings {
    pub model: ToyModel,
    /// Cells per axis of the parameter lattice over the toy domain.
    pub lattice_n: usize,
    pub kernel_width: f64,
    /// Sensor positions, evenly spaced in `s` over `[0, 1]`.
    pub positions: usize,
    /// `epsilon = relative_epsilon * diameter^p`.
    pub relative_epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// W1 is computed on the lattice coarsened by this factor per axis,
    /// since its cost matrix is not separable.
    pub w1_block: usize,
}

impl Default for ToySettings {
    fn default() -> Self {
        ToySettings {
            model: ToyModel::LinearDecay { b: 5.0 },
            lattice_n: TOY_LATTICE_N,
            kernel_width: RING_KERNEL_WIDTH,
            positions: 41,
            relative_epsilon: DEFAULT_RELATIVE_EPSILON,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: 20_000,
            w1_block: 3,
        }
    }
}

impl ToySettings {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lattice_n < 2 {
            out.push(format!("toy.lattice_n must be >= 2, got {}", self.lattice_n));
        }
        if !(self.kernel_width > 0.0) || !self.kernel_width.is_finite() {
            out.push(format!("toy.kernel_width must be > 0, got {}", self.kernel_width));
        }
        if self.positions < 40 {
            out.push(format!("toy.positions must be >= 40, got {}", self.positions));
        }
        if !(self.relative_epsilon > 0.0) || !self.relative_epsilon.is_finite() {
            out.push(format!("toy.relative_epsilon must be > 0, got {}", self.relative_epsilon));
        }
        if !(self.tolerance > 0.0) {
            out.push(format!("toy.tolerance must be > 0, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            out.push("toy.max_iterations must be > 0".into());
        }
        if self.w1_block == 0 || self.lattice_n % self.w1_block.max(1) != 0 {
            out.push(format!("toy.w1_block must divide toy.lattice_n, got {}", self.w1_block));
        }
        if let ToyModel::LinearDecay { b } = self.model {
            if !b.is_finite() {
                out.push("toy.model.b must be finite".into());
            }
        }
        out
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::cells(TOY_DOMAIN[0], TOY_DOMAIN[1], self.lattice_n)
    }

    fn sinkhorn(&self, p: u32) -> SinkhornConfig {
        let diameter = (TOY_DOMAIN[1] - TOY_DOMAIN[0]) * std::f64::consts::SQRT_2;
        let mut c = SinkhornConfig::relative(self.relative_epsilon, diameter, p);
        c.convergence_tolerance = self.tolerance;
        c.max_iterations = self.max_iterations;
        c
    }
}

/// One scanned sensor position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub s: f64,
    #[serde(rename = "W1")]
    pub w1: f64,
    #[serde(rename = "W2")]
    pub w2: f64,
    #[serde(rename = "KL")]
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyScan {
    pub rows: Vec<ScanRow>,
}

impl ToyScan {
    /// Values at the source (`s = 0`), the reference line of the scan.
    pub fn baseline(&self) -> ScanRow {
        self.rows[0]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,W1,W2,KL")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.s, r.w1, r.w2, r.kl)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "s,W1,W2,KL" {
                    return Err(Error::Io(format!("unexpected toy scan header '{line}'")));
                }
                continue;
            }
            let v = parse_row(&line, 4)?;
            rows.push(ScanRow { s: v[0], w1: v[1], w2: v[2], kl: v[3] });
        }
        Ok(ToyScan { rows })
    }
}

pub(crate) fn parse_row(line: &str, width: usize) -> Result<Vec<f64>> {
    let v = line
        .split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Io(format!("bad number '{f}': {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != width {
        return Err(Error::Io(format!("expected {width} fields, got {}", v.len())));
    }
    Ok(v)
}

/// Sensor at fraction `s` of the way from the truth to the lower-left corner.
pub fn scan_sensor(s: f64) -> [f64; 2] {
    [(1.0 - s) * TOY_TRUTH[0], (1.0 - s) * TOY_TRUTH[1]]
}

/// Ring posterior of radius `radius` around `center`.
pub fn ring(center: [f64; 2], radius: f64, settings: &ToySettings) -> Result<PosteriorState> {
    let y = settings.model.response(radius);
    ring_posterior(center, y, settings.model, settings.kernel_width, settings.lattice()?)
}

/// Sums `block x block` groups of cells of a square cell lattice.
fn coarsen(dist: &GridDistribution, n: usize, block: usize) -> Result<GridDistribution> {
    let m = n / block;
    let mut masses = vec![0.0; m * m];
    for (i, &w) in dist.weights().iter().enumerate() {
        let (ix, iy) = (i / n, i % n);
        masses[(ix / block) * m + iy / block] += w;
    }
    let axis = Axis::cell_centers(TOY_DOMAIN[0], TOY_DOMAIN[1], m)?;
    GridDistribution::from_masses(Lattice::plane(axis, axis), masses)
}

/// W1, W2 and KL of `posterior` against the uniform prior of the toy domain.
pub fn ring_row(s: f64, posterior: &PosteriorState, settings: &ToySettings) -> Result<ScanRow> {
    let prior = GridDistribution::uniform(settings.lattice()?);
    let post = &posterior.distribution;
    let w2 = wasserstein_p(post, &prior, 2, &settings.sinkhorn(2))?;
    let (n, b) = (settings.lattice_n, settings.w1_block);
    let w1 = wasserstein_p(&coarsen(post, n, b)?, &coarsen(&prior, n, b)?, 1, &settings.sinkhorn(1))?;
    let kl = kl_divergence(post, &prior)?;
    Ok(ScanRow { s, w1, w2, kl })
}

/// Scans `positions` sensors from the source (`s = 0`) to the corner (`s = 1`).
pub fn run_toy_scan(settings: &ToySettings) -> Result<ToyScan> {
    let problems = settings.problems();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let lattice = settings.lattice()?;
    let mut rows = Vec::with_capacity(settings.positions);
    for k in 0..settings.positions {
        let s = k as f64 / (settings.positions - 1) as f64;
        let sensor = scan_sensor(s);
        let y = toy_observe(sensor, TOY_TRUTH, settings.model);
        let posterior = ring_posterior(sensor, y, settings.model, settings.kernel_width, lattice.clone())?;
        rows.push(ring_row(s, &posterior, settings)?);
    }
    Ok(ToyScan { rows })
}
