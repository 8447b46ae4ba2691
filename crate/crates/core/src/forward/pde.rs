//! Finite-volume solver for `du/dt = D lap(u) - v(t).grad(u) + S` on a square
//! with zero-flux walls and zero initial data.
//!
//! Cells are uniform; every interior face carries a diffusive and a
//! convective flux and wall faces carry none, so the scheme conserves mass to
//! round-off. Time stepping is forward Euler with a uniform step chosen from
//! the largest velocity on the horizon, shortened only to land exactly on the
//! requested sample times.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::source::{source_term, SourceParams};
use crate::error::{Error, Result};
use crate::grid::Axis;

/// Convective face interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// First-order upwind.
    Upwind,
    /// Central while the cell Peclet number is at most 2, upwind beyond.
    /// Both branches keep every neighbour coefficient nonnegative.
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeConfig {
    pub diffusion: f64,
    /// `v(t) = (velocity_rate[0] t, velocity_rate[1] t)`.
    pub velocity_rate: [f64; 2],
    pub domain: [f64; 2],
    pub grid_n: usize,
    /// Fixed step; `None` picks `safety` times the stability bound.
    pub dt: Option<f64>,
    pub safety: f64,
    pub scheme: Scheme,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            diffusion: 1.0,
            velocity_rate: [50.0, 50.0],
            domain: [-2.0, 3.0],
            grid_n: 128,
            dt: None,
            safety: 0.9,
            scheme: Scheme::Hybrid,
        }
    }
}

impl PdeConfig {
    /// Returns every problem found, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.diffusion > 0.0) || !self.diffusion.is_finite() {
            out.push(format!("pde.diffusion must be finite and > 0, got {}", self.diffusion));
        }
        if !self.velocity_rate.iter().all(|v| v.is_finite()) {
            out.push("pde.velocity_rate must be finite".into());
        }
        if !(self.domain[0] < self.domain[1]) || !self.domain.iter().all(|v| v.is_finite()) {
            out.push(format!("pde.domain needs lo < hi, got {:?}", self.domain));
        }
        if self.grid_n < 32 {
            out.push(format!("pde.grid_n must be >= 32, got {}", self.grid_n));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                out.push(format!("pde.dt must be finite and > 0, got {dt}"));
            }
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            out.push(format!("pde.safety must lie in (0, 1], got {}", self.safety));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p.join("; ")))
        }
    }

    pub fn dx(&self) -> f64 {
        (self.domain[1] - self.domain[0]) / self.grid_n as f64
    }

    pub fn axis(&self) -> Axis {
        Axis::cell_centers(self.domain[0], self.domain[1], self.grid_n).expect("validated domain")
    }

    pub fn velocity(&self, t: f64) -> [f64; 2] {
        [self.velocity_rate[0] * t, self.velocity_rate[1] * t]
    }

    /// Largest forward-Euler step that keeps the update monotone at time `t`:
    /// `1 / (4 D / dx^2 + (|v_x| + |v_y|) / dx)`.
    pub fn stability_bound(&self, t: f64) -> f64 {
        let dx = self.dx();
        let v = self.velocity(t);
        1.0 / (4.0 * self.diffusion / (dx * dx) + (v[0].abs() + v[1].abs()) / dx)
    }

    /// Step used on a horizon ending at `t_end`.
    pub fn step_for(&self, t_end: f64) -> Result<f64> {
        let bound = self.stability_bound(t_end);
        match self.dt {
            Some(dt) if dt > bound => Err(Error::StabilityViolation { dt, bound }),
            Some(dt) => Ok(dt),
            None => Ok(self.safety * bound),
        }
    }
}

/// Cell-averaged concentration at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField {
    /// `grid_n * grid_n` values, x-major (`ix * n + iy`).
    pub values: Vec<f64>,
    pub time: f64,
    pub axis: Axis,
}

impl ConcentrationField {
    pub fn zeros(axis: Axis, time: f64) -> Self {
        ConcentrationField { values: vec![0.0; axis.len * axis.len], time, axis }
    }

    pub fn n(&self) -> usize {
        self.axis.len
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.axis.len + iy]
    }

    /// Bilinear interpolation between cell centres; constant beyond the
    /// outermost centres, consistent with the zero-gradient walls.
    pub fn probe(&self, z: [f64; 2]) -> f64 {
        let n = self.axis.len;
        let locate = |x: f64| {
            let f = ((x - self.axis.start) / self.axis.spacing).clamp(0.0, (n - 1) as f64);
            let i = (f.floor() as usize).min(n - 2);
            (i, f - i as f64)
        };
        let (i, wx) = locate(z[0]);
        let (j, wy) = locate(z[1]);
        let a = self.get(i, j) * (1.0 - wy) + self.get(i, j + 1) * wy;
        let b = self.get(i + 1, j) * (1.0 - wy) + self.get(i + 1, j + 1) * wy;
        a * (1.0 - wx) + b * wx
    }

    /// `sum u dA`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.axis.spacing * self.axis.spacing
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Row-major CSV with header `z_x,z_y,u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "z_x,z_y,u")?;
        let n = self.n();
        for ix in 0..n {
            let x = self.axis.coord(ix);
            for iy in 0..n {
                writeln!(w, "{},{},{}", x, self.axis.coord(iy), self.get(ix, iy))?;
            }
        }
        Ok(())
    }
}

/// Face value weights `(w_left, w_right)` for a face with velocity `v`.
fn face_weights(scheme: Scheme, v: f64, dx: f64, diffusion: f64) -> (f64, f64) {
    let central = scheme == Scheme::Hybrid && v.abs() * dx <= 2.0 * diffusion;
    if central {
        (0.5, 0.5)
    } else if v >= 0.0 {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

/// Solves from `u = 0` at `t = 0` and returns the field at each sample time.
pub fn solve_pde(
    config: &PdeConfig,
    theta: &SourceParams,
    sample_times: &[f64],
) -> Result<Vec<ConcentrationField>> {
    config.validate()?;
    if sample_times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidConfig("sample times must be finite and >= 0".into()));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("sample times must be sorted".into()));
    }
    let axis = config.axis();
    let n = config.grid_n;
    let Some(&t_end) = sample_times.last() else {
        return Ok(Vec::new());
    };
    let dt = config.step_for(t_end)?;
    let dx = config.dx();
    let d = config.diffusion;

    let source: Vec<f64> = (0..n * n)
        .map(|k| source_term([axis.coord(k / n), axis.coord(k % n)], 0.0, theta))
        .collect();

    let mut u = vec![0.0; n * n];
    let mut next = vec![0.0; n * n];
    // Net flux divergence per cell, reused across steps.
    let mut div = vec![0.0; n * n];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());

    for &target in sample_times {
        while target - t > 1e-12 * target.max(1.0) {
            let h = dt.min(target - t);
            let v = config.velocity(t);
            let (axl, axr) = face_weights(config.scheme, v[0], dx, d);
            let (ayl, ayr) = face_weights(config.scheme, v[1], dx, d);
            let kd = d / dx;
            div.iter_mut().for_each(|x| *x = 0.0);
            // x faces between (ix, iy) and (ix + 1, iy).
            for ix in 0..n - 1 {
                let (row, nrow) = (ix * n, (ix + 1) * n);
                for iy in 0..n {
                    let (ul, ur) = (u[row + iy], u[nrow + iy]);
                    let f = -kd * (ur - ul) + v[0] * (axl * ul + axr * ur);
                    div[row + iy] += f;
                    div[nrow + iy] -= f;
                }
            }
            // y faces between (ix, iy) and (ix, iy + 1).
            for ix in 0..n {
                let row = ix * n;
                for iy in 0..n - 1 {
                    let (ul, ur) = (u[row + iy], u[row + iy + 1]);
                    let f = -kd * (ur - ul) + v[1] * (ayl * ul + ayr * ur);
                    div[row + iy] += f;
                    div[row + iy + 1] -= f;
                }
            }
            let c = h / dx;
            for k in 0..n * n {
                next[k] = u[k] - c * div[k] + h * source[k];
            }
            std::mem::swap(&mut u, &mut next);
            t += h;
        }
        t = target;
        if let Some(bad) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("concentration at cell {bad}, t = {t}")));
        }
        out.push(ConcentrationField { values: u.clone(), time: target, axis });
    }
    Ok(out)
}
