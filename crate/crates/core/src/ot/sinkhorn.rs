//! Entropic optimal transport between lattice measures.
//!
//! Solves
//!
//! ```text
//! OT_eps(a, b) = min_{gamma >= 0, gamma 1 = a, gamma^T 1 = b}  <C, gamma> + eps KL(gamma || a b^T)
//! ```
//!
//! with `C_ij = |x_i - y_j|^p`, by Sinkhorn iterations on the dual potentials
//! `(f, g)` in the log domain. The plan is
//! `gamma_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)`.
//!
//! Two details keep the solver fast on lattices:
//!
//! * For `p = 2` on two planar lattices the Gibbs kernel factorizes over the
//!   axes, so one kernel application is two passes of 1-D log-sum-exp instead
//!   of one dense pass.
//! * Each log-sum-exp row is evaluated as `max(h) + ln(K e)` with the kernel
//!   `K = exp(-C / eps)` precomputed and `e = exp(h - max(h))`. Entries of
//!   `K` and `e` below [`FLUSH`] are set to zero, which keeps subnormal
//!   numbers (and their slow arithmetic) out of the inner loops. Rows whose
//!   sum falls below [`TINY`] are recomputed with the exact per-row maximum,
//!   so neither underflow nor the flushed terms leak into the potentials.
//!
//! The target `eps` is reached by geometric annealing from the largest cost
//! entry, warm-starting the potentials at every level.

use crate::error::{Error, Result};
use crate::grid::{joint_diameter, Axis, GridDistribution, Lattice};

/// Multiplier on `diameter^p` that gives the default regularization.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: usize = 5000;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_JITTER: f64 = 1e-12;

/// Row sums below this are recomputed exactly. Far above anything the
/// flushed terms could have contributed.
const TINY: f64 = 1e-100;
/// Kernel and exponential entries below this are stored as zero.
const FLUSH: f64 = 1e-150;

#[inline]
fn flushed(x: f64) -> f64 {
    if x < FLUSH {
        0.0
    } else {
        x
    }
}
/// Largest dense cost matrix accepted.
const MAX_DENSE_ENTRIES: usize = 50_000_000;
/// Annealing ratio between consecutive regularization levels.
const ANNEAL: f64 = 0.5;
/// Marginal violation accepted before leaving an intermediate level.
const LEVEL_TOLERANCE: f64 = 1e-4;
const LEVEL_MAX_ITERATIONS: usize = 30;
/// Annealing levels re-run above the target after a warm start.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Largest accepted row-marginal violation `max_i |gamma 1 - a|_i`.
    pub convergence_tolerance: f64,
    /// Added to zero weights before renormalizing.
    pub jitter: f64,
}

impl SinkhornConfig {
    pub fn new(epsilon: f64) -> Self {
        SinkhornConfig {
            epsilon,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            convergence_tolerance: DEFAULT_TOLERANCE,
            jitter: DEFAULT_JITTER,
        }
    }

    /// `eps = relative * diameter^p`, so the entropic blur is the same
    /// fraction of the domain whatever its size.
    pub fn relative(relative: f64, diameter: f64, p: u32) -> Self {
        SinkhornConfig::new(relative * diameter.powi(p as i32))
    }

    /// Default configuration for a pair of measures: `eps = 1e-3 diam^p`.
    pub fn default_for(mu: &GridDistribution, nu: &GridDistribution, p: u32) -> Self {
        let d = joint_diameter(mu.lattice(), nu.lattice());
        SinkhornConfig::relative(DEFAULT_RELATIVE_EPSILON, if d > 0.0 { d } else { 1.0 }, p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "convergence_tolerance must be > 0, got {}",
                self.convergence_tolerance
            )));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::InvalidConfig(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        Ok(())
    }

    /// Upper bound on the entropic self-distance `OT_eps(mu, mu)`.
    ///
    /// The diagonal plan is feasible, has zero transport cost and
    /// `KL(diag(a) || a a^T) = H(a)`, hence `OT_eps(mu, mu) <= eps H(mu)`.
    /// The returned value is the bound on the distance (square root for `p = 2`).
    pub fn self_distance_bound(&self, mu: &GridDistribution, p: u32) -> f64 {
        let c = self.epsilon * mu.entropy();
        if p == 2 {
            c.sqrt()
        } else {
            c
        }
    }
}

/// Converged Sinkhorn state.
#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    /// Regularized optimum `<C, gamma> + eps KL(gamma || a b^T)`, evaluated
    /// through the dual objective at the returned potentials.
    pub cost: f64,
    pub iterations: usize,
    pub marginal_violation: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// `exp(-C/eps)` and `C/eps` for one dense block, stored in both orientations.
#[derive(Debug, Clone)]
struct DenseBlock {
    rows: usize,
    cols: usize,
    scaled: Vec<f64>,
    kernel: Vec<f64>,
    scaled_t: Vec<f64>,
    kernel_t: Vec<f64>,
}

impl DenseBlock {
    fn new(cost: &[f64], rows: usize, cols: usize, eps: f64) -> Self {
        let scaled: Vec<f64> = cost.iter().map(|c| c / eps).collect();
        let kernel: Vec<f64> = scaled.iter().map(|s| flushed((-s).exp())).collect();
        let mut scaled_t = vec![0.0; rows * cols];
        let mut kernel_t = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                scaled_t[j * rows + i] = scaled[i * cols + j];
                kernel_t[j * rows + i] = kernel[i * cols + j];
            }
        }
        DenseBlock { rows, cols, scaled, kernel, scaled_t, kernel_t }
    }

    /// `out_i = LSE_j (h_j - C_ij/eps)`.
    fn apply(&self, h: &[f64], out: &mut [f64], e: &mut Vec<f64>) {
        lse_apply(&self.kernel, &self.scaled, self.rows, self.cols, h, out, e);
    }

    /// `out_j = LSE_i (h_i - C_ij/eps)`.
    fn apply_t(&self, h: &[f64], out: &mut [f64], e: &mut Vec<f64>) {
        lse_apply(&self.kernel_t, &self.scaled_t, self.cols, self.rows, h, out, e);
    }
}

fn lse_apply(kernel: &[f64], scaled: &[f64], rows: usize, cols: usize, h: &[f64], out: &mut [f64], e: &mut Vec<f64>) {
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        out[..rows].iter_mut().for_each(|o| *o = f64::NEG_INFINITY);
        return;
    }
    e.clear();
    e.extend(h.iter().map(|&x| flushed((x - m).exp())));
    for i in 0..rows {
        let krow = &kernel[i * cols..(i + 1) * cols];
        let s = dot(krow, e);
        out[i] = if s > TINY {
            m + s.ln()
        } else {
            let srow = &scaled[i * cols..(i + 1) * cols];
            let mx = h.iter().zip(srow).map(|(x, c)| x - c).fold(f64::NEG_INFINITY, f64::max);
            if mx == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                mx + h.iter().zip(srow).map(|(x, c)| (x - c - mx).exp()).sum::<f64>().ln()
            }
        };
    }
}

/// Factorized squared-Euclidean kernel between two planar lattices.
#[derive(Debug, Clone)]
struct Separable {
    x: DenseBlock,
    y: DenseBlock,
}

#[derive(Debug, Clone)]
enum Geometry {
    Dense { cost: Vec<f64>, rows: usize, cols: usize },
    Separable { cx: Vec<f64>, cy: Vec<f64>, nx: usize, ny: usize, mx: usize, my: usize },
}

fn axis_cost(a: &Axis, b: &Axis) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len * b.len);
    for i in 0..a.len {
        for j in 0..b.len {
            let d = a.coord(i) - b.coord(j);
            c.push(d * d);
        }
    }
    c
}

impl Geometry {
    fn new(x: &Lattice, y: &Lattice, p: u32) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::Dimension("measures live in different dimensions".into()));
        }
        if let (2, Lattice::Plane(ax, ay), Lattice::Plane(bx, by)) = (p, x, y) {
            return Ok(Geometry::Separable {
                cx: axis_cost(ax, bx),
                cy: axis_cost(ay, by),
                nx: ax.len,
                ny: ay.len,
                mx: bx.len,
                my: by.len,
            });
        }
        let (rows, cols) = (x.len(), y.len());
        if rows.saturating_mul(cols) > MAX_DENSE_ENTRIES {
            return Err(Error::InvalidConfig(format!(
                "dense {rows}x{cols} cost matrix is too large; rebin the measures first"
            )));
        }
        let mut cost = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let pi = x.point(i);
            for j in 0..cols {
                let pj = y.point(j);
                let d = ((pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2)).sqrt();
                cost.push(d.powi(p as i32));
            }
        }
        Ok(Geometry::Dense { cost, rows, cols })
    }

    fn max_cost(&self) -> f64 {
        let mx = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        match self {
            Geometry::Dense { cost, .. } => mx(cost),
            Geometry::Separable { cx, cy, .. } => mx(cx) + mx(cy),
        }
    }

    fn separable(&self, eps: f64) -> Option<Separable> {
        match self {
            Geometry::Dense { .. } => None,
            Geometry::Separable { cx, cy, nx, ny, mx, my } => Some(Separable {
                x: DenseBlock::new(cx, *nx, *mx, eps),
                y: DenseBlock::new(cy, *ny, *my, eps),
            }),
        }
    }
}

#[derive(Default)]
struct Scratch {
    e: Vec<f64>,
    h: Vec<f64>,
    t: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl Separable {
    /// `out_i = LSE_j (h_j - C_ij / eps)` over the second measure's nodes.
    fn apply(&self, h: &[f64], out: &mut [f64], s: &mut Scratch) {
        let (x, y) = (&self.x, &self.y);
        let (nx, mx, ny, my) = (x.rows, x.cols, y.rows, y.cols);
        s.t.resize(mx * ny, 0.0);
        for j1 in 0..mx {
            y.apply(&h[j1 * my..(j1 + 1) * my], &mut s.t[j1 * ny..(j1 + 1) * ny], &mut s.e);
        }
        s.v.resize(mx, 0.0);
        s.w.resize(nx, 0.0);
        for i2 in 0..ny {
            for j1 in 0..mx {
                s.v[j1] = s.t[j1 * ny + i2];
            }
            x.apply(&s.v, &mut s.w, &mut s.e);
            for i1 in 0..nx {
                out[i1 * ny + i2] = s.w[i1];
            }
        }
    }

    /// `out_j = LSE_i (h_i - C_ij / eps)` over the first measure's nodes.
    fn apply_t(&self, h: &[f64], out: &mut [f64], s: &mut Scratch) {
        let (x, y) = (&self.x, &self.y);
        let (nx, mx, ny, my) = (x.rows, x.cols, y.rows, y.cols);
        s.t.resize(nx * my, 0.0);
        for i1 in 0..nx {
            y.apply_t(&h[i1 * ny..(i1 + 1) * ny], &mut s.t[i1 * my..(i1 + 1) * my], &mut s.e);
        }
        s.v.resize(nx, 0.0);
        s.w.resize(mx, 0.0);
        for j2 in 0..my {
            for i1 in 0..nx {
                s.v[i1] = s.t[i1 * my + j2];
            }
            x.apply_t(&s.v, &mut s.w, &mut s.e);
            for j1 in 0..mx {
                out[j1 * my + j2] = s.w[j1];
            }
        }
    }
}

/// Dense Gibbs kernel with the potentials absorbed:
/// `k_ij = exp((fbar_i + gbar_j - C_ij) / eps)`.
///
/// Between absorptions only the potential increments enter the
/// exponentials, so their range stays small and the kernel rows sum to
/// order one near the solution. The kernel is rebuilt when the level changes
/// or an increment exceeds [`ABSORB`] in units of `eps`.
struct Absorbed<'a> {
    cost: &'a [f64],
    rows: usize,
    cols: usize,
    eps: f64,
    fbar: Vec<f64>,
    gbar: Vec<f64>,
    k: Vec<f64>,
}

const ABSORB: f64 = 30.0;

impl<'a> Absorbed<'a> {
    fn new(cost: &'a [f64], rows: usize, cols: usize) -> Self {
        Absorbed { cost, rows, cols, eps: f64::NAN, fbar: vec![0.0; rows], gbar: vec![0.0; cols], k: vec![0.0; rows * cols] }
    }

    fn ensure(&mut self, f: &[f64], g: &[f64], eps: f64) {
        let drift = |p: &[f64], q: &[f64]| p.iter().zip(q).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if self.eps == eps && drift(f, &self.fbar) <= ABSORB * eps && drift(g, &self.gbar) <= ABSORB * eps {
            return;
        }
        self.eps = eps;
        self.fbar.copy_from_slice(f);
        self.gbar.copy_from_slice(g);
        for i in 0..self.rows {
            let fi = f[i];
            let crow = &self.cost[i * self.cols..(i + 1) * self.cols];
            let krow = &mut self.k[i * self.cols..(i + 1) * self.cols];
            for j in 0..self.cols {
                krow[j] = flushed(((fi + g[j] - crow[j]) / eps).exp());
            }
        }
    }

    /// `out_i = LSE_j (lb_j + (g_j - C_ij) / eps)`.
    fn rows(&mut self, lb: &[f64], f: &[f64], g: &[f64], eps: f64, out: &mut [f64], s: &mut Scratch) {
        self.ensure(f, g, eps);
        s.h.clear();
        s.h.extend(lb.iter().zip(g).zip(&self.gbar).map(|((l, g), gb)| l + (g - gb) / eps));
        let m = s.h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s.e.clear();
        s.e.extend(s.h.iter().map(|&x| flushed((x - m).exp())));
        for i in 0..self.rows {
            let krow = &self.k[i * self.cols..(i + 1) * self.cols];
            let sum = dot(krow, &s.e);
            out[i] = if sum > TINY {
                m + sum.ln() - self.fbar[i] / eps
            } else {
                let crow = &self.cost[i * self.cols..(i + 1) * self.cols];
                exact_lse((0..self.cols).map(|j| lb[j] + (g[j] - crow[j]) / eps))
            };
        }
    }

    /// `out_j = LSE_i (la_i + (f_i - C_ij) / eps)`.
    fn cols(&mut self, la: &[f64], f: &[f64], g: &[f64], eps: f64, out: &mut [f64], s: &mut Scratch) {
        self.ensure(f, g, eps);
        s.h.clear();
        s.h.extend(la.iter().zip(f).zip(&self.fbar).map(|((l, f), fb)| l + (f - fb) / eps));
        let m = s.h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s.e.clear();
        s.e.extend(s.h.iter().map(|&x| flushed((x - m).exp())));
        s.t.clear();
        s.t.resize(self.cols, 0.0);
        for i in 0..self.rows {
            let e = s.e[i];
            if e == 0.0 {
                continue;
            }
            let krow = &self.k[i * self.cols..(i + 1) * self.cols];
            for (acc, k) in s.t.iter_mut().zip(krow) {
                *acc += k * e;
            }
        }
        for j in 0..self.cols {
            let sum = s.t[j];
            out[j] = if sum > TINY {
                m + sum.ln() - self.gbar[j] / eps
            } else {
                exact_lse((0..self.rows).map(|i| la[i] + (f[i] - self.cost[i * self.cols + j]) / eps))
            };
        }
    }
}

/// Dot product with four independent accumulators, which lets the compiler
/// vectorize the loop.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            acc[k] += a[k] * b[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn exact_lse(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|x| (x - mx).exp()).sum::<f64>().ln()
}

enum Operator<'a> {
    Separable(&'a Separable),
    Absorbed(Absorbed<'a>),
}

impl Operator<'_> {
    /// `out_i = LSE_j (lb_j + (g_j - C_ij) / eps)`.
    fn rows(&mut self, lb: &[f64], f: &[f64], g: &[f64], eps: f64, out: &mut [f64], s: &mut Scratch) {
        match self {
            Operator::Separable(k) => {
                let mut h = std::mem::take(&mut s.h);
                h.clear();
                h.extend(lb.iter().zip(g).map(|(l, g)| l + g / eps));
                k.apply(&h, out, s);
                s.h = h;
            }
            Operator::Absorbed(k) => k.rows(lb, f, g, eps, out, s),
        }
    }

    /// `out_j = LSE_i (la_i + (f_i - C_ij) / eps)`.
    fn cols(&mut self, la: &[f64], f: &[f64], g: &[f64], eps: f64, out: &mut [f64], s: &mut Scratch) {
        match self {
            Operator::Separable(k) => {
                let mut h = std::mem::take(&mut s.h);
                h.clear();
                h.extend(la.iter().zip(f).map(|(l, f)| l + f / eps));
                k.apply_t(&h, out, s);
                s.h = h;
            }
            Operator::Absorbed(k) => k.cols(la, f, g, eps, out, s),
        }
    }
}

/// Reusable solver for a fixed pair of supports.
///
/// Building the solver precomputes the cost geometry and, for factorized
/// kernels, the annealing kernels; [`SinkhornSolver::solve`] can then be
/// called for many weight pairs on the same supports.
#[derive(Debug, Clone)]
pub struct SinkhornSolver {
    rows: usize,
    cols: usize,
    config: SinkhornConfig,
    geometry: Geometry,
    levels: Vec<f64>,
    separable: Option<Vec<Separable>>,
}

impl SinkhornSolver {
    pub fn new(x: &Lattice, y: &Lattice, p: u32, config: SinkhornConfig) -> Result<Self> {
        config.validate()?;
        if p != 1 && p != 2 {
            return Err(Error::InvalidConfig(format!("cost exponent must be 1 or 2, got {p}")));
        }
        let geometry = Geometry::new(x, y, p)?;
        let mut levels = Vec::new();
        let mut eps = geometry.max_cost();
        while eps > config.epsilon {
            levels.push(eps);
            eps *= ANNEAL;
        }
        levels.push(config.epsilon);
        let separable = match geometry {
            Geometry::Separable { .. } => Some(levels.iter().filter_map(|&e| geometry.separable(e)).collect()),
            Geometry::Dense { .. } => None,
        };
        Ok(SinkhornSolver { rows: x.len(), cols: y.len(), config, geometry, levels, separable })
    }

    pub fn config(&self) -> &SinkhornConfig {
        &self.config
    }

    /// Solves for weights `a` (first support) and `b` (second support).
    ///
    /// Zero weights are jittered and both vectors renormalized first.
    pub fn solve(&self, a: &[f64], b: &[f64]) -> Result<SinkhornSolution> {
        self.solve_from(a, b, None)
    }

    /// Like [`SinkhornSolver::solve`], starting from the potentials of an
    /// earlier solution on the same supports. The annealing schedule is
    /// skipped, so this pays off when the new weights are close to the old.
    pub fn solve_warm(&self, a: &[f64], b: &[f64], start: &SinkhornSolution) -> Result<SinkhornSolution> {
        self.solve_from(a, b, Some(start))
    }

    fn solve_from(&self, a: &[f64], b: &[f64], start: Option<&SinkhornSolution>) -> Result<SinkhornSolution> {
        if a.len() != self.rows || b.len() != self.cols {
            return Err(Error::Dimension(format!(
                "weights of length ({}, {}) for supports of size ({}, {})",
                a.len(),
                b.len(),
                self.rows,
                self.cols
            )));
        }
        let a = jitter_normalize(a, self.config.jitter)?;
        let b = jitter_normalize(b, self.config.jitter)?;
        let la: Vec<f64> = a.iter().map(|x| x.ln()).collect();
        let lb: Vec<f64> = b.iter().map(|x| x.ln()).collect();

        let (mut f, mut g, first) = match start {
            Some(s) if s.f.len() == self.rows && s.g.len() == self.cols => (s.f.clone(), s.g.clone(), self.levels.len() - 1),
            _ => (vec![0.0; self.rows], vec![0.0; self.cols], 0),
        };
        let mut out_row = vec![0.0; self.rows];
        let mut out_col = vec![0.0; self.cols];
        let mut scratch = Scratch::default();
        let mut iterations = 0;
        let mut violation = f64::INFINITY;
        let last = self.levels.len() - 1;
        let mut op = match (&self.geometry, &self.separable) {
            (Geometry::Dense { cost, rows, cols }, _) => Operator::Absorbed(Absorbed::new(cost, *rows, *cols)),
            (_, Some(k)) => Operator::Separable(&k[first]),
            _ => unreachable!("factorized geometry always carries its kernels"),
        };

        for level in first..=last {
            let eps = self.levels[level];
            if let (Operator::Separable(k), Some(all)) = (&mut op, &self.separable) {
                *k = &all[level];
            }
            let (tol, cap) = if level == last {
                (self.config.convergence_tolerance, usize::MAX)
            } else {
                (LEVEL_TOLERANCE.max(self.config.convergence_tolerance), LEVEL_MAX_ITERATIONS)
            };
            let mut level_iterations = 0;
            let mut relax = Relaxation::new();
            loop {
                op.rows(&lb, &f, &g, eps, &mut out_row, &mut scratch);
                violation = 0.0;
                let mut l1 = 0.0;
                for i in 0..self.rows {
                    let d = (a[i] * (f[i] / eps + out_row[i]).exp() - a[i]).abs();
                    violation = f64::max(violation, d);
                    l1 += d;
                }
                if !violation.is_finite() {
                    return Err(Error::NonFinite("sinkhorn marginal became non-finite".into()));
                }
                if violation <= tol && (relax.omega > 1.0 || level_iterations == 0) {
                    // Row sums depend only on (f, g), so potentials carried over
                    // from another problem can pass the row test while the
                    // columns are off. Relaxed g-updates leave them off as well.
                    op.cols(&la, &f, &g, eps, &mut out_col, &mut scratch);
                    for j in 0..self.cols {
                        let c = b[j] * (g[j] / eps + out_col[j]).exp();
                        violation = f64::max(violation, (c - b[j]).abs());
                    }
                }
                if violation <= tol || level_iterations >= cap {
                    break;
                }
                if iterations >= self.config.max_iterations {
                    return Err(Error::NonConvergence { iterations, violation });
                }
                let w = relax.next(l1, level_iterations);
                for i in 0..self.rows {
                    f[i] = relaxed(f[i], -eps * out_row[i], w, eps);
                }
                op.cols(&la, &f, &g, eps, &mut out_col, &mut scratch);
                for j in 0..self.cols {
                    g[j] = relaxed(g[j], -eps * out_col[j], w, eps);
                }
                iterations += 1;
                level_iterations += 1;
            }
        }

        // Dual objective <a, f> + <b, g> - eps (|gamma| - 1) after an exact
        // f-update, which makes |gamma| = 1. The dual is stationary at the
        // optimum, so its error is second order in the marginal violation.
        let eps = self.config.epsilon;
        let mut cost = 0.0;
        for i in 0..self.rows {
            f[i] = -eps * out_row[i];
            cost += a[i] * f[i];
        }
        for j in 0..self.cols {
            cost += b[j] * g[j];
        }
        if !cost.is_finite() {
            return Err(Error::NonFinite("sinkhorn cost is non-finite".into()));
        }
        Ok(SinkhornSolution { cost: cost.max(0.0), iterations, marginal_violation: violation, f, g })
    }
}

/// Over-relaxed coordinate update from `old` toward the exact block maximizer `exact`.
///
/// Given the other potential, the dual objective is separable and each
/// coordinate contributes `f - eps exp((f - exact) / eps)` (times its weight).
/// The relaxed value is kept only if it does not lower that term, so every
/// half-step is a dual ascent step and the iteration converges for any `w`.
#[inline]
fn relaxed(old: f64, exact: f64, w: f64, eps: f64) -> f64 {
    if w == 1.0 {
        return exact;
    }
    let t_old = (old - exact) / eps;
    let t_new = (1.0 - w) * t_old;
    if (t_new - t_old) - (t_new.exp() - t_old.exp()) >= 0.0 {
        exact + eps * t_new
    } else {
        exact
    }
}

/// Successive over-relaxation factor for the potential updates.
///
/// Plain Sinkhorn runs first. Once the residual decays at a steady rate over
/// two consecutive windows, the plain rate `lambda` is inferred from the
/// observed one and the relaxation is set to `omega = 2 / (1 + sqrt(1 - lambda))`.
struct Relaxation {
    omega: f64,
    history: Vec<f64>,
    last_rho: f64,
    changed_at: usize,
}

impl Relaxation {
    const WARMUP: usize = 12;
    const WINDOW: usize = 6;
    /// Windows to wait after a change before measuring the new rate.
    const SETTLE: usize = 3;
    const MAX_OMEGA: f64 = 1.9;

    fn new() -> Self {
        Relaxation { omega: 1.0, history: Vec::new(), last_rho: f64::NAN, changed_at: 0 }
    }

    fn next(&mut self, residual: f64, level_iterations: usize) -> f64 {
        self.history.push(residual);
        if level_iterations < Self::WARMUP
            || level_iterations % Self::WINDOW != 0
            || level_iterations < self.changed_at + Self::SETTLE * Self::WINDOW
        {
            return self.omega;
        }
        let n = self.history.len();
        let rho = (residual / self.history[n - 1 - Self::WINDOW]).powf(1.0 / Self::WINDOW as f64);
        let steady = (rho - self.last_rho).abs() < 0.1 * (1.0 - rho);
        self.last_rho = rho;
        if steady && rho > 0.0 && rho < 1.0 {
            // Observed rate rho under relaxation w satisfies
            // (rho + w - 1)^2 = lambda w^2 rho for the plain rate lambda.
            let w = self.omega;
            let lambda = ((rho + w - 1.0).powi(2) / (w * w * rho)).min(1.0);
            let target = (2.0 / (1.0 + (1.0 - lambda).sqrt())).min(Self::MAX_OMEGA);
            if target > w + 0.02 {
                self.omega = target;
                self.changed_at = level_iterations;
                self.last_rho = f64::NAN;
            }
        }
        self.omega
    }
}

fn jitter_normalize(w: &[f64], jitter: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = w.iter().map(|&x| if x > 0.0 { x } else { jitter }).collect();
    let total: f64 = out.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidDistribution("weights have no positive mass; set a jitter".into()));
    }
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Regularized OT objective between two lattice measures with cost `|x - y|^p`.
pub fn sinkhorn_ot_cost(mu: &GridDistribution, nu: &GridDistribution, cost_exponent: u32, config: &SinkhornConfig) -> Result<f64> {
    Ok(sinkhorn_solve(mu, nu, cost_exponent, config)?.cost)
}

pub fn sinkhorn_solve(mu: &GridDistribution, nu: &GridDistribution, cost_exponent: u32, config: &SinkhornConfig) -> Result<SinkhornSolution> {
    SinkhornSolver::new(mu.lattice(), nu.lattice(), cost_exponent, *config)?.solve(mu.weights(), nu.weights())
}

/// Entropic approximation of `W_p`: `sqrt(OT_eps)` for `p = 2`, `OT_eps` for `p = 1`.
///
/// This is a biased approximation of the unregularized distance; in
/// particular `wasserstein_p(mu, mu) > 0` and is bounded by
/// [`SinkhornConfig::self_distance_bound`].
pub fn wasserstein_p(mu: &GridDistribution, nu: &GridDistribution, p: u32, config: &SinkhornConfig) -> Result<f64> {
    let c = sinkhorn_ot_cost(mu, nu, p, config)?;
    Ok(if p == 2 { c.sqrt() } else { c })
}
