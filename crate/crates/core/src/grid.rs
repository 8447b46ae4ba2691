//! Regular lattices and discrete probability measures living on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// A regular 1-D axis: `start + i * spacing` for `i in 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub spacing: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, spacing: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidDistribution("axis must have at least one node".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() || !start.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "axis spacing must be finite and strictly positive, got {spacing}"
            )));
        }
        Ok(Axis { start, spacing, len })
    }

    /// `len` nodes with the first at `lo` and the last at `hi`.
    ///
    /// A single-node axis sits at `lo` and records unit spacing.
    pub fn spanning(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if len == 1 {
            return Axis::new(lo, 1.0, 1);
        }
        if !(hi > lo) {
            return Err(Error::InvalidDistribution(format!("empty span [{lo}, {hi}]")));
        }
        Axis::new(lo, (hi - lo) / (len - 1) as f64, len)
    }

    /// Centers of `len` equal cells partitioning `[lo, hi]`.
    pub fn cell_centers(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if !(hi > lo) || len == 0 {
            return Err(Error::InvalidDistribution(format!("empty span [{lo}, {hi}]")));
        }
        let h = (hi - lo) / len as f64;
        Axis::new(lo + 0.5 * h, h, len)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.spacing
    }

    pub fn last(&self) -> f64 {
        self.coord(self.len - 1)
    }

    /// Index of the node nearest to `x`, clamped to the axis.
    #[inline]
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.start) / self.spacing).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.len - 1)
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.coord(i)).collect()
    }
}

/// A regular lattice in one or two dimensions.
///
/// Two-dimensional nodes are enumerated x-major: `index = ix * ny + iy`,
/// so a forward scan visits nodes in lexicographic `(x, y)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Lattice {
    Line(Axis),
    Plane(Axis, Axis),
}

impl Lattice {
    pub fn line(axis: Axis) -> Self {
        Lattice::Line(axis)
    }

    pub fn plane(x: Axis, y: Axis) -> Self {
        Lattice::Plane(x, y)
    }

    /// Square `n x n` lattice with nodes on both ends of `[lo, hi]`.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let a = Axis::spanning(lo, hi, n)?;
        Ok(Lattice::Plane(a, a))
    }

    /// Square lattice of `n x n` cell centres tiling `[lo, hi]^2`.
    pub fn cells(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let a = Axis::cell_centers(lo, hi, n)?;
        Ok(Lattice::Plane(a, a))
    }

    pub fn dim(&self) -> usize {
        match self {
            Lattice::Line(_) => 1,
            Lattice::Plane(..) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Lattice::Line(a) => a.len,
            Lattice::Plane(x, y) => x.len * y.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates; the second component is zero on a line.
    #[inline]
    pub fn point(&self, i: usize) -> [f64; 2] {
        match self {
            Lattice::Line(a) => [a.coord(i), 0.0],
            Lattice::Plane(x, y) => [x.coord(i / y.len), y.coord(i % y.len)],
        }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        match self {
            Lattice::Line(a) => a.spacing,
            Lattice::Plane(x, y) => x.spacing * y.spacing,
        }
    }

    /// Axis-aligned bounding box of the nodes, `(lo, hi)`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Lattice::Line(a) => ([a.start, 0.0], [a.last(), 0.0]),
            Lattice::Plane(x, y) => ([x.start, y.start], [x.last(), y.last()]),
        }
    }

    /// Index of the node nearest to `p`.
    pub fn nearest(&self, p: [f64; 2]) -> usize {
        match self {
            Lattice::Line(a) => a.nearest(p[0]),
            Lattice::Plane(x, y) => x.nearest(p[0]) * y.len + y.nearest(p[1]),
        }
    }
}

/// Diameter of the bounding box covering both lattices.
pub fn joint_diameter(a: &Lattice, b: &Lattice) -> f64 {
    let (alo, ahi) = a.bounds();
    let (blo, bhi) = b.bounds();
    let mut d2 = 0.0;
    for k in 0..a.dim().max(b.dim()) {
        let span = ahi[k].max(bhi[k]) - alo[k].min(blo[k]);
        d2 += span * span;
    }
    d2.sqrt()
}

/// A probability measure on the nodes of a regular lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDistribution {
    lattice: Lattice,
    weights: Vec<f64>,
}

impl GridDistribution {
    /// Wraps already-normalized weights, checking every invariant.
    pub fn new(lattice: Lattice, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != lattice.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for {} lattice nodes",
                weights.len(),
                lattice.len()
            )));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!("weight {w} is negative or non-finite")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}, not 1")));
        }
        Ok(GridDistribution { lattice, weights })
    }

    /// Normalizes nonnegative masses into a distribution.
    pub fn from_masses(lattice: Lattice, mut masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidDistribution("masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("total mass is zero".into()));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        GridDistribution::new(lattice, masses)
    }

    pub fn uniform(lattice: Lattice) -> Self {
        let n = lattice.len();
        let weights = vec![1.0 / n as f64; n];
        GridDistribution { lattice, weights }
    }

    pub fn point_mass(lattice: Lattice, index: usize) -> Result<Self> {
        if index >= lattice.len() {
            return Err(Error::InvalidDistribution(format!("node {index} outside lattice")));
        }
        let mut weights = vec![0.0; lattice.len()];
        weights[index] = 1.0;
        Ok(GridDistribution { lattice, weights })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.lattice.point(i)
    }

    pub fn cell_volume(&self) -> f64 {
        self.lattice.cell_volume()
    }

    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (i, &w) in self.weights.iter().enumerate() {
            let p = self.lattice.point(i);
            m[0] += w * p[0];
            m[1] += w * p[1];
        }
        m
    }

    /// Shannon entropy of the weights (natural log, `0 log 0 = 0`).
    pub fn entropy(&self) -> f64 {
        -self.weights.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum::<f64>()
    }

    /// Histogram of this measure on `target`: each node's mass goes to the
    /// nearest target node.
    pub fn rebin(&self, target: &Lattice) -> Result<GridDistribution> {
        if target.dim() != self.lattice.dim() {
            return Err(Error::Dimension("rebin target has a different dimension".into()));
        }
        let mut masses = vec![0.0; target.len()];
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                masses[target.nearest(self.lattice.point(i))] += w;
            }
        }
        GridDistribution::from_masses(target.clone(), masses)
    }

    /// Normalized histogram of sample points on `lattice` (nearest node,
    /// samples outside the lattice clamp to the boundary nodes).
    pub fn histogram(lattice: Lattice, samples: &[[f64; 2]]) -> Result<GridDistribution> {
        let mut masses = vec![0.0; lattice.len()];
        for &s in samples {
            masses[lattice.nearest(s)] += 1.0;
        }
        GridDistribution::from_masses(lattice, masses)
    }

    /// Adds `jitter` to every zero weight and renormalizes.
    pub fn jittered(&self, jitter: f64) -> GridDistribution {
        if jitter <= 0.0 || self.weights.iter().all(|&w| w > 0.0) {
            return self.clone();
        }
        let mut w: Vec<f64> = self.weights.iter().map(|&w| if w > 0.0 { w } else { jitter }).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        GridDistribution { lattice: self.lattice.clone(), weights: w }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_major_enumeration() {
        let l = Lattice::square(0.0, 1.0, 3).unwrap();
        assert_eq!(l.point(0), [0.0, 0.0]);
        assert_eq!(l.point(1), [0.0, 0.5]);
        assert_eq!(l.point(3), [0.5, 0.0]);
        assert_eq!(l.nearest([0.5, 1.0]), 5);
    }

    #[test]
    fn rejects_bad_weights() {
        let l = Lattice::line(Axis::spanning(0.0, 1.0, 3).unwrap());
        assert!(GridDistribution::new(l.clone(), vec![0.5, 0.5, 0.1]).is_err());
        assert!(GridDistribution::new(l.clone(), vec![1.2, -0.2, 0.0]).is_err());
        assert!(GridDistribution::new(l.clone(), vec![0.5, 0.5]).is_err());
        assert!(GridDistribution::new(l, vec![0.25, 0.25, 0.5]).is_ok());
        assert!(Axis::new(0.0, 0.0, 3).is_err());
    }

    #[test]
    fn rebin_preserves_mass() {
        let fine = GridDistribution::uniform(Lattice::square(0.0, 1.0, 10).unwrap());
        let coarse = Lattice::plane(
            Axis::cell_centers(0.0, 1.0, 2).unwrap(),
            Axis::cell_centers(0.0, 1.0, 2).unwrap(),
        );
        let h = fine.rebin(&coarse).unwrap();
        for &w in h.weights() {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn jitter_fills_zeros() {
        let l = Lattice::line(Axis::spanning(0.0, 1.0, 4).unwrap());
        let d = GridDistribution::point_mass(l, 2).unwrap().jittered(1e-12);
        assert!(d.weights().iter().all(|&w| w > 0.0));
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
