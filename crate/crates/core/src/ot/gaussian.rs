//! Gaussian measures and their closed-form 2-Wasserstein distance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianMeasure {
    /// Checks that the covariance is square, symmetric and positive definite.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::Dimension(format!(
                "mean of length {n} with a {}x{} covariance",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if covariance.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters".into()));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::NonSpd(format!("asymmetry {asym:e}")));
        }
        let min = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NonSpd(format!("smallest eigenvalue {min:e}")));
        }
        Ok(GaussianMeasure { mean, covariance })
    }

    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let n = mean.len();
        GaussianMeasure::new(DVector::from_column_slice(mean), DMatrix::identity(n, n) * variance)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws `n` samples through the Cholesky factor.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<DVector<f64>> {
        let l = self
            .covariance
            .clone()
            .cholesky()
            .map(|c| c.l())
            .unwrap_or_else(|| sqrtm(&self.covariance));
        (0..n)
            .map(|_| {
                let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.mean + &l * z
            })
            .collect()
    }
}

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues below `1e-14` are floored before taking roots.
pub fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `W_2(N(m0, C0), N(m1, C1))`
/// `= sqrt(|m0 - m1|^2 + tr(C0 + C1 - 2 (C1^{1/2} C0 C1^{1/2})^{1/2}))`.
pub fn w2_gaussian_closed_form(g0: &GaussianMeasure, g1: &GaussianMeasure) -> Result<f64> {
    if g0.dim() != g1.dim() {
        return Err(Error::Dimension(format!("dimensions {} and {}", g0.dim(), g1.dim())));
    }
    let dm = (&g0.mean - &g1.mean).norm_squared();
    let r1 = sqrtm(&g1.covariance);
    let cross = sqrtm(&(&r1 * &g0.covariance * &r1));
    let scale = g0.covariance.trace() + g1.covariance.trace();
    let mut tr = scale - 2.0 * cross.trace();
    // Below round-off level the trace term is indistinguishable from zero.
    if tr <= 64.0 * f64::EPSILON * scale {
        tr = 0.0;
    }
    Ok((dm + tr).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spd(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        // L L^T with a positive diagonal.
        let l = DMatrix::from_row_slice(2, 2, &[a, 0.0, b, c]);
        &l * l.transpose()
    }

    #[test]
    fn identity_case() {
        let g = GaussianMeasure::new(DVector::from_vec(vec![0.3, -1.0]), spd(1.0, 0.4, 0.7)).unwrap();
        assert_eq!(w2_gaussian_closed_form(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn mean_shift() {
        let g0 = GaussianMeasure::isotropic(&[0.0, 0.0], 1.0).unwrap();
        let g1 = GaussianMeasure::isotropic(&[3.0, -4.0], 1.0).unwrap();
        assert!((w2_gaussian_closed_form(&g0, &g1).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_swap() {
        // Commuting covariances: W2^2 = sum (sqrt a_i - sqrt b_i)^2 = 1 + 1.
        let g0 = GaussianMeasure::new(DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        let g1 = GaussianMeasure::new(DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        assert!((w2_gaussian_closed_form(&g0, &g1).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_spd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(GaussianMeasure::new(DVector::zeros(2), bad), Err(Error::NonSpd(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(GaussianMeasure::new(DVector::zeros(2), asym), Err(Error::NonSpd(_))));
        assert!(matches!(
            GaussianMeasure::new(DVector::zeros(3), DMatrix::identity(2, 2)),
            Err(Error::Dimension(_))
        ));
    }

    proptest! {
        #[test]
        fn symmetric_in_arguments(a in 0.2f64..2.0, b in -1.0f64..1.0, c in 0.2f64..2.0,
                                  d in 0.2f64..2.0, e in -1.0f64..1.0, f in 0.2f64..2.0,
                                  m in -2.0f64..2.0) {
            let g0 = GaussianMeasure::new(DVector::from_vec(vec![m, 0.0]), spd(a, b, c)).unwrap();
            let g1 = GaussianMeasure::new(DVector::from_vec(vec![0.0, -m]), spd(d, e, f)).unwrap();
            let x = w2_gaussian_closed_form(&g0, &g1).unwrap();
            let y = w2_gaussian_closed_form(&g1, &g0).unwrap();
            prop_assert!((x - y).abs() < 1e-10);
        }

        #[test]
        fn equal_isotropic_covariances(m0 in prop::array::uniform2(-3.0f64..3.0), m1 in prop::array::uniform2(-3.0f64..3.0), s in 0.05f64..3.0) {
            let g0 = GaussianMeasure::isotropic(&m0, s * s).unwrap();
            let g1 = GaussianMeasure::isotropic(&m1, s * s).unwrap();
            let exact = ((m0[0] - m1[0]).powi(2) + (m0[1] - m1[1]).powi(2)).sqrt();
            prop_assert!((w2_gaussian_closed_form(&g0, &g1).unwrap() - exact).abs() < 1e-10);
        }
    }
}
