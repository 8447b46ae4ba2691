//! Browser bindings: toy ring posteriors, Gaussian W2 and 1-D empirical
//! Wasserstein distances.
//!
//! Each export wraps a plain Rust function of the same name with a `_native`
//! suffix, so the numerics can be tested off the browser.

use nalgebra::{DMatrix, DVector};
use plumebed::experiments::{ring_row, scan_sensor, ToySettings, TOY_TRUTH};
use plumebed::forward::toy_observe;
use plumebed::inference::ring_posterior;
use plumebed::ot::{w2_gaussian_closed_form, wasserstein_1d_empirical, GaussianMeasure};
use wasm_bindgen::prelude::*;

/// Toy ring result at one sensor position.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPoint {
    pub w1: f64,
    pub w2: f64,
    pub kl: f64,
    /// Posterior weights on the `n x n` lattice, x-major.
    pub weights: Vec<f64>,
}

fn settings(n: usize, kernel_width: f64) -> Result<ToySettings, String> {
    let s = ToySettings { lattice_n: n, kernel_width, w1_block: if n % 3 == 0 { 3 } else { 1 }, ..ToySettings::default() };
    let problems: Vec<String> = s.problems().into_iter().filter(|p| !p.starts_with("toy.positions")).collect();
    if problems.is_empty() {
        Ok(s)
    } else {
        Err(problems.join("; "))
    }
}

pub fn toy_point_native(s: f64, n: usize, kernel_width: f64) -> Result<ToyPoint, String> {
    if !(0.0..=1.0).contains(&s) {
        return Err(format!("s must lie in [0, 1], got {s}"));
    }
    let cfg = settings(n, kernel_width)?;
    let sensor = scan_sensor(s);
    let y = toy_observe(sensor, TOY_TRUTH, cfg.model);
    let lattice = cfg.lattice().map_err(|e| e.to_string())?;
    let post = ring_posterior(sensor, y, cfg.model, cfg.kernel_width, lattice).map_err(|e| e.to_string())?;
    let row = ring_row(s, &post, &cfg).map_err(|e| e.to_string())?;
    Ok(ToyPoint { w1: row.w1, w2: row.w2, kl: row.kl, weights: post.weights().to_vec() })
}

/// `[mean_x, mean_y, var_x, var_y, cov_xy]` of each Gaussian.
pub fn gaussian_w2_native(a: &[f64], b: &[f64]) -> Result<f64, String> {
    let measure = |v: &[f64]| {
        if v.len() != 5 {
            return Err(format!("expected 5 numbers, got {}", v.len()));
        }
        let cov = DMatrix::from_row_slice(2, 2, &[v[2], v[4], v[4], v[3]]);
        GaussianMeasure::new(DVector::from_column_slice(&v[..2]), cov).map_err(|e| e.to_string())
    };
    w2_gaussian_closed_form(&measure(a)?, &measure(b)?).map_err(|e| e.to_string())
}

/// Parses numbers separated by commas or whitespace.
pub fn parse_samples(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: '{t}'")))
        .collect()
}

pub fn empirical_wasserstein_native(x: &str, y: &str, p: u32) -> Result<f64, String> {
    let (x, y) = (parse_samples(x)?, parse_samples(y)?);
    wasserstein_1d_empirical(&x, &y, p).map_err(|e| e.to_string())
}

/// Result of [`toy_point`] for JavaScript.
#[wasm_bindgen]
pub struct ToyResult {
    inner: ToyPoint,
}

#[wasm_bindgen]
impl ToyResult {
    #[wasm_bindgen(getter)]
    pub fn w1(&self) -> f64 {
        self.inner.w1
    }

    #[wasm_bindgen(getter)]
    pub fn w2(&self) -> f64 {
        self.inner.w2
    }

    #[wasm_bindgen(getter)]
    pub fn kl(&self) -> f64 {
        self.inner.kl
    }

    #[wasm_bindgen(getter)]
    pub fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }
}

/// Ring posterior for the sensor at fraction `s` between the source and the corner.
#[wasm_bindgen]
pub fn toy_point(s: f64, n: usize, kernel_width: f64) -> Result<ToyResult, JsError> {
    toy_point_native(s, n, kernel_width).map(|inner| ToyResult { inner }).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gaussian_w2(a: Vec<f64>, b: Vec<f64>) -> Result<f64, JsError> {
    gaussian_w2_native(&a, &b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn empirical_wasserstein(x: &str, y: &str, p: u32) -> Result<f64, JsError> {
    empirical_wasserstein_native(x, y, p).map_err(|e| JsError::new(&e))
}
