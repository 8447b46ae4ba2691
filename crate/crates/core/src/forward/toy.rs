use serde::{Deserialize, Serialize};

/// Admissible isotropic response `y = f(|z - theta|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ToyModel {
    /// `y = B - r`.
    LinearDecay { b: f64 },
    /// `y = exp(-r^2)`.
    GaussianDecay,
}

impl ToyModel {
    pub fn response(&self, r: f64) -> f64 {
        match *self {
            ToyModel::LinearDecay { b } => b - r,
            ToyModel::GaussianDecay => (-r * r).exp(),
        }
    }
}

/// Noise-free reading of a sensor at `z` for a source at `theta`.
pub fn toy_observe(sensor_z: [f64; 2], theta: [f64; 2], model: ToyModel) -> f64 {
    model.response((sensor_z[0] - theta[0]).hypot(sensor_z[1] - theta[1]))
}
