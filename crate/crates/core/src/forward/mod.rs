//! Contaminant transport model, noisy sensors, and the isotropic toy model.

mod kernel;
mod pde;
mod source;
mod toy;

pub use kernel::{DirectModel, PlumeKernel, REFERENCE_LOCATION};
pub use pde::{solve_pde, ConcentrationField, PdeConfig, Scheme};
pub use source::{source_term, SourceParams, TRUE_STRENGTH, TRUE_WIDTH};
pub use toy::{toy_observe, ToyModel};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedPath;

/// Standard deviation of the sensor noise.
pub const NOISE_STD: f64 = 0.05;
/// Measurement time of stage 0.
pub const FIRST_TIME: f64 = 0.05;
/// Time added per stage.
pub const TIME_STEP: f64 = 0.005;

/// Measurement time of stage `n`: `0.05 + n * 0.005`.
pub fn stage_time(n: usize) -> f64 {
    FIRST_TIME + n as f64 * TIME_STEP
}

/// One sensor placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub d_x: f64,
    pub d_y: f64,
    pub time: f64,
}

impl Design {
    pub fn new(d_x: f64, d_y: f64, time: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&d_x) || !(0.0..=1.0).contains(&d_y) {
            return Err(Error::InvalidConfig(format!("design ({d_x}, {d_y}) outside [0, 1]^2")));
        }
        if !(time >= 0.0) || !time.is_finite() {
            return Err(Error::InvalidConfig(format!("measurement time must be >= 0, got {time}")));
        }
        Ok(Design { d_x, d_y, time })
    }

    pub fn at_stage(location: [f64; 2], stage: usize) -> Result<Self> {
        Design::new(location[0], location[1], stage_time(stage))
    }

    pub fn location(&self) -> [f64; 2] {
        [self.d_x, self.d_y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub design: Design,
    pub value: f64,
    pub noise_std: f64,
}

impl Measurement {
    pub fn new(design: Design, value: f64, noise_std: f64) -> Result<Self> {
        if !(noise_std > 0.0) || !noise_std.is_finite() {
            return Err(Error::InvalidConfig(format!("noise_std must be > 0, got {noise_std}")));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("measurement value".into()));
        }
        Ok(Measurement { design, value, noise_std })
    }
}

/// Noiseless map `(theta_G, theta_E, d) -> y`, with the source width fixed
/// by the implementation.
pub trait ForwardModel {
    fn predict(&self, theta_g: [f64; 2], theta_e: f64, design: &Design) -> Result<f64>;

    /// Predictions for many locations at one design. Implementations may
    /// share work across the batch.
    fn predict_many(&self, thetas: &[[f64; 2]], theta_e: f64, design: &Design) -> Result<Vec<f64>> {
        thetas.iter().map(|&t| self.predict(t, theta_e, design)).collect()
    }
}

impl<M: ForwardModel + ?Sized> ForwardModel for &M {
    fn predict(&self, theta_g: [f64; 2], theta_e: f64, design: &Design) -> Result<f64> {
        (**self).predict(theta_g, theta_e, design)
    }

    fn predict_many(&self, thetas: &[[f64; 2]], theta_e: f64, design: &Design) -> Result<Vec<f64>> {
        (**self).predict_many(thetas, theta_e, design)
    }
}

/// Adds `N(0, noise_std^2)` to the noiseless value, drawn from `seed`.
pub fn noisy(value: f64, noise_std: f64, seed: SeedPath) -> Result<f64> {
    let normal = Normal::new(0.0, noise_std)
        .map_err(|e| Error::InvalidConfig(format!("noise_std {noise_std}: {e}")))?;
    Ok(value + normal.sample(&mut seed.rng()))
}

/// Synthetic sensor reading from the data-generating source `truth`.
///
/// `model` must carry the width of `truth`.
pub fn measure<M: ForwardModel + ?Sized>(
    model: &M,
    truth: &SourceParams,
    design: Design,
    noise_std: f64,
    seed: SeedPath,
) -> Result<Measurement> {
    let clean = model.predict(truth.location(), truth.theta_s, &design)?;
    Measurement::new(design, noisy(clean, noise_std, seed)?, noise_std)
}
