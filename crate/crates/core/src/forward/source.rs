use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the source used by every model evaluation.
pub const TRUE_WIDTH: f64 = 0.05;
/// Strength of the data-generating source.
pub const TRUE_STRENGTH: f64 = 2.0;

/// Parameters of the Gaussian release `theta = (x, y, h, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub theta_x: f64,
    pub theta_y: f64,
    /// Width, > 0.
    pub theta_h: f64,
    /// Strength, > 0.
    pub theta_s: f64,
}

impl SourceParams {
    pub fn new(theta_x: f64, theta_y: f64, theta_h: f64, theta_s: f64) -> Result<Self> {
        if !theta_x.is_finite() || !theta_y.is_finite() {
            return Err(Error::NonFinite("source location".into()));
        }
        if !(theta_h > 0.0) || !theta_h.is_finite() {
            return Err(Error::InvalidConfig(format!("source width must be > 0, got {theta_h}")));
        }
        if !(theta_s > 0.0) || !theta_s.is_finite() {
            return Err(Error::InvalidConfig(format!("source strength must be > 0, got {theta_s}")));
        }
        Ok(SourceParams { theta_x, theta_y, theta_h, theta_s })
    }

    /// Source at `location` with the true width and the given strength.
    pub fn at(location: [f64; 2], theta_s: f64) -> Result<Self> {
        SourceParams::new(location[0], location[1], TRUE_WIDTH, theta_s)
    }

    pub fn location(&self) -> [f64; 2] {
        [self.theta_x, self.theta_y]
    }
}

/// `S(z, t) = s / (2 pi h^2) exp(-|z - (x, y)|^2 / (2 h^2))`.
///
/// The release rate is constant in time; `t` is accepted so the signature
/// matches time-dependent sources.
pub fn source_term(z: [f64; 2], _t: f64, theta: &SourceParams) -> f64 {
    let h2 = theta.theta_h * theta.theta_h;
    let r2 = (theta.theta_x - z[0]).powi(2) + (theta.theta_y - z[1]).powi(2);
    theta.theta_s / (2.0 * std::f64::consts::PI * h2) * (-r2 / (2.0 * h2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn peak_value() {
        let th = SourceParams::new(0.3, 0.4, 0.05, 2.0).unwrap();
        let peak = 2.0 / (2.0 * std::f64::consts::PI * 0.0025);
        assert!((source_term([0.3, 0.4], 0.7, &th) - peak).abs() < 1e-12 * peak);
    }

    #[test]
    fn one_width_away() {
        let th = SourceParams::new(0.3, 0.4, 0.05, 2.0).unwrap();
        // Independent scalar evaluation: 2 / (2 pi 0.0025) * exp(-0.5).
        let expected = 77.225_882_104_043_13;
        let v = source_term([0.35, 0.4], 0.0, &th);
        assert!((v - expected).abs() < 1e-10, "{v}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SourceParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(SourceParams::new(0.0, 0.0, 0.1, -1.0).is_err());
        assert!(SourceParams::new(f64::NAN, 0.0, 0.1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_strength(zx in -1.0f64..2.0, zy in -1.0f64..2.0, s in 0.1f64..5.0) {
            let a = SourceParams::new(0.5, 0.5, 0.05, s).unwrap();
            let b = SourceParams::new(0.5, 0.5, 0.05, 2.0 * s).unwrap();
            let (va, vb) = (source_term([zx, zy], 0.0, &a), source_term([zx, zy], 0.0, &b));
            prop_assert!((vb - 2.0 * va).abs() <= 1e-14 * vb.abs().max(1e-300));
            prop_assert!(va > 0.0 || (zx - 0.5).hypot(zy - 0.5) > 1.5);
        }
    }
}
