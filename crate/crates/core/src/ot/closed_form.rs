//! Analytic `W_2` between simple atomic measures and the uniform law on `[-A, A]`.
//!
//! The uniform quantile is `F^{-1}(u) = -A + 2Au`; integrating its squared
//! difference against piecewise-constant atomic quantiles gives
//!
//! ```text
//! delta at x0                          W2^2 = x0^2 + A^2/3
//! 0.5 delta(-dx) + 0.5 delta(dx)       W2^2 = dx^2 - A dx + A^2/3
//! the same pair shifted by mu          W2^2 = mu^2 + dx^2 - A dx + A^2/3
//! ```
//!
//! The pair sits closer to the uniform law than the centred delta whenever
//! `0 < dx < A`, yet shifting it by `mu` with `mu^2 > A dx - dx^2` makes it
//! farther: transport geometry rewards position, not concentration.

use crate::error::{Error, Result};

fn check_half_width(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::SupportViolation(format!("half width must be positive, got {a}")));
    }
    Ok(())
}

/// `W2(delta_{x0}, U[-A, A])`.
pub fn w2_delta_uniform(x0: f64, half_width_a: f64) -> Result<f64> {
    check_half_width(half_width_a)?;
    Ok((x0 * x0 + half_width_a * half_width_a / 3.0).sqrt())
}

/// `W2(0.5 delta_{-dx} + 0.5 delta_{dx}, U[-A, A])` for `0 <= dx <= A`.
pub fn w2_symmetric_deltas_uniform(delta_x: f64, half_width_a: f64) -> Result<f64> {
    w2_shifted_deltas_uniform(delta_x, 0.0, half_width_a)
}

/// `W2(0.5 delta_{mu-dx} + 0.5 delta_{mu+dx}, U[-A, A])`.
///
/// Both atoms must lie inside the open support: `0 <= dx` and `dx + |mu| < A`
/// (with `mu = 0`, `dx = A` is also admitted as the closed endpoint).
pub fn w2_shifted_deltas_uniform(delta_x: f64, mu_shift: f64, half_width_a: f64) -> Result<f64> {
    check_half_width(half_width_a)?;
    let a = half_width_a;
    if !(delta_x >= 0.0) || !mu_shift.is_finite() {
        return Err(Error::SupportViolation(format!("delta_x must be >= 0, got {delta_x}")));
    }
    let reach = delta_x + mu_shift.abs();
    if reach > a || (reach == a && mu_shift != 0.0) {
        return Err(Error::SupportViolation(format!(
            "atoms at {} and {} leave the support [-{a}, {a}]",
            mu_shift - delta_x,
            mu_shift + delta_x
        )));
    }
    let v = mu_shift * mu_shift + delta_x * delta_x - a * delta_x + a * a / 3.0;
    Ok(v.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reductions() {
        let a = 1.7;
        let base = a / 3f64.sqrt();
        assert!((w2_shifted_deltas_uniform(0.0, 0.0, a).unwrap() - base).abs() < 1e-15);
        assert!((w2_delta_uniform(0.0, a).unwrap() - base).abs() < 1e-15);
        let near_edge = w2_shifted_deltas_uniform(a * (1.0 - 1e-9), 0.0, a).unwrap();
        assert!((near_edge - base).abs() < 1e-6);
    }

    #[test]
    fn shift_beyond_threshold_exceeds_delta() {
        let (a, dx): (f64, f64) = (1.0, 0.3);
        let threshold = (a * dx - dx * dx).sqrt();
        let mu = threshold + 0.05;
        assert!(w2_shifted_deltas_uniform(dx, mu, a).unwrap() > a / 3f64.sqrt());
    }

    #[test]
    fn support_checks() {
        assert!(matches!(w2_shifted_deltas_uniform(0.6, 0.5, 1.0), Err(Error::SupportViolation(_))));
        assert!(matches!(w2_shifted_deltas_uniform(0.6, -0.5, 1.0), Err(Error::SupportViolation(_))));
        assert!(matches!(w2_shifted_deltas_uniform(-0.1, 0.0, 1.0), Err(Error::SupportViolation(_))));
        assert!(matches!(w2_delta_uniform(0.0, 0.0), Err(Error::SupportViolation(_))));
    }

    proptest! {
        #[test]
        fn pair_never_beats_centered_delta(frac in 0.0f64..=1.0, a in 0.1f64..10.0) {
            let dx = frac * a;
            prop_assert!(w2_symmetric_deltas_uniform(dx, a).unwrap() <= a / 3f64.sqrt() + 1e-12);
        }
    }
}
