//! Cached plume for fast model evaluation.
//!
//! The velocity is uniform in space and the walls are far from every source
//! and sensor of interest, so the solution is translation equivariant:
//! `u(d; theta_G, s) = s * U(d - theta_G + ref)` where `U` is the unit-strength
//! plume released at `ref`. One solve per measurement time then serves every
//! location hypothesis. [`DirectModel`] re-solves the PDE per call and is
//! kept as the reference implementation.

use super::pde::{solve_pde, ConcentrationField, PdeConfig};
use super::source::SourceParams;
use super::{Design, ForwardModel};
use crate::error::{Error, Result};

/// Release point of the cached unit plume.
pub const REFERENCE_LOCATION: [f64; 2] = [0.5, 0.5];

#[derive(Debug, Clone)]
pub struct PlumeKernel {
    config: PdeConfig,
    theta_h: f64,
    fields: Vec<ConcentrationField>,
}

impl PlumeKernel {
    /// Solves once for the unit-strength plume at every time in `times`.
    pub fn new(config: PdeConfig, theta_h: f64, times: &[f64]) -> Result<Self> {
        let mut times = times.to_vec();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let unit = SourceParams::new(REFERENCE_LOCATION[0], REFERENCE_LOCATION[1], theta_h, 1.0)?;
        let fields = solve_pde(&config, &unit, &times)?;
        Ok(PlumeKernel { config, theta_h, fields })
    }

    /// Kernel covering stages `0..=last_stage` of the measurement schedule.
    pub fn for_stages(config: PdeConfig, theta_h: f64, last_stage: usize) -> Result<Self> {
        let times: Vec<f64> = (0..=last_stage).map(super::stage_time).collect();
        PlumeKernel::new(config, theta_h, &times)
    }

    pub fn config(&self) -> &PdeConfig {
        &self.config
    }

    pub fn theta_h(&self) -> f64 {
        self.theta_h
    }

    pub fn times(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.time).collect()
    }

    /// Unit plume at `time`, if cached.
    pub fn field(&self, time: f64) -> Result<&ConcentrationField> {
        self.fields
            .iter()
            .find(|f| (f.time - time).abs() <= 1e-12 * time.max(1.0))
            .ok_or_else(|| Error::InvalidConfig(format!("no cached plume for t = {time}")))
    }

    /// `U(d - theta_G + ref)` on a cached field.
    fn unit(field: &ConcentrationField, theta_g: [f64; 2], design: &Design) -> f64 {
        field.probe([
            design.d_x - theta_g[0] + REFERENCE_LOCATION[0],
            design.d_y - theta_g[1] + REFERENCE_LOCATION[1],
        ])
    }
}

impl ForwardModel for PlumeKernel {
    fn predict(&self, theta_g: [f64; 2], theta_e: f64, design: &Design) -> Result<f64> {
        if design.time == 0.0 {
            return Ok(0.0);
        }
        let f = self.field(design.time)?;
        Ok(theta_e * Self::unit(f, theta_g, design))
    }

    fn predict_many(&self, thetas: &[[f64; 2]], theta_e: f64, design: &Design) -> Result<Vec<f64>> {
        if design.time == 0.0 {
            return Ok(vec![0.0; thetas.len()]);
        }
        let f = self.field(design.time)?;
        Ok(thetas.iter().map(|&t| theta_e * Self::unit(f, t, design)).collect())
    }
}

/// Full PDE solve per evaluation.
#[derive(Debug, Clone)]
pub struct DirectModel {
    pub config: PdeConfig,
    pub theta_h: f64,
}

impl ForwardModel for DirectModel {
    fn predict(&self, theta_g: [f64; 2], theta_e: f64, design: &Design) -> Result<f64> {
        let theta = SourceParams::new(theta_g[0], theta_g[1], self.theta_h, theta_e)?;
        let field = solve_pde(&self.config, &theta, &[design.time])?;
        Ok(field[0].probe(design.location()))
    }
}
