//! Model-discrepancy correction for the source strength.
//!
//! Each stage alternates a physical design for the location (grid posterior
//! under the current strength estimate) with an error design for the
//! strength, chosen by an ensemble-Kalman utility. The strength is then
//! re-fitted from the error measurement and the location posterior is
//! rebuilt from the original prior with all physical data.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{
    argmax, physical_stage, true_measurement, DesignSettings, Mode, RewardMap, StageRecord, UtilityKind,
};
use crate::error::{Error, Result};
use crate::forward::{Design, ForwardModel, Measurement};
use crate::grid::Lattice;
use crate::inference::{distance_metric, map_estimate, reupdate, uncertainty_metric, PosteriorState};
use crate::ot::wasserstein_1d_empirical;
use crate::rng::{SeedPath, CANDIDATE, ENSEMBLE, EKI_NOISE, MEASURE_ERROR, SAMPLE, STAGE};

/// Members at or below this are reflected back above it.
pub const STRENGTH_FLOOR: f64 = 1e-3;
pub const MIN_ENSEMBLE_VARIANCE: f64 = 1e-14;
/// Smallest `|predict(theta_G, 1, d)|` that identifies the strength.
pub const MIN_SENSITIVITY: f64 = 1e-8;
pub const MIN_ENSEMBLE_SIZE: usize = 8;
/// Strength assumed by the misspecified model before any correction.
pub const INITIAL_MODEL_STRENGTH: f64 = 3.0;

/// Equally weighted strength ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<f64>,
}

fn reflect(x: f64) -> f64 {
    if x > STRENGTH_FLOOR {
        x
    } else {
        // Reflection about the floor; a value exactly on it moves up by a hair.
        (2.0 * STRENGTH_FLOOR - x).max(STRENGTH_FLOOR * (1.0 + f64::EPSILON))
    }
}

impl Ensemble {
    /// Members at or below [`STRENGTH_FLOOR`] are reflected above it.
    pub fn new(members: Vec<f64>) -> Result<Self> {
        if members.len() < MIN_ENSEMBLE_SIZE {
            return Err(Error::InvalidConfig(format!(
                "ensemble needs at least {MIN_ENSEMBLE_SIZE} members, got {}",
                members.len()
            )));
        }
        if members.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("ensemble member".into()));
        }
        Ok(Ensemble { members: members.into_iter().map(reflect).collect() })
    }

    /// `size` draws from `N(center, std^2)`, reflected at the floor.
    pub fn gaussian(center: f64, std: f64, size: usize, seed: SeedPath) -> Result<Self> {
        let normal = Normal::new(center, std).map_err(|e| Error::InvalidConfig(format!("ensemble prior: {e}")))?;
        let mut rng = seed.rng();
        Ensemble::new((0..size).map(|_| normal.sample(&mut rng)).collect())
    }

    pub fn members(&self) -> &[f64] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.members.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.members.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (self.len() - 1) as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        writeln!(w, "member,value").map_err(io)?;
        for (j, v) in self.members.iter().enumerate() {
            writeln!(w, "{j},{v:?}").map_err(io)?;
        }
        Ok(())
    }
}

/// One perturbed-observation EKI step given the forward values `g` of the
/// members and one observation perturbation per member.
pub fn eki_step(ensemble: &Ensemble, g: &[f64], y: f64, noise_std: f64, perturbations: &[f64]) -> Result<Ensemble> {
    let j = ensemble.len();
    if g.len() != j || perturbations.len() != j {
        return Err(Error::Dimension(format!(
            "ensemble of {j} with {} forward values and {} perturbations",
            g.len(),
            perturbations.len()
        )));
    }
    if ensemble.variance() < MIN_ENSEMBLE_VARIANCE {
        return Err(Error::DegenerateEnsemble(format!("ensemble variance {:e}", ensemble.variance())));
    }
    let tm = ensemble.mean();
    let gm = g.iter().sum::<f64>() / j as f64;
    let (mut ctg, mut cgg) = (0.0, 0.0);
    for (t, gi) in ensemble.members.iter().zip(g) {
        ctg += (t - tm) * (gi - gm);
        cgg += (gi - gm) * (gi - gm);
    }
    let norm = (j - 1) as f64;
    let gain = (ctg / norm) / (cgg / norm + noise_std * noise_std);
    let members = ensemble
        .members
        .iter()
        .zip(g)
        .zip(perturbations)
        .map(|((t, gi), eta)| t + gain * (y + eta - gi))
        .collect();
    Ensemble::new(members)
}

/// EKI step for the strength with the forward map `theta_E -> predict(theta_G*, theta_E, d)`.
pub fn eki_update<M: ForwardModel + ?Sized>(
    model: &M,
    ensemble: &Ensemble,
    design: &Design,
    y: f64,
    theta_g_star: [f64; 2],
    noise_std: f64,
    seed: SeedPath,
) -> Result<Ensemble> {
    let g = ensemble
        .members
        .iter()
        .map(|&t| model.predict(theta_g_star, t, design))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed.rng();
    let eta: Vec<f64> = (0..ensemble.len()).map(|_| noise_std * rng.sample::<f64, _>(StandardNormal)).collect();
    eki_step(ensemble, &g, y, noise_std, &eta)
}

/// Discrepancy between the updated and the initial ensemble.
///
/// W1/W2 compare the members as equally weighted atoms. KL compares the
/// Gaussians with the ensembles' means and variances.
pub fn ensemble_utility(before: &Ensemble, after: &Ensemble, kind: UtilityKind) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::Dimension(format!("ensembles of size {} and {}", before.len(), after.len())));
    }
    match kind.exponent() {
        Some(p) => wasserstein_1d_empirical(after.members(), before.members(), p),
        None => {
            let (m0, v0) = (before.mean(), before.variance());
            let (m1, v1) = (after.mean(), after.variance());
            if v1 < MIN_ENSEMBLE_VARIANCE || v0 < MIN_ENSEMBLE_VARIANCE {
                return Err(Error::DegenerateEnsemble(format!("ensemble variance {:e}", v1.min(v0))));
            }
            if before.members == after.members {
                return Ok(0.0);
            }
            Ok((0.5 * ((v0 / v1).ln() + (v1 + (m1 - m0) * (m1 - m0)) / v0 - 1.0)).max(0.0))
        }
    }
}

/// Knobs of the strength correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscrepancySettings {
    pub ensemble_size: usize,
    /// Spread of the Gaussian ensemble prior around the current strength.
    pub prior_std: f64,
    /// Simulated outcomes per candidate in expected mode.
    pub num_samples: usize,
    /// Strength the model starts from.
    pub initial_strength: f64,
    /// Strength re-fit / re-update passes per stage.
    pub passes: usize,
}

impl Default for DiscrepancySettings {
    fn default() -> Self {
        DiscrepancySettings {
            ensemble_size: 32,
            prior_std: 0.25,
            num_samples: 64,
            initial_strength: INITIAL_MODEL_STRENGTH,
            passes: 1,
        }
    }
}

impl DiscrepancySettings {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.ensemble_size < MIN_ENSEMBLE_SIZE {
            out.push(format!("discrepancy.ensemble_size must be >= {MIN_ENSEMBLE_SIZE}, got {}", self.ensemble_size));
        }
        if !(self.prior_std > 0.0) || !self.prior_std.is_finite() {
            out.push(format!("discrepancy.prior_std must be > 0, got {}", self.prior_std));
        }
        if self.num_samples == 0 {
            out.push("discrepancy.num_samples must be > 0".into());
        }
        if !(self.initial_strength > 0.0) || !self.initial_strength.is_finite() {
            out.push(format!("discrepancy.initial_strength must be > 0, got {}", self.initial_strength));
        }
        if self.passes == 0 {
            out.push("discrepancy.passes must be > 0".into());
        }
        out
    }
}

/// Shared draws for scoring every error-design candidate of one stage.
struct ErrorPlan {
    prior: Ensemble,
    /// Strength hypotheses and unit noise generating each simulated outcome.
    thetas: Vec<f64>,
    noise: Vec<f64>,
    /// Observation perturbations, `ensemble_size` per outcome.
    perturbations: Vec<f64>,
}

impl ErrorPlan {
    fn draw(theta_e: f64, cfg: &DiscrepancySettings, samples: usize, seed: SeedPath) -> Result<Self> {
        let prior = Ensemble::gaussian(theta_e, cfg.prior_std, cfg.ensemble_size, seed.child(ENSEMBLE, 0))?;
        let hyp = Normal::new(theta_e, cfg.prior_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut rng = seed.child(SAMPLE, 0).rng();
        let thetas = (0..samples).map(|_| reflect(hyp.sample(&mut rng))).collect();
        let mut rng = seed.child(SAMPLE, 1).rng();
        let noise = (0..samples).map(|_| rng.sample(StandardNormal)).collect();
        let mut rng = seed.child(EKI_NOISE, 0).rng();
        let perturbations = (0..samples * cfg.ensemble_size).map(|_| rng.sample(StandardNormal)).collect();
        Ok(ErrorPlan { prior, thetas, noise, perturbations })
    }

    /// Utility of assimilating `y` at a design with unit-strength prediction `p1`.
    fn score(&self, p1: f64, y: f64, k: usize, sigma: f64, kind: UtilityKind) -> Result<f64> {
        let j = self.prior.len();
        let g: Vec<f64> = self.prior.members.iter().map(|t| t * p1).collect();
        let eta: Vec<f64> = self.perturbations[k * j..(k + 1) * j].iter().map(|e| sigma * e).collect();
        if g.iter().all(|&x| x == g[0]) {
            return Ok(0.0);
        }
        let after = eki_step(&self.prior, &g, y, sigma, &eta)?;
        ensemble_utility(&self.prior, &after, kind)
    }
}

/// Expected ensemble utility of a strength measurement at every candidate.
///
/// Outcomes are simulated with strengths drawn from the ensemble prior and
/// predictions use linearity in the strength. The design is chosen before
/// the measurement in every mode, so realized data never enter this map.
#[allow(clippy::too_many_arguments)]
pub fn error_reward_map<M: ForwardModel + ?Sized>(
    model: &M,
    theta_g_star: [f64; 2],
    theta_e: f64,
    candidates: &Lattice,
    kind: UtilityKind,
    time: f64,
    noise_std: f64,
    cfg: &DiscrepancySettings,
    seed: SeedPath,
) -> Result<RewardMap> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let plan = ErrorPlan::draw(theta_e, cfg, cfg.num_samples, seed)?;
    let mut values = Vec::with_capacity(candidates.len());
    for c in 0..candidates.len() {
        let p = candidates.point(c);
        let design = Design::new(p[0], p[1], time)?;
        let p1 = model.predict(theta_g_star, 1.0, &design)?;
        let mut total = 0.0;
        for k in 0..cfg.num_samples {
            let y = plan.thetas[k] * p1 + noise_std * plan.noise[k];
            total += plan.score(p1, y, k, noise_std, kind)?;
        }
        values.push(total / cfg.num_samples as f64);
    }
    RewardMap::new(candidates.clone(), values)
}

/// Error design: argmax of [`error_reward_map`], lexicographic ties.
#[allow(clippy::too_many_arguments)]
pub fn select_error_design<M: ForwardModel + ?Sized>(
    model: &M,
    theta_g_star: [f64; 2],
    theta_e: f64,
    candidates: &Lattice,
    kind: UtilityKind,
    time: f64,
    noise_std: f64,
    cfg: &DiscrepancySettings,
    seed: SeedPath,
) -> Result<Design> {
    let map = error_reward_map(model, theta_g_star, theta_e, candidates, kind, time, noise_std, cfg, seed)?;
    let p = candidates.point(argmax(&map.values)?);
    Design::new(p[0], p[1], time)
}

/// Least-squares strength from one measurement, using linearity in the
/// strength: the minimizer is `y / predict(theta_G*, 1, d)`, floored.
pub fn update_theta_e<M: ForwardModel + ?Sized>(
    model: &M,
    theta_g_star: [f64; 2],
    design: &Design,
    y: f64,
) -> Result<f64> {
    let p1 = model.predict(theta_g_star, 1.0, design)?;
    if !(p1.abs() >= MIN_SENSITIVITY) {
        return Err(Error::InsensitiveDesign(p1));
    }
    Ok((y / p1).max(STRENGTH_FLOOR))
}

/// Strength fit for forward maps without the linearity guarantee: damped
/// Newton on `(y - f(s))^2` with a finite-difference slope, switching to
/// golden-section search on `[STRENGTH_FLOOR, hi]` where the slope is below
/// [`MIN_SENSITIVITY`]. Starts from `init`; the result is floored.
pub fn fit_strength(f: &dyn Fn(f64) -> Result<f64>, y: f64, init: f64, hi: f64) -> Result<f64> {
    let misfit = |s: f64| -> Result<f64> { Ok((y - f(s)?).powi(2)) };
    let mut s = init.max(STRENGTH_FLOOR);
    for _ in 0..50 {
        let h = 1e-6 * s.max(1.0);
        let slope = (f(s + h)? - f(s - h)?) / (2.0 * h);
        if !(slope.abs() >= MIN_SENSITIVITY) {
            return golden_section(&misfit, STRENGTH_FLOOR, hi.max(init));
        }
        let step = (y - f(s)?) / slope;
        let current = misfit(s)?;
        let mut t = 1.0;
        let mut next = (s + step).max(STRENGTH_FLOOR);
        while misfit(next)? > current && t > 1e-6 {
            t *= 0.5;
            next = (s + t * step).max(STRENGTH_FLOOR);
        }
        if (next - s).abs() <= 1e-12 * s.max(1.0) {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while hi - lo > 1e-10 * (lo.abs() + hi.abs()).max(1e-3) {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Everything carried from one correction stage to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionState {
    pub theta_e: f64,
    pub posterior: PosteriorState,
    /// The prior every re-update starts from.
    pub initial: PosteriorState,
    pub history_g: Vec<Measurement>,
    pub history_e: Vec<Measurement>,
    pub stage: usize,
}

impl CorrectionState {
    pub fn new(initial: PosteriorState, theta_e: f64) -> Result<Self> {
        if !(theta_e > 0.0) || !theta_e.is_finite() {
            return Err(Error::InvalidConfig(format!("strength must be > 0, got {theta_e}")));
        }
        Ok(CorrectionState {
            theta_e,
            posterior: initial.clone(),
            initial,
            history_g: Vec::new(),
            history_e: Vec::new(),
            stage: 0,
        })
    }
}

/// Outputs of one correction stage besides the new state.
#[derive(Debug, Clone)]
pub struct CorrectionOutcome {
    pub record: StageRecord,
    pub physical_map: RewardMap,
    pub error_map: RewardMap,
    pub error_design: Design,
    pub error_y: f64,
}

pub fn error_measurement_seed(root: SeedPath, stage: usize, candidate: usize) -> SeedPath {
    root.child(STAGE, stage as u64).child(MEASURE_ERROR, candidate as u64)
}

fn error_plan_seed(root: SeedPath, stage: usize) -> SeedPath {
    root.child(STAGE, stage as u64).child(CANDIDATE, u64::MAX - 1)
}

/// One stage of the alternating scheme. Returns the new state; on error the
/// input state is untouched since it is only read.
#[allow(clippy::too_many_arguments)]
pub fn correction_stage<M: ForwardModel + ?Sized>(
    model: &M,
    state: &CorrectionState,
    truth: [f64; 2],
    kind: UtilityKind,
    mode: Mode,
    settings: &DesignSettings,
    cfg: &DiscrepancySettings,
    root: SeedPath,
    seed: u64,
) -> Result<(CorrectionState, CorrectionOutcome)> {
    let stage = state.stage + 1;
    let sigma = settings.noise_std;
    // (a), (b): physical design, measurement and update under the current strength.
    let (m, physical_map, posterior) =
        physical_stage(model, &state.posterior, truth, state.theta_e, kind, mode, stage, settings, root)?;
    let mut theta_g_star = map_estimate(&posterior);
    // (c): error design.
    let candidates = settings.candidate_lattice();
    let error_map = error_reward_map(
        model,
        theta_g_star,
        state.theta_e,
        &candidates,
        kind,
        m.design.time,
        sigma,
        cfg,
        error_plan_seed(root, stage),
    )?;
    let p = candidates.point(error_map.argmax);
    let error_design = Design::new(p[0], p[1], m.design.time)?;
    // (d): measure and re-fit the strength.
    let error_y = true_measurement(model, truth, &error_design, sigma, error_measurement_seed(root, stage, error_map.argmax))?;
    let mut history_g = state.history_g.clone();
    history_g.push(m);
    // (e): rebuild the location posterior from the original prior.
    let mut theta_e = state.theta_e;
    let mut rebuilt = posterior;
    for _ in 0..cfg.passes {
        theta_e = update_theta_e(model, theta_g_star, &error_design, error_y)?;
        rebuilt = reupdate(model, &state.initial, &history_g, theta_e)?;
        theta_g_star = map_estimate(&rebuilt);
    }
    let mut history_e = state.history_e.clone();
    history_e.push(Measurement::new(error_design, error_y, sigma)?);
    let map_point = map_estimate(&rebuilt);
    let record = StageRecord {
        stage,
        design: m.design.location(),
        time: m.design.time,
        y: m.value,
        map: map_point,
        distance: distance_metric(map_point, truth),
        sigma_eq: uncertainty_metric(&rebuilt),
        utility_kind: kind,
        mode,
        seed,
        theta_s: theta_e,
        utility: physical_map.best_value(),
    };
    let next = CorrectionState { theta_e, posterior: rebuilt, initial: state.initial.clone(), history_g, history_e, stage };
    Ok((next, CorrectionOutcome { record, physical_map, error_map, error_design, error_y }))
}

/// Full run of the alternating scheme.
#[derive(Debug, Clone)]
pub struct CorrectionRun {
    pub records: Vec<StageRecord>,
    pub posteriors: Vec<PosteriorState>,
    pub outcomes: Vec<CorrectionOutcome>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_sequential_with_discrepancy<M: ForwardModel + ?Sized>(
    model: &M,
    prior: PosteriorState,
    truth: [f64; 2],
    kind: UtilityKind,
    mode: Mode,
    stages: usize,
    seed: u64,
    settings: &DesignSettings,
    cfg: &DiscrepancySettings,
) -> Result<CorrectionRun> {
    let root = SeedPath::root(seed);
    let mut state = CorrectionState::new(prior, cfg.initial_strength)?;
    let mut run = CorrectionRun { records: Vec::new(), posteriors: Vec::new(), outcomes: Vec::new() };
    for _ in 0..stages {
        let (next, outcome) = correction_stage(model, &state, truth, kind, mode, settings, cfg, root, seed)?;
        run.records.push(outcome.record.clone());
        run.posteriors.push(next.posterior.clone());
        run.outcomes.push(outcome);
        state = next;
    }
    Ok(run)
}
