//! Greedy sequential design over a candidate grid.

mod utility;

pub use utility::{OtSettings, UtilityEvaluator, UtilityKind};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{noisy, stage_time, Design, ForwardModel, Measurement, NOISE_STD, TRUE_STRENGTH};
use crate::grid::Lattice;
use crate::inference::{distance_metric, map_estimate, posterior_update, uncertainty_metric, PosteriorState};
use crate::rng::{SeedPath, CANDIDATE, MEASURE_PHYSICAL, SAMPLE, STAGE};

/// How a candidate design is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Utility of the outcome actually measured at the candidate.
    Actual,
    /// Prior-predictive average utility.
    Expected,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Actual => "actual",
            Mode::Expected => "expected",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "actual" => Ok(Mode::Actual),
            "expected" => Ok(Mode::Expected),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}' (expected actual or expected)"))),
        }
    }
}

/// Monte-Carlo sizes of the expected utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpectedUtilityConfig {
    pub num_theta_samples: usize,
    pub num_y_samples_per_theta: usize,
}

impl Default for ExpectedUtilityConfig {
    fn default() -> Self {
        ExpectedUtilityConfig { num_theta_samples: 64, num_y_samples_per_theta: 4 }
    }
}

impl ExpectedUtilityConfig {
    pub fn problems(&self) -> Vec<String> {
        let total = self.num_theta_samples.saturating_mul(self.num_y_samples_per_theta);
        if total < 100 {
            vec![format!(
                "expected.num_theta_samples * expected.num_y_samples_per_theta must be >= 100, got {} * {} = {total}",
                self.num_theta_samples, self.num_y_samples_per_theta
            )]
        } else {
            Vec::new()
        }
    }
}

/// Everything that shapes one design stage besides the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSettings {
    /// Candidates per axis over `[0, 1]^2`, endpoints included.
    pub candidates: usize,
    pub noise_std: f64,
    pub expected: ExpectedUtilityConfig,
    pub ot: OtSettings,
}

impl Default for DesignSettings {
    fn default() -> Self {
        DesignSettings {
            candidates: 25,
            noise_std: NOISE_STD,
            expected: ExpectedUtilityConfig::default(),
            ot: OtSettings::default(),
        }
    }
}

impl DesignSettings {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.candidates < 2 {
            out.push(format!("design.candidates must be >= 2, got {}", self.candidates));
        }
        if !(self.noise_std > 0.0) || !self.noise_std.is_finite() {
            out.push(format!("design.noise_std must be > 0, got {}", self.noise_std));
        }
        out.extend(self.expected.problems());
        out.extend(self.ot.problems());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }

    pub fn candidate_lattice(&self) -> Lattice {
        Lattice::square(0.0, 1.0, self.candidates).expect("validated candidate count")
    }
}

/// Prior draws and standard-normal noise shared by every candidate of a
/// stage (common random numbers), so utility differences between
/// candidates are not masked by independent Monte-Carlo noise.
#[derive(Debug, Clone)]
pub struct MonteCarloPlan {
    /// Index into the evaluator's support, one per prior draw.
    pub theta: Vec<usize>,
    /// `num_y` standard normals per prior draw.
    pub noise: Vec<f64>,
    pub num_y: usize,
}

impl MonteCarloPlan {
    pub fn draw(evaluator: &UtilityEvaluator, cfg: &ExpectedUtilityConfig, seed: SeedPath) -> Result<Self> {
        let problems = cfg.problems();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let index = WeightedIndex::new(evaluator.prior_weights())
            .map_err(|e| Error::InvalidDistribution(format!("prior cannot be sampled: {e}")))?;
        let mut rng = seed.child(SAMPLE, 0).rng();
        let theta: Vec<usize> = (0..cfg.num_theta_samples).map(|_| index.sample(&mut rng)).collect();
        let mut rng = seed.child(SAMPLE, 1).rng();
        let num_y = cfg.num_y_samples_per_theta;
        let noise: Vec<f64> = (0..theta.len() * num_y).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(MonteCarloPlan { theta, noise, num_y })
    }
}

/// Predictions of `model` on the evaluator's support at `design`.
pub fn support_predictions<M: ForwardModel + ?Sized>(
    model: &M,
    evaluator: &UtilityEvaluator,
    theta_e: f64,
    design: &Design,
) -> Result<Vec<f64>> {
    model.predict_many(evaluator.support_points(), theta_e, design)
}

/// Monte-Carlo expected utility from predictions `g` on the support.
///
/// With a positive [`UtilityEvaluator::outcome_step`] the utility is solved
/// on a uniform outcome grid and each Monte-Carlo outcome takes the cubic
/// (Catmull-Rom) interpolant; only grid nodes next to some outcome are solved.
pub fn expected_utility_from(evaluator: &UtilityEvaluator, g: &[f64], plan: &MonteCarloPlan, sigma: f64) -> Result<f64> {
    let mut ys: Vec<f64> = Vec::with_capacity(plan.noise.len());
    for (k, &t) in plan.theta.iter().enumerate() {
        for j in 0..plan.num_y {
            ys.push(g[t] + sigma * plan.noise[k * plan.num_y + j]);
        }
    }
    let step = evaluator.outcome_step() * sigma;
    let values = if step > 0.0 {
        interpolated_utilities(evaluator, g, &ys, sigma, step)?
    } else {
        sorted_utilities(evaluator, g, &ys, sigma)?
    };
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite("expected utility".into()));
    }
    Ok(mean)
}

/// Utility at each outcome. Transport solves are warm-started along
/// outcomes sorted by value, since neighbours give nearly the same posterior.
fn sorted_utilities(evaluator: &UtilityEvaluator, g: &[f64], ys: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..ys.len()).collect();
    if evaluator.kind() != UtilityKind::Kl {
        order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]).then(a.cmp(&b)));
    }
    let mut values = vec![0.0; ys.len()];
    let mut warm = None;
    for &i in &order {
        values[i] = evaluator.utility(g, ys[i], sigma, &mut warm)?;
    }
    Ok(values)
}

fn interpolated_utilities(evaluator: &UtilityEvaluator, g: &[f64], ys: &[f64], sigma: f64, step: f64) -> Result<Vec<f64>> {
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let cell = |y: f64| ((y - lo) / step).floor() as i64;
    let mut nodes = std::collections::BTreeMap::new();
    for &y in ys {
        let k = cell(y);
        for n in k - 1..=k + 2 {
            nodes.insert(n, f64::NAN);
        }
    }
    if nodes.len() >= ys.len() {
        return sorted_utilities(evaluator, g, ys, sigma);
    }
    let mut warm = None;
    for (&n, u) in nodes.iter_mut() {
        *u = evaluator.utility(g, lo + n as f64 * step, sigma, &mut warm)?;
    }
    Ok(ys
        .iter()
        .map(|&y| {
            let k = cell(y);
            let t = (y - lo) / step - k as f64;
            let p = [nodes[&(k - 1)], nodes[&k], nodes[&(k + 1)], nodes[&(k + 2)]];
            catmull_rom(p, t)
        })
        .collect())
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p[1]
        + (p[2] - p[0]) * t
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t2
        + (3.0 * p[1] - p[0] - 3.0 * p[2] + p[3]) * t3)
}

/// Utility of the posterior produced by observing `y` at `design`.
pub fn actual_utility<M: ForwardModel + ?Sized>(
    model: &M,
    design: &Design,
    y: f64,
    prior: &PosteriorState,
    theta_e: f64,
    kind: UtilityKind,
    settings: &DesignSettings,
) -> Result<f64> {
    let eval = UtilityEvaluator::new(prior, kind, &settings.ot)?;
    let g = support_predictions(model, &eval, theta_e, design)?;
    eval.utility(&g, y, settings.noise_std, &mut None)
}

/// Prior-predictive expected utility at `design`, reproducible from `seed`.
pub fn expected_utility<M: ForwardModel + ?Sized>(
    model: &M,
    design: &Design,
    prior: &PosteriorState,
    theta_e: f64,
    kind: UtilityKind,
    settings: &DesignSettings,
    seed: SeedPath,
) -> Result<f64> {
    let eval = UtilityEvaluator::new(prior, kind, &settings.ot)?;
    let plan = MonteCarloPlan::draw(&eval, &settings.expected, seed)?;
    let g = support_predictions(model, &eval, theta_e, design)?;
    expected_utility_from(&eval, &g, &plan, settings.noise_std)
}

/// Utility at every candidate of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMap {
    pub candidates: Lattice,
    pub values: Vec<f64>,
    pub argmax: usize,
}

/// First maximum in x-major order, i.e. the lexicographically smallest
/// `(d_x, d_y)` among ties.
pub fn argmax(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("empty reward map".into()));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("utility at candidate {i}")));
        }
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

impl RewardMap {
    pub fn new(candidates: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != candidates.len() {
            return Err(Error::Dimension(format!("{} utilities for {} candidates", values.len(), candidates.len())));
        }
        let argmax = argmax(&values)?;
        Ok(RewardMap { candidates, values, argmax })
    }

    pub fn best_location(&self) -> [f64; 2] {
        self.candidates.point(self.argmax)
    }

    pub fn best_value(&self) -> f64 {
        self.values[self.argmax]
    }

    /// CSV with header `d_x,d_y,utility`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "d_x,d_y,utility")?;
        for (i, v) in self.values.iter().enumerate() {
            let [x, y] = self.candidates.point(i);
            writeln!(w, "{x},{y},{v}")?;
        }
        Ok(())
    }
}

/// The argmax candidate, measured at the stage's time.
pub fn select_design(map: &RewardMap, stage: usize) -> Result<Design> {
    Design::at_stage(map.best_location(), stage)
}

/// Source of realized measurements in actual mode: called with the
/// candidate index and design.
pub type OutcomeProvider<'a> = dyn FnMut(usize, &Design) -> Result<f64> + 'a;

/// Scores every candidate. In actual mode `outcome` supplies the realized
/// measurement per candidate; in expected mode `seed` drives the
/// Monte-Carlo plan.
#[allow(clippy::too_many_arguments)]
pub fn reward_map<M: ForwardModel + ?Sized>(
    model: &M,
    prior: &PosteriorState,
    theta_e: f64,
    kind: UtilityKind,
    mode: Mode,
    stage: usize,
    settings: &DesignSettings,
    seed: SeedPath,
    outcome: &mut OutcomeProvider<'_>,
) -> Result<RewardMap> {
    settings.validate()?;
    let eval = UtilityEvaluator::new(prior, kind, &settings.ot)?;
    let candidates = settings.candidate_lattice();
    let plan = match mode {
        Mode::Expected => Some(MonteCarloPlan::draw(&eval, &settings.expected, seed)?),
        Mode::Actual => None,
    };
    let time = stage_time(stage);
    let mut values = Vec::with_capacity(candidates.len());
    for c in 0..candidates.len() {
        let p = candidates.point(c);
        let design = Design::new(p[0], p[1], time)?;
        let g = support_predictions(model, &eval, theta_e, &design)?;
        let u = match &plan {
            Some(plan) => expected_utility_from(&eval, &g, plan, settings.noise_std)?,
            None => {
                let y = outcome(c, &design)?;
                eval.utility(&g, y, settings.noise_std, &mut None)?
            }
        };
        values.push(u);
    }
    RewardMap::new(candidates, values)
}

/// Per-stage log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub design: [f64; 2],
    pub time: f64,
    pub y: f64,
    #[serde(rename = "MAP")]
    pub map: [f64; 2],
    #[serde(rename = "D")]
    pub distance: f64,
    pub sigma_eq: f64,
    pub utility_kind: UtilityKind,
    pub mode: Mode,
    pub seed: u64,
    pub theta_s: f64,
    pub utility: f64,
}

/// Everything a sequential run produces.
#[derive(Debug, Clone)]
pub struct SequentialRun {
    pub records: Vec<StageRecord>,
    /// Posterior after each stage.
    pub posteriors: Vec<PosteriorState>,
    pub reward_maps: Vec<RewardMap>,
}

/// Seed of the physical measurement at `(stage, candidate)`.
pub fn measurement_seed(root: SeedPath, stage: usize, candidate: usize) -> SeedPath {
    root.child(STAGE, stage as u64).child(MEASURE_PHYSICAL, candidate as u64)
}

/// Seed of the expected-utility plan of `stage`.
pub fn plan_seed(root: SeedPath, stage: usize) -> SeedPath {
    root.child(STAGE, stage as u64).child(CANDIDATE, u64::MAX)
}

/// Noisy reading of the true system (strength 2) at `design`.
pub fn true_measurement<M: ForwardModel + ?Sized>(
    model: &M,
    truth: [f64; 2],
    design: &Design,
    noise_std: f64,
    seed: SeedPath,
) -> Result<f64> {
    noisy(model.predict(truth, TRUE_STRENGTH, design)?, noise_std, seed)
}

/// One stage of design, measurement and Bayes update with the model
/// strength `theta_e`. Returns the measurement, the map and the posterior.
#[allow(clippy::too_many_arguments)]
pub fn physical_stage<M: ForwardModel + ?Sized>(
    model: &M,
    prior: &PosteriorState,
    truth: [f64; 2],
    theta_e: f64,
    kind: UtilityKind,
    mode: Mode,
    stage: usize,
    settings: &DesignSettings,
    root: SeedPath,
) -> Result<(Measurement, RewardMap, PosteriorState)> {
    let sigma = settings.noise_std;
    let mut realized = |c: usize, d: &Design| true_measurement(model, truth, d, sigma, measurement_seed(root, stage, c));
    let map = reward_map(model, prior, theta_e, kind, mode, stage, settings, plan_seed(root, stage), &mut realized)?;
    let design = select_design(&map, stage)?;
    // In actual mode this repeats the draw already scored for the chosen
    // candidate; in expected mode it is the first real measurement here.
    let y = realized(map.argmax, &design)?;
    let m = Measurement::new(design, y, sigma)?;
    let posterior = posterior_update(model, prior, &m, theta_e)?;
    Ok((m, map, posterior))
}

/// Six-stage (or `stages`-stage) greedy design without model discrepancy.
#[allow(clippy::too_many_arguments)]
pub fn run_sequential_no_discrepancy<M: ForwardModel + ?Sized>(
    model: &M,
    prior: PosteriorState,
    truth: [f64; 2],
    kind: UtilityKind,
    mode: Mode,
    stages: usize,
    seed: u64,
    settings: &DesignSettings,
) -> Result<SequentialRun> {
    let root = SeedPath::root(seed);
    let mut current = prior;
    let mut run = SequentialRun { records: Vec::new(), posteriors: Vec::new(), reward_maps: Vec::new() };
    for stage in 1..=stages {
        let (m, map, posterior) =
            physical_stage(model, &current, truth, TRUE_STRENGTH, kind, mode, stage, settings, root)?;
        let map_point = map_estimate(&posterior);
        run.records.push(StageRecord {
            stage,
            design: m.design.location(),
            time: m.design.time,
            y: m.value,
            map: map_point,
            distance: distance_metric(map_point, truth),
            sigma_eq: uncertainty_metric(&posterior),
            utility_kind: kind,
            mode,
            seed,
            theta_s: TRUE_STRENGTH,
            utility: map.best_value(),
        });
        run.reward_maps.push(map);
        run.posteriors.push(posterior.clone());
        current = posterior;
    }
    Ok(run)
}

/// Stages whose `sigma_eq` grew by more than `tolerance` (relative) over the
/// previous stage.
pub fn contraction_violations(records: &[StageRecord], tolerance: f64) -> Vec<usize> {
    records
        .windows(2)
        .filter(|w| w[1].sigma_eq > w[0].sigma_eq * (1.0 + tolerance))
        .map(|w| w[1].stage)
        .collect()
}

/// Fails when more than one stage breaks uncertainty contraction by 5%.
pub fn check_contraction(records: &[StageRecord]) -> Result<()> {
    let v = contraction_violations(records, 0.05);
    if v.len() > 1 {
        return Err(Error::InvalidConfig(format!("sigma_eq grew by more than 5% at stages {v:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDistribution;
    use crate::inference::parameter_lattice;

    struct Flat;

    impl ForwardModel for Flat {
        fn predict(&self, _: [f64; 2], _: f64, _: &Design) -> Result<f64> {
            Ok(0.0)
        }
    }

    /// `predict = e * t * |theta - d|^2`, cheap and informative.
    struct Bowl;

    impl ForwardModel for Bowl {
        fn predict(&self, g: [f64; 2], e: f64, d: &Design) -> Result<f64> {
            Ok(e * d.time * 100.0 * ((g[0] - d.d_x).powi(2) + (g[1] - d.d_y).powi(2)))
        }
    }

    fn small() -> DesignSettings {
        DesignSettings { candidates: 5, ..DesignSettings::default() }
    }

    #[test]
    fn uninformative_expected_kl_is_zero() {
        let prior = PosteriorState::uniform_on(parameter_lattice(20).unwrap());
        let d = Design::new(0.5, 0.5, 0.0).unwrap();
        let u = expected_utility(&Flat, &d, &prior, 2.0, UtilityKind::Kl, &small(), SeedPath::root(1)).unwrap();
        assert!(u.abs() <= 1e-12);
    }

    #[test]
    fn point_mass_prior_has_zero_expected_kl() {
        let lattice = parameter_lattice(20).unwrap();
        let prior = PosteriorState::new(GridDistribution::point_mass(lattice, 123).unwrap(), 0).unwrap();
        let d = Design::at_stage([0.4, 0.4], 1).unwrap();
        let u = expected_utility(&Bowl, &d, &prior, 2.0, UtilityKind::Kl, &small(), SeedPath::root(2)).unwrap();
        assert!(u.abs() <= 1e-12);
    }

    #[test]
    fn hand_computed_actual_kl() {
        // 3x3 lattice, predict = theta_x: columns get likelihood ratios
        // l0 : l1 : l2 with y = 0.5 at sigma = 0.5.
        struct Col;
        impl ForwardModel for Col {
            fn predict(&self, g: [f64; 2], _: f64, _: &Design) -> Result<f64> {
                Ok(g[0])
            }
        }
        let prior = PosteriorState::uniform_on(Lattice::square(0.0, 1.0, 3).unwrap());
        let settings = DesignSettings { noise_std: 0.5, ..small() };
        let d = Design::new(0.5, 0.5, 0.05).unwrap();
        let u = actual_utility(&Col, &d, 0.5, &prior, 1.0, UtilityKind::Kl, &settings).unwrap();
        let e = (-0.5f64).exp();
        let z = 1.0 + 2.0 * e;
        let post = [e / z, 1.0 / z, e / z];
        let expected: f64 = post.iter().map(|p| p * (p * 3.0).ln()).sum();
        assert!((u - expected).abs() < 1e-14, "{u} vs {expected}");
    }

    #[test]
    fn expected_kl_nonnegative_and_reproducible() {
        let prior = PosteriorState::uniform_on(parameter_lattice(20).unwrap());
        let mut none = |_: usize, _: &Design| -> Result<f64> { unreachable!() };
        let a = reward_map(&Bowl, &prior, 2.0, UtilityKind::Kl, Mode::Expected, 1, &small(), SeedPath::root(5), &mut none).unwrap();
        let b = reward_map(&Bowl, &prior, 2.0, UtilityKind::Kl, Mode::Expected, 1, &small(), SeedPath::root(5), &mut none).unwrap();
        assert!(a.values.iter().all(|&v| v >= 0.0));
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_rules() {
        assert_eq!(argmax(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.2, 0.7]).unwrap(), 1);
        assert!(argmax(&[0.1, f64::NAN]).is_err());
        let lattice = Lattice::square(0.0, 1.0, 2).unwrap();
        let map = RewardMap::new(lattice.clone(), vec![0.3, 0.9, 0.1, 0.5]).unwrap();
        let d = select_design(&map, 2).unwrap();
        assert_eq!(d.location(), [0.0, 1.0]);
        assert_eq!(d.time, stage_time(2));
        let flat = RewardMap::new(lattice, vec![2.0; 4]).unwrap();
        assert_eq!(flat.best_location(), [0.0, 0.0]);
    }

    #[test]
    fn affine_invariance() {
        let values: Vec<f64> = (0..25).map(|i| ((i * 7919) % 23) as f64 * 0.1).collect();
        let lattice = Lattice::square(0.0, 1.0, 5).unwrap();
        let a = RewardMap::new(lattice.clone(), values.clone()).unwrap();
        let b = RewardMap::new(lattice, values.iter().map(|v| 3.7 * v + 1.2).collect()).unwrap();
        assert_eq!(select_design(&a, 1).unwrap(), select_design(&b, 1).unwrap());
    }

    #[test]
    fn monte_carlo_budget_enforced() {
        let bad = ExpectedUtilityConfig { num_theta_samples: 20, num_y_samples_per_theta: 4 };
        assert_eq!(bad.problems().len(), 1);
        assert!(ExpectedUtilityConfig::default().problems().is_empty());
    }

    #[test]
    fn sequential_chaining_and_records() {
        let prior = PosteriorState::uniform_on(parameter_lattice(20).unwrap());
        let run = run_sequential_no_discrepancy(&Bowl, prior, [0.3, 0.4], UtilityKind::Kl, Mode::Actual, 3, 9, &small()).unwrap();
        assert_eq!(run.records.len(), 3);
        for (i, r) in run.records.iter().enumerate() {
            assert_eq!(r.stage, i + 1);
            assert_eq!(r.time, stage_time(i + 1));
            assert_eq!(run.posteriors[i].stage, i + 1);
        }
        let line = serde_json::to_string(&run.records[0]).unwrap();
        for key in ["\"stage\"", "\"design\"", "\"y\"", "\"MAP\"", "\"D\"", "\"sigma_eq\"", "\"utility_kind\"", "\"mode\"", "\"seed\""] {
            assert!(line.contains(key), "{line}");
        }
    }

    #[test]
    fn contraction_check_counts_violations() {
        let rec = |stage, sigma_eq| StageRecord {
            stage,
            design: [0.0; 2],
            time: stage_time(stage),
            y: 0.0,
            map: [0.0; 2],
            distance: 0.0,
            sigma_eq,
            utility_kind: UtilityKind::Kl,
            mode: Mode::Expected,
            seed: 0,
            theta_s: 2.0,
            utility: 0.0,
        };
        let ok = [rec(1, 0.1), rec(2, 0.104), rec(3, 0.05), rec(4, 0.06)];
        assert!(check_contraction(&ok).is_ok());
        let bad = [rec(1, 0.1), rec(2, 0.2), rec(3, 0.05), rec(4, 0.06)];
        assert!(check_contraction(&bad).is_err());
    }
}
