use plumebed::design::{DesignSettings, ExpectedUtilityConfig, Mode, UtilityKind};
use plumebed::discrepancy::*;
use plumebed::forward::{noisy, Design, ForwardModel, PdeConfig, PlumeKernel, NOISE_STD, TRUE_WIDTH};
use plumebed::inference::PosteriorState;
use plumebed::rng::SeedPath;
use plumebed::{Axis, Error, Lattice, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Strength times a location-dependent sensitivity; zero at time 0.
struct Linear;

impl ForwardModel for Linear {
    fn predict(&self, _: [f64; 2], theta_e: f64, d: &Design) -> Result<f64> {
        Ok(if d.time == 0.0 { 0.0 } else { theta_e * (0.02 + d.d_x) })
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn eki_matches_linear_gaussian_posterior() {
    // Sample-covariance gains are biased by O(1/J); a large ensemble keeps
    // that bias well inside the Monte Carlo error of 200 trials.
    const J: usize = 512;
    // (a, b, prior mean, prior std, noise std, y)
    let cases = [(1.0, 0.0, 3.0, 0.5, 0.5, 3.5), (2.0, 0.5, 4.0, 0.5, 0.5, 9.0), (0.1, 0.0, 3.0, 0.25, 0.05, 0.2)];
    for (case, &(a, b, m0, s0, sigma, y)) in cases.iter().enumerate() {
        let gain = a * s0 * s0 / (a * a * s0 * s0 + sigma * sigma);
        let exact_mean = m0 + gain * (y - a * m0 - b);
        let exact_var = s0 * s0 * sigma * sigma / (a * a * s0 * s0 + sigma * sigma);
        let (mut means, mut vars) = (Vec::new(), Vec::new());
        for t in 0..200 {
            let root = SeedPath::root(case as u64).child(1, t);
            let e = Ensemble::gaussian(m0, s0, J, root.child(0, 0)).unwrap();
            let g: Vec<f64> = e.members().iter().map(|x| a * x + b).collect();
            let mut rng = root.child(0, 1).rng();
            let eta: Vec<f64> = (0..J).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
            let after = eki_step(&e, &g, y, sigma, &eta).unwrap();
            means.push(after.mean());
            vars.push(after.variance());
        }
        let (m, se) = mean_and_se(&means);
        assert!((m - exact_mean).abs() < 3.0 * se, "case {case}: mean {m} vs {exact_mean} (se {se})");
        let (v, se) = mean_and_se(&vars);
        assert!((v - exact_var).abs() < 3.0 * se, "case {case}: variance {v} vs {exact_var} (se {se})");
        // Kalman contraction: the average updated spread is below the prior's.
        assert!(v < s0 * s0);
    }
}

#[test]
fn eki_update_uses_the_model_and_is_seeded() {
    let e = Ensemble::gaussian(3.0, 0.25, 32, SeedPath::root(1)).unwrap();
    let d = Design::new(0.5, 0.5, 0.1).unwrap();
    let a = eki_update(&Linear, &e, &d, 1.0, [0.0, 0.0], 0.05, SeedPath::root(2)).unwrap();
    let b = eki_update(&Linear, &e, &d, 1.0, [0.0, 0.0], 0.05, SeedPath::root(2)).unwrap();
    assert_eq!(a, b);
    // Kalman posterior mean for prior N(3, 0.25^2), slope 0.52, y = 1.
    let gain = 0.52 * 0.0625 / (0.52 * 0.52 * 0.0625 + 0.0025);
    assert!((a.mean() - (3.0 + gain * (1.0 - 1.56))).abs() < 0.1, "{}", a.mean());
    assert!(a.members().iter().all(|&m| m >= STRENGTH_FLOOR));
}

#[test]
fn floor_reflection_keeps_members_positive() {
    let e = Ensemble::new(vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08]).unwrap();
    let g: Vec<f64> = e.members().to_vec();
    let after = eki_step(&e, &g, -5.0, 0.01, &[0.0; 8]).unwrap();
    assert!(after.members().iter().all(|&m| m > 0.0 && m.is_finite()));
}

#[test]
fn small_ensembles_are_rejected() {
    assert!(Ensemble::new(vec![1.0; 7]).is_err());
    assert!(Ensemble::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, f64::NAN]).is_err());
}

#[test]
fn wasserstein_translation_property() {
    let before = Ensemble::gaussian(2.0, 0.3, 16, SeedPath::root(5)).unwrap();
    for c in [-0.7, 0.05, 1.3] {
        let after = Ensemble::new(before.members().iter().map(|x| x + c + 1.0).collect()).unwrap();
        let shifted = Ensemble::new(before.members().iter().map(|x| x + 1.0).collect()).unwrap();
        let base = ensemble_utility(&before, &shifted, UtilityKind::W1).unwrap();
        let moved = ensemble_utility(&before, &after, UtilityKind::W1).unwrap();
        assert!(((moved - base).abs() - c.abs()).abs() < 1e-12, "c {c}: {base} -> {moved}");
    }
}

fn two_candidates() -> Lattice {
    Lattice::plane(Axis::spanning(0.0, 1.0, 2).unwrap(), Axis::new(0.5, 1.0, 1).unwrap())
}

#[test]
fn sensitive_candidate_wins_the_error_design() {
    let cfg = DiscrepancySettings::default();
    for kind in [UtilityKind::W1, UtilityKind::W2, UtilityKind::Kl] {
        let d = select_error_design(&Linear, [0.0; 2], 3.0, &two_candidates(), kind, 0.1, 0.05, &cfg, SeedPath::root(3))
            .unwrap();
        assert_eq!(d.d_x, 1.0, "{kind}");
    }
}

#[test]
fn single_and_uninformative_candidates() {
    let cfg = DiscrepancySettings::default();
    let one = Lattice::plane(Axis::new(0.3, 1.0, 1).unwrap(), Axis::new(0.7, 1.0, 1).unwrap());
    let d = select_error_design(&Linear, [0.0; 2], 3.0, &one, UtilityKind::W2, 0.1, 0.05, &cfg, SeedPath::root(3)).unwrap();
    assert_eq!(d.location(), [0.3, 0.7]);

    let grid = Lattice::square(0.0, 1.0, 5).unwrap();
    let map = error_reward_map(
        &Linear,
        [0.0; 2],
        3.0,
        &grid,
        UtilityKind::W1,
        0.0,
        0.05,
        &cfg,
        SeedPath::root(3),
    )
    .unwrap();
    assert!(map.values.iter().all(|&u| u.abs() < 1e-12));
    assert_eq!(map.best_location(), [0.0, 0.0]);
}

fn kernel() -> PlumeKernel {
    PlumeKernel::for_stages(PdeConfig::default(), TRUE_WIDTH, 6).unwrap()
}

#[test]
fn noisy_strength_estimates_are_unbiased() {
    let model = kernel();
    let truth = [0.3, 0.4];
    let d = Design::at_stage([0.35, 0.45], 2).unwrap();
    let clean = model.predict(truth, 2.0, &d).unwrap();
    assert!((update_theta_e(&model, truth, &d, clean).unwrap() - 2.0).abs() < 1e-8);
    let estimates: Vec<f64> = (0..1000)
        .map(|k| {
            let y = noisy(clean, NOISE_STD, SeedPath::root(9).child(0, k)).unwrap();
            update_theta_e(&model, truth, &d, y).unwrap()
        })
        .collect();
    let (m, se) = mean_and_se(&estimates);
    assert!((m - 2.0).abs() < 3.0 * se, "mean {m}, se {se}");
}

#[test]
fn insensitive_and_zero_measurements() {
    let model = kernel();
    let unmeasurable = Design::new(0.5, 0.5, 0.0).unwrap();
    match update_theta_e(&Linear, [0.0, 0.0], &unmeasurable, 0.3) {
        Err(Error::InsensitiveDesign(p)) => assert!(p.abs() < 1e-8),
        other => panic!("{other:?}"),
    }
    let near = Design::at_stage([0.35, 0.45], 1).unwrap();
    assert_eq!(update_theta_e(&model, [0.3, 0.4], &near, 0.0).unwrap(), STRENGTH_FLOOR);
}

fn small_settings() -> DesignSettings {
    DesignSettings {
        candidates: 7,
        expected: ExpectedUtilityConfig { num_theta_samples: 32, num_y_samples_per_theta: 4 },
        ..DesignSettings::default()
    }
}

#[test]
fn correct_strength_stays_in_the_noise_band() {
    // One measurement with unit-strength signal >= 0.25 gives an estimator
    // standard deviation <= NOISE_STD / 0.25 = 0.2; allow three of them.
    let band = 3.0 * NOISE_STD / 0.25;
    let model = kernel();
    let cfg = DiscrepancySettings { initial_strength: 2.0, ..DiscrepancySettings::default() };
    let run = run_sequential_with_discrepancy(
        &model,
        PosteriorState::uniform_prior(),
        [0.3, 0.4],
        UtilityKind::Kl,
        Mode::Actual,
        6,
        0,
        &DesignSettings::default(),
        &cfg,
    )
    .unwrap();
    for r in &run.records {
        assert!((r.theta_s - 2.0).abs() < band, "stage {}: theta_s {}", r.stage, r.theta_s);
    }
}

/// Fails every unit-strength query, which only the error design issues.
struct FailsOnUnitStrength<'a>(&'a PlumeKernel);

impl ForwardModel for FailsOnUnitStrength<'_> {
    fn predict(&self, g: [f64; 2], e: f64, d: &Design) -> Result<f64> {
        if e == 1.0 {
            return Err(Error::NonFinite("injected".into()));
        }
        self.0.predict(g, e, d)
    }

    fn predict_many(&self, thetas: &[[f64; 2]], e: f64, d: &Design) -> Result<Vec<f64>> {
        if e == 1.0 {
            return Err(Error::NonFinite("injected".into()));
        }
        self.0.predict_many(thetas, e, d)
    }
}

#[test]
fn failed_stage_leaves_the_state_untouched() {
    let k = kernel();
    let model = FailsOnUnitStrength(&k);
    let state = CorrectionState::new(PosteriorState::uniform_prior(), 3.0).unwrap();
    let before = state.clone();
    let result = correction_stage(
        &model,
        &state,
        [0.4, 0.4],
        UtilityKind::Kl,
        Mode::Actual,
        &small_settings(),
        &DiscrepancySettings::default(),
        SeedPath::root(0),
        0,
    );
    assert!(matches!(result, Err(Error::NonFinite(_))));
    assert_eq!(state, before);
}

#[test]
fn correction_run_is_deterministic() {
    let model = kernel();
    let cfg = DiscrepancySettings::default();
    let run = |seed| {
        run_sequential_with_discrepancy(
            &model,
            PosteriorState::uniform_prior(),
            [0.4, 0.4],
            UtilityKind::W2,
            Mode::Actual,
            2,
            seed,
            &DesignSettings::default(),
            &cfg,
        )
        .unwrap()
    };
    let (a, b) = (run(4), run(4));
    assert_eq!(a.records, b.records);
    assert_eq!(a.posteriors, b.posteriors);
}
