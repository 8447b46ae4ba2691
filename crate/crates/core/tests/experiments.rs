use std::fs;
use std::path::Path;

use plumebed::design::UtilityKind;
use plumebed::experiments::*;
use plumebed::Error;

fn small_toy(out: &Path) -> String {
    format!(
        r#"case = "toy"
output = "{}"
[toy]
lattice_n = 30
kernel_width = 0.2
positions = 40
"#,
        out.display()
    )
}

fn small_case(out: &Path) -> String {
    format!(
        r#"case = 1
kinds = ["kl", "w2"]
stages = 2
seed = 3
output = "{}"
[design]
candidates = 5
"#,
        out.display()
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn toy_scan_round_trips_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = run(&ExperimentConfig::parse(&small_toy(&a), &Overrides::default()).unwrap()).unwrap();
    let Outcome::Toy { dir, scan } = first else { panic!("expected a toy outcome") };
    assert_eq!(scan.rows.len(), 40);
    assert_eq!(scan.rows[0].s, 0.0);
    assert_eq!(scan.rows[39].s, 1.0);
    assert!(scan.rows.iter().all(|r| r.w1 >= 0.0 && r.w2 >= 0.0 && r.kl >= 0.0));
    assert_eq!(read_toy_scan(&dir.join(TOY_SCAN)).unwrap(), scan);

    // Rerunning from the echoed configuration reproduces every byte.
    let echoed = fs::read_to_string(a.join(RESOLVED_CONFIG)).unwrap();
    let over = Overrides { output: Some(b.clone()), ..Overrides::default() };
    run(&ExperimentConfig::parse(&echoed, &over).unwrap()).unwrap();
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(n, _)| n != RESOLVED_CONFIG).collect::<Vec<_>>();
    assert_eq!(strip(files(&a)), strip(files(&b)));
}

#[test]
fn case_run_writes_readable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::parse(&small_case(tmp.path()), &Overrides::default()).unwrap();
    let Outcome::Case(runs) = run(&config).unwrap() else { panic!("expected a case outcome") };
    assert_eq!(runs.len(), 2);
    for r in &runs {
        assert_eq!(r.dir, run_dir(tmp.path(), CaseId::Plume(1), Some(r.kind), &config));
        assert_eq!(read_metrics(&r.dir.join(METRICS)).unwrap(), r.records);
        for stage in 1..=2 {
            let post = read_posterior_csv(&r.dir.join(posterior_file(stage))).unwrap();
            let kept = &r.posteriors[stage - 1];
            assert_eq!(post.weights(), kept.weights());
            let map = read_reward_csv(&r.dir.join(reward_file(stage))).unwrap();
            assert_eq!(map, r.reward_maps[stage - 1]);
        }
    }
    assert!(runs[0].dir.ends_with("case1_kl_actual_seed3"));

    // Same configuration and seed, same bytes.
    let again = tmp.path().join("again");
    let over = Overrides { output: Some(again.clone()), ..Overrides::default() };
    let echoed = fs::read_to_string(tmp.path().join(RESOLVED_CONFIG)).unwrap();
    let rerun = ExperimentConfig::parse(&echoed, &over).unwrap();
    run(&rerun).unwrap();
    for r in &runs {
        let twin = run_dir(&again, CaseId::Plume(1), Some(r.kind), &rerun);
        assert_eq!(files(&r.dir), files(&twin), "{}", r.kind);
    }
}

#[test]
fn invalid_configs_list_every_problem() {
    let text = r#"case = 2
mode = "actual"
stages = 0
[expected]
num_theta_samples = 10
num_y_samples_per_theta = 2
"#;
    match ExperimentConfig::parse(text, &Overrides::default()) {
        Err(Error::Validation(problems)) => {
            assert_eq!(problems.len(), 3, "{problems:?}");
            assert!(problems.iter().any(|p| p.contains("mode")));
            assert!(problems.iter().any(|p| p.contains("stages")));
            assert!(problems.iter().any(|p| p.contains("expected")));
        }
        other => panic!("{other:?}"),
    }
    assert!(ExperimentConfig::parse("case = 1\nbogus = 3\n", &Overrides::default()).is_err());
}

#[test]
fn overrides_replace_file_values() {
    let over = Overrides {
        kinds: Some(vec!["w1".into()]),
        seed: Some(9),
        ..Overrides::default()
    };
    let c = ExperimentConfig::parse("case = 1\nseed = 2\nkinds = [\"kl\"]\n", &over).unwrap();
    assert_eq!(c.kinds, vec![UtilityKind::W1]);
    assert_eq!(c.seed, 9);
}
