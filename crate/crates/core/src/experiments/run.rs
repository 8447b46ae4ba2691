//! Running configured experiments and writing their artifacts.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{CaseId, ExperimentConfig};
use super::toy::{parse_row, run_toy_scan, ToyScan};
use crate::design::{run_sequential_no_discrepancy, RewardMap, StageRecord, UtilityKind};
use crate::discrepancy::run_sequential_with_discrepancy;
use crate::error::{Error, Result};
use crate::forward::{PlumeKernel, TRUE_WIDTH};
use crate::grid::{GridDistribution, Lattice};
use crate::inference::{parameter_lattice, PosteriorState, DEFAULT_LATTICE_N};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const METRICS: &str = "metrics.jsonl";
pub const TOY_SCAN: &str = "toy_scan.csv";
pub const METADATA: &str = "metadata.json";

pub fn reward_file(stage: usize) -> String {
    format!("reward_stage{stage}.csv")
}

pub fn posterior_file(stage: usize) -> String {
    format!("posterior_stage{stage}.csv")
}

pub fn error_reward_file(stage: usize) -> String {
    format!("error_reward_stage{stage}.csv")
}

/// Directory of one `(case, kind, mode, seed)` run below `root`.
pub fn run_dir(root: &Path, case: CaseId, kind: Option<UtilityKind>, config: &ExperimentConfig) -> PathBuf {
    let name = match kind {
        Some(k) => format!("{}_{}_{}_seed{}", case.label(), k, config.mode, config.seed),
        None => format!("{}_seed{}", case.label(), config.seed),
    };
    root.join(name)
}

/// Results of one utility kind of a plume case.
#[derive(Debug, Clone)]
pub struct KindRun {
    pub kind: UtilityKind,
    pub dir: PathBuf,
    pub records: Vec<StageRecord>,
    pub posteriors: Vec<PosteriorState>,
    pub reward_maps: Vec<RewardMap>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Toy { dir: PathBuf, scan: ToyScan },
    Case(Vec<KindRun>),
}

/// Notes stored next to the outputs of a discrepancy run.
#[derive(Serialize)]
struct Metadata<'a> {
    case: CaseId,
    kind: UtilityKind,
    mode: crate::design::Mode,
    seed: u64,
    truth: [f64; 2],
    ensemble_kl: &'a str,
    error_design_outcomes: &'a str,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_with<F: FnOnce(&mut BufWriter<fs::File>) -> Result<()>>(path: &Path, f: F) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Writes the resolved configuration to the output directory.
pub fn echo_config(config: &ExperimentConfig) -> Result<PathBuf> {
    make_dir(&config.output)?;
    let path = config.output.join(RESOLVED_CONFIG);
    let text = config.to_toml()?;
    write_with(&path, |w| Ok(w.write_all(text.as_bytes())?))?;
    Ok(path)
}

/// Runs the configured experiment and writes every artifact.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    echo_config(config)?;
    match config.case {
        CaseId::Toy => {
            let scan = run_toy_scan(&config.toy)?;
            let dir = run_dir(&config.output, CaseId::Toy, None, config);
            make_dir(&dir)?;
            write_with(&dir.join(TOY_SCAN), |w| scan.write_csv(w))?;
            Ok(Outcome::Toy { dir, scan })
        }
        case => run_case(config, case).map(Outcome::Case),
    }
}

fn run_case(config: &ExperimentConfig, case: CaseId) -> Result<Vec<KindRun>> {
    let truth = config.truth.or(case.truth()).expect("plume cases have a truth");
    let model = PlumeKernel::for_stages(config.pde.clone(), TRUE_WIDTH, config.stages)?;
    let settings = config.design_settings();
    let prior = PosteriorState::uniform_prior();
    let mut runs = Vec::new();
    for &kind in &config.kinds {
        let dir = run_dir(&config.output, case, Some(kind), config);
        let run = if case.has_discrepancy() {
            let r = run_sequential_with_discrepancy(
                &model,
                prior.clone(),
                truth,
                kind,
                config.mode,
                config.stages,
                config.seed,
                &settings,
                &config.discrepancy,
            )?;
            make_dir(&dir)?;
            for o in &r.outcomes {
                write_with(&dir.join(error_reward_file(o.record.stage)), |w| o.error_map.write_csv(w))?;
            }
            let meta = Metadata {
                case,
                kind,
                mode: config.mode,
                seed: config.seed,
                truth,
                ensemble_kl: "gaussian moment matching of ensemble mean and variance",
                error_design_outcomes: "strengths drawn from the Gaussian ensemble prior around the current value",
            };
            let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
            write_with(&dir.join(METADATA), |w| Ok(w.write_all(text.as_bytes())?))?;
            let maps = r.outcomes.into_iter().map(|o| o.physical_map).collect();
            KindRun { kind, dir, records: r.records, posteriors: r.posteriors, reward_maps: maps }
        } else {
            let r = run_sequential_no_discrepancy(
                &model,
                prior.clone(),
                truth,
                kind,
                config.mode,
                config.stages,
                config.seed,
                &settings,
            )?;
            KindRun { kind, dir, records: r.records, posteriors: r.posteriors, reward_maps: r.reward_maps }
        };
        write_kind_run(&run)?;
        runs.push(run);
    }
    Ok(runs)
}

fn write_kind_run(run: &KindRun) -> Result<()> {
    make_dir(&run.dir)?;
    for (i, (map, post)) in run.reward_maps.iter().zip(&run.posteriors).enumerate() {
        write_with(&run.dir.join(reward_file(i + 1)), |w| map.write_csv(w))?;
        write_with(&run.dir.join(posterior_file(i + 1)), |w| post.write_csv(w))?;
    }
    write_with(&run.dir.join(METRICS), |w| {
        for r in &run.records {
            let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    let f = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufReader::new(f))
}

fn read_table(path: &Path, header: &str) -> Result<Vec<[f64; 3]>> {
    let mut rows = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != header {
                return Err(Error::Io(format!("{}: unexpected header '{line}'", path.display())));
            }
            continue;
        }
        let v = parse_row(&line, 3)?;
        rows.push([v[0], v[1], v[2]]);
    }
    Ok(rows)
}

/// Reads a posterior snapshot written on the default parameter lattice.
pub fn read_posterior_csv(path: &Path) -> Result<PosteriorState> {
    let rows = read_table(path, "theta_x,theta_y,weight")?;
    let lattice = parameter_lattice(DEFAULT_LATTICE_N)?;
    check_nodes(&lattice, &rows, path)?;
    let weights = rows.iter().map(|r| r[2]).collect();
    PosteriorState::new(GridDistribution::new(lattice, weights)?, 0)
}

/// Reads a reward map written on a square candidate lattice over `[0, 1]^2`.
pub fn read_reward_csv(path: &Path) -> Result<RewardMap> {
    let rows = read_table(path, "d_x,d_y,utility")?;
    let n = (rows.len() as f64).sqrt().round() as usize;
    let lattice = Lattice::square(0.0, 1.0, n)?;
    check_nodes(&lattice, &rows, path)?;
    RewardMap::new(lattice, rows.iter().map(|r| r[2]).collect())
}

fn check_nodes(lattice: &Lattice, rows: &[[f64; 3]], path: &Path) -> Result<()> {
    let same = rows.len() == lattice.len() && rows.iter().enumerate().all(|(i, r)| lattice.point(i) == [r[0], r[1]]);
    if same {
        Ok(())
    } else {
        Err(Error::Io(format!("{}: nodes do not match the expected lattice", path.display())))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<StageRecord>> {
    open(path)?
        .lines()
        .map(|l| serde_json::from_str(&l?).map_err(|e| Error::Io(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn read_toy_scan(path: &Path) -> Result<ToyScan> {
    ToyScan::read_csv(open(path)?)
}
