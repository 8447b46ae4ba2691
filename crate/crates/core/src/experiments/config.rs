//! Experiment configuration: parsing, validation and the resolved echo.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::toy::ToySettings;
use crate::design::{DesignSettings, ExpectedUtilityConfig, Mode, OtSettings, UtilityKind};
use crate::discrepancy::DiscrepancySettings;
use crate::error::{Error, Result};
use crate::forward::{PdeConfig, NOISE_STD};

/// Which experiment a config runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    Toy,
    Plume(u8),
}

impl CaseId {
    /// Source location of the true system.
    pub fn truth(self) -> Option<[f64; 2]> {
        match self {
            CaseId::Plume(1 | 2 | 4) => Some([0.3, 0.4]),
            CaseId::Plume(3) => Some([0.4, 0.4]),
            CaseId::Plume(5) => Some([0.1, 0.1]),
            _ => None,
        }
    }

    /// The utility mode each case is defined with.
    pub fn required_mode(self) -> Mode {
        match self {
            CaseId::Plume(2 | 4 | 5) => Mode::Expected,
            _ => Mode::Actual,
        }
    }

    /// Cases 3 and 4 start from a wrong source strength and correct it.
    pub fn has_discrepancy(self) -> bool {
        matches!(self, CaseId::Plume(3 | 4))
    }

    pub fn label(self) -> String {
        match self {
            CaseId::Toy => "toy".into(),
            CaseId::Plume(n) => format!("case{n}"),
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseId::Toy => f.write_str("toy"),
            CaseId::Plume(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let digits = s.strip_prefix("case").unwrap_or(&s);
        match (s.as_str(), digits.parse::<u8>()) {
            ("toy", _) => Ok(CaseId::Toy),
            (_, Ok(n @ 1..=5)) => Ok(CaseId::Plume(n)),
            _ => Err(Error::InvalidConfig(format!("unknown case '{s}' (expected toy or 1..5)"))),
        }
    }
}

impl Serialize for CaseId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CaseId::Toy => s.serialize_str("toy"),
            CaseId::Plume(n) => s.serialize_u8(*n),
        }
    }
}

/// Case as written in the file: `case = 2`, `case = "2"` or `case = "toy"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawCase {
    Number(i64),
    Text(String),
}

/// The file as written; every field optional so that validation can report
/// all missing or bad values together.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    case: Option<RawCase>,
    kinds: Option<Vec<String>>,
    mode: Option<String>,
    seed: Option<i64>,
    output: Option<PathBuf>,
    stages: Option<i64>,
    truth: Option<[f64; 2]>,
    #[serde(default)]
    pde: PdeConfig,
    #[serde(default)]
    design: DesignSection,
    #[serde(default)]
    expected: ExpectedUtilityConfig,
    #[serde(default)]
    ot: OtSettings,
    #[serde(default)]
    discrepancy: DiscrepancySettings,
    #[serde(default)]
    toy: ToySettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub candidates: usize,
    pub noise_std: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        let d = DesignSettings::default();
        DesignSection { candidates: d.candidates, noise_std: NOISE_STD }
    }
}

pub const DEFAULT_STAGES: usize = 6;
pub const DEFAULT_OUTPUT: &str = "out";

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub case: CaseId,
    pub kinds: Vec<UtilityKind>,
    pub mode: Mode,
    pub seed: u64,
    pub output: PathBuf,
    pub stages: usize,
    /// True source location; fixed by the case unless overridden.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<[f64; 2]>,
    pub pde: PdeConfig,
    pub design: DesignSection,
    pub expected: ExpectedUtilityConfig,
    pub ot: OtSettings,
    pub discrepancy: DiscrepancySettings,
    pub toy: ToySettings,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<String>,
    pub kinds: Option<Vec<String>>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses TOML text, applies `overrides` and checks every invariant.
    /// All problems found are reported together.
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Validation(vec![e.message().to_string()]))?;
        resolve(raw, overrides)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Defaults only, for runs driven by command-line flags.
    pub fn from_overrides(overrides: &Overrides) -> Result<Self> {
        resolve(RawConfig::default(), overrides)
    }

    pub fn design_settings(&self) -> DesignSettings {
        DesignSettings {
            candidates: self.design.candidates,
            noise_std: self.design.noise_std,
            expected: self.expected,
            ot: self.ot,
        }
    }

    /// The fully resolved configuration as TOML; parsing it reproduces `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot serialize config: {e}")))
    }
}

fn resolve(raw: RawConfig, o: &Overrides) -> Result<ExperimentConfig> {
    let mut problems = Vec::new();

    let case = match (&o.case, &raw.case) {
        (Some(s), _) => s.parse::<CaseId>(),
        (None, Some(RawCase::Number(n))) => n.to_string().parse(),
        (None, Some(RawCase::Text(s))) => s.parse(),
        (None, None) => Err(Error::InvalidConfig("case is required (toy or 1..5)".into())),
    };
    let case = case.map_err(|e| problems.push(message(e))).ok();

    let kind_names = o.kinds.clone().or(raw.kinds).unwrap_or_else(|| vec!["kl".into(), "w1".into(), "w2".into()]);
    let mut kinds = Vec::new();
    for k in &kind_names {
        match k.parse::<UtilityKind>() {
            Ok(k) if !kinds.contains(&k) => kinds.push(k),
            Ok(k) => problems.push(format!("utility kind {k} listed twice")),
            Err(e) => problems.push(message(e)),
        }
    }
    if kind_names.is_empty() {
        problems.push("kinds must name at least one of kl, w1, w2".into());
    }

    let mode = match o.mode.as_ref().or(raw.mode.as_ref()) {
        Some(m) => m.parse::<Mode>().map_err(|e| problems.push(message(e))).ok(),
        None => None,
    };
    if let (Some(case), Some(mode)) = (case, mode) {
        if case != CaseId::Toy && mode != case.required_mode() {
            problems.push(format!("case {case} is defined with {} utility, got mode {mode}", case.required_mode()));
        }
        if case == CaseId::Toy && mode != Mode::Actual {
            problems.push(format!("the toy scan evaluates actual posteriors, got mode {mode}"));
        }
    }

    let seed = match (o.seed, raw.seed) {
        (Some(s), _) => s,
        (None, Some(s)) if s >= 0 => s as u64,
        (None, Some(s)) => {
            problems.push(format!("seed must be >= 0, got {s}"));
            0
        }
        (None, None) => 0,
    };
    let stages = match raw.stages {
        None => DEFAULT_STAGES,
        Some(s) if s >= 1 => s as usize,
        Some(s) => {
            problems.push(format!("stages must be >= 1, got {s}"));
            DEFAULT_STAGES
        }
    };
    if let Some(t) = raw.truth {
        if !t.iter().all(|v| (0.0..=1.0).contains(v)) {
            problems.push(format!("truth must lie in [0, 1]^2, got {t:?}"));
        }
    }

    let design = DesignSettings {
        candidates: raw.design.candidates,
        noise_std: raw.design.noise_std,
        expected: raw.expected,
        ot: raw.ot,
    };
    problems.extend(raw.pde.problems());
    problems.extend(design.problems());
    problems.extend(raw.discrepancy.problems());
    problems.extend(raw.toy.problems());

    match case {
        Some(case) if problems.is_empty() => Ok(ExperimentConfig {
            case,
            kinds,
            mode: mode.unwrap_or(case.required_mode()),
            seed,
            output: o.output.clone().or(raw.output).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
            stages,
            truth: raw.truth,
            pde: raw.pde,
            design: raw.design,
            expected: raw.expected,
            ot: raw.ot,
            discrepancy: raw.discrepancy,
            toy: raw.toy,
        }),
        _ => Err(Error::Validation(problems)),
    }
}

fn message(e: Error) -> String {
    match e {
        Error::InvalidConfig(m) => m,
        other => other.to_string(),
    }
}
