use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plumebed::experiments::{self, ExperimentConfig, Outcome, Overrides};
use plumebed::Error;

/// Sequential design experiments with KL and Wasserstein utilities.
#[derive(Parser)]
#[command(name = "plumebed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// False-reward scan of the toy ring posteriors.
    Toy(Common),
    /// Six-stage sequential design for one plume case (1 to 5).
    Case {
        /// Case number; overrides `case` in the config file.
        case: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a config file and echo the resolved version.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated utility kinds, e.g. `kl,w2`.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    /// `actual` or `expected`.
    #[arg(long)]
    mode: Option<String>,
}

impl Common {
    fn load(&self, case: Option<String>) -> Result<ExperimentConfig, Error> {
        let overrides = Overrides {
            case,
            kinds: self.kinds.clone(),
            mode: self.mode.clone(),
            seed: self.seed,
            output: self.out.clone(),
        };
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &overrides),
            None => ExperimentConfig::from_overrides(&overrides),
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Toy(common) => {
            let config = common.load(Some("toy".into()))?;
            report(experiments::run(&config)?);
        }
        Command::Case { case, common } => {
            let config = common.load(case)?;
            if config.case == experiments::CaseId::Toy {
                return Err(Error::Validation(vec!["use the toy subcommand for the toy scan".into()]));
            }
            report(experiments::run(&config)?);
        }
        Command::Validate(common) => {
            if common.config.is_none() {
                return Err(Error::Validation(vec!["validate needs --config".into()]));
            }
            let config = common.load(None)?;
            let path = experiments::echo_config(&config)?;
            print!("{}", config.to_toml()?);
            eprintln!("resolved config written to {}", path.display());
        }
    }
    Ok(())
}

fn report(outcome: Outcome) {
    match outcome {
        Outcome::Toy { dir, scan } => {
            let b = scan.baseline();
            println!("toy scan: {} positions in {}", scan.rows.len(), dir.display());
            println!("baseline at s = 0: W1 {:.6}, W2 {:.6}, KL {:.6}", b.w1, b.w2, b.kl);
        }
        Outcome::Case(runs) => {
            for run in runs {
                println!("{} -> {}", run.kind, run.dir.display());
                for r in &run.records {
                    println!(
                        "  stage {}: design ({:.4}, {:.4})  D {:.4}  sigma_eq {:.4}  theta_s {:.4}",
                        r.stage, r.design[0], r.design[1], r.distance, r.sigma_eq, r.theta_s
                    );
                }
            }
        }
    }
}

/// One JSON object on stderr describing the failure.
fn error_record(e: &Error) -> String {
    let problems = match e {
        Error::Validation(p) => p.clone(),
        _ => Vec::new(),
    };
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "problems": problems }).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(if matches!(e, Error::Validation(_)) { 2 } else { 1 })
        }
    }
}
