//! Batch experiments: the toy scan and the five plume cases.

mod config;
mod run;
mod toy;

pub use config::{CaseId, DesignSection, ExperimentConfig, Overrides, DEFAULT_OUTPUT, DEFAULT_STAGES};
pub use run::{
    echo_config, error_reward_file, posterior_file, read_metrics, read_posterior_csv, read_reward_csv, read_toy_scan,
    reward_file, run, run_dir, KindRun, Outcome, METADATA, METRICS, RESOLVED_CONFIG, TOY_SCAN,
};
pub use toy::{ring, ring_row, run_toy_scan, scan_sensor, ScanRow, ToyScan, ToySettings, TOY_DOMAIN, TOY_TRUTH};
