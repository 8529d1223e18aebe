//! Experiment orchestration: configs, the evolutionary loop for each
//! representation, reports and comparison statistics.

mod config;
mod report;
mod runner;
pub mod stats;

pub use config::{
    run_dir_name, ConfigError, ExperimentConfig, ExperimentFile, RecordPolicy, Representation, SearchConfig,
};
pub use report::{
    compare, emit_report, summary_rows, Comparison, RunEntry, StatsReport, SummaryRow, UniqueLink, ViolationRow,
    INSUFFICIENT, TOTAL_ROW,
};
pub use runner::{
    evaluate_scenario, execute, load_report, load_violations, record_path, replay, run, scenario_id, scenario_path,
    write_run, GenerationSummary, Replay, RunOutcome, RunReport, RunTimings, ScenarioFile, UniqueViolation,
    SCENARIO_FORMAT, SCENARIO_VERSION,
};
pub use stats::{mann_whitney_u, vargha_delaney_a12, MannWhitney, StatsError};

use crate::genome::{NsgaError, ScenarioError};
use crate::lane_map::MapError;
use crate::simulator::{RecordError, SimError};
use crate::validity::ValidityError;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Selection(#[from] NsgaError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Format(String),
}

impl RunError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn json(path: &Path, source: serde_json::Error) -> Self {
        RunError::Json { path: path.to_path_buf(), source }
    }

    /// Whether the failure lies in the user's configuration rather than
    /// during the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(self, RunError::Config(_) | RunError::Map(_))
    }
}

/// Expands an experiment file, runs every (representation, seed) pair in
/// order and writes the cross-run report into the file's output directory.
pub fn run_experiment(file: &ExperimentFile) -> Result<Vec<RunOutcome>, RunError> {
    let configs = file.expand()?;
    let map = crate::lane_map::LaneMap::load(&file.map)?;
    let mut outcomes = Vec::with_capacity(configs.len());
    let mut entries = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let outcome = execute(cfg, &map)?;
        write_run(&outcome, cfg, &map)?;
        entries.push(RunEntry { dir: cfg.out.clone(), report: outcome.report.clone() });
        outcomes.push(outcome);
    }
    emit_report(&entries, &file.out)?;
    Ok(outcomes)
}
