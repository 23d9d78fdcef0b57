//! Experiment driver: trains the 2x2 {haptic, recovery} condition grid on
//! paired evaluation seeds, sweeps object variants for generalization, and
//! renders machine- and human-readable reports.

pub mod config_file;
mod experiment;
mod report;
mod seeds;

pub use experiment::{
    default_variants, run_generalization, run_grid, ConditionSpec, EvalSettings, GridOptions,
    GridOutcome, ObjectVariant, ResultRow, ResultsTable,
};
pub use report::{emit_report, render_report, write_force_trace_csv, write_results_csv, ReportInputs};
pub use seeds::{mix, SeedPlan};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Data(#[from] hiact_demonstrator::DataError),

    #[error(transparent)]
    Policy(#[from] hiact_policy::PolicyError),

    #[error(transparent)]
    Env(#[from] hiact_sim_env::EnvError),

    #[error(transparent)]
    Control(#[from] hiact_controller::ControlError),
}

impl HarnessError {
    /// Process exit code per error class.
    pub fn category(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Data(_) => 4,
            HarnessError::Policy(_) => 5,
            HarnessError::Env(_) | HarnessError::Control(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}
