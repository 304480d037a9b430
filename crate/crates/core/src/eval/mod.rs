//! Accuracy metrics, paired t-tests, the persistence baseline and the three
//! experiment runners.

mod experiments;
mod metrics;
mod output;

pub use metrics::{
    abs_diff_stats, ci95, incomplete_beta, mae, paired_ttest, rmse, student_t_quantile, student_t_two_tail,
    TTestResult,
};
pub use experiments::{
    arch_name, extrapolation_scenario, method_name, pooled_rmse, quarter_seasons, run_experiment1, run_experiment2,
    run_experiment3, AbsDiffRow, AccuracyRow, AccuracyTable, Experiment1Output, Experiment2Output, Experiment3Output,
    ExperimentConfig, PlotPoint, ScenarioReport, ScenarioRow, Season, TTestRow, EXPERIMENT2_METHODS, PERSISTENCE,
    REAL, TSF,
};
pub use output::{
    write_absdiff_csv, write_accuracy_csv, write_points_csv, write_scenario_csv, write_scenario_points_csv,
    write_ttests_csv, ABSDIFF_CSV, ABSDIFF_HEADER, POINTS_CSV, POINTS_HEADER, RESULTS_CSV, RESULTS_HEADER,
    SCENARIO_CSV, SCENARIO_HEADER, SCENARIO_POINTS_CSV, SCENARIO_POINTS_HEADER, STAGE1_RESULTS_CSV, TTESTS_CSV,
    TTESTS_HEADER,
};

use crate::ensemble::EnsembleError;
use crate::pipeline::PipelineError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("differences have zero variance; t statistic undefined")]
    ZeroVariance,
    #[error("origin {origin} + horizon {horizon} is outside the series of length {len}")]
    Origin { origin: usize, horizon: usize, len: usize },
    #[error("experiment config: {0}")]
    Config(String),
    #[error("extrapolation scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("stage 2: {0}")]
    Ensemble(#[from] EnsembleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `Ŷ(t+h) = Y(t)` for each origin `t`.
pub fn persistence_forecast(power: &[f64], origins: &[usize], horizon: usize) -> Result<Vec<f64>, EvalError> {
    origins
        .iter()
        .map(|&t| {
            if t + horizon >= power.len() {
                Err(EvalError::Origin {
                    origin: t,
                    horizon,
                    len: power.len(),
                })
            } else {
                Ok(power[t])
            }
        })
        .collect()
}
