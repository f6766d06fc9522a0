//! Experiment grids, improvement summaries and report output.

pub mod fixtures;
mod grid;
mod suite;

pub use grid::{
    emit_report, improvement_summary, natural_cmp, plot_data, render_report, round_tenth,
    GridCell, GridKey, GridMetadata, GridSlice, ReportFormat, ResultsGrid, ShiftDelta,
};
pub use suite::{
    run_and_write, run_shift_suite, AugmentConfig, ExperimentConfig, PredictionSource,
    ScenarioOutcome, SuiteOutcome, DEFAULT_BASELINE_SPLIT, DEFAULT_TREATED_SPLIT,
};
