//! Experiment orchestration: per-seed data, (method, seed) cells run in
//! parallel, evaluation on fresh target samples, the aggregated report and
//! plot-ready CSV files.

mod config;
mod plots;
mod report;
mod run;

pub use config::ExperimentConfig;
pub use plots::{
    curve_csv, emit_plots, importance_csv, stats_csv, CURVE_HEADER, CURVE_POINTS, GRID_POINTS, IMPORTANCE_HEADER,
    STATS_HEADER,
};
pub use report::{
    aggregate, check_report, evaluate_nll, CellResult, ImportanceRecovery, MethodSummary, RunReport, Violation,
    BASELINE_FLOOR, JIADA_CEILING, JIADA_MARGIN, TARGET_ONLY_BAND,
};
pub use run::{fit_importance_k, recovery, run_experiment, seed_data, Cell, ExperimentOutput, SeedData};
