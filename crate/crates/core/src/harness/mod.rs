//! Config-driven Monte Carlo experiments, frequency sweeps and result files.

mod config;
mod output;
mod run;
pub mod seeds;

pub use config::{
    load_config, parse_config, Algorithm, AtfBackend, ExperimentConfig, StepSize, SystemField,
    SystemSpec,
};
pub use output::{
    fmt_num, read_learning_curves, read_sweep, write_results, LearningCurveRecord, SweepRecord,
    COMPLEXITY, LEARNING_CURVES, PROVENANCE, SWEEP,
};
pub use run::{
    complexity_report, frequency_sweep, monte_carlo_at, run_monte_carlo, run_single,
    steady_state_window, ComplexityRow, CurveStats, DivergenceRecord, Experiment, FrequencyResult,
    FrequencySetup, LearningCurve, Provenance, ResultSet, RunOutput, Series, SeriesOutcome,
    StepSizeRecord, SweepRow, Trajectory, CENTRALIZED,
};
