//! Experiment harness for the adaptive PQC selection stack: reproducible
//! trace-driven experiments, prediction-error sweeps, the protocol security
//! suite, and deterministic report emission.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod report;

pub use config::{BurstConfig, ConfigError, ExperimentConfig, PredictionMode};
pub use experiment::{
    build_trace, derive_seed, estimate_workload_lipschitz, run_experiment, run_security_suite,
    run_stability_probe, sweep_prediction_error, trace_decisions, DecisionRow, ExperimentError,
};
pub use metrics::{
    MetricsReport, SecurityReport, SelectorMetrics, StabilityReport, StaticProfileLatency,
    SweepPoint, SweepResult,
};
pub use report::{
    calibration_report, emit_calibration, emit_decision_log, emit_metrics, emit_security,
    emit_stability, emit_sweep, CalibrationReport, ReportFormat,
};
