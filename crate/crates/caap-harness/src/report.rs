//! Deterministic report emission.
//!
//! Every emitter writes plot-ready series with stable field order and
//! shortest-round-trip float formatting, so identical configs reproduce
//! byte-identical files and the JSON and CSV encodings of one report carry
//! identical numeric content.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use caap_core::adversary::{selection_bias_probe, OrderingReport};
use caap_core::cost::{catalog, scale_compute};
use caap_core::scenario::{arm_reference_hardware, vehicle_hardware};
use caap_core::Real;

use crate::metrics::{MetricsReport, SecurityReport, StabilityReport, SweepResult};

/// Output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub const BOTH: [ReportFormat; 2] = [ReportFormat::Csv, ReportFormat::Json];
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    fs::write(path, text)
}

fn write_lines(path: &Path, header: &str, rows: &[String]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    Ok(())
}

/// Emit the experiment metrics. CSV output is two tables: per-selector
/// aggregates (with the per-profile selection shares — the selection
/// comparison series) and the static per-profile latencies.
pub fn emit_metrics(
    report: &MetricsReport,
    format: ReportFormat,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = dir.join("metrics.json");
            write_json(report, &path)?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let path = dir.join("metrics.csv");
            let rows: Vec<String> = report
                .selectors
                .iter()
                .map(|s| {
                    format!(
                        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        s.kind.label(),
                        s.mean_latency_ms,
                        s.p95_latency_ms,
                        s.switches_per_60s,
                        s.selection_distribution[0],
                        s.selection_distribution[1],
                        s.selection_distribution[2],
                        s.selection_distribution[3],
                        s.mean_comm_kb,
                        s.mean_payload_kb,
                        s.urllc_within_20ms,
                        s.urllc_within_5ms,
                        s.decisions,
                    )
                })
                .collect();
            write_lines(
                &path,
                "selector,mean_latency_ms,p95_latency_ms,switches_per_60s,\
                 sel_kyber768,sel_dilithium3,sel_mceliece348864,sel_sphincsplus128s,\
                 mean_comm_kb,mean_payload_kb,urllc_within_20ms,urllc_within_5ms,decisions",
                &rows,
            )?;
            written.push(path);

            let path = dir.join("static_latency.csv");
            let rows: Vec<String> = report
                .static_profiles
                .iter()
                .map(|p| {
                    format!(
                        "{},{},{}",
                        p.profile.label(),
                        p.mean_latency_ms,
                        p.p95_latency_ms
                    )
                })
                .collect();
            write_lines(&path, "profile,mean_latency_ms,p95_latency_ms", &rows)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Emit the prediction-error sweep series (one row per ε grid point).
pub fn emit_sweep(
    sweep: &SweepResult,
    format: ReportFormat,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Json => {
            let path = dir.join("sweep.json");
            write_json(sweep, &path)?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let path = dir.join("sweep.csv");
            let rows: Vec<String> = sweep
                .points
                .iter()
                .map(|p| {
                    format!(
                        "{},{},{}",
                        p.epsilon, p.mean_switches_per_60s, p.mean_latency_ms
                    )
                })
                .collect();
            write_lines(
                &path,
                "epsilon,mean_switches_per_60s,mean_latency_ms",
                &rows,
            )?;
            Ok(vec![path])
        }
    }
}

/// Emit the security suite: the failure-mode outcome table plus the
/// scripted upgrade/downgrade outcome series.
pub fn emit_security(
    report: &SecurityReport,
    format: ReportFormat,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = dir.join("security.json");
            write_json(report, &path)?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let path = dir.join("attacks.csv");
            let rows: Vec<String> = report
                .outcomes
                .iter()
                .map(|o| {
                    format!(
                        "{},{},{},{},{},{},\"{}\"",
                        o.scenario,
                        o.seed,
                        o.detected,
                        o.proposer_version,
                        o.receiver_version,
                        o.version_regressed,
                        o.notes,
                    )
                })
                .collect();
            write_lines(
                &path,
                "scenario,seed,detected,proposer_version,receiver_version,version_regressed,notes",
                &rows,
            )?;
            written.push(path);

            let path = dir.join("script_outcomes.csv");
            let rows: Vec<String> = report
                .script_outcomes
                .iter()
                .enumerate()
                .map(|(k, o)| format!("{},{}", k + 1, o))
                .collect();
            write_lines(&path, "attempt,outcome", &rows)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Emit the per-step decision log of one representative run.
pub fn emit_decision_log(
    rows: &[crate::experiment::DecisionRow],
    format: ReportFormat,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Json => {
            let path = dir.join("decisions.json");
            write_json(&rows, &path)?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let path = dir.join("decisions.csv");
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{},{},{},{},{},{}",
                        r.timestamp_ms,
                        r.selector.label(),
                        r.selected.label(),
                        r.predicted_loss[0],
                        r.predicted_loss[1],
                        r.predicted_loss[2],
                        r.predicted_loss[3],
                        r.switched,
                        r.rl_mutation_multiplier
                            .map(|m| m.to_string())
                            .unwrap_or_default(),
                        r.rl_hysteresis.map(|h| h.to_string()).unwrap_or_default(),
                    )
                })
                .collect();
            write_lines(
                &path,
                "timestamp_ms,selector,selected,\
                 loss_kyber768,loss_dilithium3,loss_mceliece348864,loss_sphincsplus128s,\
                 switched,rl_mutation_multiplier,rl_hysteresis",
                &lines,
            )?;
            Ok(vec![path])
        }
    }
}

/// Emit the stability probe summary.
pub fn emit_stability(
    reports: &[StabilityReport],
    format: ReportFormat,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Json => {
            let path = dir.join("stability.json");
            write_json(&reports, &path)?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let path = dir.join("stability.csv");
            let rows: Vec<String> = reports
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{},{}",
                        r.epsilon,
                        r.lipschitz_estimate,
                        r.steps,
                        r.guarded_steps,
                        r.guarded_mismatches,
                        r.total_mismatches
                    )
                })
                .collect();
            write_lines(
                &path,
                "epsilon,lipschitz_estimate,steps,guarded_steps,guarded_mismatches,total_mismatches",
                &rows,
            )?;
            Ok(vec![path])
        }
    }
}

/// Calibration artifacts: the hardware-scaling series per profile and the
/// context-manipulation ordering probe.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub hardware_runtime: Vec<HardwareRuntimeRow>,
    pub ordering_probe: Vec<OrderingReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HardwareRuntimeRow {
    pub profile: String,
    pub runtime_ms_reference: Real,
    pub runtime_ms_vehicle: Real,
}

pub fn calibration_report(probe_grid: &[Real], probe_seeds: u64) -> CalibrationReport {
    let vehicle = vehicle_hardware::<Real>();
    let reference = arm_reference_hardware::<Real>();
    let hardware_runtime = catalog::<Real>()
        .iter()
        .map(|p| HardwareRuntimeRow {
            profile: p.id.label().to_string(),
            runtime_ms_reference: scale_compute(p, &reference).expect("valid hw").runtime_ms,
            runtime_ms_vehicle: scale_compute(p, &vehicle).expect("valid hw").runtime_ms,
        })
        .collect();
    CalibrationReport {
        hardware_runtime,
        ordering_probe: selection_bias_probe(probe_grid, probe_seeds),
    }
}

pub fn emit_calibration(
    report: &CalibrationReport,
    format: ReportFormat,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = dir.join("calibration.json");
            write_json(report, &path)?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let path = dir.join("hardware_runtime.csv");
            let rows: Vec<String> = report
                .hardware_runtime
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{}",
                        r.profile, r.runtime_ms_reference, r.runtime_ms_vehicle
                    )
                })
                .collect();
            write_lines(
                &path,
                "profile,runtime_ms_reference,runtime_ms_vehicle",
                &rows,
            )?;
            written.push(path);

            let path = dir.join("ordering_probe.csv");
            let rows: Vec<String> = report
                .ordering_probe
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{}",
                        r.magnitude,
                        r.preserved,
                        r.first_violation_seed
                            .map(|s| s.to_string())
                            .unwrap_or_default()
                    )
                })
                .collect();
            write_lines(&path, "magnitude,preserved,first_violation_seed", &rows)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::experiment::run_experiment;

    fn tiny_report() -> MetricsReport {
        let mut cfg = ExperimentConfig::standard(3);
        cfg.monte_carlo_runs = 1;
        cfg.trace.duration_s = 2.0;
        cfg.burst = None;
        cfg.lipschitz_samples = 200;
        cfg.selectors = vec![
            caap_core::optimizer::SelectorKind::ApmoeaRl,
            caap_core::optimizer::SelectorKind::StaticLattice,
        ];
        run_experiment(&cfg).unwrap()
    }

    #[test]
    fn emission_is_byte_deterministic() {
        let report = tiny_report();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for fmt in ReportFormat::BOTH {
            emit_metrics(&report, fmt, dir_a.path()).unwrap();
            emit_metrics(&report, fmt, dir_b.path()).unwrap();
        }
        for name in ["metrics.json", "metrics.csv", "static_latency.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn json_and_csv_agree_numerically() {
        let report = tiny_report();
        let dir = tempfile::tempdir().unwrap();
        for fmt in ReportFormat::BOTH {
            emit_metrics(&report, fmt, dir.path()).unwrap();
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap())
                .unwrap();
        let csv_text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        for (row, selector) in csv_text.lines().skip(1).zip(json["selectors"].as_array().unwrap())
        {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields[0], selector["kind"].as_str().unwrap());
            let mean_csv: f64 = fields[1].parse().unwrap();
            assert_eq!(mean_csv, selector["mean_latency_ms"].as_f64().unwrap());
            let switches_csv: f64 = fields[3].parse().unwrap();
            assert_eq!(switches_csv, selector["switches_per_60s"].as_f64().unwrap());
        }
    }

    #[test]
    fn sweep_emits_one_row_per_grid_point() {
        let sweep = SweepResult {
            master_seed: 1,
            monte_carlo_runs: 2,
            selector: caap_core::optimizer::SelectorKind::ApmoeaRl,
            points: vec![
                crate::metrics::SweepPoint {
                    epsilon: 0.0,
                    mean_switches_per_60s: 4.0,
                    mean_latency_ms: 5.0,
                },
                crate::metrics::SweepPoint {
                    epsilon: 0.1,
                    mean_switches_per_60s: 9.0,
                    mean_latency_ms: 5.2,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        emit_sweep(&sweep, ReportFormat::Csv, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + sweep.points.len());
    }

    #[test]
    fn calibration_report_carries_the_scaling_pairs() {
        let report = calibration_report(&[0.0, 0.26], 16);
        assert_eq!(report.hardware_runtime.len(), 4);
        let sphincs = report
            .hardware_runtime
            .iter()
            .find(|r| r.profile == "sphincsplus128s")
            .unwrap();
        assert_eq!(sphincs.runtime_ms_reference, 7.5);
        assert_eq!(sphincs.runtime_ms_vehicle, 11.25);
        assert!(report.ordering_probe.iter().all(|r| r.preserved));
    }
}
