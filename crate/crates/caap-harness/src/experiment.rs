//! Experiment execution: trace-driven simulation of every configured
//! selector over identical context sequences, the prediction-error sweep,
//! the security suite, and the decision-stability probe.
//!
//! Determinism contract: `(config, master_seed)` fixes every trace, every
//! injected error, every selector decision, and therefore every report
//! byte. Monte Carlo replications run in parallel but are reduced in run
//! order, so parallelism never changes results.

use rayon::prelude::*;

use caap_core::adversary::{run_attack_suite, run_upgrade_downgrade_script};
use caap_core::context::{synth_trace, ContextVector};
use caap_core::cost::{
    estimate_lipschitz_fn, min_pairwise_gap, profile, t_lat, ContextRegion,
};
use caap_core::optimizer::{
    composed_profile_losses, oracle_select_dynamic, SelectorKind, SelectorState,
};
use caap_core::predictor::{inject_error, PredictionErrorSpec, PredictorState};
use caap_core::scenario::apply_low_snr_burst;
use caap_core::{ProfileId, Real};

use crate::config::{ConfigError, ExperimentConfig, PredictionMode};
use crate::metrics::{
    mean, percentile, Comparisons, MetricsReport, SecurityReport, SelectorMetrics,
    StabilityReport, StaticProfileLatency, SweepPoint, SweepResult,
};

/// Experiment-level errors.
#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config invalid: {0}")]
    Config(#[from] ConfigError),
    #[error("context synthesis failed: {0}")]
    Context(#[from] caap_core::context::ContextError),
    #[error("cost model failed: {0}")]
    Cost(#[from] caap_core::cost::CostError),
    #[error("optimizer failed: {0}")]
    Optimizer(#[from] caap_core::optimizer::OptimizerError),
    #[error("prediction failed: {0}")]
    Predictor(#[from] caap_core::predictor::PredictError),
}

/// SplitMix-style seed derivation: decorrelates the per-run, per-stream,
/// per-step seeds drawn from one master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Synthesise the context sequence of one Monte Carlo run. Identical for
/// every selector, so comparisons are trace-for-trace fair.
pub fn build_trace(
    cfg: &ExperimentConfig,
    run: usize,
) -> Result<Vec<ContextVector>, ExperimentError> {
    let mut trace_cfg = cfg.trace;
    trace_cfg.rng_seed = derive_seed(cfg.master_seed, 1, run as u64);
    let mut trace = synth_trace(&trace_cfg)?;
    if let Some(burst) = &cfg.burst {
        apply_low_snr_burst(
            &mut trace,
            trace_cfg.drift.snr_db,
            trace_cfg.drift.per,
            (burst.start_s, burst.end_s),
            burst.target_snr_db,
            burst.target_per,
        );
    }
    Ok(trace)
}

/// Region spanned by the workload: the walk bounds, widened to cover any
/// burst excursion (urgency and timestamps from the initial vector).
fn workload_region(cfg: &ExperimentConfig) -> ContextRegion {
    let arr = cfg.trace.bounds.as_array();
    let mut lo = [
        arr[0].lo, arr[1].lo, arr[2].lo, arr[3].lo, arr[4].lo, arr[5].lo, arr[6].lo, arr[7].lo,
    ];
    let mut hi = [
        arr[0].hi, arr[1].hi, arr[2].hi, arr[3].hi, arr[4].hi, arr[5].hi, arr[6].hi, arr[7].hi,
    ];
    if let Some(burst) = &cfg.burst {
        lo[0] = lo[0].min(burst.target_snr_db);
        hi[0] = hi[0].max(burst.target_snr_db);
        lo[1] = lo[1].min(burst.target_per);
        hi[1] = hi[1].max(burst.target_per);
    }
    ContextRegion {
        lo: cfg.trace.initial.with_numeric_fields(lo),
        hi: cfg.trace.initial.with_numeric_fields(hi),
    }
}

/// Finite-difference Lipschitz estimate of the composed (dynamic-weight)
/// loss over the workload region.
pub fn estimate_workload_lipschitz(cfg: &ExperimentConfig) -> Result<Real, ExperimentError> {
    let region = workload_region(cfg);
    let base = cfg.optimizer.base_weights;
    let adjust = cfg.optimizer.adjust;
    let ch = cfg.channel;
    let hw = cfg.hardware;
    Ok(estimate_lipschitz_fn(
        |x| composed_profile_losses(x, &base, &adjust, &ch, &hw),
        &region,
        cfg.lipschitz_samples,
        derive_seed(cfg.master_seed, 2, 0),
    )?)
}

struct RunStats {
    latencies: Vec<Real>,
    switches: u64,
    selections: [u64; 4],
    comm_kb_sum: Real,
    payload_kb_sum: Real,
    front_violations: u64,
}

fn predicted_next(
    cfg: &ExperimentConfig,
    predictor: &mut PredictorState,
    x_t: &ContextVector,
    x_next: &ContextVector,
    run: usize,
    step: usize,
) -> Result<ContextVector, ExperimentError> {
    match cfg.prediction {
        PredictionMode::InjectedError => {
            let spec = PredictionErrorSpec::new(
                cfg.epsilon,
                derive_seed(cfg.master_seed, 3 + run as u64, step as u64),
            );
            Ok(inject_error(x_next, &spec))
        }
        PredictionMode::Filter => {
            predictor.observe(*x_t);
            Ok(predictor.predict()?)
        }
    }
}

fn simulate_selector_run(
    cfg: &ExperimentConfig,
    kind: SelectorKind,
    hysteresis_bonus: Real,
    run: usize,
) -> Result<RunStats, ExperimentError> {
    let trace = build_trace(cfg, run)?;
    let mut opt = cfg.optimizer;
    opt.rl.hysteresis_bonus = hysteresis_bonus;
    let seed = derive_seed(cfg.master_seed, 100 + kind as u64, run as u64);
    let mut selector = SelectorState::new(kind, &opt, seed)?;
    let mut predictor = PredictorState::with_params_unchecked(cfg.predictor);

    let decisions = trace.len().saturating_sub(1);
    let mut stats = RunStats {
        latencies: Vec::with_capacity(decisions),
        switches: 0,
        selections: [0; 4],
        comm_kb_sum: 0.0,
        payload_kb_sum: 0.0,
        front_violations: 0,
    };
    let apmoea = matches!(kind, SelectorKind::ApmoeaRl | SelectorKind::ApmoeaNoRl);
    for step in 0..decisions {
        let x_t = &trace[step];
        let x_next = &trace[step + 1];
        let x_hat = predicted_next(cfg, &mut predictor, x_t, x_next, run, step)?;
        let d = selector.decide(x_t, &x_hat, &cfg.channel, &cfg.hardware)?;
        let p = profile::<Real>(d.selected);
        stats
            .latencies
            .push(t_lat(&p, x_next, &cfg.channel, &cfg.hardware)?);
        stats.switches += u64::from(d.switched);
        stats.selections[d.selected.index()] += 1;
        stats.comm_kb_sum += p.s_comm_kb();
        stats.payload_kb_sum += p.payload_kb;
        if apmoea && !d.on_front[d.selected.index()] {
            stats.front_violations += 1;
        }
    }
    Ok(stats)
}

fn aggregate(
    kind: SelectorKind,
    runs: Vec<RunStats>,
    duration_s: Real,
) -> SelectorMetrics {
    let mut latencies: Vec<Real> = Vec::new();
    let mut switches = 0u64;
    let mut selections = [0u64; 4];
    let mut comm = 0.0;
    let mut payload = 0.0;
    let mut violations = 0u64;
    for r in &runs {
        latencies.extend_from_slice(&r.latencies);
        switches += r.switches;
        for (total, n) in selections.iter_mut().zip(r.selections) {
            *total += n;
        }
        comm += r.comm_kb_sum;
        payload += r.payload_kb_sum;
        violations += r.front_violations;
    }
    assert_eq!(violations, 0, "selector {kind:?} emitted a dominated decision");
    let decisions: u64 = selections.iter().sum();
    let mean_latency = mean(&latencies);
    let p95 = percentile(&mut latencies, 0.95);
    let within = |budget: Real| {
        if latencies.is_empty() {
            0.0
        } else {
            latencies.iter().filter(|l| **l <= budget).count() as Real / latencies.len() as Real
        }
    };
    let mut distribution = [0.0; 4];
    if decisions > 0 {
        for k in 0..4 {
            distribution[k] = selections[k] as Real / decisions as Real;
        }
    }
    SelectorMetrics {
        kind,
        mean_latency_ms: mean_latency,
        p95_latency_ms: p95,
        switches_per_60s: switches as Real / runs.len() as Real * 60.0 / duration_s,
        selection_distribution: distribution,
        mean_comm_kb: if decisions > 0 { comm / decisions as Real } else { 0.0 },
        mean_payload_kb: if decisions > 0 {
            payload / decisions as Real
        } else {
            0.0
        },
        urllc_within_20ms: within(20.0),
        urllc_within_5ms: within(5.0),
        decisions,
        latency_samples: decisions,
    }
}

/// Mean/p95 latency each static profile would see on the identical traces.
fn static_profile_latencies(
    cfg: &ExperimentConfig,
) -> Result<Vec<StaticProfileLatency>, ExperimentError> {
    let per_run: Result<Vec<[Vec<Real>; 4]>, ExperimentError> = (0..cfg.monte_carlo_runs)
        .into_par_iter()
        .map(|run| {
            let trace = build_trace(cfg, run)?;
            let mut samples: [Vec<Real>; 4] = Default::default();
            for x in &trace[1..] {
                for (k, p) in caap_core::catalog::<Real>().iter().enumerate() {
                    samples[k].push(t_lat(p, x, &cfg.channel, &cfg.hardware)?);
                }
            }
            Ok(samples)
        })
        .collect();
    let per_run = per_run?;
    let mut out = Vec::with_capacity(4);
    for (k, id) in ProfileId::ALL.iter().enumerate() {
        let mut all: Vec<Real> = per_run.iter().flat_map(|r| r[k].iter().copied()).collect();
        out.push(StaticProfileLatency {
            profile: *id,
            mean_latency_ms: mean(&all),
            p95_latency_ms: percentile(&mut all, 0.95),
        });
    }
    Ok(out)
}

fn comparisons(selectors: &[SelectorMetrics]) -> Comparisons {
    let get = |k: SelectorKind| selectors.iter().find(|s| s.kind == k);
    let adaptive = get(SelectorKind::ApmoeaRl);
    let latency_reduction_vs_static_lattice = match (adaptive, get(SelectorKind::StaticLattice)) {
        (Some(a), Some(s)) if s.mean_latency_ms > 0.0 => {
            Some(1.0 - a.mean_latency_ms / s.mean_latency_ms)
        }
        _ => None,
    };
    let switch_ratio_rl_vs_no_rl = match (adaptive, get(SelectorKind::ApmoeaNoRl)) {
        (Some(a), Some(b)) if b.switches_per_60s > 0.0 => {
            Some(a.switches_per_60s / b.switches_per_60s)
        }
        _ => None,
    };
    let mut payload_saving_vs_static = Vec::new();
    if let Some(a) = adaptive {
        for kind in [
            SelectorKind::StaticLattice,
            SelectorKind::StaticCode,
            SelectorKind::StaticHash,
        ] {
            if let Some(s) = get(kind) {
                if s.mean_payload_kb > 0.0 {
                    payload_saving_vs_static
                        .push((kind, 1.0 - a.mean_payload_kb / s.mean_payload_kb));
                }
            }
        }
    }
    let payload_saving_closest_to_65pct = payload_saving_vs_static
        .iter()
        .copied()
        .min_by(|a, b| {
            (a.1 - 0.65)
                .abs()
                .partial_cmp(&(b.1 - 0.65).abs())
                .expect("finite savings")
        });
    Comparisons {
        latency_reduction_vs_static_lattice,
        switch_ratio_rl_vs_no_rl,
        payload_saving_vs_static,
        payload_saving_closest_to_65pct,
    }
}

/// Run every configured selector over the identical Monte Carlo traces and
/// aggregate the metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport, ExperimentError> {
    cfg.validate()?;
    let k_hat = estimate_workload_lipschitz(cfg)?;
    let hysteresis_bonus = cfg.hysteresis_scale * k_hat * cfg.epsilon;
    let decisions_per_run = cfg.trace.steps().saturating_sub(1);

    let mut selectors = Vec::with_capacity(cfg.selectors.len());
    for &kind in &cfg.selectors {
        let runs: Result<Vec<RunStats>, ExperimentError> = (0..cfg.monte_carlo_runs)
            .into_par_iter()
            .map(|run| simulate_selector_run(cfg, kind, hysteresis_bonus, run))
            .collect();
        selectors.push(aggregate(kind, runs?, cfg.trace.duration_s));
    }
    let static_profiles = static_profile_latencies(cfg)?;
    let comparisons = comparisons(&selectors);
    Ok(MetricsReport {
        master_seed: cfg.master_seed,
        monte_carlo_runs: cfg.monte_carlo_runs,
        duration_s: cfg.trace.duration_s,
        epsilon: cfg.epsilon,
        lipschitz_estimate: k_hat,
        hysteresis_bonus,
        decisions_per_run,
        static_profiles,
        selectors,
        comparisons,
    })
}

/// Mean switching rate of the adaptive selector per prediction-error level.
pub fn sweep_prediction_error(
    cfg: &ExperimentConfig,
    grid: &[Real],
) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(ExperimentError::Config(ConfigError {
            path: "eps_grid".into(),
            message: "sweep grid must contain at least one point".into(),
        }));
    }
    let k_hat = estimate_workload_lipschitz(cfg)?;
    let mut points = Vec::with_capacity(grid.len());
    for &eps in grid {
        let mut point_cfg = cfg.clone();
        point_cfg.epsilon = eps;
        let bonus = cfg.hysteresis_scale * k_hat * eps;
        let runs: Result<Vec<RunStats>, ExperimentError> = (0..cfg.monte_carlo_runs)
            .into_par_iter()
            .map(|run| simulate_selector_run(&point_cfg, SelectorKind::ApmoeaRl, bonus, run))
            .collect();
        let agg = aggregate(SelectorKind::ApmoeaRl, runs?, cfg.trace.duration_s);
        points.push(SweepPoint {
            epsilon: eps,
            mean_switches_per_60s: agg.switches_per_60s,
            mean_latency_ms: agg.mean_latency_ms,
        });
    }
    Ok(SweepResult {
        master_seed: cfg.master_seed,
        monte_carlo_runs: cfg.monte_carlo_runs,
        selector: SelectorKind::ApmoeaRl,
        points,
    })
}

/// The configured attack matrix plus the scripted upgrade/downgrade
/// sequence.
pub fn run_security_suite(cfg: &ExperimentConfig) -> Result<SecurityReport, ExperimentError> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.security_seeds)
        .map(|k| derive_seed(cfg.master_seed, 4, k))
        .collect();
    let outcomes = run_attack_suite(&cfg.attack_scenarios, &seeds);
    let attacks_total = outcomes.len();
    let attacks_detected = outcomes.iter().filter(|o| o.detected).count();
    let version_regressions = outcomes.iter().filter(|o| o.version_regressed).count();
    let script_outcomes = run_upgrade_downgrade_script(derive_seed(cfg.master_seed, 5, 0));
    Ok(SecurityReport {
        master_seed: cfg.master_seed,
        runs: attacks_total,
        outcomes,
        script_outcomes,
        attacks_detected,
        attacks_total,
        version_regressions,
    })
}

/// One row of the per-step decision log.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecisionRow {
    pub timestamp_ms: i64,
    pub selector: SelectorKind,
    pub selected: ProfileId,
    /// Predicted loss per catalog profile, in fixed profile order.
    pub predicted_loss: [Real; 4],
    pub switched: bool,
    pub rl_mutation_multiplier: Option<Real>,
    pub rl_hysteresis: Option<bool>,
}

/// Replay one selector over one run's trace and log every decision.
pub fn trace_decisions(
    cfg: &ExperimentConfig,
    kind: SelectorKind,
    run: usize,
) -> Result<Vec<DecisionRow>, ExperimentError> {
    cfg.validate()?;
    let k_hat = estimate_workload_lipschitz(cfg)?;
    let mut opt = cfg.optimizer;
    opt.rl.hysteresis_bonus = cfg.hysteresis_scale * k_hat * cfg.epsilon;
    let seed = derive_seed(cfg.master_seed, 100 + kind as u64, run as u64);
    let mut selector = SelectorState::new(kind, &opt, seed)?;
    let mut predictor = PredictorState::with_params_unchecked(cfg.predictor);
    let trace = build_trace(cfg, run)?;
    let mut rows = Vec::with_capacity(trace.len().saturating_sub(1));
    for step in 0..trace.len().saturating_sub(1) {
        let x_t = &trace[step];
        let x_next = &trace[step + 1];
        let x_hat = predicted_next(cfg, &mut predictor, x_t, x_next, run, step)?;
        let d = selector.decide(x_t, &x_hat, &cfg.channel, &cfg.hardware)?;
        rows.push(DecisionRow {
            timestamp_ms: x_t.timestamp_ms,
            selector: kind,
            selected: d.selected,
            predicted_loss: d.predicted_loss,
            switched: d.switched,
            rl_mutation_multiplier: d.rl_action.map(|a| a.mutation_multiplier::<Real>()),
            rl_hysteresis: d.rl_action.map(|a| a.hysteresis),
        });
    }
    Ok(rows)
}

/// Decision-stability probe at one prediction-error level: per step of one
/// seeded trace, evaluate the stability guard `K·ε < loss gap` at the true
/// next context and compare the selector's choice against the oracle's.
pub fn run_stability_probe(
    cfg: &ExperimentConfig,
    epsilon: Real,
) -> Result<StabilityReport, ExperimentError> {
    cfg.validate()?;
    let k_hat = estimate_workload_lipschitz(cfg)?;
    let bonus = cfg.hysteresis_scale * k_hat * epsilon;
    let mut opt = cfg.optimizer;
    opt.rl.hysteresis_bonus = bonus;
    let mut selector = SelectorState::new(
        SelectorKind::ApmoeaRl,
        &opt,
        derive_seed(cfg.master_seed, 6, 0),
    )?;
    let trace = build_trace(cfg, 0)?;
    let base = cfg.optimizer.base_weights;
    let adjust = cfg.optimizer.adjust;

    let mut steps = 0usize;
    let mut guarded_steps = 0usize;
    let mut guarded_mismatches = 0usize;
    let mut total_mismatches = 0usize;
    for (step, pair) in trace.windows(2).enumerate() {
        let (x_t, x_next) = (&pair[0], &pair[1]);
        let spec = PredictionErrorSpec::new(
            epsilon,
            derive_seed(cfg.master_seed, 3, step as u64),
        );
        let x_hat = inject_error(x_next, &spec);
        let d = selector.decide(x_t, &x_hat, &cfg.channel, &cfg.hardware)?;
        let losses = composed_profile_losses(x_next, &base, &adjust, &cfg.channel, &cfg.hardware)?;
        let gap = min_pairwise_gap(&losses);
        let oracle = oracle_select_dynamic(x_next, &base, &adjust, &cfg.channel, &cfg.hardware)?;
        let matched = d.selected == oracle;
        let guarded = k_hat * epsilon < gap;
        steps += 1;
        if guarded {
            guarded_steps += 1;
            guarded_mismatches += usize::from(!matched);
        }
        total_mismatches += usize::from(!matched);
    }
    Ok(StabilityReport {
        epsilon,
        lipschitz_estimate: k_hat,
        steps,
        guarded_steps,
        guarded_mismatches,
        total_mismatches,
    })
}
