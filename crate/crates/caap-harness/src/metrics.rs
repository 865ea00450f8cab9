//! Experiment metrics: per-selector aggregates, cross-selector comparisons,
//! sweep curves, and the security outcome table.

use serde::{Deserialize, Serialize};

use caap_core::adversary::AttackOutcome;
use caap_core::optimizer::SelectorKind;
use caap_core::ProfileId;
use caap_core::Real;

/// Aggregates of one selector over all Monte Carlo runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorMetrics {
    pub kind: SelectorKind,
    pub mean_latency_ms: Real,
    pub p95_latency_ms: Real,
    /// Raw switch count normalised to a 60 s window.
    pub switches_per_60s: Real,
    /// Share of decisions per catalog profile, in fixed profile order.
    /// Sums to one.
    pub selection_distribution: [Real; 4],
    /// Mean key-plus-payload overhead per decision (KB).
    pub mean_comm_kb: Real,
    /// Mean per-message payload per decision (KB); public keys amortise
    /// over a session, payloads ship every message.
    pub mean_payload_kb: Real,
    /// Fraction of decisions within the loose 20 ms URLLC budget.
    pub urllc_within_20ms: Real,
    /// Fraction of decisions meeting the strictest 5 ms budget.
    pub urllc_within_5ms: Real,
    pub decisions: u64,
    pub latency_samples: u64,
}

/// Static per-profile latency over the identical traces (selector-free).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticProfileLatency {
    pub profile: ProfileId,
    pub mean_latency_ms: Real,
    pub p95_latency_ms: Real,
}

/// Relative claims derived from the per-selector aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparisons {
    /// `1 - adaptive_mean / static_lattice_mean`, when both ran.
    pub latency_reduction_vs_static_lattice: Option<Real>,
    /// `switches(apmoea-rl) / switches(apmoea-no-rl)`, when both ran.
    pub switch_ratio_rl_vs_no_rl: Option<Real>,
    /// Payload-overhead saving of the adaptive selector against each static
    /// baseline: `1 - adaptive_payload / static_payload`.
    pub payload_saving_vs_static: Vec<(SelectorKind, Real)>,
    /// The static baseline whose payload saving lands closest to 65%.
    pub payload_saving_closest_to_65pct: Option<(SelectorKind, Real)>,
}

/// Full report of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub master_seed: u64,
    pub monte_carlo_runs: usize,
    pub duration_s: Real,
    pub epsilon: Real,
    /// Estimated loss Lipschitz constant over the workload region.
    pub lipschitz_estimate: Real,
    /// Hysteresis bonus handed to the learning selector.
    pub hysteresis_bonus: Real,
    pub decisions_per_run: usize,
    pub static_profiles: Vec<StaticProfileLatency>,
    pub selectors: Vec<SelectorMetrics>,
    pub comparisons: Comparisons,
}

impl MetricsReport {
    pub fn selector(&self, kind: SelectorKind) -> Option<&SelectorMetrics> {
        self.selectors.iter().find(|s| s.kind == kind)
    }

    pub fn static_profile(&self, profile: ProfileId) -> Option<&StaticProfileLatency> {
        self.static_profiles.iter().find(|p| p.profile == profile)
    }
}

/// One point of the prediction-error sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: Real,
    pub mean_switches_per_60s: Real,
    pub mean_latency_ms: Real,
}

/// Prediction-error sweep result; the grid is strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub master_seed: u64,
    pub monte_carlo_runs: usize,
    pub selector: SelectorKind,
    pub points: Vec<SweepPoint>,
}

/// Security-suite outcome: the failure-mode matrix plus the scripted
/// upgrade/downgrade sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub master_seed: u64,
    pub runs: usize,
    pub outcomes: Vec<AttackOutcome>,
    /// Outcome per scripted attempt: 1 accepted, 0 rejected.
    pub script_outcomes: Vec<u8>,
    pub attacks_detected: usize,
    pub attacks_total: usize,
    pub version_regressions: usize,
}

impl SecurityReport {
    pub fn all_detected(&self) -> bool {
        self.attacks_detected == self.attacks_total && self.version_regressions == 0
    }
}

/// Per-step record of the stability probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityStep {
    pub t_ms: i64,
    pub loss_gap: Real,
    pub guarded: bool,
    pub matched_oracle: bool,
}

/// Decision-stability probe: selector-vs-oracle agreement at one ε, with
/// the stability guard `K·ε < gap` evaluated per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub epsilon: Real,
    pub lipschitz_estimate: Real,
    pub steps: usize,
    pub guarded_steps: usize,
    pub guarded_mismatches: usize,
    pub total_mismatches: usize,
}

pub(crate) fn mean(values: &[Real]) -> Real {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<Real>() / values.len() as Real
}

pub(crate) fn percentile(values: &mut [Real], q: Real) -> Real {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite latency sample"));
    let rank = (q * values.len() as Real).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}
