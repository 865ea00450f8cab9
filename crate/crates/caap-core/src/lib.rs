//! Core library for context-aware adaptive post-quantum cryptography (CAAP)
//! orchestration in vehicular networks.
//!
//! The crate is organised around the adaptation loop:
//!
//! * [`context`] — time-indexed context vectors (channel, mobility, load,
//!   urgency), synthetic bounded-drift traces, CSV ingest, adversarial
//!   perturbation, and the canonical context digest both endpoints hash.
//! * [`predictor`] — short-horizon forecasting (EWMA level + trend) and
//!   controlled prediction-error injection for stability experiments.
//! * [`cost`] — the four-profile PQC catalog, hardware scaling, the
//!   SNR/PER-driven network-delay model, objective vectors, and the
//!   scalarised weighted loss.
//! * [`optimizer`] — the adaptive predictive multi-objective evolutionary
//!   selector (APMOEA) with tabular Q-learning stabilisation, the oracle
//!   selector, and the static / NSGA-II / RL-only baselines.
//! * [`protocol`] — the two-endpoint monotonic version-upgrade state machine
//!   with nonce freshness, context binding, and two-phase confirmation.
//! * [`adversary`] — scripted channel and context attacks plus the
//!   failure-mode outcome tabulation.
//! * [`scenario`] — the calibrated nominal operating point and the standard
//!   heterogeneous workload every relative claim is measured on.
//!
//! All numeric kernels are generic over a [`scalar::Scalar`] (any `f32`/`f64`
//! style float); concrete aliases at the crate root fix [`Real`] = `f64`,
//! which is what the simulator and all acceptance figures use.

pub mod adversary;
pub mod context;
pub mod cost;
pub mod optimizer;
pub mod predictor;
pub mod protocol;
pub mod scalar;
pub mod scenario;

/// Scalar type used by the concrete simulator stack.
pub type Real = f64;

pub use context::{
    context_hash, ingest_trace, normalized_distance, perturb_context, synth_trace,
    write_trace_csv, ContextDigest, ContextRanges, ContextVector, DriftBounds, TraceConfig,
    Urgency,
};
pub use cost::{
    catalog, estimate_lipschitz, loss_gap, objectives, scale_compute, t_lat, t_net, weighted_loss,
    ChannelModelConfig, ContextRegion, HardwareProfile, ObjectiveVector, PqcProfile, ProfileId,
    WeightVector,
};
pub use optimizer::{
    dynamic_weights, oracle_select, ApmoeaState, BaselineKind, OptimizerConfig, SelectorDecision,
    SelectorKind, SelectorState,
};
pub use predictor::{inject_error, PredictionErrorSpec, PredictorParams, PredictorState};
pub use scalar::Scalar;
