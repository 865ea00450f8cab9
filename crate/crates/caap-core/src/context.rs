//! Context sensing: time-indexed operating-condition vectors, bounded-drift
//! trace synthesis, CSV ingest, adversarial perturbation, and the canonical
//! context digest used to bind protocol transitions to an operating point.
//!
//! # Norm and ranges
//!
//! Perturbation magnitudes, prediction-error bounds, and Lipschitz estimates
//! all use one declared norm: the L∞ distance over the numeric fields after
//! min-max normalisation by the physical [`ContextRanges`]. A distance of
//! `0.1` therefore means "no field moved by more than 10% of its physical
//! span".
//!
//! # Digest canonicalisation
//!
//! Two endpoints must compute bit-identical digests from independently
//! sampled views of the same context. [`context_hash`] therefore quantises
//! every real field to a fixed-point grid of [`HASH_FIXED_POINT_SCALE`]
//! (four decimal digits) and buckets the timestamp to
//! [`HASH_TIME_BUCKET_MS`] before hashing, and serialises fields in the
//! declared order with big-endian encoding.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::{clamp, Scalar};
use crate::Real;

/// Number of real-valued context fields (everything except timestamp and
/// urgency class).
pub const NUMERIC_FIELD_COUNT: usize = 8;

/// Declared names of the numeric fields, in canonical order.
pub const NUMERIC_FIELD_NAMES: [&str; NUMERIC_FIELD_COUNT] = [
    "snr_db",
    "per",
    "speed_mps",
    "accel_mps2",
    "connectivity_horizon_s",
    "cpu_load",
    "visibility_m",
    "ambient_temp_c",
];

/// Fixed-point scale for digest canonicalisation: reals are rounded to
/// `1/10_000` before hashing.
pub const HASH_FIXED_POINT_SCALE: f64 = 1e4;

/// Timestamps are bucketed to this interval before hashing so endpoints that
/// sample within the same decision window agree on the digest.
pub const HASH_TIME_BUCKET_MS: i64 = 50;

/// Length in bytes of a [`ContextDigest`].
pub const DIGEST_LEN: usize = 32;

/// Message urgency class carried in the context vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Urgency {
    Safety,
    Control,
    Telemetry,
}

impl Urgency {
    pub const ALL: [Urgency; 3] = [Urgency::Safety, Urgency::Control, Urgency::Telemetry];

    /// Urgency weight: safety outranks control outranks telemetry.
    pub fn weight<S: Scalar>(self) -> S {
        S::from_real(match self {
            Urgency::Safety => 1.0,
            Urgency::Control => 0.5,
            Urgency::Telemetry => 0.2,
        })
    }

    fn tag(self) -> u8 {
        match self {
            Urgency::Safety => 0,
            Urgency::Control => 1,
            Urgency::Telemetry => 2,
        }
    }
}

/// One time-indexed snapshot of the vehicle's operating conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextVector<S = Real> {
    pub timestamp_ms: i64,
    pub snr_db: S,
    /// Packet error rate, in `[0, 1]`.
    pub per: S,
    pub speed_mps: S,
    pub accel_mps2: S,
    /// Expected remaining link lifetime, strictly positive.
    pub connectivity_horizon_s: S,
    pub urgency: Urgency,
    /// Fraction of compute budget already consumed, in `[0, 1]`.
    pub cpu_load: S,
    pub visibility_m: S,
    pub ambient_temp_c: S,
}

impl<S: Scalar> ContextVector<S> {
    /// Numeric fields in canonical order (see [`NUMERIC_FIELD_NAMES`]).
    pub fn numeric_fields(&self) -> [S; NUMERIC_FIELD_COUNT] {
        [
            self.snr_db,
            self.per,
            self.speed_mps,
            self.accel_mps2,
            self.connectivity_horizon_s,
            self.cpu_load,
            self.visibility_m,
            self.ambient_temp_c,
        ]
    }

    /// Copy of `self` with the numeric fields replaced, in canonical order.
    pub fn with_numeric_fields(&self, fields: [S; NUMERIC_FIELD_COUNT]) -> Self {
        Self {
            timestamp_ms: self.timestamp_ms,
            snr_db: fields[0],
            per: fields[1],
            speed_mps: fields[2],
            accel_mps2: fields[3],
            connectivity_horizon_s: fields[4],
            urgency: self.urgency,
            cpu_load: fields[5],
            visibility_m: fields[6],
            ambient_temp_c: fields[7],
        }
    }

    /// Check the per-field invariants.
    pub fn validate(&self) -> Result<(), ContextError> {
        for (name, v) in NUMERIC_FIELD_NAMES.iter().zip(self.numeric_fields()) {
            if !v.is_finite() {
                return Err(ContextError::NonFinite { field: name });
            }
        }
        let zero = S::zero();
        let one = S::one();
        if self.per < zero || self.per > one {
            return Err(ContextError::OutOfRange {
                field: "per",
                value: self.per.to_real(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        if self.cpu_load < zero || self.cpu_load > one {
            return Err(ContextError::OutOfRange {
                field: "cpu_load",
                value: self.cpu_load.to_real(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        if self.speed_mps < zero {
            return Err(ContextError::Negative {
                field: "speed_mps",
                value: self.speed_mps.to_real(),
            });
        }
        if self.visibility_m < zero {
            return Err(ContextError::Negative {
                field: "visibility_m",
                value: self.visibility_m.to_real(),
            });
        }
        if self.connectivity_horizon_s <= zero {
            return Err(ContextError::NonPositive {
                field: "connectivity_horizon_s",
                value: self.connectivity_horizon_s.to_real(),
            });
        }
        Ok(())
    }
}

/// Inclusive interval for one numeric field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRange<S = Real> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> FieldRange<S> {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo: S::from_real(lo),
            hi: S::from_real(hi),
        }
    }

    pub fn span(&self) -> S {
        self.hi - self.lo
    }

    pub fn contains(&self, v: S) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Physical limits per numeric field. These double as the normalisation
/// spans of the declared L∞ norm and as the reflecting walls of the
/// synthetic drift model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextRanges<S = Real> {
    pub snr_db: FieldRange<S>,
    pub per: FieldRange<S>,
    pub speed_mps: FieldRange<S>,
    pub accel_mps2: FieldRange<S>,
    pub connectivity_horizon_s: FieldRange<S>,
    pub cpu_load: FieldRange<S>,
    pub visibility_m: FieldRange<S>,
    pub ambient_temp_c: FieldRange<S>,
}

impl<S: Scalar> Default for ContextRanges<S> {
    fn default() -> Self {
        Self {
            snr_db: FieldRange::new(-10.0, 40.0),
            per: FieldRange::new(0.0, 1.0),
            speed_mps: FieldRange::new(0.0, 70.0),
            accel_mps2: FieldRange::new(-10.0, 10.0),
            connectivity_horizon_s: FieldRange::new(0.05, 30.0),
            cpu_load: FieldRange::new(0.0, 1.0),
            visibility_m: FieldRange::new(0.0, 10_000.0),
            ambient_temp_c: FieldRange::new(-40.0, 60.0),
        }
    }
}

impl<S: Scalar> ContextRanges<S> {
    pub fn as_array(&self) -> [FieldRange<S>; NUMERIC_FIELD_COUNT] {
        [
            self.snr_db,
            self.per,
            self.speed_mps,
            self.accel_mps2,
            self.connectivity_horizon_s,
            self.cpu_load,
            self.visibility_m,
            self.ambient_temp_c,
        ]
    }

    pub fn validate(&self) -> Result<(), ContextError> {
        for (name, r) in NUMERIC_FIELD_NAMES.iter().zip(self.as_array()) {
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo >= r.hi {
                return Err(ContextError::BadRange {
                    field: name,
                    lo: r.lo.to_real(),
                    hi: r.hi.to_real(),
                });
            }
        }
        Ok(())
    }
}

/// L∞ distance between two contexts over min-max–normalised numeric fields.
///
/// Timestamp and urgency are excluded. This is the norm every ε bound in the
/// crate is stated in.
pub fn normalized_distance<S: Scalar>(
    a: &ContextVector<S>,
    b: &ContextVector<S>,
    ranges: &ContextRanges<S>,
) -> S {
    let mut worst = S::zero();
    for ((fa, fb), r) in a
        .numeric_fields()
        .iter()
        .zip(b.numeric_fields())
        .zip(ranges.as_array())
    {
        let d = (*fa - fb).abs() / r.span();
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// Per-step drift caps for the bounded random walk, plus the probability of
/// the urgency class being redrawn on a given step. All zero means a frozen
/// trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftBounds<S = Real> {
    pub snr_db: S,
    pub per: S,
    pub speed_mps: S,
    pub accel_mps2: S,
    pub connectivity_horizon_s: S,
    pub cpu_load: S,
    pub visibility_m: S,
    pub ambient_temp_c: S,
    pub urgency_switch_prob: S,
}

impl<S: Scalar> DriftBounds<S> {
    pub fn zero() -> Self {
        let z = S::zero();
        Self {
            snr_db: z,
            per: z,
            speed_mps: z,
            accel_mps2: z,
            connectivity_horizon_s: z,
            cpu_load: z,
            visibility_m: z,
            ambient_temp_c: z,
            urgency_switch_prob: z,
        }
    }

    pub fn as_array(&self) -> [S; NUMERIC_FIELD_COUNT] {
        [
            self.snr_db,
            self.per,
            self.speed_mps,
            self.accel_mps2,
            self.connectivity_horizon_s,
            self.cpu_load,
            self.visibility_m,
            self.ambient_temp_c,
        ]
    }

    pub fn validate(&self) -> Result<(), ContextError> {
        for (name, b) in NUMERIC_FIELD_NAMES.iter().zip(self.as_array()) {
            if !b.is_finite() || b < S::zero() {
                return Err(ContextError::BadDriftBound {
                    field: name,
                    value: b.to_real(),
                });
            }
        }
        let p = self.urgency_switch_prob;
        if !p.is_finite() || p < S::zero() || p > S::one() {
            return Err(ContextError::BadDriftBound {
                field: "urgency_switch_prob",
                value: p.to_real(),
            });
        }
        Ok(())
    }

    /// Largest per-step move in the normalised L∞ norm: the testable form of
    /// the bounded-drift assumption.
    pub fn normalized_step(&self, ranges: &ContextRanges<S>) -> S {
        let mut worst = S::zero();
        for (b, r) in self.as_array().iter().zip(ranges.as_array()) {
            let d = *b / r.span();
            if d > worst {
                worst = d;
            }
        }
        worst
    }
}

/// Configuration of the synthetic trace generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig<S = Real> {
    pub duration_s: S,
    /// Context update cadence; the sensing loop runs every 20–50 ms.
    pub step_ms: u32,
    pub initial: ContextVector<S>,
    pub drift: DriftBounds<S>,
    /// Probabilities of (safety, control, telemetry) when the urgency class
    /// is redrawn. Normalised internally; must not be all zero.
    pub urgency_mix: [S; 3],
    /// Reflecting walls of the random walk. Defaults to the physical ranges;
    /// a workload may narrow them to shape the operating regime.
    pub bounds: ContextRanges<S>,
    pub rng_seed: u64,
}

impl<S: Scalar> TraceConfig<S> {
    pub fn validate(&self) -> Result<(), ContextError> {
        if !(self.duration_s.is_finite() && self.duration_s > S::zero()) {
            return Err(ContextError::BadConfig {
                what: "duration_s must be positive",
            });
        }
        if !(20..=50).contains(&self.step_ms) {
            return Err(ContextError::BadConfig {
                what: "step_ms must lie in the 20..=50 ms sensing band",
            });
        }
        self.drift.validate()?;
        self.bounds.validate()?;
        self.initial.validate()?;
        for (f, r) in self
            .initial
            .numeric_fields()
            .iter()
            .zip(self.bounds.as_array())
        {
            if !r.contains(*f) {
                return Err(ContextError::BadConfig {
                    what: "initial vector lies outside the configured bounds",
                });
            }
        }
        let mut sum = S::zero();
        for p in self.urgency_mix {
            if !p.is_finite() || p < S::zero() {
                return Err(ContextError::BadConfig {
                    what: "urgency_mix entries must be non-negative",
                });
            }
            sum = sum + p;
        }
        if sum <= S::zero() {
            return Err(ContextError::BadConfig {
                what: "urgency_mix must have positive mass",
            });
        }
        // A drift step larger than the wall span would need more than one
        // reflection; reject it rather than iterate.
        for (b, r) in self.drift.as_array().iter().zip(self.bounds.as_array()) {
            if *b > r.span() {
                return Err(ContextError::BadConfig {
                    what: "drift bound exceeds the configured field span",
                });
            }
        }
        Ok(())
    }

    /// Number of samples the trace will contain.
    pub fn steps(&self) -> usize {
        let dur_ms = self.duration_s.to_real() * 1000.0;
        ((dur_ms / self.step_ms as f64).ceil() as usize).max(1)
    }
}

/// Errors from context construction, validation, and trace synthesis.
#[derive(Debug, Error)]
pub enum ContextError {
    #[error("field {field} is not finite")]
    NonFinite { field: &'static str },
    #[error("field {field} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("field {field} = {value} must be non-negative")]
    Negative { field: &'static str, value: f64 },
    #[error("field {field} = {value} must be positive")]
    NonPositive { field: &'static str, value: f64 },
    #[error("range for {field} invalid: [{lo}, {hi}]")]
    BadRange {
        field: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("drift bound for {field} = {value} invalid")]
    BadDriftBound { field: &'static str, value: f64 },
    #[error("invalid trace config: {what}")]
    BadConfig { what: &'static str },
}

/// Reflect `v` into `[lo, hi]`; caller guarantees the overshoot is at most
/// one span, which keeps `|reflect(v + d) - v| <= |d|`.
fn reflect<S: Scalar>(v: S, lo: S, hi: S) -> S {
    let two = S::from_real(2.0);
    let mut v = v;
    if v > hi {
        v = two * hi - v;
    }
    if v < lo {
        v = two * lo - v;
    }
    clamp(v, lo, hi)
}

fn draw_urgency<S: Scalar>(mix: &[S; 3], rng: &mut ChaCha8Rng) -> Urgency {
    let total: f64 = mix.iter().map(|p| p.to_real()).sum();
    let mut u = rng.random::<f64>() * total;
    for (cls, p) in Urgency::ALL.iter().zip(mix) {
        u -= p.to_real();
        if u < 0.0 {
            return *cls;
        }
    }
    Urgency::Telemetry
}

/// Generate a bounded-drift context trace.
///
/// Each numeric field performs an independent random walk with uniform
/// per-step increments capped by the configured drift bound and reflecting
/// walls at the configured bounds, so consecutive samples never differ by
/// more than the bound in any field. The same `(config, seed)` always yields
/// the identical sequence.
pub fn synth_trace<S: Scalar>(config: &TraceConfig<S>) -> Result<Vec<ContextVector<S>>, ContextError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let steps = config.steps();
    let mut out = Vec::with_capacity(steps);
    let mut cur = config.initial;
    let bounds = config.bounds.as_array();
    let drift = config.drift.as_array();
    out.push(cur);
    for k in 1..steps {
        let mut fields = cur.numeric_fields();
        for ((f, b), r) in fields.iter_mut().zip(drift).zip(bounds) {
            if b > S::zero() {
                let step = S::from_real(rng.random_range(-1.0..=1.0)) * b;
                *f = reflect(*f + step, r.lo, r.hi);
            }
        }
        cur = cur.with_numeric_fields(fields);
        let p = config.drift.urgency_switch_prob.to_real();
        if p > 0.0 && rng.random::<f64>() < p {
            cur.urgency = draw_urgency(&config.urgency_mix, &mut rng);
        }
        cur.timestamp_ms = config.initial.timestamp_ms + k as i64 * config.step_ms as i64;
        out.push(cur);
    }
    Ok(out)
}

/// Errors from trace ingestion.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected columns {expected:?}, found {found:?}")]
    Header {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("row at line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("row at line {line}: timestamp {current} not greater than preceding {previous}")]
    NonMonotoneTimestamp {
        line: u64,
        previous: i64,
        current: i64,
    },
}

const CSV_HEADER: [&str; 10] = [
    "timestamp_ms",
    "snr_db",
    "per",
    "speed_mps",
    "accel_mps2",
    "connectivity_horizon_s",
    "urgency",
    "cpu_load",
    "visibility_m",
    "ambient_temp_c",
];

/// Parse a CSV context trace.
///
/// The stream must carry a header row naming the fields in declared order.
/// An empty stream is an empty trace. Invariant violations are reported with
/// the offending line number and field.
pub fn ingest_trace<S, R>(source: R) -> Result<Vec<ContextVector<S>>, IngestError>
where
    S: Scalar + serde::de::DeserializeOwned,
    R: Read,
{
    let mut raw = String::new();
    let mut source = source;
    source.read_to_string(&mut raw)?;
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_reader(raw.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(IngestError::Header {
            expected: CSV_HEADER.iter().map(|s| s.to_string()).collect(),
            found: headers.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut out = Vec::new();
    let mut prev_ts: Option<i64> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: ContextVector<S> = record
            .deserialize(Some(&headers))
            .map_err(|e| IngestError::Row {
                line,
                message: e.to_string(),
            })?;
        row.validate().map_err(|e| IngestError::Row {
            line,
            message: e.to_string(),
        })?;
        if let Some(prev) = prev_ts {
            if row.timestamp_ms <= prev {
                return Err(IngestError::NonMonotoneTimestamp {
                    line,
                    previous: prev,
                    current: row.timestamp_ms,
                });
            }
        }
        prev_ts = Some(row.timestamp_ms);
        out.push(row);
    }
    Ok(out)
}

/// Serialise a trace as CSV. Floats use the shortest round-trip encoding, so
/// `ingest_trace` reproduces the sequence exactly.
pub fn write_trace_csv<S, W>(sink: W, trace: &[ContextVector<S>]) -> Result<(), IngestError>
where
    S: Scalar + Serialize,
    W: Write,
{
    let mut wtr = csv::Writer::from_writer(sink);
    for row in trace {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Apply a bounded adversarial displacement to the numeric fields.
///
/// The output differs from `x` by at most `magnitude` in the declared
/// normalised L∞ norm; urgency and timestamp are never altered (onboard
/// inputs are trusted, only network-observable signals can be forged).
/// Deterministic per seed; magnitude zero returns the input unchanged.
pub fn perturb_context<S: Scalar>(
    x: &ContextVector<S>,
    magnitude: S,
    seed: u64,
) -> ContextVector<S> {
    assert!(
        magnitude.is_finite() && magnitude >= S::zero(),
        "perturbation magnitude must be finite and non-negative"
    );
    if magnitude == S::zero() {
        return *x;
    }
    let ranges = ContextRanges::<S>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = x.numeric_fields();
    for (f, r) in fields.iter_mut().zip(ranges.as_array()) {
        let delta = S::from_real(rng.random_range(-1.0..=1.0)) * magnitude * r.span();
        *f = clamp(*f + delta, r.lo, r.hi);
    }
    x.with_numeric_fields(fields)
}

/// Fixed-length digest of a canonicalised context snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextDigest(pub [u8; DIGEST_LEN]);

impl ContextDigest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }
}

fn quantize(v: f64) -> i64 {
    (v * HASH_FIXED_POINT_SCALE).round() as i64
}

/// Hash the canonical fixed-point serialisation of a context vector.
///
/// Quantisation happens in `f64` regardless of the scalar type so both
/// endpoints of a transition agree on the digest bit-for-bit.
pub fn context_hash<S: Scalar>(x: &ContextVector<S>) -> ContextDigest {
    let mut h = Sha256::new();
    h.update(b"caap-context-v1");
    h.update(x.timestamp_ms.div_euclid(HASH_TIME_BUCKET_MS).to_be_bytes());
    for f in x.numeric_fields() {
        h.update(quantize(f.to_real()).to_be_bytes());
    }
    h.update([x.urgency.tag()]);
    let out = h.finalize();
    let mut bytes = [0u8; DIGEST_LEN];
    bytes.copy_from_slice(&out);
    ContextDigest(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base_context() -> ContextVector {
        ContextVector {
            timestamp_ms: 0,
            snr_db: 18.0,
            per: 0.05,
            speed_mps: 13.9,
            accel_mps2: 0.0,
            connectivity_horizon_s: 5.0,
            urgency: Urgency::Telemetry,
            cpu_load: 0.6,
            visibility_m: 1000.0,
            ambient_temp_c: 15.0,
        }
    }

    fn base_config() -> TraceConfig {
        TraceConfig {
            duration_s: 2.0,
            step_ms: 20,
            initial: base_context(),
            drift: DriftBounds {
                snr_db: 0.5,
                per: 0.01,
                speed_mps: 0.3,
                accel_mps2: 0.2,
                connectivity_horizon_s: 0.1,
                cpu_load: 0.02,
                visibility_m: 20.0,
                ambient_temp_c: 0.05,
                urgency_switch_prob: 0.01,
            },
            urgency_mix: [0.5, 0.3, 0.2],
            bounds: ContextRanges::default(),
            rng_seed: 7,
        }
    }

    #[test]
    fn zero_drift_trace_is_constant() {
        let mut cfg = base_config();
        cfg.drift = DriftBounds::zero();
        let trace = synth_trace(&cfg).unwrap();
        assert_eq!(trace.len(), cfg.steps());
        for (k, x) in trace.iter().enumerate() {
            let mut expect = cfg.initial;
            expect.timestamp_ms = k as i64 * cfg.step_ms as i64;
            assert_eq!(*x, expect);
        }
    }

    #[test]
    fn same_seed_reproduces_trace_bitwise() {
        let cfg = base_config();
        let a = synth_trace(&cfg).unwrap();
        let b = synth_trace(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn drift_bounds_hold_over_whole_trace() {
        let mut cfg = base_config();
        cfg.duration_s = 20.0;
        cfg.rng_seed = 42;
        let trace = synth_trace(&cfg).unwrap();
        let bounds = cfg.drift.as_array();
        for pair in trace.windows(2) {
            let (a, b) = (pair[0].numeric_fields(), pair[1].numeric_fields());
            for ((fa, fb), bound) in a.iter().zip(b).zip(bounds) {
                assert!(
                    (*fa - fb).abs() <= bound + 1e-12,
                    "per-step drift exceeded: |{fa} - {fb}| > {bound}"
                );
            }
        }
    }

    #[test]
    fn snr_drift_scan_matches_configured_bound() {
        let mut cfg = base_config();
        cfg.duration_s = 30.0;
        cfg.drift.snr_db = 0.5;
        let trace = synth_trace(&cfg).unwrap();
        let max_step = trace
            .windows(2)
            .map(|p| (p[1].snr_db - p[0].snr_db).abs())
            .fold(0.0f64, f64::max);
        assert!(max_step <= 0.5 + 1e-12);
        assert!(max_step > 0.0, "drift should actually move the field");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = base_config();
        cfg.duration_s = 0.0;
        assert!(synth_trace(&cfg).is_err());

        let mut cfg = base_config();
        cfg.step_ms = 10;
        assert!(synth_trace(&cfg).is_err());

        let mut cfg = base_config();
        cfg.drift.per = -0.1;
        assert!(synth_trace(&cfg).is_err());

        let mut cfg = base_config();
        cfg.urgency_mix = [0.0, 0.0, 0.0];
        assert!(synth_trace(&cfg).is_err());
    }

    #[test]
    fn ingest_of_empty_stream_is_empty() {
        let rows: Vec<ContextVector> = ingest_trace(&b""[..]).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn ingest_rejects_out_of_range_per_with_line() {
        let csv = "timestamp_ms,snr_db,per,speed_mps,accel_mps2,connectivity_horizon_s,urgency,cpu_load,visibility_m,ambient_temp_c\n\
                   0,18,0.05,13.9,0,5,telemetry,0.6,1000,15\n\
                   20,18,1.3,13.9,0,5,telemetry,0.6,1000,15\n";
        let err = ingest_trace::<f64, _>(csv.as_bytes()).unwrap_err();
        match err {
            IngestError::Row { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("per"), "message should name the field: {message}");
            }
            other => panic!("expected row error, got {other}"),
        }
    }

    #[test]
    fn ingest_rejects_non_monotone_timestamps() {
        let csv = "timestamp_ms,snr_db,per,speed_mps,accel_mps2,connectivity_horizon_s,urgency,cpu_load,visibility_m,ambient_temp_c\n\
                   0,18,0.05,13.9,0,5,telemetry,0.6,1000,15\n\
                   0,18,0.05,13.9,0,5,telemetry,0.6,1000,15\n";
        let err = ingest_trace::<f64, _>(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::NonMonotoneTimestamp { line: 3, .. }));
    }

    #[test]
    fn ingest_rejects_header_mismatch() {
        let csv = "timestamp_ms,snr\n0,18\n";
        let err = ingest_trace::<f64, _>(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::Header { .. }));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut cfg = base_config();
        cfg.duration_s = 5.0;
        let trace = synth_trace(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let back: Vec<ContextVector> = ingest_trace(&buf[..]).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn perturb_zero_magnitude_is_identity() {
        let x = base_context();
        assert_eq!(perturb_context(&x, 0.0, 99), x);
    }

    #[test]
    fn perturb_is_contained_and_preserves_urgency() {
        let x = base_context();
        let ranges = ContextRanges::default();
        for seed in 0..1000u64 {
            let y = perturb_context(&x, 0.26, seed);
            let d = normalized_distance(&x, &y, &ranges);
            assert!(d <= 0.26 + 1e-12, "seed {seed}: distance {d} exceeds bound");
            assert_eq!(y.urgency, x.urgency);
            assert_eq!(y.timestamp_ms, x.timestamp_ms);
            y.validate().unwrap();
        }
    }

    #[test]
    fn digest_is_deterministic_and_field_sensitive() {
        let x = base_context();
        assert_eq!(context_hash(&x), context_hash(&x));
        let mut y = x;
        y.snr_db += 0.01;
        assert_ne!(context_hash(&x), context_hash(&y));
        assert_eq!(context_hash(&x).as_bytes().len(), DIGEST_LEN);
    }

    #[test]
    fn digest_buckets_timestamps_within_decision_interval() {
        let x = base_context();
        let mut y = x;
        y.timestamp_ms = x.timestamp_ms + HASH_TIME_BUCKET_MS - 1;
        assert_eq!(context_hash(&x), context_hash(&y));
        y.timestamp_ms = x.timestamp_ms + HASH_TIME_BUCKET_MS;
        assert_ne!(context_hash(&x), context_hash(&y));
    }

    #[test]
    fn digest_is_scalar_width_independent() {
        let x = base_context();
        let x32 = ContextVector::<f32> {
            timestamp_ms: x.timestamp_ms,
            snr_db: x.snr_db as f32,
            per: x.per as f32,
            speed_mps: x.speed_mps as f32,
            accel_mps2: x.accel_mps2 as f32,
            connectivity_horizon_s: x.connectivity_horizon_s as f32,
            urgency: x.urgency,
            cpu_load: x.cpu_load as f32,
            visibility_m: x.visibility_m as f32,
            ambient_temp_c: x.ambient_temp_c as f32,
        };
        assert_eq!(context_hash(&x), context_hash(&x32));
    }

    #[test]
    fn normalized_distance_is_a_metric_on_samples() {
        let x = base_context();
        let ranges = ContextRanges::default();
        let y = perturb_context(&x, 0.1, 5);
        assert_eq!(normalized_distance(&x, &x, &ranges), 0.0);
        assert_eq!(
            normalized_distance(&x, &y, &ranges),
            normalized_distance(&y, &x, &ranges)
        );
    }
}
