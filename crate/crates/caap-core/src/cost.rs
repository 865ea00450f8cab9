//! PQC configuration profiles and the context-dependent objective model.
//!
//! The catalog pins the per-operation compute times, key/payload sizes, and
//! security levels of the four deployable configuration profiles, plus each
//! profile's measured end-to-end runtime on the 1.2 GHz ARM reference
//! platform. Hardware scaling is inverse-linear in clock: a profile that
//! takes 7.50 ms at 1.2 GHz takes 11.25 ms at 800 MHz.
//!
//! At runtime a profile is scored by the objective vector
//! `(T_lat, C_comp, S_comm, sigma_sec)`:
//!
//! * `T_lat` — end-to-end latency: load-scaled compute plus the Shannon-rate
//!   network delay of the communication overhead, inflated by expected
//!   retransmissions `1/(1-PER)`, plus propagation.
//! * `C_comp` — a CPU-cycle proxy (compute milliseconds times clock MHz),
//!   which is hardware-invariant by construction.
//! * `S_comm` — public-key plus ciphertext/signature kilobytes.
//! * `sigma_sec` — claimed bit security.
//!
//! Scalarisation min-max normalises each component over the four-profile
//! catalog at the given context before weighting, so the weights are
//! dimensionless and the argmin structure is preserved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{normalized_distance, ContextRanges, ContextVector, NUMERIC_FIELD_COUNT};
use crate::scalar::Scalar;
use crate::Real;

/// The four deployable PQC configuration profiles, in fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProfileId {
    Kyber768,
    Dilithium3,
    McEliece348864,
    SphincsPlus128s,
}

impl ProfileId {
    pub const ALL: [ProfileId; 4] = [
        ProfileId::Kyber768,
        ProfileId::Dilithium3,
        ProfileId::McEliece348864,
        ProfileId::SphincsPlus128s,
    ];

    pub fn index(self) -> usize {
        match self {
            ProfileId::Kyber768 => 0,
            ProfileId::Dilithium3 => 1,
            ProfileId::McEliece348864 => 2,
            ProfileId::SphincsPlus128s => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ProfileId::Kyber768 => "kyber768",
            ProfileId::Dilithium3 => "dilithium3",
            ProfileId::McEliece348864 => "mceliece348864",
            ProfileId::SphincsPlus128s => "sphincsplus128s",
        }
    }
}

/// Cryptographic family of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lattice,
    Code,
    Hash,
}

/// One PQC configuration profile and its intrinsic costs.
///
/// Per-operation times are baselines at the reference clock
/// ([`REFERENCE_CLOCK_MHZ`]); `None` marks operations the primitive does not
/// have (KEMs have no standalone verify, signatures no decapsulation), which
/// count as zero in compute sums. `runtime_ms` is the measured end-to-end
/// runtime benchmark on the same reference platform; it scales with clock
/// exactly like the per-operation times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqcProfile<S = Real> {
    pub id: ProfileId,
    pub family: Family,
    pub enc_ms: Option<S>,
    pub dec_ms: Option<S>,
    pub verify_ms: Option<S>,
    pub pk_kb: S,
    pub payload_kb: S,
    /// Computational-energy placeholder; not yet quantified.
    pub energy_units: S,
    pub sec_bits: u32,
    pub stateless: bool,
    pub runtime_ms: S,
}

impl<S: Scalar> PqcProfile<S> {
    /// Sum of the per-operation compute times, absent entries counting zero.
    pub fn compute_ms(&self) -> S {
        let z = S::zero();
        self.enc_ms.unwrap_or(z) + self.dec_ms.unwrap_or(z) + self.verify_ms.unwrap_or(z)
    }

    /// Communication overhead: public key plus ciphertext/signature.
    pub fn s_comm_kb(&self) -> S {
        self.pk_kb + self.payload_kb
    }
}

/// Clock of the reference platform the catalog baselines were measured on.
pub const REFERENCE_CLOCK_MHZ: f64 = 1200.0;

/// The four-profile catalog.
///
/// Kyber's and McEliece's reference runtimes are 5/3 ms and 5/6 ms — the
/// exact values behind the rounded 1.67 / 0.83 readings — so clock scaling
/// lands exactly on the 800 MHz figures (2.50 and 1.25 ms).
pub fn catalog<S: Scalar>() -> [PqcProfile<S>; 4] {
    let s = S::from_real;
    [
        PqcProfile {
            id: ProfileId::Kyber768,
            family: Family::Lattice,
            enc_ms: Some(s(0.25)),
            dec_ms: Some(s(0.35)),
            verify_ms: Some(s(0.15)),
            pk_kb: s(1.18),
            payload_kb: s(1.08),
            energy_units: s(0.0),
            sec_bits: 192,
            stateless: false,
            runtime_ms: s(5.0 / 3.0),
        },
        PqcProfile {
            id: ProfileId::Dilithium3,
            family: Family::Lattice,
            enc_ms: Some(s(0.40)),
            dec_ms: Some(s(0.45)),
            verify_ms: Some(s(0.30)),
            pk_kb: s(1.50),
            payload_kb: s(2.70),
            energy_units: s(0.0),
            sec_bits: 192,
            stateless: false,
            runtime_ms: s(2.5),
        },
        PqcProfile {
            id: ProfileId::McEliece348864,
            family: Family::Code,
            enc_ms: Some(s(0.05)),
            dec_ms: Some(s(0.06)),
            verify_ms: None,
            pk_kb: s(240.00),
            payload_kb: s(0.13),
            energy_units: s(0.0),
            sec_bits: 128,
            stateless: false,
            runtime_ms: s(5.0 / 6.0),
        },
        PqcProfile {
            id: ProfileId::SphincsPlus128s,
            family: Family::Hash,
            enc_ms: Some(s(0.90)),
            dec_ms: None,
            verify_ms: Some(s(1.10)),
            pk_kb: s(0.05),
            payload_kb: s(17.00),
            energy_units: s(0.0),
            sec_bits: 128,
            stateless: true,
            runtime_ms: s(7.5),
        },
    ]
}

pub fn profile<S: Scalar>(id: ProfileId) -> PqcProfile<S> {
    catalog()[id.index()]
}

/// Serialisable wrapper for a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile<S = Real> {
    pub profiles: Vec<PqcProfile<S>>,
}

/// Parse a profile catalog from TOML. The file must describe exactly the
/// four deployable profiles, one per catalog identity, with valid costs;
/// [`catalog`] remains the embedded default.
pub fn catalog_from_toml<S>(text: &str) -> Result<[PqcProfile<S>; 4], CostError>
where
    S: Scalar + Serialize + serde::de::DeserializeOwned,
{
    let file: CatalogFile<S> = toml::from_str(text).map_err(|_| CostError::BadCatalog {
        what: "catalog file does not parse",
    })?;
    if file.profiles.len() != 4 {
        return Err(CostError::BadCatalog {
            what: "catalog must contain exactly four profiles",
        });
    }
    let mut out = catalog::<S>();
    let mut seen = [false; 4];
    for p in file.profiles {
        let idx = p.id.index();
        if seen[idx] {
            return Err(CostError::BadCatalog {
                what: "duplicate profile id",
            });
        }
        for v in [p.enc_ms, p.dec_ms, p.verify_ms] {
            if let Some(v) = v {
                if !v.is_finite() || v < S::zero() {
                    return Err(CostError::BadCatalog {
                        what: "compute times must be finite and non-negative",
                    });
                }
            }
        }
        if !(p.pk_kb > S::zero() && p.payload_kb > S::zero()) {
            return Err(CostError::BadCatalog {
                what: "key and payload sizes must be positive",
            });
        }
        if !matches!(p.sec_bits, 128 | 192 | 256) {
            return Err(CostError::BadCatalog {
                what: "security level must be 128, 192, or 256 bits",
            });
        }
        seen[idx] = true;
        out[idx] = p;
    }
    Ok(out)
}

/// Serialise a catalog as TOML (the schema `catalog_from_toml` accepts).
pub fn catalog_to_toml<S>(profiles: &[PqcProfile<S>; 4]) -> String
where
    S: Scalar + Serialize,
{
    toml::to_string_pretty(&CatalogFile {
        profiles: profiles.to_vec(),
    })
    .expect("catalog serialises")
}

/// Target hardware relative to the catalog's reference platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile<S = Real> {
    pub clock_mhz: S,
    pub reference_clock_mhz: S,
}

impl<S: Scalar> HardwareProfile<S> {
    pub fn new(clock_mhz: f64) -> Self {
        Self {
            clock_mhz: S::from_real(clock_mhz),
            reference_clock_mhz: S::from_real(REFERENCE_CLOCK_MHZ),
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if !(self.clock_mhz.is_finite() && self.clock_mhz > S::zero()) {
            return Err(CostError::BadHardware {
                what: "clock_mhz must be positive",
            });
        }
        if !(self.reference_clock_mhz.is_finite() && self.reference_clock_mhz > S::zero()) {
            return Err(CostError::BadHardware {
                what: "reference_clock_mhz must be positive",
            });
        }
        Ok(())
    }

    /// Multiplier applied to reference compute times on this hardware.
    pub fn scale_factor(&self) -> S {
        self.reference_clock_mhz / self.clock_mhz
    }
}

/// Rescale a profile's compute-time fields to the given hardware. Sizes,
/// security level, and energy are unchanged.
pub fn scale_compute<S: Scalar>(
    p: &PqcProfile<S>,
    hw: &HardwareProfile<S>,
) -> Result<PqcProfile<S>, CostError> {
    hw.validate()?;
    let f = hw.scale_factor();
    let mut out = *p;
    out.enc_ms = p.enc_ms.map(|v| v * f);
    out.dec_ms = p.dec_ms.map(|v| v * f);
    out.verify_ms = p.verify_ms.map(|v| v * f);
    out.runtime_ms = p.runtime_ms * f;
    Ok(out)
}

/// How retransmissions enter the network-delay model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RetransmissionModel {
    /// Expected transmission count `1/(1-PER)`.
    #[default]
    ExpectedRepeats,
}

/// Parametric SNR/PER channel-delay model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModelConfig<S = Real> {
    pub bandwidth_hz: S,
    pub propagation_ms: S,
    pub retransmission_model: RetransmissionModel,
}

impl<S: Scalar> ChannelModelConfig<S> {
    pub fn new(bandwidth_hz: f64, propagation_ms: f64) -> Self {
        Self {
            bandwidth_hz: S::from_real(bandwidth_hz),
            propagation_ms: S::from_real(propagation_ms),
            retransmission_model: RetransmissionModel::ExpectedRepeats,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > S::zero()) {
            return Err(CostError::BadChannel {
                what: "bandwidth_hz must be finite and positive",
            });
        }
        if !(self.propagation_ms.is_finite() && self.propagation_ms >= S::zero()) {
            return Err(CostError::BadChannel {
                what: "propagation_ms must be finite and non-negative",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CostError {
    #[error("invalid hardware profile: {what}")]
    BadHardware { what: &'static str },
    #[error("invalid channel config: {what}")]
    BadChannel { what: &'static str },
    #[error("link dead: packet error rate is 1")]
    LinkDead,
    #[error("cpu saturated: cpu_load is 1")]
    CpuSaturated,
    #[error("context invalid: {0}")]
    Context(#[from] crate::context::ContextError),
    #[error("invalid weights: {what}")]
    BadWeights { what: &'static str },
    #[error("invalid context region: {what}")]
    BadRegion { what: &'static str },
    #[error("invalid catalog file: {what}")]
    BadCatalog { what: &'static str },
}

/// Network delay in ms for shipping the profile's communication overhead.
///
/// `t_net = bits / (B * log2(1 + 10^(snr/10))) * 1/(1-PER) * 1000 + prop`.
/// Monotone increasing in overhead and PER, decreasing in SNR.
pub fn t_net<S: Scalar>(
    p: &PqcProfile<S>,
    x: &ContextVector<S>,
    ch: &ChannelModelConfig<S>,
) -> Result<S, CostError> {
    ch.validate()?;
    x.validate()?;
    if x.per >= S::one() {
        return Err(CostError::LinkDead);
    }
    Ok(transfer_ms(p.s_comm_kb(), x.snr_db, x.per, ch))
}

fn transfer_ms<S: Scalar>(kb: S, snr_db: S, per: S, ch: &ChannelModelConfig<S>) -> S {
    let bits = kb * S::from_real(8.0 * 1024.0);
    let ten = S::from_real(10.0);
    let snr_linear = ten.powf(snr_db / ten);
    let capacity_bps = ch.bandwidth_hz * (S::one() + snr_linear).log2();
    let repeats = match ch.retransmission_model {
        RetransmissionModel::ExpectedRepeats => S::one() / (S::one() - per),
    };
    bits / capacity_bps * repeats * S::from_real(1000.0) + ch.propagation_ms
}

/// Cryptographic processing time in ms: reference compute scaled to the
/// hardware clock and inflated by `1/(1 - cpu_load)`.
pub fn crypto_ms<S: Scalar>(
    p: &PqcProfile<S>,
    x: &ContextVector<S>,
    hw: &HardwareProfile<S>,
) -> Result<S, CostError> {
    hw.validate()?;
    if x.cpu_load >= S::one() {
        return Err(CostError::CpuSaturated);
    }
    Ok(p.compute_ms() * hw.scale_factor() / (S::one() - x.cpu_load))
}

/// End-to-end latency in ms: crypto processing plus network delay.
pub fn t_lat<S: Scalar>(
    p: &PqcProfile<S>,
    x: &ContextVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<S, CostError> {
    Ok(crypto_ms(p, x, hw)? + t_net(p, x, ch)?)
}

/// Context-dependent objective vector of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector<S = Real> {
    pub t_lat_ms: S,
    /// CPU-cycle proxy: compute milliseconds at the hardware clock times the
    /// clock in MHz (equivalently, reference ms times reference MHz).
    pub c_comp: S,
    pub s_comm_kb: S,
    pub sigma_sec: S,
}

impl<S: Scalar> ObjectiveVector<S> {
    pub fn as_array(&self) -> [S; 4] {
        [self.t_lat_ms, self.c_comp, self.s_comm_kb, self.sigma_sec]
    }
}

/// Assemble the objective vector of a profile at a context.
pub fn objectives<S: Scalar>(
    p: &PqcProfile<S>,
    x: &ContextVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<ObjectiveVector<S>, CostError> {
    let lat = t_lat(p, x, ch, hw)?;
    let compute_at_hw = p.compute_ms() * hw.scale_factor();
    Ok(ObjectiveVector {
        t_lat_ms: lat,
        c_comp: compute_at_hw * hw.clock_mhz,
        s_comm_kb: p.s_comm_kb(),
        sigma_sec: S::from_real(p.sec_bits as f64),
    })
}

/// Objective vectors for the whole catalog, in fixed profile order.
pub fn catalog_objectives<S: Scalar>(
    x: &ContextVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<[ObjectiveVector<S>; 4], CostError> {
    let cat = catalog::<S>();
    Ok([
        objectives(&cat[0], x, ch, hw)?,
        objectives(&cat[1], x, ch, hw)?,
        objectives(&cat[2], x, ch, hw)?,
        objectives(&cat[3], x, ch, hw)?,
    ])
}

/// Min-max normalise each objective component over the given set. A
/// degenerate component (zero spread) normalises to zero for every entry.
pub fn normalize_objectives<S: Scalar>(objs: &[ObjectiveVector<S>]) -> Vec<ObjectiveVector<S>> {
    let mut lo = [S::infinity(); 4];
    let mut hi = [S::neg_infinity(); 4];
    for o in objs {
        for (k, v) in o.as_array().iter().enumerate() {
            if *v < lo[k] {
                lo[k] = *v;
            }
            if *v > hi[k] {
                hi[k] = *v;
            }
        }
    }
    objs.iter()
        .map(|o| {
            let a = o.as_array();
            let mut n = [S::zero(); 4];
            for k in 0..4 {
                let span = hi[k] - lo[k];
                n[k] = if span > S::zero() {
                    (a[k] - lo[k]) / span
                } else {
                    S::zero()
                };
            }
            ObjectiveVector {
                t_lat_ms: n[0],
                c_comp: n[1],
                s_comm_kb: n[2],
                sigma_sec: n[3],
            }
        })
        .collect()
}

/// Objective weights. `w_latency`, `w_compute`, and `w_comm` price the cost
/// components; `w_security` rewards bit security.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<S = Real> {
    pub w_latency: S,
    pub w_compute: S,
    pub w_comm: S,
    pub w_security: S,
}

impl<S: Scalar> WeightVector<S> {
    pub fn new(w_latency: f64, w_compute: f64, w_comm: f64, w_security: f64) -> Self {
        Self {
            w_latency: S::from_real(w_latency),
            w_compute: S::from_real(w_compute),
            w_comm: S::from_real(w_comm),
            w_security: S::from_real(w_security),
        }
    }

    pub fn as_array(&self) -> [S; 4] {
        [self.w_latency, self.w_compute, self.w_comm, self.w_security]
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for w in self.as_array() {
            if !w.is_finite() || w < S::zero() {
                return Err(CostError::BadWeights {
                    what: "weights must be finite and non-negative",
                });
            }
        }
        Ok(())
    }

    pub fn sum(&self) -> S {
        self.as_array().iter().fold(S::zero(), |a, w| a + *w)
    }
}

/// Scalarised loss of a normalised objective vector:
/// `w1*T + w2*C + w3*S - w4*sigma`.
pub fn weighted_loss<S: Scalar>(f_normalized: &ObjectiveVector<S>, w: &WeightVector<S>) -> S {
    w.w_latency * f_normalized.t_lat_ms + w.w_compute * f_normalized.c_comp
        + w.w_comm * f_normalized.s_comm_kb
        - w.w_security * f_normalized.sigma_sec
}

/// Losses of all four profiles at a context, in fixed profile order.
pub fn profile_losses<S: Scalar>(
    x: &ContextVector<S>,
    w: &WeightVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<[S; 4], CostError> {
    w.validate()?;
    let objs = catalog_objectives(x, ch, hw)?;
    let norm = normalize_objectives(&objs);
    let mut out = [S::zero(); 4];
    for (o, slot) in norm.iter().zip(out.iter_mut()) {
        *slot = weighted_loss(o, w);
    }
    Ok(out)
}

/// Index of the smallest loss; ties resolve to the earliest profile in the
/// fixed catalog order.
pub fn argmin_loss<S: Scalar>(losses: &[S; 4]) -> ProfileId {
    let mut best = 0usize;
    for k in 1..4 {
        if losses[k] < losses[best] {
            best = k;
        }
    }
    ProfileId::ALL[best]
}

/// Smallest pairwise loss separation in a loss table.
pub fn min_pairwise_gap<S: Scalar>(losses: &[S; 4]) -> S {
    let mut gap = S::infinity();
    for a in 0..4 {
        for b in (a + 1)..4 {
            let d = (losses[a] - losses[b]).abs();
            if d < gap {
                gap = d;
            }
        }
    }
    gap
}

/// Minimum loss separation between any two profiles at a context — the
/// stability margin. Zero (a tie) means the stability condition is
/// unsatisfiable at this context for any prediction error.
pub fn loss_gap<S: Scalar>(
    x: &ContextVector<S>,
    w: &WeightVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<S, CostError> {
    Ok(min_pairwise_gap(&profile_losses(x, w, ch, hw)?))
}

/// Axis-aligned region of context space: per-field intervals between the
/// numeric fields of `lo` and `hi`. Urgency is taken from `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextRegion<S = Real> {
    pub lo: ContextVector<S>,
    pub hi: ContextVector<S>,
}

impl<S: Scalar> ContextRegion<S> {
    pub fn validate(&self) -> Result<(), CostError> {
        for (a, b) in self
            .lo
            .numeric_fields()
            .iter()
            .zip(self.hi.numeric_fields())
        {
            if !(a.is_finite() && b.is_finite()) {
                return Err(CostError::BadRegion {
                    what: "region bounds must be finite",
                });
            }
            if *a > b {
                return Err(CostError::BadRegion {
                    what: "region lower bound exceeds upper bound",
                });
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> ContextVector<S> {
        let lo = self.lo.numeric_fields();
        let hi = self.hi.numeric_fields();
        let mut fields = [S::zero(); NUMERIC_FIELD_COUNT];
        for k in 0..NUMERIC_FIELD_COUNT {
            let span = (hi[k] - lo[k]).to_real();
            fields[k] = if span > 0.0 {
                lo[k] + S::from_real(rng.random::<f64>() * span)
            } else {
                lo[k]
            };
        }
        self.lo.with_numeric_fields(fields)
    }
}

/// Finite-difference supremum estimate of the Lipschitz constant of an
/// arbitrary per-profile loss map over a region, in the declared normalised
/// norm. Alternates global pairs with short-step local pairs so both broad
/// slopes and steep local curvature are sampled.
pub fn estimate_lipschitz_fn<S, F>(
    loss_fn: F,
    region: &ContextRegion<S>,
    samples: usize,
    seed: u64,
) -> Result<S, CostError>
where
    S: Scalar,
    F: Fn(&ContextVector<S>) -> Result<[S; 4], CostError>,
{
    region.validate()?;
    if samples < 2 {
        return Err(CostError::BadRegion {
            what: "lipschitz estimation needs at least two samples",
        });
    }
    let ranges = ContextRanges::<S>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup = S::zero();
    for k in 0..samples {
        let a = region.sample(&mut rng);
        let b = if k % 2 == 0 {
            region.sample(&mut rng)
        } else {
            // Short displacement toward a fresh sample: probes local slope.
            let target = region.sample(&mut rng);
            let t = S::from_real(0.02);
            let mut fields = a.numeric_fields();
            for (f, g) in fields.iter_mut().zip(target.numeric_fields()) {
                *f = *f + t * (g - *f);
            }
            a.with_numeric_fields(fields)
        };
        let dist = normalized_distance(&a, &b, &ranges);
        if dist <= S::zero() {
            continue;
        }
        let la = loss_fn(&a)?;
        let lb = loss_fn(&b)?;
        for p in 0..4 {
            let slope = (la[p] - lb[p]).abs() / dist;
            if slope > sup {
                sup = slope;
            }
        }
    }
    Ok(sup)
}

/// Lipschitz estimate of the fixed-weight loss over a context region,
/// maximised over profiles.
pub fn estimate_lipschitz<S: Scalar>(
    w: &WeightVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
    region: &ContextRegion<S>,
    samples: usize,
    seed: u64,
) -> Result<S, CostError> {
    w.validate()?;
    estimate_lipschitz_fn(|x| profile_losses(x, w, ch, hw), region, samples, seed)
}

/// Conservative finite-difference bound `K_lat` on the latency's sensitivity
/// to one drift step, in the declared normalised norm: for any consecutive
/// pair within the region whose per-field moves respect `drift`,
/// `|T_lat(a, x') - T_lat(a, x)| <= K_lat * normalized_step(drift)`.
///
/// Latency depends on snr, per, and cpu_load only, each through a convex
/// monotone factor, so the worst secant of each field over a drift-sized
/// interval sits at the region corner (low SNR, high PER, high load); the
/// per-field corner secants are summed and maximised over profiles.
pub fn latency_lipschitz_bound<S: Scalar>(
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
    region: &ContextRegion<S>,
    drift: &crate::context::DriftBounds<S>,
) -> Result<S, CostError> {
    region.validate()?;
    ch.validate()?;
    hw.validate()?;
    let ranges = ContextRanges::<S>::default();
    let delta = drift.normalized_step(&ranges);
    if delta <= S::zero() {
        return Ok(S::zero());
    }
    let snr_lo = region.lo.snr_db;
    let per_hi = region.hi.per;
    let cpu_hi = region.hi.cpu_load;
    if per_hi >= S::one() {
        return Err(CostError::LinkDead);
    }
    if cpu_hi >= S::one() {
        return Err(CostError::CpuSaturated);
    }

    let secant = |f: &dyn Fn(S) -> S, a: S, b: S| -> S {
        if b > a {
            ((f(b) - f(a)) / (b - a)).abs()
        } else {
            S::zero()
        }
    };

    let mut worst = S::zero();
    for p in catalog::<S>() {
        let kb = p.s_comm_kb();
        // SNR secant at the low-SNR corner with the retransmission factor at
        // its highest.
        let g = |s: S| transfer_ms(kb, s, per_hi, ch);
        let d_snr = drift.snr_db.min(region.hi.snr_db - snr_lo);
        let k_snr = secant(&g, snr_lo, snr_lo + d_snr) * ranges.snr_db.span();
        // PER secant ending at the high-PER corner, at the low-SNR corner.
        let h = |q: S| transfer_ms(kb, snr_lo, q, ch);
        let d_per = drift.per.min(per_hi - region.lo.per);
        let k_per = secant(&h, per_hi - d_per, per_hi) * ranges.per.span();
        // Load secant ending at the high-load corner.
        let base = p.compute_ms() * hw.scale_factor();
        let c = |u: S| base / (S::one() - u);
        let d_cpu = drift.cpu_load.min(cpu_hi - region.lo.cpu_load);
        let k_cpu = secant(&c, cpu_hi - d_cpu, cpu_hi) * ranges.cpu_load.span();

        let total = k_snr + k_per + k_cpu;
        if total > worst {
            worst = total;
        }
    }
    Ok(worst)
}
