//! Baseline selectors: the three static profiles, the NSGA-II knee-point
//! selector, and the RL-only selector that picks profiles directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::ContextVector;
use crate::cost::{
    catalog_objectives, ChannelModelConfig, HardwareProfile, ProfileId,
};
use crate::scalar::Scalar;
use crate::Real;

use super::pareto::{knee_point, pareto_front};
use super::qlearn::{bucket_latency, bucket_snr, reward, RlConfig};
use super::{ApmoeaState, OptimizerConfig, OptimizerError, SelectorDecision};

/// Baseline selector families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    StaticLattice,
    StaticCode,
    StaticHash,
    NsgaII,
    RlOnly,
}

impl BaselineKind {
    pub fn static_profile(self) -> Option<ProfileId> {
        match self {
            BaselineKind::StaticLattice => Some(ProfileId::Kyber768),
            BaselineKind::StaticCode => Some(ProfileId::McEliece348864),
            BaselineKind::StaticHash => Some(ProfileId::SphincsPlus128s),
            _ => None,
        }
    }
}

/// Every selector the experiment harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    ApmoeaRl,
    ApmoeaNoRl,
    StaticLattice,
    StaticCode,
    StaticHash,
    NsgaII,
    RlOnly,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 7] = [
        SelectorKind::ApmoeaRl,
        SelectorKind::ApmoeaNoRl,
        SelectorKind::StaticLattice,
        SelectorKind::StaticCode,
        SelectorKind::StaticHash,
        SelectorKind::NsgaII,
        SelectorKind::RlOnly,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SelectorKind::ApmoeaRl => "apmoea-rl",
            SelectorKind::ApmoeaNoRl => "apmoea-no-rl",
            SelectorKind::StaticLattice => "static-lattice",
            SelectorKind::StaticCode => "static-code",
            SelectorKind::StaticHash => "static-hash",
            SelectorKind::NsgaII => "nsga-ii",
            SelectorKind::RlOnly => "rl-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }
}

/// RL-only baseline: tabular Q-learning whose actions are the profiles
/// themselves, over the same reward as the adaptive selector.
#[derive(Debug, Clone)]
pub struct RlOnlyState<S: Scalar> {
    cfg: RlConfig<S>,
    q: Vec<S>,
    eps: S,
    incumbent: Option<ProfileId>,
    rng: ChaCha8Rng,
}

impl<S: Scalar> RlOnlyState<S> {
    const ACTIONS: usize = 4;

    pub fn new(cfg: RlConfig<S>, seed: u64) -> Self {
        Self {
            cfg,
            q: vec![S::zero(); 3 * 3 * 4 * Self::ACTIONS],
            eps: cfg.exploration_eps,
            incumbent: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn slot(lat: usize, snr: usize, profile: usize, action: usize) -> usize {
        ((lat * 3 + snr) * 4 + profile) * Self::ACTIONS + action
    }

    fn decide(
        &mut self,
        x_t: &ContextVector<S>,
        x_hat: &ContextVector<S>,
        ch: &ChannelModelConfig<S>,
        hw: &HardwareProfile<S>,
    ) -> Result<SelectorDecision<S>, OptimizerError> {
        let x_t = &super::saturate_for_costs(x_t);
        let x_hat = &super::saturate_for_costs(x_hat);
        let state_profile = self.incumbent.unwrap_or(ProfileId::Kyber768);
        let observed_lat = crate::cost::t_lat(
            &crate::cost::profile::<S>(state_profile),
            x_t,
            ch,
            hw,
        )?;
        let lat_b = bucket_latency(observed_lat.to_real());
        let snr_b = bucket_snr(x_t.snr_db.to_real());
        let pid = state_profile.index();

        let action = if self.rng.random::<f64>() < self.eps.to_real() {
            self.rng.random_range(0..Self::ACTIONS)
        } else {
            let mut best = 0usize;
            for a in 1..Self::ACTIONS {
                if self.q[Self::slot(lat_b, snr_b, pid, a)]
                    > self.q[Self::slot(lat_b, snr_b, pid, best)]
                {
                    best = a;
                }
            }
            best
        };
        let selected = ProfileId::ALL[action];
        let switched = self.incumbent.is_some_and(|inc| inc != selected);

        // TD update on the observed outcome of the chosen profile.
        let outcome_lat =
            crate::cost::t_lat(&crate::cost::profile::<S>(selected), x_t, ch, hw)?;
        let n_switch = if switched { S::one() } else { S::zero() };
        let r = reward(
            outcome_lat,
            n_switch,
            x_t.snr_db,
            S::from_real(crate::cost::profile::<S>(selected).sec_bits as f64),
            &self.cfg.reward,
        );
        let next_lat_b = bucket_latency(outcome_lat.to_real());
        let next_snr_b = bucket_snr(x_hat.snr_db.to_real());
        let next_pid = selected.index();
        let mut next_best = S::neg_infinity();
        for a in 0..Self::ACTIONS {
            let v = self.q[Self::slot(next_lat_b, next_snr_b, next_pid, a)];
            if v > next_best {
                next_best = v;
            }
        }
        let slot = Self::slot(lat_b, snr_b, pid, action);
        let current = self.q[slot];
        self.q[slot] =
            current + self.cfg.learning_rate * (r + self.cfg.discount * next_best - current);
        self.eps = (self.eps * self.cfg.eps_decay).max(self.cfg.eps_floor);
        self.incumbent = Some(selected);

        let objs = catalog_objectives(x_hat, ch, hw)?;
        let front = pareto_front(&objs);
        let mut on_front = [false; 4];
        for &i in &front {
            on_front[i] = true;
        }
        Ok(SelectorDecision {
            selected,
            predicted_loss: [S::zero(); 4],
            on_front,
            switched,
            rl_action: None,
        })
    }
}

/// Unified stateful selector driven by the experiment harness.
#[derive(Debug, Clone)]
pub enum SelectorState<S: Scalar = Real> {
    Apmoea(Box<ApmoeaState<S>>),
    Static {
        profile: ProfileId,
        started: bool,
    },
    NsgaII {
        incumbent: Option<ProfileId>,
    },
    RlOnly(Box<RlOnlyState<S>>),
}

impl<S: Scalar> SelectorState<S> {
    /// Instantiate a selector. APMOEA variants take the optimizer config
    /// (with `rl_enabled` set per kind); baselines use what they need of it.
    pub fn new(kind: SelectorKind, cfg: &OptimizerConfig<S>, seed: u64) -> Result<Self, OptimizerError> {
        Ok(match kind {
            SelectorKind::ApmoeaRl | SelectorKind::ApmoeaNoRl => {
                let mut cfg = *cfg;
                cfg.rl_enabled = kind == SelectorKind::ApmoeaRl;
                cfg.seed = seed;
                SelectorState::Apmoea(Box::new(ApmoeaState::new(cfg)?))
            }
            SelectorKind::StaticLattice => SelectorState::Static {
                profile: ProfileId::Kyber768,
                started: false,
            },
            SelectorKind::StaticCode => SelectorState::Static {
                profile: ProfileId::McEliece348864,
                started: false,
            },
            SelectorKind::StaticHash => SelectorState::Static {
                profile: ProfileId::SphincsPlus128s,
                started: false,
            },
            SelectorKind::NsgaII => SelectorState::NsgaII { incumbent: None },
            SelectorKind::RlOnly => {
                SelectorState::RlOnly(Box::new(RlOnlyState::new(cfg.rl, seed)))
            }
        })
    }

    /// Produce the decision for the upcoming interval.
    pub fn decide(
        &mut self,
        x_t: &ContextVector<S>,
        x_hat: &ContextVector<S>,
        ch: &ChannelModelConfig<S>,
        hw: &HardwareProfile<S>,
    ) -> Result<SelectorDecision<S>, OptimizerError> {
        let x_t = &super::saturate_for_costs(x_t);
        let x_hat = &super::saturate_for_costs(x_hat);
        match self {
            SelectorState::Apmoea(state) => state.step(x_t, x_hat, ch, hw),
            SelectorState::Static { profile, started } => {
                let objs = catalog_objectives(x_hat, ch, hw)?;
                let front = pareto_front(&objs);
                let mut on_front = [false; 4];
                for &i in &front {
                    on_front[i] = true;
                }
                *started = true;
                Ok(SelectorDecision {
                    selected: *profile,
                    predicted_loss: [S::zero(); 4],
                    on_front,
                    switched: false,
                    rl_action: None,
                })
            }
            SelectorState::NsgaII { incumbent } => {
                // Non-dominated sorting over the catalog at the current
                // context, knee point of the first front; no prediction, no
                // learning.
                let objs = catalog_objectives(x_t, ch, hw)?;
                let selected = ProfileId::ALL[knee_point(&objs)];
                let switched = incumbent.is_some_and(|inc| inc != selected);
                *incumbent = Some(selected);
                let front = pareto_front(&objs);
                let mut on_front = [false; 4];
                for &i in &front {
                    on_front[i] = true;
                }
                Ok(SelectorDecision {
                    selected,
                    predicted_loss: [S::zero(); 4],
                    on_front,
                    switched,
                    rl_action: None,
                })
            }
            SelectorState::RlOnly(state) => state.decide(x_t, x_hat, ch, hw),
        }
    }
}
