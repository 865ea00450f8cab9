//! Tabular Q-learning used to stabilise the evolutionary selector.
//!
//! The agent does not pick profiles. Its action pair tunes the optimizer:
//! a mutation-rate multiplier for the evolutionary layer, and whether to
//! grant the incumbent profile a switch-hysteresis bonus at selection time.
//! State is a coarse (latency band × SNR band × active profile) grid.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::ProfileId;
use crate::scalar::Scalar;
use crate::Real;

/// Mutation-rate multipliers the agent can apply.
pub const MUTATION_MULTIPLIERS: [f64; 3] = [0.5, 1.0, 2.0];

/// Number of discrete actions: three multipliers × hysteresis on/off.
pub const ACTION_COUNT: usize = 6;

const LAT_BUCKETS: usize = 3;
const SNR_BUCKETS: usize = 3;

/// One action: mutation-rate multiplier plus optional hysteresis bonus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RlAction {
    pub mutation_idx: u8,
    pub hysteresis: bool,
}

impl RlAction {
    pub fn index(self) -> usize {
        self.mutation_idx as usize * 2 + self.hysteresis as usize
    }

    pub fn from_index(idx: usize) -> Self {
        Self {
            mutation_idx: (idx / 2) as u8,
            hysteresis: idx % 2 == 1,
        }
    }

    pub fn mutation_multiplier<S: Scalar>(self) -> S {
        S::from_real(MUTATION_MULTIPLIERS[self.mutation_idx as usize])
    }
}

/// Discretised observation the table is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RlStateKey {
    pub latency_bucket: usize,
    pub snr_bucket: usize,
    pub profile: ProfileId,
}

impl RlStateKey {
    pub fn new<S: Scalar>(latency_ms: S, snr_db: S, profile: ProfileId) -> Self {
        Self {
            latency_bucket: bucket_latency(latency_ms.to_real()),
            snr_bucket: bucket_snr(snr_db.to_real()),
            profile,
        }
    }
}

/// Latency bands: thirds of the 5–20 ms URLLC budget.
pub fn bucket_latency(ms: f64) -> usize {
    if ms < 10.0 {
        0
    } else if ms < 15.0 {
        1
    } else {
        2
    }
}

/// SNR bands: below 5 dB, 5–15 dB, above 15 dB.
pub fn bucket_snr(db: f64) -> usize {
    if db < 5.0 {
        0
    } else if db < 15.0 {
        1
    } else {
        2
    }
}

/// Reward shaping parameters: switching is penalised, good SNR and stronger
/// security are rewarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams<S = Real> {
    pub switch_penalty: S,
    pub snr_bonus: S,
    pub security_bonus: S,
}

impl<S: Scalar> Default for RewardParams<S> {
    fn default() -> Self {
        Self {
            switch_penalty: S::from_real(1.0),
            snr_bonus: S::from_real(0.1),
            security_bonus: S::from_real(0.01),
        }
    }
}

/// One-step reward: `-latency - penalty*switches + bonus*snr + bonus*sec`.
pub fn reward<S: Scalar>(
    t_lat_ms: S,
    n_switch: S,
    snr_db: S,
    sigma_sec: S,
    params: &RewardParams<S>,
) -> S {
    -t_lat_ms - params.switch_penalty * n_switch + params.snr_bonus * snr_db
        + params.security_bonus * sigma_sec
}

/// Q-learning hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlConfig<S = Real> {
    pub learning_rate: S,
    pub discount: S,
    pub exploration_eps: S,
    pub eps_decay: S,
    pub eps_floor: S,
    pub reward: RewardParams<S>,
    /// Loss-unit bonus granted to the incumbent profile when the agent picks
    /// the hysteresis action. Calibrate to the prediction-uncertainty scale
    /// of the experiment (a fraction of `K·ε`): the bonus then absorbs only
    /// noise-band flips, vanishes when predictions are exact, and can never
    /// override a gap the stability condition protects. A bonus derived from
    /// the current minimum loss gap cannot work here — any fraction of that
    /// gap is smaller than every pairwise separation by definition, so it
    /// would never change a single decision.
    pub hysteresis_bonus: S,
}

impl<S: Scalar> Default for RlConfig<S> {
    fn default() -> Self {
        let s = S::from_real;
        Self {
            learning_rate: s(0.1),
            discount: s(0.9),
            exploration_eps: s(0.1),
            eps_decay: s(0.99),
            eps_floor: s(0.005),
            reward: RewardParams::default(),
            hysteresis_bonus: s(0.0),
        }
    }
}

/// Optimistic prior on the hysteresis actions: the agent starts by assuming
/// stability pays and unlearns it wherever switching is actually worth the
/// penalty.
const STABILITY_PRIOR: f64 = 0.5;

/// Tabular Q state over (latency band, SNR band, profile) × action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QState<S = Real> {
    cfg: RlConfig<S>,
    q: Vec<S>,
    visited: Vec<bool>,
    eps: S,
    updates: u64,
}

impl<S: Scalar> QState<S> {
    pub fn new(cfg: RlConfig<S>) -> Self {
        let mut q = vec![S::zero(); LAT_BUCKETS * SNR_BUCKETS * 4 * ACTION_COUNT];
        for (idx, v) in q.iter_mut().enumerate() {
            if RlAction::from_index(idx % ACTION_COUNT).hysteresis {
                *v = S::from_real(STABILITY_PRIOR);
            }
        }
        Self {
            cfg,
            q,
            visited: vec![false; LAT_BUCKETS * SNR_BUCKETS * 4],
            eps: cfg.exploration_eps,
            updates: 0,
        }
    }

    pub fn config(&self) -> &RlConfig<S> {
        &self.cfg
    }

    pub fn exploration_eps(&self) -> S {
        self.eps
    }

    fn slot(key: &RlStateKey, action: usize) -> usize {
        ((key.latency_bucket * SNR_BUCKETS + key.snr_bucket) * 4 + key.profile.index())
            * ACTION_COUNT
            + action
    }

    pub fn value(&self, key: &RlStateKey, action: RlAction) -> S {
        self.q[Self::slot(key, action.index())]
    }

    fn greedy(&self, key: &RlStateKey) -> usize {
        let mut best = 0usize;
        for a in 1..ACTION_COUNT {
            if self.q[Self::slot(key, a)] > self.q[Self::slot(key, best)] {
                best = a;
            }
        }
        best
    }

    fn max_value(&self, key: &RlStateKey) -> S {
        self.q[Self::slot(key, self.greedy(key))]
    }

    /// ε-greedy action selection.
    pub fn choose(&self, key: &RlStateKey, rng: &mut ChaCha8Rng) -> RlAction {
        let draw = rng.random::<f64>();
        if draw < self.eps.to_real() {
            RlAction::from_index(rng.random_range(0..ACTION_COUNT))
        } else {
            RlAction::from_index(self.greedy(key))
        }
    }

    /// One-step temporal-difference update, followed by exploration decay.
    ///
    /// A state's first visit seeds all of its action values at the
    /// discounted-return scale of the observed reward (keeping the
    /// stability prior as a differential on the hysteresis actions).
    /// Without this the whole table starts far above the true returns and
    /// the greedy action cycles for hundreds of steps while every value
    /// descends, which drowns the action differentials the agent is
    /// supposed to exploit.
    pub fn update(&mut self, key: &RlStateKey, action: RlAction, r: S, next: &RlStateKey) {
        if self.cfg.learning_rate > S::zero() {
            self.seed_state(key, r);
            self.seed_state(next, r);
        }
        let slot = Self::slot(key, action.index());
        let target = r + self.cfg.discount * self.max_value(next);
        let current = self.q[slot];
        self.q[slot] = current + self.cfg.learning_rate * (target - current);
        self.eps = (self.eps * self.cfg.eps_decay).max(self.cfg.eps_floor);
        self.updates += 1;
    }

    fn seed_state(&mut self, key: &RlStateKey, r: S) {
        let state = Self::slot(key, 0) / ACTION_COUNT;
        if self.visited[state] {
            return;
        }
        self.visited[state] = true;
        let scale = r / (S::one() - self.cfg.discount.min(S::from_real(0.999)));
        for a in 0..ACTION_COUNT {
            let prior = if RlAction::from_index(a).hysteresis {
                S::from_real(STABILITY_PRIOR)
            } else {
                S::zero()
            };
            self.q[Self::slot(key, a)] = scale + prior;
        }
    }
}
