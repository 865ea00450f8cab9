//! The adaptive predictive multi-objective evolutionary selector (APMOEA)
//! and its baselines.
//!
//! Per decision step the selector:
//!
//! 1. maps the predicted context onto dynamic objective weights (urgency
//!    boosts the latency weight, forecast loss/load/fade conditions boost
//!    the overhead/compute/security weights),
//! 2. scores the catalog under those weights at the predicted context and
//!    extracts the Pareto front,
//! 3. picks the front member with the lowest predicted loss, granting the
//!    incumbent a hysteresis bonus when the learning agent asks for it,
//! 4. runs one evolutionary generation over (profile, weight-vector)
//!    candidates — tournament parents, convex crossover of weight vectors,
//!    bounded mutation at the RL-tuned rate — which explores weight
//!    preferences and is reported alongside the decision, and
//! 5. feeds the observed latency/switch outcome back to the tabular
//!    Q-learning agent that tunes the mutation rate and the hysteresis.
//!
//! The emitted selection is always the loss argmin restricted to the
//! catalog front, which is what makes the stability guarantee testable: at
//! zero prediction error the selection provably equals the oracle's, and the
//! hysteresis bonus (a fraction of the current loss gap) is too small to
//! override a gap the stability condition protects.

pub mod baselines;
pub mod pareto;
pub mod qlearn;

pub use baselines::{BaselineKind, SelectorKind, SelectorState};
pub use pareto::{crowding_distance, dominates, fast_nondominated_sort, knee_point, pareto_front};
pub use qlearn::{
    reward, RewardParams, RlAction, RlConfig, RlStateKey, QState, ACTION_COUNT,
    MUTATION_MULTIPLIERS,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextVector, Urgency};
use crate::cost::{
    argmin_loss, catalog_objectives, normalize_objectives, profile_losses, t_lat, weighted_loss,
    ChannelModelConfig, CostError, HardwareProfile, ProfileId, WeightVector,
};
use crate::scalar::Scalar;
use crate::Real;

/// How predicted context conditions reshape the base weights.
///
/// Every response is a continuous ramp: identity at nominal conditions,
/// growing once the field crosses its onset. Continuity keeps the composed
/// loss Lipschitz in the context, which the stability analysis relies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightAdjust<S = Real> {
    /// Latency-weight gain at full urgency; the response is quadratic in the
    /// urgency weight so safety dominates control.
    pub urgency_gain: S,
    /// PER above this raises the overhead weight.
    pub per_onset: S,
    pub per_gain: S,
    /// CPU load above this raises the compute weight.
    pub cpu_onset: S,
    pub cpu_gain: S,
    /// SNR below this raises the security weight.
    pub snr_onset_db: S,
    pub snr_gain: S,
    pub snr_scale_db: S,
}

impl<S: Scalar> Default for WeightAdjust<S> {
    fn default() -> Self {
        let s = S::from_real;
        Self {
            urgency_gain: s(5.0),
            per_onset: s(0.1),
            per_gain: s(2.0),
            cpu_onset: s(0.85),
            cpu_gain: s(1.5),
            snr_onset_db: s(4.0),
            snr_gain: s(2.0),
            snr_scale_db: s(10.0),
        }
    }
}

/// Map the predicted context onto dynamic weights.
///
/// Telemetry traffic at nominal channel conditions returns the base weights
/// unchanged; safety urgency strictly raises the latency weight; predicted
/// loss, load, or fade strictly raise their respective weights.
pub fn dynamic_weights<S: Scalar>(
    predicted: &ContextVector<S>,
    base: &WeightVector<S>,
    adjust: &WeightAdjust<S>,
) -> WeightVector<S> {
    let one = S::one();
    let u: S = predicted.urgency.weight();
    let u_floor: S = Urgency::Telemetry.weight();
    let u_ceil: S = Urgency::Safety.weight();
    let frac = (u - u_floor) / (u_ceil - u_floor);
    let urgency_mult = one + adjust.urgency_gain * frac * frac;

    let per_mult = if predicted.per > adjust.per_onset {
        one + adjust.per_gain * (predicted.per - adjust.per_onset) / (one - adjust.per_onset)
    } else {
        one
    };
    let cpu_mult = if predicted.cpu_load > adjust.cpu_onset {
        one + adjust.cpu_gain * (predicted.cpu_load - adjust.cpu_onset)
            / (one - adjust.cpu_onset)
    } else {
        one
    };
    let snr_mult = if predicted.snr_db < adjust.snr_onset_db {
        one + adjust.snr_gain * (adjust.snr_onset_db - predicted.snr_db) / adjust.snr_scale_db
    } else {
        one
    };

    WeightVector {
        w_latency: base.w_latency * urgency_mult,
        w_compute: base.w_compute * cpu_mult,
        w_comm: base.w_comm * per_mult,
        w_security: base.w_security * snr_mult,
    }
}

/// Saturation cap applied to forecast load and error-rate inputs before
/// cost evaluation: a prediction of full saturation is scored just below
/// the model's pole instead of failing. The raw cost operators stay strict.
pub const FORECAST_SATURATION_CAP: f64 = 0.995;

/// Clamp a (possibly displaced) context into the cost model's open domain.
pub fn saturate_for_costs<S: Scalar>(x: &ContextVector<S>) -> ContextVector<S> {
    let cap = S::from_real(FORECAST_SATURATION_CAP);
    let mut x = *x;
    if x.per > cap {
        x.per = cap;
    }
    if x.cpu_load > cap {
        x.cpu_load = cap;
    }
    x
}

/// Losses of all profiles at a context under the dynamically adjusted
/// weights — the loss surface the selector and the oracle both see.
/// Saturated load/error forecasts are evaluated at the model cap.
pub fn composed_profile_losses<S: Scalar>(
    x: &ContextVector<S>,
    base: &WeightVector<S>,
    adjust: &WeightAdjust<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<[S; 4], CostError> {
    let x = saturate_for_costs(x);
    let w = dynamic_weights(&x, base, adjust);
    profile_losses(&x, &w, ch, hw)
}

/// Exhaustive argmin of the loss over the catalog at the given context and
/// weights; ties resolve in fixed profile order. The correctness reference
/// every selector is compared against.
pub fn oracle_select<S: Scalar>(
    x_true_next: &ContextVector<S>,
    w: &WeightVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<ProfileId, CostError> {
    Ok(argmin_loss(&profile_losses(x_true_next, w, ch, hw)?))
}

/// Oracle under the dynamic weight mapping applied to the true context.
pub fn oracle_select_dynamic<S: Scalar>(
    x_true_next: &ContextVector<S>,
    base: &WeightVector<S>,
    adjust: &WeightAdjust<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
) -> Result<ProfileId, CostError> {
    Ok(argmin_loss(&composed_profile_losses(
        x_true_next,
        base,
        adjust,
        ch,
        hw,
    )?))
}

/// One population member: a profile paired with a weight preference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate<S = Real> {
    pub profile: ProfileId,
    pub weights: WeightVector<S>,
}

/// Fixed-size candidate population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population<S = Real> {
    pub members: Vec<Candidate<S>>,
    pub generation: u64,
}

impl<S: Scalar> Population<S> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Optimizer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig<S = Real> {
    /// Population size; the sub-millisecond step budget is stated for
    /// populations up to 40.
    pub population: usize,
    pub tournament_k: usize,
    /// Convex blend coefficient range for crossover.
    pub blend_range: (S, S),
    /// Base per-weight mutation probability (the RL agent scales it).
    pub mutation_rate: S,
    /// Maximum absolute mutation step per weight, on the unit weight scale.
    pub mutation_step: S,
    /// Probability an offspring explores a profile outside its parents'.
    pub profile_explore_prob: S,
    pub base_weights: WeightVector<S>,
    pub adjust: WeightAdjust<S>,
    pub rl: RlConfig<S>,
    /// Disables the learning agent: fixed mutation rate, no hysteresis.
    pub rl_enabled: bool,
    pub seed: u64,
}

impl<S: Scalar> OptimizerConfig<S> {
    pub fn new(base_weights: WeightVector<S>, seed: u64) -> Self {
        let s = S::from_real;
        Self {
            population: 20,
            tournament_k: 2,
            blend_range: (s(0.3), s(0.7)),
            mutation_rate: s(0.2),
            mutation_step: s(0.1),
            profile_explore_prob: s(0.1),
            base_weights,
            adjust: WeightAdjust::default(),
            rl: RlConfig::default(),
            rl_enabled: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.population == 0 {
            return Err(OptimizerError::BadConfig {
                what: "population must be non-empty",
            });
        }
        if self.tournament_k == 0 {
            return Err(OptimizerError::BadConfig {
                what: "tournament size must be at least 1",
            });
        }
        let zero = S::zero();
        let one = S::one();
        if self.mutation_rate < zero || self.mutation_rate > one {
            return Err(OptimizerError::BadConfig {
                what: "mutation_rate must lie in [0, 1]",
            });
        }
        if self.blend_range.0 > self.blend_range.1
            || self.blend_range.0 < zero
            || self.blend_range.1 > one
        {
            return Err(OptimizerError::BadConfig {
                what: "blend_range must be an interval within [0, 1]",
            });
        }
        self.base_weights
            .validate()
            .map_err(OptimizerError::Cost)?;
        if self.base_weights.sum() <= zero {
            return Err(OptimizerError::BadConfig {
                what: "base weights must not be all zero",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {what}")]
    BadConfig { what: &'static str },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("population is empty")]
    EmptyPopulation,
}

/// Outcome of one decision step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorDecision<S = Real> {
    pub selected: ProfileId,
    /// Predicted loss per catalog profile under the dynamic weights.
    pub predicted_loss: [S; 4],
    /// Pareto-front membership per catalog profile at the predicted context.
    pub on_front: [bool; 4],
    pub switched: bool,
    /// Action the learning agent applied this step, when enabled.
    pub rl_action: Option<RlAction>,
}

/// Seed the population: profiles round-robin over the catalog, weights
/// jittered around the base preference and renormalised onto the simplex.
pub fn init_population<S: Scalar>(
    cfg: &OptimizerConfig<S>,
    rng: &mut ChaCha8Rng,
) -> Population<S> {
    let mut members = Vec::with_capacity(cfg.population);
    for k in 0..cfg.population {
        let profile = ProfileId::ALL[k % 4];
        let mut w = cfg.base_weights.as_array();
        for v in w.iter_mut() {
            let jitter = S::from_real(1.0 + 0.3 * rng.random_range(-1.0..=1.0));
            *v = (*v * jitter).max(S::zero());
        }
        members.push(Candidate {
            profile,
            weights: normalize_weights(WeightVector {
                w_latency: w[0],
                w_compute: w[1],
                w_comm: w[2],
                w_security: w[3],
            }),
        });
    }
    Population {
        members,
        generation: 0,
    }
}

fn normalize_weights<S: Scalar>(w: WeightVector<S>) -> WeightVector<S> {
    let sum = w.sum();
    if sum <= S::from_real(1e-9) {
        // A fully zeroed preference carries no information; reset to uniform.
        let q = S::from_real(0.25);
        return WeightVector {
            w_latency: q,
            w_compute: q,
            w_comm: q,
            w_security: q,
        };
    }
    WeightVector {
        w_latency: w.w_latency / sum,
        w_compute: w.w_compute / sum,
        w_comm: w.w_comm / sum,
        w_security: w.w_security / sum,
    }
}

/// Fitness of every candidate: its profile's normalised objectives at the
/// predicted context, scalarised under its own dynamically adjusted weights.
pub fn evaluate_fitness<S: Scalar>(
    pop: &Population<S>,
    predicted: &ContextVector<S>,
    ch: &ChannelModelConfig<S>,
    hw: &HardwareProfile<S>,
    adjust: &WeightAdjust<S>,
) -> Result<Vec<S>, OptimizerError> {
    if pop.is_empty() {
        return Err(OptimizerError::EmptyPopulation);
    }
    let objs = catalog_objectives(predicted, ch, hw)?;
    let norm = normalize_objectives(&objs);
    Ok(pop
        .members
        .iter()
        .map(|c| {
            let w = dynamic_weights(predicted, &c.weights, adjust);
            weighted_loss(&norm[c.profile.index()], &w)
        })
        .collect())
}

/// Tournament selection: sample `k` members (with replacement) and return
/// the lowest-loss one; exact ties resolve by the fixed profile order.
pub fn tournament_select<'a, S: Scalar>(
    pop: &'a Population<S>,
    scores: &[S],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> &'a Candidate<S> {
    debug_assert_eq!(pop.len(), scores.len());
    let mut best_idx = rng.random_range(0..pop.len());
    for _ in 1..k.max(1) {
        let idx = rng.random_range(0..pop.len());
        let better = scores[idx] < scores[best_idx]
            || (scores[idx] == scores[best_idx]
                && pop.members[idx].profile.index() < pop.members[best_idx].profile.index());
        if better {
            best_idx = idx;
        }
    }
    &pop.members[best_idx]
}

/// Crossover plus bounded mutation.
///
/// The child's weights are a convex blend of the parents' (kept on the
/// simplex), each weight then mutates with probability `mutation_rate` by at
/// most `mutation_step`, clamped non-negative. The child's profile comes
/// from one of the parents, or — with a small exploration probability — from
/// anywhere in the catalog. No profile outside the catalog can be produced.
pub fn crossover_mutate<S: Scalar>(
    a: &Candidate<S>,
    b: &Candidate<S>,
    mutation_rate: S,
    cfg: &OptimizerConfig<S>,
    rng: &mut ChaCha8Rng,
) -> Candidate<S> {
    let (lo, hi) = cfg.blend_range;
    let c = S::from_real(rng.random_range(lo.to_real()..=hi.to_real()));
    let wa = a.weights.as_array();
    let wb = b.weights.as_array();
    let mut w = [S::zero(); 4];
    for k in 0..4 {
        // `wa + (1-c)(wb - wa)` so identical parents reproduce exactly.
        w[k] = wa[k] + (S::one() - c) * (wb[k] - wa[k]);
    }
    let mut mutated = false;
    for v in w.iter_mut() {
        if mutation_rate > S::zero() && S::from_real(rng.random::<f64>()) < mutation_rate {
            let step = S::from_real(rng.random_range(-1.0..=1.0)) * cfg.mutation_step;
            *v = (*v + step).max(S::zero());
            mutated = true;
        }
    }
    let weights = WeightVector {
        w_latency: w[0],
        w_compute: w[1],
        w_comm: w[2],
        w_security: w[3],
    };
    let weights = if mutated {
        normalize_weights(weights)
    } else {
        weights
    };

    // Profile exploration is part of mutation: disabled when the rate is 0,
    // so a mutation-free crossover of identical parents is exact identity.
    let explore = mutation_rate > S::zero()
        && S::from_real(rng.random::<f64>()) < cfg.profile_explore_prob;
    let profile = if explore {
        ProfileId::ALL[rng.random_range(0..4)]
    } else if a.profile == b.profile || rng.random::<bool>() {
        a.profile
    } else {
        b.profile
    };
    Candidate { profile, weights }
}

/// The adaptive selector's full mutable state.
#[derive(Debug, Clone)]
pub struct ApmoeaState<S = Real> {
    cfg: OptimizerConfig<S>,
    pop: Population<S>,
    q: QState<S>,
    incumbent: Option<ProfileId>,
    rng: ChaCha8Rng,
}

impl<S: Scalar> ApmoeaState<S> {
    pub fn new(cfg: OptimizerConfig<S>) -> Result<Self, OptimizerError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pop = init_population(&cfg, &mut rng);
        Ok(Self {
            q: QState::new(cfg.rl),
            cfg,
            pop,
            incumbent: None,
            rng,
        })
    }

    pub fn config(&self) -> &OptimizerConfig<S> {
        &self.cfg
    }

    pub fn population(&self) -> &Population<S> {
        &self.pop
    }

    pub fn q_state(&self) -> &QState<S> {
        &self.q
    }

    pub fn incumbent(&self) -> Option<ProfileId> {
        self.incumbent
    }

    /// Execute one decision step: dynamic weights, Pareto-restricted loss
    /// minimisation with optional hysteresis, one evolutionary generation,
    /// and the Q-learning feedback update.
    pub fn step(
        &mut self,
        x_t: &ContextVector<S>,
        x_hat: &ContextVector<S>,
        ch: &ChannelModelConfig<S>,
        hw: &HardwareProfile<S>,
    ) -> Result<SelectorDecision<S>, OptimizerError> {
        let x_t = &saturate_for_costs(x_t);
        let x_hat = &saturate_for_costs(x_hat);
        let w_t = dynamic_weights(x_hat, &self.cfg.base_weights, &self.cfg.adjust);
        let objs = catalog_objectives(x_hat, ch, hw)?;
        let norm = normalize_objectives(&objs);
        let mut predicted_loss = [S::zero(); 4];
        for k in 0..4 {
            predicted_loss[k] = weighted_loss(&norm[k], &w_t);
        }
        let front = pareto_front(&objs);
        let mut on_front = [false; 4];
        for &i in &front {
            on_front[i] = true;
        }

        // Learning agent: observe the pre-decision state, pick an action.
        let incumbent = self.incumbent;
        let rl_action = if self.cfg.rl_enabled {
            let state_profile = incumbent.unwrap_or(ProfileId::Kyber768);
            let observed_lat = t_lat(
                &crate::cost::profile::<S>(state_profile),
                x_t,
                ch,
                hw,
            )?;
            let key = RlStateKey::new(observed_lat, x_t.snr_db, state_profile);
            let action = self.q.choose(&key, &mut self.rng);
            Some((key, action))
        } else {
            None
        };

        // Selection: lowest predicted loss on the front, with the incumbent
        // granted the hysteresis bonus when the agent asks for one.
        let mut effective = predicted_loss;
        if let (Some((_, action)), Some(inc)) = (rl_action.as_ref(), incumbent) {
            if action.hysteresis && on_front[inc.index()] {
                effective[inc.index()] = effective[inc.index()] - self.cfg.rl.hysteresis_bonus;
            }
        }
        let mut selected = front[0];
        for &i in &front[1..] {
            if effective[i] < effective[selected] {
                selected = i;
            }
        }
        let selected = ProfileId::ALL[selected];
        let switched = incumbent.is_some_and(|inc| inc != selected);

        // One evolutionary generation over the candidate pool.
        let mutation_rate = match rl_action {
            Some((_, action)) => {
                (self.cfg.mutation_rate * action.mutation_multiplier::<S>()).min(S::one())
            }
            None => self.cfg.mutation_rate,
        };
        let scores = evaluate_fitness(&self.pop, x_hat, ch, hw, &self.cfg.adjust)?;
        let n = self.pop.len();
        let mut offspring = Vec::with_capacity(n);
        for _ in 0..n {
            let p1 = *tournament_select(&self.pop, &scores, self.cfg.tournament_k, &mut self.rng);
            let p2 = *tournament_select(&self.pop, &scores, self.cfg.tournament_k, &mut self.rng);
            offspring.push(crossover_mutate(
                &p1,
                &p2,
                mutation_rate,
                &self.cfg,
                &mut self.rng,
            ));
        }
        // (μ+λ) survival: best N of parents and offspring.
        let mut pool: Vec<Candidate<S>> = Vec::with_capacity(2 * n);
        pool.extend_from_slice(&self.pop.members);
        pool.extend_from_slice(&offspring);
        let mut pool_scores = scores;
        let offspring_pop = Population {
            members: offspring,
            generation: self.pop.generation,
        };
        pool_scores.extend(evaluate_fitness(
            &offspring_pop,
            x_hat,
            ch,
            hw,
            &self.cfg.adjust,
        )?);
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| {
            pool_scores[a]
                .partial_cmp(&pool_scores[b])
                .expect("finite fitness")
                .then(a.cmp(&b))
        });
        self.pop = Population {
            members: order[..n].iter().map(|&i| pool[i]).collect(),
            generation: self.pop.generation + 1,
        };

        // Feedback: reward the observed outcome, advance the agent.
        if let Some((key, action)) = rl_action {
            let observed_lat = t_lat(&crate::cost::profile::<S>(selected), x_t, ch, hw)?;
            let n_switch = if switched { S::one() } else { S::zero() };
            let r = reward(
                observed_lat,
                n_switch,
                x_t.snr_db,
                S::from_real(crate::cost::profile::<S>(selected).sec_bits as f64),
                &self.cfg.rl.reward,
            );
            let predicted_lat = objs[selected.index()].t_lat_ms;
            let next_key = RlStateKey::new(predicted_lat, x_hat.snr_db, selected);
            self.q.update(&key, action, r, &next_key);
        }

        self.incumbent = Some(selected);
        Ok(SelectorDecision {
            selected,
            predicted_loss,
            on_front,
            switched,
            rl_action: rl_action.map(|(_, a)| a),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        default_base_weights, nominal_channel, nominal_context, vehicle_hardware,
    };
    use approx::assert_relative_eq;

    fn cfg(seed: u64) -> OptimizerConfig {
        OptimizerConfig::new(default_base_weights(), seed)
    }

    #[test]
    fn dynamic_weights_identity_at_nominal_telemetry() {
        let base = default_base_weights::<f64>();
        let out = dynamic_weights(&nominal_context(), &base, &WeightAdjust::default());
        assert_eq!(out, base);
    }

    #[test]
    fn safety_urgency_strictly_raises_latency_weight() {
        let base = default_base_weights::<f64>();
        let mut x = nominal_context::<f64>();
        x.urgency = Urgency::Safety;
        let out = dynamic_weights(&x, &base, &WeightAdjust::default());
        assert!(out.w_latency > base.w_latency);
        assert_eq!(out.w_compute, base.w_compute);
        let mut x = nominal_context::<f64>();
        x.urgency = Urgency::Control;
        let control = dynamic_weights(&x, &base, &WeightAdjust::default());
        assert!(control.w_latency > base.w_latency);
        assert!(control.w_latency < out.w_latency);
    }

    #[test]
    fn high_per_strictly_raises_comm_weight() {
        let base = default_base_weights::<f64>();
        let mut x = nominal_context::<f64>();
        x.per = 0.3;
        let out = dynamic_weights(&x, &base, &WeightAdjust::default());
        assert!(out.w_comm > base.w_comm);
    }

    #[test]
    fn high_load_and_low_snr_raise_their_weights() {
        let base = default_base_weights::<f64>();
        let adjust = WeightAdjust::default();
        let mut x = nominal_context::<f64>();
        x.cpu_load = 0.95;
        assert!(dynamic_weights(&x, &base, &adjust).w_compute > base.w_compute);
        let mut x = nominal_context::<f64>();
        x.snr_db = 2.0;
        assert!(dynamic_weights(&x, &base, &adjust).w_security > base.w_security);
    }

    #[test]
    fn fitness_of_single_candidate_matches_direct_loss() {
        let pop = Population {
            members: vec![Candidate {
                profile: ProfileId::Kyber768,
                weights: default_base_weights(),
            }],
            generation: 0,
        };
        let x = nominal_context::<f64>();
        let ch = nominal_channel();
        let hw = vehicle_hardware();
        let scores = evaluate_fitness(&pop, &x, &ch, &hw, &WeightAdjust::default()).unwrap();
        assert_eq!(scores.len(), 1);
        let direct = composed_profile_losses(
            &x,
            &default_base_weights(),
            &WeightAdjust::default(),
            &ch,
            &hw,
        )
        .unwrap()[ProfileId::Kyber768.index()];
        assert_relative_eq!(scores[0], direct, max_relative = 1e-12);
    }

    #[test]
    fn duplicated_candidates_score_identically() {
        let member = Candidate {
            profile: ProfileId::Dilithium3,
            weights: WeightVector::new(0.4, 0.1, 0.4, 0.1),
        };
        let pop = Population {
            members: vec![member, member],
            generation: 0,
        };
        let scores = evaluate_fitness(
            &pop,
            &nominal_context::<f64>(),
            &nominal_channel(),
            &vehicle_hardware(),
            &WeightAdjust::default(),
        )
        .unwrap();
        assert_eq!(scores[0], scores[1]);
    }

    #[test]
    fn fitness_cross_checks_against_cost_module_for_random_populations() {
        let ch = nominal_channel();
        let hw = vehicle_hardware();
        let adjust = WeightAdjust::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..100 {
            let x = {
                let mut x = nominal_context::<f64>();
                x.snr_db = rng.random_range(3.0..30.0);
                x.per = rng.random_range(0.0..0.25);
                x.cpu_load = rng.random_range(0.45..0.9);
                x
            };
            let pop = init_population(&cfg(trial), &mut rng);
            let scores = evaluate_fitness(&pop, &x, &ch, &hw, &adjust).unwrap();
            let objs = catalog_objectives(&x, &ch, &hw).unwrap();
            let norm = normalize_objectives(&objs);
            for (cand, got) in pop.members.iter().zip(scores) {
                let w = dynamic_weights(&x, &cand.weights, &adjust);
                let expect = weighted_loss(&norm[cand.profile.index()], &w);
                assert_relative_eq!(got, expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tournament_of_one_returns_the_candidate() {
        let pop = Population {
            members: vec![Candidate {
                profile: ProfileId::McEliece348864,
                weights: default_base_weights(),
            }],
            generation: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let winner = tournament_select(&pop, &[0.5], 2, &mut rng);
        assert_eq!(winner.profile, ProfileId::McEliece348864);
    }

    #[test]
    fn tournament_prefers_the_lower_loss_when_both_sampled() {
        let pop = Population {
            members: vec![
                Candidate {
                    profile: ProfileId::Kyber768,
                    weights: default_base_weights(),
                },
                Candidate {
                    profile: ProfileId::SphincsPlus128s,
                    weights: default_base_weights(),
                },
            ],
            generation: 0,
        };
        let scores = [0.2, 0.9];
        // Over many seeded draws of a 2-member population with k = 2, any
        // tournament that samples both members must return the better one.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut saw_better = 0;
        for _ in 0..1000 {
            let w = tournament_select(&pop, &scores, 2, &mut rng);
            if w.profile == ProfileId::Kyber768 {
                saw_better += 1;
            }
        }
        // P(pick worse) = P(both draws hit the worse member) = 1/4.
        assert!(saw_better > 600, "got {saw_better}");
    }

    #[test]
    fn tournament_selection_frequency_decreases_with_loss_rank() {
        let members: Vec<Candidate> = (0..10)
            .map(|k| Candidate {
                profile: ProfileId::ALL[k % 4],
                weights: default_base_weights(),
            })
            .collect();
        let pop = Population {
            members,
            generation: 0,
        };
        let scores: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            let w = tournament_select(&pop, &scores, 2, &mut rng) as *const _;
            let idx = (0..10)
                .find(|&i| std::ptr::eq(w, &pop.members[i]))
                .unwrap();
            counts[idx] += 1;
        }
        // Frequency should be monotone decreasing in loss rank, up to
        // sampling noise; compare in coarse pairs to stay robust.
        for k in 0..8 {
            assert!(
                counts[k] + 120 > counts[k + 2],
                "rank {k}: {counts:?}"
            );
        }
        assert!(counts[0] > counts[9] * 3);
    }

    #[test]
    fn crossover_of_identical_parents_without_mutation_is_identity() {
        let parent = Candidate {
            profile: ProfileId::Kyber768,
            weights: WeightVector::new(0.4, 0.3, 0.2, 0.1),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let child = crossover_mutate(&parent, &parent, 0.0, &cfg(0), &mut rng);
            assert_eq!(child.weights, parent.weights);
            assert_eq!(child.profile, ProfileId::Kyber768);
        }
    }

    #[test]
    fn midpoint_blend_averages_the_parent_weights() {
        let a = Candidate {
            profile: ProfileId::Kyber768,
            weights: WeightVector::new(1.0, 0.0, 0.0, 0.0),
        };
        let b = Candidate {
            profile: ProfileId::Kyber768,
            weights: WeightVector::new(0.0, 1.0, 0.0, 0.0),
        };
        let mut c = cfg(0);
        c.blend_range = (0.5, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let child = crossover_mutate(&a, &b, 0.0, &c, &mut rng);
        assert_relative_eq!(child.weights.w_latency, 0.5, max_relative = 1e-12);
        assert_relative_eq!(child.weights.w_compute, 0.5, max_relative = 1e-12);
        assert_eq!(child.weights.w_comm, 0.0);
        assert_eq!(child.weights.w_security, 0.0);
    }

    #[test]
    fn offspring_are_always_valid_catalog_members_with_nonnegative_weights() {
        let c = cfg(11);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pop = init_population(&c, &mut rng);
        let scores = vec![0.0; pop.len()];
        for _ in 0..10_000 {
            let p1 = *tournament_select(&pop, &scores, 2, &mut rng);
            let p2 = *tournament_select(&pop, &scores, 2, &mut rng);
            let child = crossover_mutate(&p1, &p2, 0.8, &c, &mut rng);
            assert!(ProfileId::ALL.contains(&child.profile));
            for w in child.weights.as_array() {
                assert!(w >= 0.0);
            }
        }
    }

    #[test]
    fn constant_context_zero_error_matches_oracle_and_never_switches() {
        let ch = nominal_channel();
        let hw = vehicle_hardware();
        let mut x = nominal_context::<f64>();
        x.urgency = Urgency::Safety;
        let mut state = ApmoeaState::new(cfg(5)).unwrap();
        let oracle = oracle_select_dynamic(
            &x,
            &default_base_weights(),
            &WeightAdjust::default(),
            &ch,
            &hw,
        )
        .unwrap();
        let mut switches = 0;
        for _ in 0..100 {
            let d = state.step(&x, &x, &ch, &hw).unwrap();
            assert_eq!(d.selected, oracle);
            if d.switched {
                switches += 1;
            }
        }
        assert_eq!(switches, 0);
    }

    #[test]
    fn zero_mutation_uniform_population_reduces_to_argmin() {
        let ch = nominal_channel();
        let hw = vehicle_hardware();
        let x = nominal_context::<f64>();
        let mut c = cfg(9);
        c.mutation_rate = 0.0;
        c.rl_enabled = false;
        let mut state = ApmoeaState::new(c).unwrap();
        let losses = composed_profile_losses(
            &x,
            &default_base_weights(),
            &WeightAdjust::default(),
            &ch,
            &hw,
        )
        .unwrap();
        let d = state.step(&x, &x, &ch, &hw).unwrap();
        assert_eq!(d.selected, argmin_loss(&losses));
    }

    #[test]
    fn fixed_seed_and_inputs_reproduce_decision_and_population() {
        let ch = nominal_channel();
        let hw = vehicle_hardware();
        let x = nominal_context::<f64>();
        let mut a = ApmoeaState::new(cfg(13)).unwrap();
        let mut b = ApmoeaState::new(cfg(13)).unwrap();
        for _ in 0..20 {
            let da = a.step(&x, &x, &ch, &hw).unwrap();
            let db = b.step(&x, &x, &ch, &hw).unwrap();
            assert_eq!(da, db);
        }
        assert_eq!(a.population(), b.population());
    }

    #[test]
    fn selected_profile_is_always_on_the_front() {
        let ch = nominal_channel();
        let hw = vehicle_hardware();
        let mut state = ApmoeaState::new(cfg(21)).unwrap();
        let trace = crate::scenario::standard_trace::<f64>(3).unwrap();
        for pair in trace.windows(2).take(500) {
            let d = state.step(&pair[0], &pair[1], &ch, &hw).unwrap();
            assert!(d.on_front[d.selected.index()]);
        }
    }

    #[test]
    fn oracle_examples_brute_force() {
        let ch = nominal_channel();
        let hw = vehicle_hardware();
        let x = nominal_context::<f64>();
        assert_eq!(
            oracle_select(&x, &WeightVector::new(0.0, 0.0, 1.0, 0.0), &ch, &hw).unwrap(),
            ProfileId::Kyber768
        );
        assert_eq!(
            oracle_select(&x, &WeightVector::new(1.0, 0.0, 0.0, 0.0), &ch, &hw).unwrap(),
            ProfileId::McEliece348864
        );
        assert_eq!(
            oracle_select(&x, &WeightVector::new(0.0, 0.0, 0.0, 0.0), &ch, &hw).unwrap(),
            ProfileId::Kyber768
        );
    }
}
