//! Scripted channel and context attacks against the transition protocol,
//! plus the selection-robustness probe.
//!
//! Each scenario perturbs one honest upgrade exchange through a declarative
//! [`ChannelPlan`]: message dispositions (deliver/delay/drop), post-signing
//! tampering, injected messages, replays, and one-sided context
//! manipulation. Runs are deterministic per seed. The adversary owns the
//! channel — it can capture, reorder, delay, drop, rewrite, and inject — but
//! it cannot forge tags it does not hold keys for; the injected-downgrade
//! scenario deliberately hands it valid key material to show the monotonic
//! check alone stops the attack.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::perturb_context;
use crate::cost::ProfileId;
use crate::optimizer::composed_profile_losses;
use crate::protocol::{
    endpoint_pair, EndpointState, KeyStore, Nonce, ProtocolConfig, ProtocolError, Signer,
    TransitionMessage, VerifyOutcome,
};
use crate::scenario::{
    default_base_weights, nominal_channel, nominal_context, vehicle_hardware,
};
use crate::optimizer::WeightAdjust;
use crate::Real;

/// Threat-model attack scenarios; the first five map one-to-one onto the
/// failure-mode table, the last targets the selector instead of the
/// protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackScenario {
    /// Re-deliver a captured, previously accepted proposal after commit.
    ReplayOldVersion,
    /// Inject a validly signed proposal carrying a lower version.
    ForcedDowngrade,
    /// Flip the version counter of a signed proposal in flight.
    CounterTamper,
    /// Drop the acknowledgment.
    MessageLoss,
    /// Delay the acknowledgment past the proposer's deadline, then deliver.
    AsymmetricUpdate,
    /// Perturb one endpoint's observed context stream by this magnitude.
    ContextManipulation(Real),
}

impl AttackScenario {
    /// The five protocol rows of the failure-mode table.
    pub const PROTOCOL_SCENARIOS: [AttackScenario; 5] = [
        AttackScenario::ReplayOldVersion,
        AttackScenario::ForcedDowngrade,
        AttackScenario::CounterTamper,
        AttackScenario::MessageLoss,
        AttackScenario::AsymmetricUpdate,
    ];

    pub fn label(&self) -> String {
        match self {
            AttackScenario::ReplayOldVersion => "replay-old-version".into(),
            AttackScenario::ForcedDowngrade => "forced-downgrade".into(),
            AttackScenario::CounterTamper => "counter-tamper".into(),
            AttackScenario::MessageLoss => "message-loss".into(),
            AttackScenario::AsymmetricUpdate => "asymmetric-update".into(),
            AttackScenario::ContextManipulation(m) => format!("context-manipulation({m})"),
        }
    }
}

/// Delivery disposition of one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disposition {
    Deliver { delay_ms: u64 },
    Drop,
}

impl Disposition {
    fn on_time() -> Self {
        Disposition::Deliver { delay_ms: 10 }
    }
}

/// Declarative schedule of one proposal/ack/finalize exchange, as the
/// adversary shapes it. The honest plan delivers everything on time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub proposal: Disposition,
    pub ack: Disposition,
    pub finalize: Disposition,
    /// Re-deliver the captured proposal once the exchange settled.
    pub replay_proposal_after_commit: bool,
    /// Inject a validly signed proposal with this version instead of the
    /// honest one.
    pub inject_downgrade_to: Option<u64>,
    /// Rewrite the proposal's version counter in flight (post-signing).
    pub tamper_proposal_version: Option<u64>,
    /// Feed the receiver a perturbed view of the shared context.
    pub receiver_context_perturbation: Option<Real>,
}

impl Default for ChannelPlan {
    fn default() -> Self {
        Self {
            proposal: Disposition::on_time(),
            ack: Disposition::on_time(),
            finalize: Disposition::on_time(),
            replay_proposal_after_commit: false,
            inject_downgrade_to: None,
            tamper_proposal_version: None,
            receiver_context_perturbation: None,
        }
    }
}

/// Rewrite an honest channel plan according to the scenario.
pub fn apply_attack(scenario: AttackScenario, plan: &ChannelPlan) -> ChannelPlan {
    let mut plan = plan.clone();
    match scenario {
        AttackScenario::ReplayOldVersion => plan.replay_proposal_after_commit = true,
        AttackScenario::ForcedDowngrade => plan.inject_downgrade_to = Some(1),
        AttackScenario::CounterTamper => plan.tamper_proposal_version = Some(1),
        AttackScenario::MessageLoss => plan.ack = Disposition::Drop,
        AttackScenario::AsymmetricUpdate => {
            // Past the proposer's two-round-trip deadline.
            plan.ack = Disposition::Deliver { delay_ms: 200 }
        }
        AttackScenario::ContextManipulation(m) => {
            if m > 0.0 {
                plan.receiver_context_perturbation = Some(m);
            }
        }
    }
    plan
}

/// Outcome of one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub scenario: String,
    pub seed: u64,
    pub detected: bool,
    pub proposer_version: u64,
    pub receiver_version: u64,
    /// Versions regressed below their pre-attack values at any point.
    pub version_regressed: bool,
    pub notes: String,
}

struct Exchange {
    proposer: EndpointState,
    receiver: EndpointState,
    rng: ChaCha8Rng,
    now_ms: u64,
}

impl Exchange {
    fn new(seed: u64, initial_version: u64) -> Self {
        let (proposer, receiver) = endpoint_pair(seed, initial_version, ProtocolConfig::default());
        Self {
            proposer,
            receiver,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
            now_ms: 0,
        }
    }

    fn advance(&mut self, dt: u64) {
        self.now_ms += dt;
        self.proposer.tick(self.now_ms);
        self.receiver.tick(self.now_ms);
    }

    /// Drive one upgrade exchange under the plan. Returns the outcomes the
    /// receiver produced for delivered proposals plus the proposer's
    /// commit/timeout result.
    fn run_upgrade(&mut self, v_next: u64, plan: &ChannelPlan) -> Vec<VerifyOutcome> {
        let mut outcomes = Vec::new();
        let x = nominal_context::<Real>();
        self.proposer.observe_context(&x);
        match plan.receiver_context_perturbation {
            Some(m) => {
                let seen = perturb_context(&x, m, self.rng.get_seed()[0] as u64 ^ 0xc0);
                self.receiver.observe_context(&seen);
            }
            None => self.receiver.observe_context(&x),
        }

        let msg = match self
            .proposer
            .propose_upgrade(v_next, &x, &mut self.rng, self.now_ms)
        {
            Ok(m) => m,
            Err(_) => return outcomes,
        };
        let mut wire = msg.encode();
        if let Some(v) = plan.tamper_proposal_version {
            // Rewrite the version field in place; the tag no longer matches.
            let tampered = TransitionMessage {
                proposed_version: v,
                ..TransitionMessage::decode(&wire).expect("self-encoded message decodes")
            };
            wire = tampered.encode();
        }

        let proposal_bytes = wire.clone();
        match plan.proposal {
            Disposition::Drop => {
                self.advance(100);
                return outcomes;
            }
            Disposition::Deliver { delay_ms } => {
                self.advance(delay_ms);
                let outcome = self.receiver.verify_proposal(&proposal_bytes, self.now_ms);
                outcomes.push(outcome);
                if !outcome.accepted() {
                    self.advance(100);
                    return outcomes;
                }
            }
        }

        let ack = match self.receiver.acknowledge(self.now_ms) {
            Ok(a) => a,
            Err(_) => return outcomes,
        };
        match plan.ack {
            Disposition::Drop => {
                // Nothing arrives; both deadlines expire.
                self.advance(200);
            }
            Disposition::Deliver { delay_ms } => {
                self.advance(delay_ms);
                self.proposer.tick(self.now_ms);
                match self.proposer.commit(&ack.encode(), self.now_ms) {
                    Ok(fin) => match plan.finalize {
                        Disposition::Drop => {
                            self.advance(200);
                        }
                        Disposition::Deliver { delay_ms } => {
                            self.advance(delay_ms);
                            outcomes.push(self.receiver.apply_finalize(&fin.encode(), self.now_ms));
                        }
                    },
                    Err(ProtocolError::NoPendingProposal) => {
                        // The deadline already rolled the proposal back; the
                        // late ack lands on nothing.
                        outcomes.push(VerifyOutcome::RejectTimeout);
                        self.advance(200);
                    }
                    Err(_) => {
                        self.advance(200);
                    }
                }
            }
        }

        if plan.replay_proposal_after_commit {
            self.advance(50);
            outcomes.push(self.receiver.verify_proposal(&proposal_bytes, self.now_ms));
        }
        self.advance(200);
        outcomes
    }

    /// Inject a proposal signed with legitimate key material but an
    /// arbitrary version counter.
    fn inject_signed_proposal(&mut self, version: u64, key_seed: u64) -> VerifyOutcome {
        let x = nominal_context::<Real>();
        self.receiver.observe_context(&x);
        let keys = KeyStore::from_seed(key_seed);
        let digest = crate::context::context_hash(&x);
        let nonce = Nonce::random(&mut self.rng);
        let payload = TransitionMessage::signed_payload(version, &digest, &nonce);
        let msg = TransitionMessage {
            proposed_version: version,
            context_digest: digest,
            nonce,
            signature: keys.signer_for(self.receiver.current_version()).sign(&payload),
        };
        self.advance(10);
        self.receiver.verify_proposal(&msg.encode(), self.now_ms)
    }
}

/// Execute one scenario from a fresh protocol state.
pub fn run_scenario(scenario: AttackScenario, seed: u64) -> AttackOutcome {
    let initial_version = 2;
    let mut ex = Exchange::new(seed, initial_version);
    let plan = apply_attack(scenario, &ChannelPlan::default());

    let (detected, notes) = match scenario {
        AttackScenario::ReplayOldVersion => {
            let outcomes = ex.run_upgrade(3, &plan);
            let replay = outcomes.last().copied();
            (
                replay == Some(VerifyOutcome::RejectStaleNonce),
                format!("replay outcome {:?}", replay),
            )
        }
        AttackScenario::ForcedDowngrade => {
            let outcome = ex.inject_signed_proposal(1, seed);
            (
                outcome == VerifyOutcome::RejectDowngrade,
                format!("injected downgrade outcome {outcome}"),
            )
        }
        AttackScenario::CounterTamper => {
            let outcomes = ex.run_upgrade(3, &plan);
            (
                outcomes.first().copied() == Some(VerifyOutcome::RejectBadSignature),
                format!("tampered proposal outcome {:?}", outcomes.first()),
            )
        }
        AttackScenario::MessageLoss => {
            let _ = ex.run_upgrade(3, &plan);
            let rolled_back = ex.proposer.rollbacks() > 0;
            let both_old = ex.proposer.current_version() == initial_version
                && ex.receiver.current_version() == initial_version;
            (
                rolled_back && both_old && !ex.proposer.has_pending() && !ex.receiver.has_stage(),
                "ack dropped; atomic confirmation left no partial update".into(),
            )
        }
        AttackScenario::AsymmetricUpdate => {
            let outcomes = ex.run_upgrade(3, &plan);
            let timed_out = outcomes.contains(&VerifyOutcome::RejectTimeout);
            let both_old = ex.proposer.current_version() == initial_version
                && ex.receiver.current_version() == initial_version;
            (
                timed_out && both_old && ex.proposer.rollbacks() > 0,
                "delayed ack expired; safe rollback on both sides".into(),
            )
        }
        AttackScenario::ContextManipulation(m) => {
            let outcomes = ex.run_upgrade(3, &plan);
            if m > 0.0 {
                (
                    outcomes.first().copied() == Some(VerifyOutcome::RejectContextMismatch),
                    format!("manipulated context outcome {:?}", outcomes.first()),
                )
            } else {
                (
                    outcomes.iter().all(|o| o.accepted()),
                    "zero magnitude: schedule unchanged, upgrade completed".into(),
                )
            }
        }
    };

    let expected_final = match scenario {
        // The legitimate upgrade completes around the replay.
        AttackScenario::ReplayOldVersion => 3,
        AttackScenario::ContextManipulation(0.0) => 3,
        _ => initial_version,
    };
    let regressed = ex.proposer.current_version() < initial_version
        || ex.receiver.current_version() < initial_version;
    let versions_as_expected = ex.proposer.current_version() == expected_final
        && ex.receiver.current_version() == expected_final;

    AttackOutcome {
        scenario: scenario.label(),
        seed,
        detected: detected && versions_as_expected && !regressed,
        proposer_version: ex.proposer.current_version(),
        receiver_version: ex.receiver.current_version(),
        version_regressed: regressed,
        notes,
    }
}

/// Execute every scenario × seed from fresh protocol state.
pub fn run_attack_suite(scenarios: &[AttackScenario], seeds: &[u64]) -> Vec<AttackOutcome> {
    let mut out = Vec::with_capacity(scenarios.len() * seeds.len());
    for &scenario in scenarios {
        for &seed in seeds {
            out.push(run_scenario(scenario, seed));
        }
    }
    out
}

/// The scripted five-attempt sequence: two legitimate upgrades followed by
/// three downgrade attempts. Returns 1 for accepted, 0 for rejected.
pub fn run_upgrade_downgrade_script(seed: u64) -> Vec<u8> {
    let mut ex = Exchange::new(seed, 1);
    let plan = ChannelPlan::default();
    let mut results = Vec::with_capacity(5);

    for v in [2u64, 3] {
        let outcomes = ex.run_upgrade(v, &plan);
        let completed = ex.proposer.current_version() == v && ex.receiver.current_version() == v;
        results.push(u8::from(completed && outcomes.iter().all(|o| o.accepted())));
    }
    for v in [2u64, 1, 2] {
        let outcome = ex.inject_signed_proposal(v, seed);
        results.push(u8::from(outcome.accepted()));
    }
    results
}

/// Ordering report for one manipulation magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub magnitude: Real,
    /// Loss argsort identical to the honest argsort across all probed seeds.
    pub preserved: bool,
    pub first_violation_seed: Option<u64>,
}

fn loss_argsort(losses: &[Real; 4]) -> [usize; 4] {
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| losses[a].partial_cmp(&losses[b]).expect("finite loss"));
    idx
}

/// Probe selection-ordering robustness: for each magnitude, perturb the
/// nominal context across seeds and report whether the profile-loss argsort
/// matches the honest one every time. A failed loss evaluation (the
/// manipulation drove the model into a singular state) counts as a
/// violation.
pub fn selection_bias_probe(magnitudes: &[Real], seeds_per_magnitude: u64) -> Vec<OrderingReport> {
    let base = default_base_weights::<Real>();
    let adjust = WeightAdjust::default();
    let ch = nominal_channel::<Real>();
    let hw = vehicle_hardware::<Real>();
    let x = nominal_context::<Real>();
    let honest = composed_profile_losses(&x, &base, &adjust, &ch, &hw)
        .expect("nominal scenario evaluates");
    let honest_order = loss_argsort(&honest);

    magnitudes
        .iter()
        .map(|&m| {
            let mut first_violation_seed = None;
            for seed in 0..seeds_per_magnitude {
                let seen = perturb_context(&x, m, seed);
                let order = composed_profile_losses(&seen, &base, &adjust, &ch, &hw)
                    .ok()
                    .map(|l| loss_argsort(&l));
                if order != Some(honest_order) {
                    first_violation_seed = Some(seed);
                    break;
                }
            }
            OrderingReport {
                magnitude: m,
                preserved: first_violation_seed.is_none(),
                first_violation_seed,
            }
        })
        .collect()
}

/// Honest loss ordering at the nominal context, lowest first. Useful for
/// reports.
pub fn nominal_loss_ordering() -> [ProfileId; 4] {
    let base = default_base_weights::<Real>();
    let adjust = WeightAdjust::default();
    let losses = composed_profile_losses(
        &nominal_context::<Real>(),
        &base,
        &adjust,
        &nominal_channel::<Real>(),
        &vehicle_hardware::<Real>(),
    )
    .expect("nominal scenario evaluates");
    let order = loss_argsort(&losses);
    [
        ProfileId::ALL[order[0]],
        ProfileId::ALL[order[1]],
        ProfileId::ALL[order[2]],
        ProfileId::ALL[order[3]],
    ]
}
