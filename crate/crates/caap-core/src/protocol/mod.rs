//! Two-endpoint monotonic PQC version-upgrade protocol.
//!
//! One upgrade is a proposal/acknowledgment exchange plus a finalisation
//! notice:
//!
//! ```text
//! proposer                                receiver
//!   propose_upgrade ── TransitionMessage ──▶ verify_proposal (sig, v >= v_t,
//!   pending, deadline                         digest, fresh nonce) → stage
//!   commit ◀────────────── Ack ───────────── acknowledge (signed echo)
//!   current_version = v'
//!   └────────────────── Finalize ──────────▶ apply_finalize
//!                                             current_version = v'
//! ```
//!
//! Either side abandons an exchange whose deadline passes: the proposer
//! rolls back its pending proposal, the receiver discards its stage. A
//! committed version is never un-committed — `current_version` is
//! non-decreasing on both endpoints over any message schedule — and a lost
//! or tampered message leaves both endpoints on the old version. Replays
//! are caught by the bounded seen-nonce window, tampering by the signature
//! tag, downgrades by the monotonic check, and stale context bindings by
//! digest comparison against the endpoint's own quantised context snapshot.
//!
//! Verification order is fixed: signature, monotonicity, context digest,
//! nonce freshness. Signature checks accept the current version's key or —
//! one step of grace for messages signed just before an upgrade — the
//! previous version's, so a post-upgrade replay fails on nonce freshness
//! rather than dissolving into a signature error.

pub mod signer;
pub mod wire;

pub use signer::{KeyStore, KeyedTagSigner, Signer};
pub use wire::{Ack, Finalize, Nonce, TransitionMessage, WireError, NONCE_LEN, TAG_LEN};

use std::collections::{HashSet, VecDeque};
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{context_hash, ContextDigest, ContextVector};
use crate::scalar::Scalar;

/// Result of verifying one inbound message, mapped one-to-one onto the
/// failure-mode analysis rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerifyOutcome {
    Accept,
    RejectDowngrade,
    RejectStaleNonce,
    RejectContextMismatch,
    RejectBadSignature,
    RejectTimeout,
}

impl VerifyOutcome {
    pub fn accepted(self) -> bool {
        self == VerifyOutcome::Accept
    }
}

impl fmt::Display for VerifyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VerifyOutcome::Accept => "accept",
            VerifyOutcome::RejectDowngrade => "reject-downgrade",
            VerifyOutcome::RejectStaleNonce => "reject-stale-nonce",
            VerifyOutcome::RejectContextMismatch => "reject-context-mismatch",
            VerifyOutcome::RejectBadSignature => "reject-bad-signature",
            VerifyOutcome::RejectTimeout => "reject-timeout",
        };
        f.write_str(s)
    }
}

/// Protocol timing and retention configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Round-trip estimate the deadlines are derived from.
    pub rtt_estimate_ms: u64,
    /// Seen-nonce retention window (FIFO).
    pub nonce_retention: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            rtt_estimate_ms: 20,
            nonce_retention: 10_000,
        }
    }
}

impl ProtocolConfig {
    /// Proposer abandons a pending proposal after two round trips.
    pub fn pending_timeout_ms(&self) -> u64 {
        2 * self.rtt_estimate_ms
    }

    /// Receiver discards a stage once the finalisation is overdue.
    pub fn stage_timeout_ms(&self) -> u64 {
        3 * self.rtt_estimate_ms
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("refusing to propose downgrade {proposed} below current version {current}")]
    DowngradeRefused { current: u64, proposed: u64 },
    #[error("a proposal is already pending")]
    ProposalInFlight,
    #[error("no staged proposal to acknowledge")]
    NoStagedProposal,
    #[error("staged proposal was already acknowledged")]
    AlreadyAcknowledged,
    #[error("no pending proposal to commit")]
    NoPendingProposal,
    #[error("acknowledgment rejected ({0}); rolled back")]
    AckRejected(VerifyOutcome),
}

/// One transcript line: send, receive, outcome, commit, or rollback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub t_ms: u64,
    pub endpoint: String,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Sent,
    Received,
    Outcome,
    Commit,
    Rollback,
    StageDiscarded,
}

impl fmt::Display for TranscriptEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={}ms {} {:?}: {}",
            self.t_ms, self.endpoint, self.kind, self.detail
        )
    }
}

/// Bounded FIFO of seen nonces.
#[derive(Debug, Clone)]
struct NonceWindow {
    set: HashSet<Nonce>,
    order: VecDeque<Nonce>,
    cap: usize,
}

impl NonceWindow {
    fn new(cap: usize) -> Self {
        Self {
            set: HashSet::new(),
            order: VecDeque::new(),
            cap: cap.max(1),
        }
    }

    fn contains(&self, n: &Nonce) -> bool {
        self.set.contains(n)
    }

    fn insert(&mut self, n: Nonce) {
        if self.set.insert(n) {
            self.order.push_back(n);
            if self.order.len() > self.cap {
                if let Some(old) = self.order.pop_front() {
                    self.set.remove(&old);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct PendingProposal {
    message: TransitionMessage,
    /// Version active when the proposal was signed.
    signed_under: u64,
    deadline_ms: u64,
}

#[derive(Debug, Clone)]
struct StagedUpgrade {
    nonce: Nonce,
    version: u64,
    acked: bool,
    deadline_ms: u64,
}

/// Per-endpoint protocol state.
#[derive(Debug, Clone)]
pub struct EndpointState {
    name: String,
    cfg: ProtocolConfig,
    keys: KeyStore,
    current_version: u64,
    seen: NonceWindow,
    pending: Option<PendingProposal>,
    stage: Option<StagedUpgrade>,
    local_digest: Option<ContextDigest>,
    log: Vec<TranscriptEvent>,
    rollbacks: u64,
}

impl EndpointState {
    pub fn new(
        name: impl Into<String>,
        initial_version: u64,
        keys: KeyStore,
        cfg: ProtocolConfig,
    ) -> Self {
        Self {
            name: name.into(),
            seen: NonceWindow::new(cfg.nonce_retention),
            cfg,
            keys,
            current_version: initial_version,
            pending: None,
            stage: None,
            local_digest: None,
            log: Vec::new(),
            rollbacks: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn current_version(&self) -> u64 {
        self.current_version
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    pub fn has_stage(&self) -> bool {
        self.stage.is_some()
    }

    pub fn rollbacks(&self) -> u64 {
        self.rollbacks
    }

    pub fn transcript(&self) -> &[TranscriptEvent] {
        &self.log
    }

    /// Record the locally sensed context; its digest is what inbound
    /// proposals are compared against.
    pub fn observe_context<S: Scalar>(&mut self, x: &ContextVector<S>) {
        self.local_digest = Some(context_hash(x));
    }

    fn push_log(&mut self, t_ms: u64, kind: EventKind, detail: impl Into<String>) {
        self.log.push(TranscriptEvent {
            t_ms,
            endpoint: self.name.clone(),
            kind,
            detail: detail.into(),
        });
    }

    fn raise_version(&mut self, v: u64) {
        debug_assert!(v >= self.current_version, "version must never decrease");
        self.current_version = v;
    }

    /// Build and sign an upgrade proposal. Requires `v_next` not below the
    /// current version (equal version is a re-key) and no proposal already
    /// in flight.
    pub fn propose_upgrade<S: Scalar>(
        &mut self,
        v_next: u64,
        x: &ContextVector<S>,
        rng: &mut ChaCha8Rng,
        now_ms: u64,
    ) -> Result<TransitionMessage, ProtocolError> {
        if v_next < self.current_version {
            self.push_log(
                now_ms,
                EventKind::Outcome,
                format!(
                    "refused local downgrade proposal {} -> {}",
                    self.current_version, v_next
                ),
            );
            return Err(ProtocolError::DowngradeRefused {
                current: self.current_version,
                proposed: v_next,
            });
        }
        if self.pending.is_some() {
            return Err(ProtocolError::ProposalInFlight);
        }
        self.observe_context(x);
        let digest = context_hash(x);
        let nonce = Nonce::random(rng);
        let payload = TransitionMessage::signed_payload(v_next, &digest, &nonce);
        let signature = self.keys.signer_for(self.current_version).sign(&payload);
        let message = TransitionMessage {
            proposed_version: v_next,
            context_digest: digest,
            nonce,
            signature,
        };
        self.pending = Some(PendingProposal {
            message: message.clone(),
            signed_under: self.current_version,
            deadline_ms: now_ms + self.cfg.pending_timeout_ms(),
        });
        self.push_log(
            now_ms,
            EventKind::Sent,
            format!("proposal v{} (at v{})", v_next, self.current_version),
        );
        Ok(message)
    }

    /// Verify an inbound proposal. Hostile input is fine: malformed bytes
    /// and forged tags come back as `RejectBadSignature`, and no reject
    /// path changes the current version.
    pub fn verify_proposal(&mut self, bytes: &[u8], now_ms: u64) -> VerifyOutcome {
        let outcome = self.verify_proposal_inner(bytes, now_ms);
        self.push_log(now_ms, EventKind::Outcome, format!("proposal: {outcome}"));
        outcome
    }

    fn verify_proposal_inner(&mut self, bytes: &[u8], now_ms: u64) -> VerifyOutcome {
        let msg = match TransitionMessage::decode(bytes) {
            Ok(m) => m,
            Err(_) => return VerifyOutcome::RejectBadSignature,
        };
        let payload = TransitionMessage::signed_payload(
            msg.proposed_version,
            &msg.context_digest,
            &msg.nonce,
        );
        if !self.verify_with_grace(&payload, &msg.signature) {
            return VerifyOutcome::RejectBadSignature;
        }
        if msg.proposed_version < self.current_version {
            return VerifyOutcome::RejectDowngrade;
        }
        match self.local_digest {
            Some(d) if d == msg.context_digest => {}
            _ => return VerifyOutcome::RejectContextMismatch,
        }
        if self.seen.contains(&msg.nonce) {
            return VerifyOutcome::RejectStaleNonce;
        }
        self.seen.insert(msg.nonce);
        self.stage = Some(StagedUpgrade {
            nonce: msg.nonce,
            version: msg.proposed_version,
            acked: false,
            deadline_ms: now_ms + self.cfg.stage_timeout_ms(),
        });
        VerifyOutcome::Accept
    }

    /// Accept signatures keyed for the current version or its immediate
    /// neighbours. The two-phase exchange bounds desynchronisation to one
    /// version in either direction, so this window covers every reachable
    /// peer state; all candidate keys are pair-derived and equally
    /// unforgeable, and a post-upgrade replay that still verifies here then
    /// fails on freshness — the check that names the attack.
    fn verify_with_grace(&self, payload: &[u8], signature: &[u8]) -> bool {
        let lo = self.current_version.saturating_sub(1);
        (lo..=self.current_version + 1)
            .any(|v| self.keys.signer_for(v).verify(payload, signature))
    }

    /// Emit the signed acknowledgment for the staged proposal. Single-use:
    /// a second acknowledgment for the same stage is refused.
    pub fn acknowledge(&mut self, now_ms: u64) -> Result<Ack, ProtocolError> {
        let stage = self.stage.as_mut().ok_or(ProtocolError::NoStagedProposal)?;
        if stage.acked {
            return Err(ProtocolError::AlreadyAcknowledged);
        }
        stage.acked = true;
        let nonce = stage.nonce;
        let version = stage.version;
        let payload = Ack::signed_payload(&nonce, version);
        let signature = self.keys.signer_for(self.current_version).sign(&payload);
        let ack = Ack {
            nonce,
            confirmed_version: version,
            signature,
        };
        self.push_log(now_ms, EventKind::Sent, format!("ack v{version}"));
        Ok(ack)
    }

    /// Proposer side: verify the acknowledgment and commit. A valid ack
    /// raises the current version and yields the finalisation message for
    /// the peer; anything else rolls the pending proposal back.
    pub fn commit(&mut self, ack_bytes: &[u8], now_ms: u64) -> Result<Finalize, ProtocolError> {
        let pending = self
            .pending
            .as_ref()
            .ok_or(ProtocolError::NoPendingProposal)?;
        let ack = match Ack::decode(ack_bytes) {
            Ok(a) => a,
            Err(_) => {
                self.rollback(now_ms);
                return Err(ProtocolError::AckRejected(VerifyOutcome::RejectBadSignature));
            }
        };
        let payload = Ack::signed_payload(&ack.nonce, ack.confirmed_version);
        // The peer signs its ack under its own current version, which in a
        // recovery re-proposal can lag ours by one.
        let sig_ok = self
            .keys
            .signer_for(pending.signed_under)
            .verify(&payload, &ack.signature)
            || (pending.signed_under > 0
                && self
                    .keys
                    .signer_for(pending.signed_under - 1)
                    .verify(&payload, &ack.signature));
        let ok = sig_ok
            && ack.nonce == pending.message.nonce
            && ack.confirmed_version == pending.message.proposed_version;
        if !ok {
            let outcome = if ack.nonce != pending.message.nonce {
                VerifyOutcome::RejectStaleNonce
            } else {
                VerifyOutcome::RejectBadSignature
            };
            self.rollback(now_ms);
            return Err(ProtocolError::AckRejected(outcome));
        }
        let version = pending.message.proposed_version;
        let nonce = pending.message.nonce;
        let signed_under = pending.signed_under;
        self.pending = None;
        self.raise_version(version);
        self.push_log(now_ms, EventKind::Commit, format!("committed v{version}"));
        let payload = Finalize::signed_payload(&nonce, version);
        let signature = self.keys.signer_for(signed_under).sign(&payload);
        Ok(Finalize {
            nonce,
            version,
            signature,
        })
    }

    /// Receiver side: a valid finalisation completes the staged upgrade.
    pub fn apply_finalize(&mut self, bytes: &[u8], now_ms: u64) -> VerifyOutcome {
        let outcome = self.apply_finalize_inner(bytes);
        self.push_log(now_ms, EventKind::Outcome, format!("finalize: {outcome}"));
        if outcome == VerifyOutcome::Accept {
            self.push_log(
                now_ms,
                EventKind::Commit,
                format!("committed v{}", self.current_version),
            );
        }
        outcome
    }

    fn apply_finalize_inner(&mut self, bytes: &[u8]) -> VerifyOutcome {
        let fin = match Finalize::decode(bytes) {
            Ok(f) => f,
            Err(_) => return VerifyOutcome::RejectBadSignature,
        };
        let payload = Finalize::signed_payload(&fin.nonce, fin.version);
        if !self.verify_with_grace(&payload, &fin.signature) {
            return VerifyOutcome::RejectBadSignature;
        }
        let Some(stage) = self.stage.as_ref() else {
            return VerifyOutcome::RejectTimeout;
        };
        if !stage.acked || stage.nonce != fin.nonce || stage.version != fin.version {
            return VerifyOutcome::RejectStaleNonce;
        }
        let version = stage.version;
        self.stage = None;
        self.raise_version(version);
        VerifyOutcome::Accept
    }

    /// Abandon the pending proposal, if any; the active version is
    /// untouched. Harmless without one.
    pub fn rollback(&mut self, now_ms: u64) {
        if self.pending.take().is_some() {
            self.rollbacks += 1;
            self.push_log(
                now_ms,
                EventKind::Rollback,
                format!("rolled back to v{}", self.current_version),
            );
        }
    }

    /// Drive deadlines: an expired pending proposal rolls back, an expired
    /// stage is discarded.
    pub fn tick(&mut self, now_ms: u64) {
        if let Some(p) = &self.pending {
            if now_ms > p.deadline_ms {
                let v = p.message.proposed_version;
                self.push_log(now_ms, EventKind::Outcome, format!("pending v{v} timed out"));
                self.rollback(now_ms);
            }
        }
        if let Some(s) = &self.stage {
            if now_ms > s.deadline_ms {
                let v = s.version;
                self.stage = None;
                self.push_log(
                    now_ms,
                    EventKind::StageDiscarded,
                    format!("stage v{v} expired; still at v{}", self.current_version),
                );
            }
        }
    }
}

/// Build a keyed endpoint pair sharing one master secret.
pub fn endpoint_pair(
    seed: u64,
    initial_version: u64,
    cfg: ProtocolConfig,
) -> (EndpointState, EndpointState) {
    let keys = KeyStore::from_seed(seed);
    (
        EndpointState::new("proposer", initial_version, keys.clone(), cfg),
        EndpointState::new("receiver", initial_version, keys, cfg),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::nominal_context;
    use rand::SeedableRng;

    fn pair() -> (EndpointState, EndpointState, ChaCha8Rng) {
        let (a, b) = endpoint_pair(42, 2, ProtocolConfig::default());
        (a, b, ChaCha8Rng::seed_from_u64(7))
    }

    fn observe_both(a: &mut EndpointState, b: &mut EndpointState) {
        let x = nominal_context::<f64>();
        a.observe_context(&x);
        b.observe_context(&x);
    }

    #[test]
    fn happy_path_upgrade_completes_both_sides() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        assert_eq!(msg.proposed_version, 3);
        assert_eq!(recv.verify_proposal(&msg.encode(), 10), VerifyOutcome::Accept);
        let ack = recv.acknowledge(10).unwrap();
        assert_eq!(ack.nonce, msg.nonce);
        assert_eq!(ack.confirmed_version, 3);
        let fin = prop.commit(&ack.encode(), 20).unwrap();
        assert_eq!(prop.current_version(), 3);
        assert_eq!(recv.current_version(), 2);
        assert_eq!(recv.apply_finalize(&fin.encode(), 30), VerifyOutcome::Accept);
        assert_eq!(recv.current_version(), 3);
        assert!(!prop.has_pending());
        assert!(!recv.has_stage());
    }

    #[test]
    fn equal_version_rekey_is_permitted() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(2, &x, &mut rng, 0).unwrap();
        assert_eq!(recv.verify_proposal(&msg.encode(), 5), VerifyOutcome::Accept);
    }

    #[test]
    fn local_downgrade_proposal_is_refused_before_sending() {
        let (mut prop, _, mut rng) = pair();
        let x = nominal_context::<f64>();
        let err = prop.propose_upgrade(1, &x, &mut rng, 0).unwrap_err();
        assert_eq!(
            err,
            ProtocolError::DowngradeRefused {
                current: 2,
                proposed: 1
            }
        );
        assert!(!prop.has_pending());
    }

    #[test]
    fn second_proposal_while_pending_is_refused() {
        let (mut prop, _, mut rng) = pair();
        let x = nominal_context::<f64>();
        prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        assert_eq!(
            prop.propose_upgrade(4, &x, &mut rng, 1).unwrap_err(),
            ProtocolError::ProposalInFlight
        );
    }

    #[test]
    fn replayed_proposal_is_rejected_as_stale_nonce() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        let bytes = msg.encode();
        assert_eq!(recv.verify_proposal(&bytes, 5), VerifyOutcome::Accept);
        let ack = recv.acknowledge(6).unwrap();
        let fin = prop.commit(&ack.encode(), 10).unwrap();
        recv.apply_finalize(&fin.encode(), 12);
        // Replay after commit: the old-version signature still verifies
        // under the grace window, so the nonce check is what fires.
        assert_eq!(
            recv.verify_proposal(&bytes, 20),
            VerifyOutcome::RejectStaleNonce
        );
        assert_eq!(recv.current_version(), 3);
    }

    #[test]
    fn tampered_version_field_fails_signature_check() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        let mut tampered = msg.clone();
        tampered.proposed_version = 1;
        assert_eq!(
            recv.verify_proposal(&tampered.encode(), 5),
            VerifyOutcome::RejectBadSignature
        );
        assert_eq!(recv.current_version(), 2);
    }

    #[test]
    fn validly_signed_downgrade_is_rejected_by_monotonic_check() {
        let (_, mut recv, mut rng) = pair();
        let x = nominal_context::<f64>();
        recv.observe_context(&x);
        // An injected message signed with the legitimate pair key but
        // carrying a lower version: the signature verifies, the monotonic
        // check refuses it.
        let keys = KeyStore::from_seed(42);
        let digest = context_hash(&x);
        let nonce = Nonce::random(&mut rng);
        let payload = TransitionMessage::signed_payload(1, &digest, &nonce);
        let msg = TransitionMessage {
            proposed_version: 1,
            context_digest: digest,
            nonce,
            signature: keys.signer_for(2).sign(&payload),
        };
        assert_eq!(
            recv.verify_proposal(&msg.encode(), 5),
            VerifyOutcome::RejectDowngrade
        );
        assert_eq!(recv.current_version(), 2);
    }

    #[test]
    fn context_mismatch_is_rejected() {
        let (mut prop, mut recv, mut rng) = pair();
        let x = nominal_context::<f64>();
        let mut skewed = x;
        skewed.snr_db += 5.0;
        prop.observe_context(&x);
        recv.observe_context(&skewed);
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        assert_eq!(
            recv.verify_proposal(&msg.encode(), 5),
            VerifyOutcome::RejectContextMismatch
        );
    }

    #[test]
    fn malformed_bytes_never_panic() {
        let (_, mut recv, _) = pair();
        for len in 0..64usize {
            let junk = vec![0xABu8; len];
            assert_eq!(
                recv.verify_proposal(&junk, 1),
                VerifyOutcome::RejectBadSignature
            );
        }
    }

    #[test]
    fn acknowledge_is_single_use_and_echoes_the_nonce() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        recv.verify_proposal(&msg.encode(), 2);
        let ack = recv.acknowledge(3).unwrap();
        assert_eq!(ack.nonce.0, msg.nonce.0);
        assert_eq!(
            recv.acknowledge(4).unwrap_err(),
            ProtocolError::AlreadyAcknowledged
        );
    }

    #[test]
    fn acknowledge_without_stage_is_an_error() {
        let (_, mut recv, _) = pair();
        assert_eq!(
            recv.acknowledge(1).unwrap_err(),
            ProtocolError::NoStagedProposal
        );
    }

    #[test]
    fn commit_with_wrong_nonce_rolls_back() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        recv.verify_proposal(&msg.encode(), 2);
        let mut ack = recv.acknowledge(3).unwrap();
        ack.nonce = Nonce([0u8; NONCE_LEN]);
        let err = prop.commit(&ack.encode(), 5).unwrap_err();
        assert!(matches!(err, ProtocolError::AckRejected(_)));
        assert_eq!(prop.current_version(), 2);
        assert!(!prop.has_pending());
        assert_eq!(prop.rollbacks(), 1);
    }

    #[test]
    fn commit_without_pending_is_an_error_and_leaves_state() {
        let (mut prop, _, _) = pair();
        let ack = Ack {
            nonce: Nonce([1u8; NONCE_LEN]),
            confirmed_version: 3,
            signature: vec![0u8; TAG_LEN],
        };
        assert_eq!(
            prop.commit(&ack.encode(), 1).unwrap_err(),
            ProtocolError::NoPendingProposal
        );
        assert_eq!(prop.current_version(), 2);
        assert_eq!(prop.rollbacks(), 0);
    }

    #[test]
    fn lost_ack_times_out_and_both_stay_on_old_version() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        recv.verify_proposal(&msg.encode(), 10);
        let _lost_ack = recv.acknowledge(11).unwrap();
        // Deadlines pass with nothing delivered.
        prop.tick(100);
        recv.tick(100);
        assert_eq!(prop.current_version(), 2);
        assert_eq!(recv.current_version(), 2);
        assert!(!prop.has_pending());
        assert!(!recv.has_stage());
        assert_eq!(prop.rollbacks(), 1);
    }

    #[test]
    fn rollback_without_pending_is_a_noop() {
        let (mut prop, _, _) = pair();
        prop.rollback(5);
        assert_eq!(prop.rollbacks(), 0);
        assert_eq!(prop.current_version(), 2);
    }

    #[test]
    fn fresh_reproposal_succeeds_after_rollback() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let first = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        recv.verify_proposal(&first.encode(), 5);
        recv.acknowledge(6).unwrap(); // ack lost
        prop.tick(100);
        recv.tick(100);
        let second = prop.propose_upgrade(3, &x, &mut rng, 120).unwrap();
        assert_ne!(second.nonce, first.nonce);
        assert_eq!(
            recv.verify_proposal(&second.encode(), 125),
            VerifyOutcome::Accept
        );
        let ack = recv.acknowledge(126).unwrap();
        let fin = prop.commit(&ack.encode(), 130).unwrap();
        assert_eq!(recv.apply_finalize(&fin.encode(), 135), VerifyOutcome::Accept);
        assert_eq!(prop.current_version(), 3);
        assert_eq!(recv.current_version(), 3);
    }

    #[test]
    fn late_finalize_after_stage_expiry_is_refused_without_regression() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        recv.verify_proposal(&msg.encode(), 5);
        let ack = recv.acknowledge(6).unwrap();
        let fin = prop.commit(&ack.encode(), 10).unwrap();
        recv.tick(100); // stage expires before the finalize arrives
        assert_eq!(
            recv.apply_finalize(&fin.encode(), 120),
            VerifyOutcome::RejectTimeout
        );
        assert_eq!(recv.current_version(), 2);
        assert_eq!(prop.current_version(), 3);
        // The next exchange reconciles them.
        let msg = prop.propose_upgrade(3, &x, &mut rng, 200).unwrap();
        assert_eq!(recv.verify_proposal(&msg.encode(), 205), VerifyOutcome::Accept);
        let ack = recv.acknowledge(206).unwrap();
        let fin = prop.commit(&ack.encode(), 210).unwrap();
        assert_eq!(recv.apply_finalize(&fin.encode(), 215), VerifyOutcome::Accept);
        assert_eq!(recv.current_version(), 3);
    }

    #[test]
    fn transcript_records_one_line_per_step() {
        let (mut prop, mut recv, mut rng) = pair();
        observe_both(&mut prop, &mut recv);
        let x = nominal_context::<f64>();
        let msg = prop.propose_upgrade(3, &x, &mut rng, 0).unwrap();
        recv.verify_proposal(&msg.encode(), 5);
        assert!(prop
            .transcript()
            .iter()
            .any(|e| e.kind == EventKind::Sent && e.detail.contains("v3")));
        assert!(recv
            .transcript()
            .iter()
            .any(|e| e.kind == EventKind::Outcome && e.detail.contains("accept")));
        let line = format!("{}", recv.transcript().last().unwrap());
        assert!(line.contains("receiver"));
    }
}
