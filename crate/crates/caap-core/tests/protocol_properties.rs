//! Property tests for the transition protocol over adversarial message
//! schedules.
//!
//! A schedule is a finite program of channel actions (deliver, drop,
//! duplicate, delay, tamper) applied to the proposal/ack/finalize messages
//! of a run of upgrade attempts. Whatever the schedule does:
//!
//! * neither endpoint's version ever decreases,
//! * the receiver never commits a version the proposer did not commit,
//! * re-delivering an accepted proposal never changes state, and
//! * flipping any bit of a signed message yields a signature rejection.
//!
//! With an honest schedule (deliver everything, in order, on time) both
//! endpoints agree on the final version — one round trip per upgrade.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use caap_core::protocol::{endpoint_pair, EndpointState, ProtocolConfig, VerifyOutcome};
use caap_core::scenario::nominal_context;
use caap_core::Real;

#[derive(Debug, Clone, Copy)]
enum ChannelAction {
    /// Deliver in order with a small delay.
    Deliver,
    Drop,
    /// Deliver, then deliver a copy again.
    Duplicate,
    /// Deliver after the deadlines have expired.
    DelayPastDeadline,
    /// Flip one bit, then deliver.
    TamperBit(u8),
}

fn action_strategy() -> impl Strategy<Value = ChannelAction> {
    prop_oneof![
        4 => Just(ChannelAction::Deliver),
        1 => Just(ChannelAction::Drop),
        1 => Just(ChannelAction::Duplicate),
        1 => Just(ChannelAction::DelayPastDeadline),
        1 => any::<u8>().prop_map(ChannelAction::TamperBit),
    ]
}

struct Run {
    proposer: EndpointState,
    receiver: EndpointState,
    rng: ChaCha8Rng,
    now: u64,
    honest: bool,
}

impl Run {
    fn new(seed: u64) -> Self {
        let (proposer, receiver) = endpoint_pair(seed, 1, ProtocolConfig::default());
        Self {
            proposer,
            receiver,
            rng: ChaCha8Rng::seed_from_u64(seed),
            now: 0,
            honest: true,
        }
    }

    fn mangle(bytes: &[u8], bit: u8) -> Vec<u8> {
        let mut out = bytes.to_vec();
        if !out.is_empty() {
            let idx = bit as usize % out.len();
            out[idx] ^= 1 << (bit % 8);
        }
        out
    }

    fn advance(&mut self, dt: u64) {
        self.now += dt;
        self.proposer.tick(self.now);
        self.receiver.tick(self.now);
    }

    fn check_invariants(&self, prev_prop: u64, prev_recv: u64) {
        assert!(self.proposer.current_version() >= prev_prop, "proposer regressed");
        assert!(self.receiver.current_version() >= prev_recv, "receiver regressed");
        // Receiver commits only on a finalize the proposer emitted after its
        // own commit, so it can never be ahead.
        assert!(
            self.receiver.current_version() <= self.proposer.current_version(),
            "receiver ahead of proposer: {} > {}",
            self.receiver.current_version(),
            self.proposer.current_version()
        );
    }

    /// One upgrade attempt under the given per-message actions.
    fn attempt(&mut self, actions: [ChannelAction; 3]) {
        let x = nominal_context::<Real>();
        self.proposer.observe_context(&x);
        self.receiver.observe_context(&x);
        let prev = (
            self.proposer.current_version(),
            self.receiver.current_version(),
        );
        let target = self.proposer.current_version() + 1;

        let Ok(msg) = self
            .proposer
            .propose_upgrade(target, &x, &mut self.rng, self.now)
        else {
            return;
        };
        let msg_bytes = msg.encode();

        let delivered = match actions[0] {
            ChannelAction::Deliver => {
                self.advance(5);
                Some(self.receiver.verify_proposal(&msg_bytes, self.now))
            }
            ChannelAction::Duplicate => {
                self.advance(5);
                let first = self.receiver.verify_proposal(&msg_bytes, self.now);
                let second = self.receiver.verify_proposal(&msg_bytes, self.now);
                // Replay immunity: the duplicate never lands as a second
                // accept.
                if first == VerifyOutcome::Accept {
                    assert_eq!(second, VerifyOutcome::RejectStaleNonce);
                }
                self.honest = false;
                Some(first)
            }
            ChannelAction::Drop => {
                self.honest = false;
                None
            }
            ChannelAction::DelayPastDeadline => {
                self.honest = false;
                self.advance(500);
                Some(self.receiver.verify_proposal(&msg_bytes, self.now))
            }
            ChannelAction::TamperBit(bit) => {
                self.honest = false;
                self.advance(5);
                let outcome = self
                    .receiver
                    .verify_proposal(&Self::mangle(&msg_bytes, bit), self.now);
                assert_eq!(outcome, VerifyOutcome::RejectBadSignature);
                None
            }
        };
        self.check_invariants(prev.0, prev.1);

        if delivered != Some(VerifyOutcome::Accept) {
            self.advance(500);
            self.check_invariants(prev.0, prev.1);
            return;
        }
        let Ok(ack) = self.receiver.acknowledge(self.now) else {
            return;
        };
        let ack_bytes = ack.encode();

        let fin = match actions[1] {
            ChannelAction::Deliver | ChannelAction::Duplicate => {
                self.advance(5);
                self.proposer.commit(&ack_bytes, self.now).ok()
            }
            ChannelAction::Drop => {
                self.honest = false;
                None
            }
            ChannelAction::DelayPastDeadline => {
                self.honest = false;
                self.advance(500);
                // Pending already rolled back; the late ack lands on nothing.
                assert!(self.proposer.commit(&ack_bytes, self.now).is_err());
                None
            }
            ChannelAction::TamperBit(bit) => {
                self.honest = false;
                self.advance(5);
                assert!(self
                    .proposer
                    .commit(&Self::mangle(&ack_bytes, bit), self.now)
                    .is_err());
                None
            }
        };
        self.check_invariants(prev.0, prev.1);

        if let Some(fin) = fin {
            let fin_bytes = fin.encode();
            match actions[2] {
                ChannelAction::Deliver | ChannelAction::Duplicate => {
                    self.advance(5);
                    let first = self.receiver.apply_finalize(&fin_bytes, self.now);
                    if matches!(actions[2], ChannelAction::Duplicate) {
                        let again = self.receiver.apply_finalize(&fin_bytes, self.now);
                        assert_ne!(again, VerifyOutcome::Accept, "double-commit via finalize");
                        self.honest = false;
                    }
                    if self.honest {
                        assert_eq!(first, VerifyOutcome::Accept);
                    }
                }
                ChannelAction::Drop => {
                    self.honest = false;
                }
                ChannelAction::DelayPastDeadline => {
                    self.honest = false;
                    self.advance(500);
                    let outcome = self.receiver.apply_finalize(&fin_bytes, self.now);
                    assert_ne!(outcome, VerifyOutcome::Accept);
                }
                ChannelAction::TamperBit(bit) => {
                    self.honest = false;
                    self.advance(5);
                    let outcome = self
                        .receiver
                        .apply_finalize(&Self::mangle(&fin_bytes, bit), self.now);
                    assert_eq!(outcome, VerifyOutcome::RejectBadSignature);
                }
            }
        }
        self.advance(500);
        self.check_invariants(prev.0, prev.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn versions_stay_monotone_and_ordered_under_any_schedule(
        seed in 0u64..1_000_000,
        attempts in proptest::collection::vec(
            (action_strategy(), action_strategy(), action_strategy()),
            1..6
        ),
    ) {
        let mut run = Run::new(seed);
        for (a, b, c) in attempts {
            run.attempt([a, b, c]);
        }
        // Quiescent: nothing in flight, all deadlines fired.
        prop_assert!(!run.proposer.has_pending());
        prop_assert!(!run.receiver.has_stage());
        prop_assert!(run.receiver.current_version() <= run.proposer.current_version());
    }

    #[test]
    fn honest_delivery_upgrades_both_sides_per_round_trip(
        seed in 0u64..1_000_000,
        rounds in 1usize..5,
    ) {
        let mut run = Run::new(seed);
        for _ in 0..rounds {
            run.attempt([ChannelAction::Deliver, ChannelAction::Deliver, ChannelAction::Deliver]);
        }
        prop_assert!(run.honest);
        prop_assert_eq!(run.proposer.current_version(), 1 + rounds as u64);
        prop_assert_eq!(run.receiver.current_version(), 1 + rounds as u64);
    }

    #[test]
    fn any_single_bit_flip_is_tamper_evident(
        seed in 0u64..1_000_000,
        bit in any::<u8>(),
    ) {
        let mut run = Run::new(seed);
        run.attempt([ChannelAction::TamperBit(bit), ChannelAction::Deliver, ChannelAction::Deliver]);
        prop_assert_eq!(run.proposer.current_version() , 1);
        prop_assert_eq!(run.receiver.current_version(), 1);
    }
}

#[test]
fn desync_window_heals_on_the_next_exchange() {
    // Drop the finalize: the proposer ends one version ahead. The next
    // honest attempt reconciles both endpoints.
    let mut run = Run::new(99);
    run.attempt([
        ChannelAction::Deliver,
        ChannelAction::Deliver,
        ChannelAction::Drop,
    ]);
    assert_eq!(run.proposer.current_version(), 2);
    assert_eq!(run.receiver.current_version(), 1);
    run.attempt([
        ChannelAction::Deliver,
        ChannelAction::Deliver,
        ChannelAction::Deliver,
    ]);
    assert_eq!(run.proposer.current_version(), 3);
    assert_eq!(run.receiver.current_version(), 3);
}
