//! The privacy-preserving comparison protocol: two owners split their values
//! into additive shares, four notaries blind the share differences with
//! private multipliers, and a coordinator decides the comparison from the
//! blinded sums `X` and `Y` without ever seeing `x - y`.
//!
//! Also provides the legacy unblinded comparison (which demonstrably leaks
//! `x - y` to the coordinator), and the interactive zero-knowledge proof
//! that binds `X + Y` to the original commitments.

use crate::commit::{commit, rand_rep, CommittedPair, RandRep};
use crate::group::{
    mod_inv, neg_mod, sample_in_range, sample_scalar, sub_mod, GroupError, GroupParams, KeyPair,
    RandomSource,
};
use crate::simnet::{Endpoint, LogEntry, NetError, Network, PartyRole, Payload, Step};
use num_bigint::BigUint;
use num_traits::Zero;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("operand {0} out of bound for this group")]
    OperandOutOfBound(BigUint),
    #[error("multiplier {0} outside [1, {1}]")]
    MultiplierOutOfRange(BigUint, BigUint),
    #[error("protocol state: {0}")]
    State(&'static str),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Result of one comparison of `x` against `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonOutcome {
    Greater,
    Less,
    Equal,
}

impl ComparisonOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            ComparisonOutcome::Greater => "greater",
            ComparisonOutcome::Less => "less",
            ComparisonOutcome::Equal => "equal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "greater" => Some(ComparisonOutcome::Greater),
            "less" => Some(ComparisonOutcome::Less),
            "equal" => Some(ComparisonOutcome::Equal),
            _ => None,
        }
    }
}

/// Coordinator decision rule on the blinded sums: equal iff
/// `(X + Y) mod q = 0`, greater while the sum stays in `(0, (q-1)/2]`,
/// less beyond.
pub fn decide(x_sum: &BigUint, y_sum: &BigUint, params: &GroupParams) -> ComparisonOutcome {
    let s = (x_sum + y_sum) % &params.q;
    if s.is_zero() {
        ComparisonOutcome::Equal
    } else if s <= params.half_order() {
        ComparisonOutcome::Greater
    } else {
        ComparisonOutcome::Less
    }
}

/// Ordered comparisons need operands below `q / (2 * D_max)` and
/// multipliers in `[1, d_max]`; equality-only runs lift both restrictions
/// (any operand in `Z_q`, multipliers in `[1, q-1]`), since only
/// `X + Y = 0` carries meaning there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonMode {
    Ordered,
    EqualityOnly,
}

/// The interactive proof assembled by the coordinator: the four
/// multiplier-scaled help values, their sums `H1` and `H2`, the four
/// commitments raised to the full blinding product, and their aggregate `C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZkpRecord {
    pub relay_a_u: BigUint,
    pub relay_a_v: BigUint,
    pub relay_b_u: BigUint,
    pub relay_b_v: BigUint,
    pub h1: BigUint,
    pub h2: BigUint,
    pub lift_a_u: BigUint,
    pub lift_a_v: BigUint,
    pub lift_b_u: BigUint,
    pub lift_b_v: BigUint,
    pub aggregate: BigUint,
}

impl ZkpRecord {
    /// Structural invariants: `H1 = (Dr1 + Dr1') mod q`,
    /// `H2 = -(Dr2 + Dr2') mod q`, and the aggregate is the signed product
    /// of the four lifted commitments.
    pub fn well_formed(&self, params: &GroupParams) -> bool {
        let q = &params.q;
        if self.h1 != (&self.relay_a_u + &self.relay_a_v) % q {
            return false;
        }
        if self.h2 != neg_mod(&((&self.relay_b_u + &self.relay_b_v) % q), q) {
            return false;
        }
        match aggregate_lifts(&self.lift_a_u, &self.lift_a_v, &self.lift_b_u, &self.lift_b_v, params)
        {
            Ok(c) => c == self.aggregate,
            Err(_) => false,
        }
    }
}

/// `C = L(u1) * L(u2)^-1 * L(v1) * L(v2)^-1 mod p` over the lifted
/// commitments.
pub fn aggregate_lifts(
    lift_a_u: &BigUint,
    lift_a_v: &BigUint,
    lift_b_u: &BigUint,
    lift_b_v: &BigUint,
    params: &GroupParams,
) -> Result<BigUint, GroupError> {
    let p = &params.p;
    let inv_bu = mod_inv(lift_b_u, p)?;
    let inv_bv = mod_inv(lift_b_v, p)?;
    Ok(lift_a_u * inv_bu % p * lift_a_v % p * inv_bv % p)
}

/// True iff `C = g^{(X+Y) mod q} * h_A^{H1 mod q} * h_B^{H2 mod q} mod p`.
pub fn zkp_verify(
    record: &ZkpRecord,
    x_sum: &BigUint,
    y_sum: &BigUint,
    key_a: &BigUint,
    key_b: &BigUint,
    params: &GroupParams,
) -> bool {
    let q = &params.q;
    let p = &params.p;
    let exponent = (x_sum + y_sum) % q;
    let rhs = params.g.modpow(&exponent, p) * key_a.modpow(&(&record.h1 % q), p) % p
        * key_b.modpow(&(&record.h2 % q), p)
        % p;
    record.aggregate == rhs
}

/// The full logged flow of one comparison run.
#[derive(Debug, Clone)]
pub struct PpcTranscript {
    pub group: GroupParams,
    pub mode: ComparisonMode,
    pub committed_a: CommittedPair,
    pub committed_b: CommittedPair,
    pub x_sum: BigUint,
    pub y_sum: BigUint,
    pub outcome: ComparisonOutcome,
    pub zkp: Option<ZkpRecord>,
    pub log: Vec<LogEntry>,
}

impl PpcTranscript {
    pub fn message_count(&self) -> usize {
        self.log.len()
    }

    /// Transcript export: one line per message plus a self-describing header.
    pub fn render(&self, seed_label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("ppc-transcript v1 seed={seed_label}\n"));
        out.push_str(&self.group.to_record());
        out.push('\n');
        for entry in &self.log {
            out.push_str(&entry.render());
            out.push('\n');
        }
        out.push_str(&format!(
            "result x_sum={} y_sum={} outcome={}\n",
            self.x_sum,
            self.y_sum,
            self.outcome.label()
        ));
        if let Some(z) = &self.zkp {
            out.push_str(&format!("zkp h1={} h2={} aggregate={}\n", z.h1, z.h2, z.aggregate));
        }
        out
    }
}

/// One owner's side of a comparison when its shares, help values,
/// commitments, and multiplier already exist (the auction hand-off case).
#[derive(Debug, Clone)]
pub struct PreparedSide {
    pub key_public: BigUint,
    pub shares: RandRep,
    pub helps: (BigUint, BigUint),
    pub mult: BigUint,
    pub commitments: CommittedPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    A,
    B,
}

impl Side {
    fn owner(self) -> PartyRole {
        match self {
            Side::A => PartyRole::OwnerA,
            Side::B => PartyRole::OwnerB,
        }
    }
    fn notary(self, lane: Lane) -> PartyRole {
        match (self, lane) {
            (Side::A, Lane::U) => PartyRole::NotaryA1,
            (Side::A, Lane::V) => PartyRole::NotaryA2,
            (Side::B, Lane::U) => PartyRole::NotaryB1,
            (Side::B, Lane::V) => PartyRole::NotaryB2,
        }
    }
}

/// The two share lanes: lane-1 notaries carry `u` shares, lane-2 the `v`
/// shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    U,
    V,
}

#[derive(Debug, Default, Clone)]
struct NotaryState {
    share: Option<BigUint>,
    help: Option<BigUint>,
    mult: Option<BigUint>,
    base: Option<BigUint>,
    peer_share: Option<BigUint>,
    scaled_in: Option<BigUint>,
}

#[derive(Debug, Default)]
struct CoordinatorState {
    committed_a: Option<CommittedPair>,
    committed_b: Option<CommittedPair>,
    x_sum: Option<BigUint>,
    y_sum: Option<BigUint>,
}

#[derive(Debug, PartialEq, Eq)]
enum Phase {
    Ready,
    Compared,
    Proved,
}

/// Drives one comparison run over a dedicated network: steps i-vi for a
/// fresh run, steps iii-vi when both sides were prepared beforehand, and
/// the proof procedure afterwards.
pub struct PpcSession {
    params: GroupParams,
    mode: ComparisonMode,
    net: Network,
    fresh_inputs: Option<FreshInputs>,
    notary_a1: NotaryState,
    notary_a2: NotaryState,
    notary_b1: NotaryState,
    notary_b2: NotaryState,
    cs: CoordinatorState,
    x_sum: Option<BigUint>,
    y_sum: Option<BigUint>,
    outcome: Option<ComparisonOutcome>,
    zkp: Option<ZkpRecord>,
    phase: Phase,
}

struct FreshInputs {
    a: OwnerLocal,
    b: OwnerLocal,
}

/// An owner's locally drawn material, ready to go on the wire.
struct OwnerLocal {
    shares: RandRep,
    helps: (BigUint, BigUint),
    commitments: CommittedPair,
    mult: BigUint,
}

impl PpcSession {
    /// Validates operands and multipliers, then prepares a fresh run where
    /// the owners generate shares and commitments on the wire (steps i-ii).
    #[allow(clippy::too_many_arguments)]
    pub fn fresh(
        params: &GroupParams,
        mode: ComparisonMode,
        key_a: &KeyPair,
        key_b: &KeyPair,
        x: BigUint,
        y: BigUint,
        d_a: Option<BigUint>,
        d_b: Option<BigUint>,
        rng_a: &mut dyn RandomSource,
        rng_b: &mut dyn RandomSource,
    ) -> Result<Self, ProtocolError> {
        for operand in [&x, &y] {
            let ok = match mode {
                ComparisonMode::Ordered => params.operand_in_bound(operand),
                ComparisonMode::EqualityOnly => operand < &params.q,
            };
            if !ok {
                return Err(ProtocolError::OperandOutOfBound(operand.clone()));
            }
        }
        let mult_bound = match mode {
            ComparisonMode::Ordered => params.d_max.clone(),
            ComparisonMode::EqualityOnly => &params.q - 1u32,
        };
        let pick = |d: Option<BigUint>, rng: &mut dyn RandomSource| {
            let d = d.unwrap_or_else(|| sample_in_range(&mult_bound, rng));
            if d.is_zero() || d > mult_bound {
                Err(ProtocolError::MultiplierOutOfRange(d, mult_bound.clone()))
            } else {
                Ok(d)
            }
        };
        let d_a = pick(d_a, rng_a)?;
        let d_b = pick(d_b, rng_b)?;

        let draw = |value: &BigUint,
                    key: &KeyPair,
                    mult: BigUint,
                    rng: &mut dyn RandomSource|
         -> Result<OwnerLocal, ProtocolError> {
            let shares = rand_rep(value, params, rng)?;
            let r1 = sample_scalar(&params.q, rng);
            let r2 = sample_scalar(&params.q, rng);
            let commitments = CommittedPair {
                first: commit(&shares.u, &r1, &key.public, params),
                second: commit(&shares.v, &r2, &key.public, params),
            };
            Ok(OwnerLocal { shares, helps: (r1, r2), commitments, mult })
        };
        let local_a = draw(&x, key_a, d_a, rng_a)?;
        let local_b = draw(&y, key_b, d_b, rng_b)?;

        let mut net = Network::new();
        net.register_ppc_roles();
        Ok(Self {
            params: params.clone(),
            mode,
            net,
            fresh_inputs: Some(FreshInputs { a: local_a, b: local_b }),
            notary_a1: NotaryState::default(),
            notary_a2: NotaryState::default(),
            notary_b1: NotaryState::default(),
            notary_b2: NotaryState::default(),
            cs: CoordinatorState::default(),
            x_sum: None,
            y_sum: None,
            outcome: None,
            zkp: None,
            phase: Phase::Ready,
        })
    }

    /// A run over already-committed operands: the notaries start out holding
    /// the hand-off state and the coordinator the published commitments, so
    /// the flow begins at the notary relays (step iii).
    pub fn prepared(
        params: &GroupParams,
        mode: ComparisonMode,
        side_a: &PreparedSide,
        side_b: &PreparedSide,
    ) -> Self {
        let mut net = Network::new();
        net.register_ppc_roles();
        let notary = |share: &BigUint, help: &BigUint, mult: &BigUint, base: &crate::commit::Commitment| NotaryState {
            share: Some(share.clone()),
            help: Some(help.clone()),
            mult: Some(mult.clone()),
            base: Some(base.0.clone()),
            peer_share: None,
            scaled_in: None,
        };
        Self {
            params: params.clone(),
            mode,
            net,
            fresh_inputs: None,
            notary_a1: notary(&side_a.shares.u, &side_a.helps.0, &side_a.mult, &side_a.commitments.first),
            notary_a2: notary(&side_a.shares.v, &side_a.helps.1, &side_a.mult, &side_a.commitments.second),
            notary_b1: notary(&side_b.shares.u, &side_b.helps.0, &side_b.mult, &side_b.commitments.first),
            notary_b2: notary(&side_b.shares.v, &side_b.helps.1, &side_b.mult, &side_b.commitments.second),
            cs: CoordinatorState {
                committed_a: Some(side_a.commitments.clone()),
                committed_b: Some(side_b.commitments.clone()),
                x_sum: None,
                y_sum: None,
            },
            x_sum: None,
            y_sum: None,
            outcome: None,
            zkp: None,
            phase: Phase::Ready,
        }
    }

    pub fn add_hook(&mut self, hook: crate::simnet::TamperHook) {
        self.net.add_hook(hook);
    }

    fn send(
        &mut self,
        from: PartyRole,
        to: PartyRole,
        step: Step,
        payload: Payload,
    ) -> Result<(), ProtocolError> {
        self.net.send(Endpoint::Role(from), Endpoint::Role(to), step, payload)?;
        Ok(())
    }

    /// Executes the comparison and stores the outcome.
    pub fn run(&mut self) -> Result<ComparisonOutcome, ProtocolError> {
        if self.phase != Phase::Ready {
            return Err(ProtocolError::State("comparison already ran"));
        }
        if let Some(inputs) = self.fresh_inputs.take() {
            self.owner_rounds(&inputs)?;
        }
        self.relay_rounds()?;
        let x_sum = self.cs.x_sum.clone().expect("set by relay_rounds");
        let y_sum = self.cs.y_sum.clone().expect("set by relay_rounds");
        let outcome = decide(&x_sum, &y_sum, &self.params);
        self.x_sum = Some(x_sum);
        self.y_sum = Some(y_sum);
        self.outcome = Some(outcome);
        self.phase = Phase::Compared;
        Ok(outcome)
    }

    /// Steps i-ii: each owner commits both shares to the coordinator and
    /// hands one lane to each of its notaries.
    fn owner_rounds(&mut self, inputs: &FreshInputs) -> Result<(), ProtocolError> {
        let local_a = &inputs.a;
        let local_b = &inputs.b;

        // Step i: both owners commit to the coordinator.
        for (side, local) in [(Side::A, local_a), (Side::B, local_b)] {
            self.send(
                side.owner(),
                PartyRole::Coordinator,
                Step::I,
                Payload::CommitmentPair(
                    local.commitments.first.0.clone(),
                    local.commitments.second.0.clone(),
                ),
            )?;
        }
        for slot in [&mut self.cs.committed_a, &mut self.cs.committed_b] {
            match Self::recv_static(&mut self.net, PartyRole::Coordinator)? {
                Payload::CommitmentPair(first, second) => {
                    *slot = Some(CommittedPair {
                        first: crate::commit::Commitment(first),
                        second: crate::commit::Commitment(second),
                    });
                }
                _ => return Err(ProtocolError::State("expected commitment pair")),
            }
        }

        // Step ii: share hand-off, one lane per notary, with the owner's
        // multiplier and the commitment the lane belongs to.
        for (side, local, mult) in
            [(Side::A, local_a, &inputs.a.mult), (Side::B, local_b, &inputs.b.mult)]
        {
            for (lane, share, help, base) in [
                (Lane::U, &local.shares.u, &local.helps.0, &local.commitments.first),
                (Lane::V, &local.shares.v, &local.helps.1, &local.commitments.second),
            ] {
                self.send(
                    side.owner(),
                    side.notary(lane),
                    Step::II,
                    Payload::ShareHandoff {
                        share: share.clone(),
                        help: help.clone(),
                        mult: mult.clone(),
                    },
                )?;
                // Pin the lane's published commitment as the notary's lift
                // base. Commitments are public material, and lifting the
                // published value (rather than recommitting from received
                // shares) is what lets the proof catch a mutated share.
                let state = self.notary_mut(side, lane);
                state.base = Some(base.0.clone());
            }
        }
        for (side, lane) in
            [(Side::A, Lane::U), (Side::A, Lane::V), (Side::B, Lane::U), (Side::B, Lane::V)]
        {
            let payload = Self::recv_static(&mut self.net, side.notary(lane))?;
            match payload {
                Payload::ShareHandoff { share, help, mult } => {
                    let state = self.notary_mut(side, lane);
                    state.share = Some(share);
                    state.help = Some(help);
                    state.mult = Some(mult);
                }
                _ => return Err(ProtocolError::State("expected share hand-off")),
            }
        }
        Ok(())
    }

    /// Steps iii-v: lane relays, blinding, and sums to the coordinator.
    fn relay_rounds(&mut self) -> Result<(), ProtocolError> {
        let q = self.params.q.clone();
        // Step iii: each A-side notary forwards its share to its B-side peer.
        for lane in [Lane::U, Lane::V] {
            let share = self
                .notary(Side::A, lane)
                .share
                .clone()
                .ok_or(ProtocolError::State("missing share at A-side notary"))?;
            self.send(
                Side::A.notary(lane),
                Side::B.notary(lane),
                Step::III,
                Payload::Share(share),
            )?;
        }
        for lane in [Lane::U, Lane::V] {
            match Self::recv_static(&mut self.net, Side::B.notary(lane))? {
                Payload::Share(s) => self.notary_mut(Side::B, lane).peer_share = Some(s),
                _ => return Err(ProtocolError::State("expected relayed share")),
            }
        }

        // Step iv: B-side notaries blind the lane difference with their
        // owner's multiplier and send it back.
        for lane in [Lane::U, Lane::V] {
            let state = self.notary(Side::B, lane);
            let peer = state.peer_share.clone().ok_or(ProtocolError::State("missing peer share"))?;
            let own = state.share.clone().ok_or(ProtocolError::State("missing own share"))?;
            let mult = state.mult.clone().ok_or(ProtocolError::State("missing multiplier"))?;
            let scaled = mult * sub_mod(&peer, &own, &q) % &q;
            self.send(Side::B.notary(lane), Side::A.notary(lane), Step::IV, Payload::Scaled(scaled))?;
        }
        for lane in [Lane::U, Lane::V] {
            match Self::recv_static(&mut self.net, Side::A.notary(lane))? {
                Payload::Scaled(s) => self.notary_mut(Side::A, lane).scaled_in = Some(s),
                _ => return Err(ProtocolError::State("expected scaled relay")),
            }
        }

        // Step v: A-side notaries apply their owner's multiplier and send the
        // blinded sums to the coordinator.
        for lane in [Lane::U, Lane::V] {
            let state = self.notary(Side::A, lane);
            let scaled = state.scaled_in.clone().ok_or(ProtocolError::State("missing scaled value"))?;
            let mult = state.mult.clone().ok_or(ProtocolError::State("missing multiplier"))?;
            let sum = mult * scaled % &q;
            self.send(Side::A.notary(lane), PartyRole::Coordinator, Step::V, Payload::Sum(sum))?;
        }
        for slot in ["x", "y"] {
            match Self::recv_static(&mut self.net, PartyRole::Coordinator)? {
                Payload::Sum(s) => {
                    if slot == "x" {
                        self.cs.x_sum = Some(s);
                    } else {
                        self.cs.y_sum = Some(s);
                    }
                }
                _ => return Err(ProtocolError::State("expected blinded sum")),
            }
        }
        Ok(())
    }

    /// The proof procedure: help values flow through the opposite side's
    /// notary to reach the coordinator scaled by the full product `D`, and
    /// each commitment is raised to `D` over the same two hops.
    pub fn prove(&mut self) -> Result<ZkpRecord, ProtocolError> {
        if self.phase != Phase::Compared {
            return Err(ProtocolError::State("proof requires a completed comparison"));
        }
        let q = self.params.q.clone();
        let p = self.params.p.clone();

        // Relay chains, one per held help value.
        let chains = [
            (Side::A, Lane::U),
            (Side::A, Lane::V),
            (Side::B, Lane::U),
            (Side::B, Lane::V),
        ];
        let mut relays = Vec::with_capacity(4);
        for (side, lane) in chains {
            let peer = match side {
                Side::A => Side::B,
                Side::B => Side::A,
            };
            let state = self.notary(side, lane);
            let help = state.help.clone().ok_or(ProtocolError::State("missing help value"))?;
            let mult = state.mult.clone().ok_or(ProtocolError::State("missing multiplier"))?;
            let once = mult * help % &q;
            self.send(side.notary(lane), peer.notary(lane), Step::Zkp1, Payload::HelpRelay(once))?;
            let received = match Self::recv_static(&mut self.net, peer.notary(lane))? {
                Payload::HelpRelay(v) => v,
                _ => return Err(ProtocolError::State("expected help relay")),
            };
            let peer_mult = self
                .notary(peer, lane)
                .mult
                .clone()
                .ok_or(ProtocolError::State("missing multiplier"))?;
            let full = peer_mult * received % &q;
            self.send(peer.notary(lane), PartyRole::Coordinator, Step::Zkp1, Payload::HelpRelay(full))?;
            let at_cs = match Self::recv_static(&mut self.net, PartyRole::Coordinator)? {
                Payload::HelpRelay(v) => v,
                _ => return Err(ProtocolError::State("expected help relay at coordinator")),
            };
            relays.push(at_cs);
        }

        // Lift chains: the holder raises its lane's commitment to its own
        // multiplier, the peer completes the power to D and forwards it.
        let mut lifts = Vec::with_capacity(4);
        for (side, lane) in chains {
            let peer = match side {
                Side::A => Side::B,
                Side::B => Side::A,
            };
            let state = self.notary(side, lane);
            let base = state.base.clone().ok_or(ProtocolError::State("missing lift base"))?;
            let mult = state.mult.clone().ok_or(ProtocolError::State("missing multiplier"))?;
            let half = base.modpow(&mult, &p);
            self.send(side.notary(lane), peer.notary(lane), Step::Zkp2, Payload::Lift(half))?;
            let received = match Self::recv_static(&mut self.net, peer.notary(lane))? {
                Payload::Lift(v) => v,
                _ => return Err(ProtocolError::State("expected lift")),
            };
            let peer_mult = self
                .notary(peer, lane)
                .mult
                .clone()
                .ok_or(ProtocolError::State("missing multiplier"))?;
            let full = received.modpow(&peer_mult, &p);
            self.send(peer.notary(lane), PartyRole::Coordinator, Step::Zkp2, Payload::Lift(full))?;
            let at_cs = match Self::recv_static(&mut self.net, PartyRole::Coordinator)? {
                Payload::Lift(v) => v,
                _ => return Err(ProtocolError::State("expected lift at coordinator")),
            };
            lifts.push(at_cs);
        }

        let h1 = (&relays[0] + &relays[1]) % &q;
        let h2 = neg_mod(&((&relays[2] + &relays[3]) % &q), &q);
        let aggregate = aggregate_lifts(&lifts[0], &lifts[1], &lifts[2], &lifts[3], &self.params)?;
        let record = ZkpRecord {
            relay_a_u: relays[0].clone(),
            relay_a_v: relays[1].clone(),
            relay_b_u: relays[2].clone(),
            relay_b_v: relays[3].clone(),
            h1,
            h2,
            lift_a_u: lifts[0].clone(),
            lift_a_v: lifts[1].clone(),
            lift_b_u: lifts[2].clone(),
            lift_b_v: lifts[3].clone(),
            aggregate,
        };
        self.zkp = Some(record.clone());
        self.phase = Phase::Proved;
        Ok(record)
    }

    fn notary(&self, side: Side, lane: Lane) -> &NotaryState {
        match (side, lane) {
            (Side::A, Lane::U) => &self.notary_a1,
            (Side::A, Lane::V) => &self.notary_a2,
            (Side::B, Lane::U) => &self.notary_b1,
            (Side::B, Lane::V) => &self.notary_b2,
        }
    }

    fn notary_mut(&mut self, side: Side, lane: Lane) -> &mut NotaryState {
        match (side, lane) {
            (Side::A, Lane::U) => &mut self.notary_a1,
            (Side::A, Lane::V) => &mut self.notary_a2,
            (Side::B, Lane::U) => &mut self.notary_b1,
            (Side::B, Lane::V) => &mut self.notary_b2,
        }
    }

    fn recv_static(net: &mut Network, at: PartyRole) -> Result<Payload, ProtocolError> {
        net.recv(Endpoint::Role(at))
            .map(|m| m.payload)
            .ok_or(ProtocolError::State("expected message not delivered"))
    }

    pub fn outcome(&self) -> Option<ComparisonOutcome> {
        self.outcome
    }

    pub fn x_sum(&self) -> Option<&BigUint> {
        self.x_sum.as_ref()
    }

    pub fn y_sum(&self) -> Option<&BigUint> {
        self.y_sum.as_ref()
    }

    pub fn into_transcript(self) -> Result<PpcTranscript, ProtocolError> {
        let committed_a = self.cs.committed_a.ok_or(ProtocolError::State("no A commitments"))?;
        let committed_b = self.cs.committed_b.ok_or(ProtocolError::State("no B commitments"))?;
        Ok(PpcTranscript {
            group: self.params,
            mode: self.mode,
            committed_a,
            committed_b,
            x_sum: self.x_sum.ok_or(ProtocolError::State("run not executed"))?,
            y_sum: self.y_sum.ok_or(ProtocolError::State("run not executed"))?,
            outcome: self.outcome.ok_or(ProtocolError::State("run not executed"))?,
            zkp: self.zkp,
            log: self.net.into_log(),
        })
    }
}

/// One fresh ordered comparison, steps i-vi; 12 messages on the wire.
#[allow(clippy::too_many_arguments)]
pub fn ppc_run(
    params: &GroupParams,
    key_a: &KeyPair,
    key_b: &KeyPair,
    x: BigUint,
    y: BigUint,
    d_a: Option<BigUint>,
    d_b: Option<BigUint>,
    rng_a: &mut dyn RandomSource,
    rng_b: &mut dyn RandomSource,
) -> Result<PpcTranscript, ProtocolError> {
    let mut session = PpcSession::fresh(
        params,
        ComparisonMode::Ordered,
        key_a,
        key_b,
        x,
        y,
        d_a,
        d_b,
        rng_a,
        rng_b,
    )?;
    session.run()?;
    session.into_transcript()
}

/// Like [`ppc_run`] but follows the comparison with the proof procedure.
#[allow(clippy::too_many_arguments)]
pub fn ppc_run_verified(
    params: &GroupParams,
    key_a: &KeyPair,
    key_b: &KeyPair,
    x: BigUint,
    y: BigUint,
    d_a: Option<BigUint>,
    d_b: Option<BigUint>,
    rng_a: &mut dyn RandomSource,
    rng_b: &mut dyn RandomSource,
) -> Result<PpcTranscript, ProtocolError> {
    let mut session = PpcSession::fresh(
        params,
        ComparisonMode::Ordered,
        key_a,
        key_b,
        x,
        y,
        d_a,
        d_b,
        rng_a,
        rng_b,
    )?;
    session.run()?;
    session.prove()?;
    session.into_transcript()
}

/// The unblinded predecessor protocol. The coordinator receives the raw
/// share differences, so `val_1 + val_2 = (x - y) mod q` is visible to it;
/// kept as a baseline and leak demonstration.
#[derive(Debug, Clone)]
pub struct LegacyTranscript {
    pub group: GroupParams,
    pub val_1: BigUint,
    pub val_2: BigUint,
    pub outcome: ComparisonOutcome,
    pub log: Vec<LogEntry>,
}

impl LegacyTranscript {
    /// What the coordinator can directly compute: `(val_1 + val_2) mod q`.
    pub fn coordinator_visible_sum(&self) -> BigUint {
        (&self.val_1 + &self.val_2) % &self.group.q
    }
}

pub fn legacy_vc_run(
    params: &GroupParams,
    x: BigUint,
    y: BigUint,
    rng_a: &mut dyn RandomSource,
    rng_b: &mut dyn RandomSource,
) -> Result<LegacyTranscript, ProtocolError> {
    for operand in [&x, &y] {
        if 2u32 * operand >= params.q {
            return Err(ProtocolError::OperandOutOfBound(operand.clone()));
        }
    }
    let mut net = Network::new();
    net.register_ppc_roles();
    let shares_a = rand_rep(&x, params, rng_a)?;
    let shares_b = rand_rep(&y, params, rng_b)?;

    let send = |net: &mut Network, from: PartyRole, to: PartyRole, step: Step, payload: Payload| {
        net.send(Endpoint::Role(from), Endpoint::Role(to), step, payload)
    };
    // Owners hand one share to each of their notaries.
    send(&mut net, PartyRole::OwnerA, PartyRole::NotaryA1, Step::II, Payload::Share(shares_a.u.clone()))?;
    send(&mut net, PartyRole::OwnerA, PartyRole::NotaryA2, Step::II, Payload::Share(shares_a.v.clone()))?;
    send(&mut net, PartyRole::OwnerB, PartyRole::NotaryB1, Step::II, Payload::Share(shares_b.u.clone()))?;
    send(&mut net, PartyRole::OwnerB, PartyRole::NotaryB2, Step::II, Payload::Share(shares_b.v.clone()))?;
    let mut held = Vec::new();
    for role in [PartyRole::NotaryA1, PartyRole::NotaryA2, PartyRole::NotaryB1, PartyRole::NotaryB2] {
        match net.recv(Endpoint::Role(role)).map(|m| m.payload) {
            Some(Payload::Share(s)) => held.push(s),
            _ => return Err(ProtocolError::State("expected share")),
        }
    }

    // B-side notaries forward their shares to the A side.
    send(&mut net, PartyRole::NotaryB1, PartyRole::NotaryA1, Step::III, Payload::Share(held[2].clone()))?;
    send(&mut net, PartyRole::NotaryB2, PartyRole::NotaryA2, Step::III, Payload::Share(held[3].clone()))?;
    let mut relayed = Vec::new();
    for role in [PartyRole::NotaryA1, PartyRole::NotaryA2] {
        match net.recv(Endpoint::Role(role)).map(|m| m.payload) {
            Some(Payload::Share(s)) => relayed.push(s),
            _ => return Err(ProtocolError::State("expected relayed share")),
        }
    }

    // A-side notaries send the raw differences to the coordinator.
    let val_1 = sub_mod(&held[0], &relayed[0], &params.q);
    let val_2 = sub_mod(&held[1], &relayed[1], &params.q);
    send(&mut net, PartyRole::NotaryA1, PartyRole::Coordinator, Step::IV, Payload::Sum(val_1))?;
    send(&mut net, PartyRole::NotaryA2, PartyRole::Coordinator, Step::IV, Payload::Sum(val_2))?;
    let mut sums = Vec::new();
    for _ in 0..2 {
        match net.recv(Endpoint::Role(PartyRole::Coordinator)).map(|m| m.payload) {
            Some(Payload::Sum(s)) => sums.push(s),
            _ => return Err(ProtocolError::State("expected difference")),
        }
    }
    let outcome = decide(&sums[0], &sums[1], params);
    Ok(LegacyTranscript {
        group: params.clone(),
        val_1: sums[0].clone(),
        val_2: sums[1].clone(),
        outcome,
        log: net.into_log(),
    })
}

/// What a set of colluding roles can derive about the compared values from
/// their merged views, using only logged payloads and public parameters.
#[derive(Debug, Default, Clone)]
pub struct MergedKnowledge {
    pub share_a_u: Option<BigUint>,
    pub share_a_v: Option<BigUint>,
    pub share_b_u: Option<BigUint>,
    pub share_b_v: Option<BigUint>,
    pub mult_a: Option<BigUint>,
    pub mult_b: Option<BigUint>,
    pub x_sum: Option<BigUint>,
    pub y_sum: Option<BigUint>,
    pub value_a: Option<BigUint>,
    pub value_b: Option<BigUint>,
    pub difference: Option<BigUint>,
}

/// Merges the views of `roles` over a transcript and closes over the
/// protocol relations to derive shares, values, and the difference.
pub fn merge_and_derive(t: &PpcTranscript, roles: &[PartyRole]) -> MergedKnowledge {
    use crate::simnet::audit_views;
    let grouping: BTreeSet<Endpoint> = roles.iter().map(|r| Endpoint::Role(*r)).collect();
    let views = audit_views(&t.log, &grouping);
    let q = &t.group.q;

    let mut k = MergedKnowledge::default();
    let mut sums = Vec::new();
    for (message, payload) in views {
        match (message.step, payload) {
            (Step::II, Payload::ShareHandoff { share, mult, .. }) => {
                let (slot, mslot) = match message.to {
                    Endpoint::Role(PartyRole::NotaryA1) => (&mut k.share_a_u, &mut k.mult_a),
                    Endpoint::Role(PartyRole::NotaryA2) => (&mut k.share_a_v, &mut k.mult_a),
                    Endpoint::Role(PartyRole::NotaryB1) => (&mut k.share_b_u, &mut k.mult_b),
                    Endpoint::Role(PartyRole::NotaryB2) => (&mut k.share_b_v, &mut k.mult_b),
                    _ => continue,
                };
                *slot = Some(share.clone());
                *mslot = Some(mult.clone());
            }
            (Step::III, Payload::Share(s)) => {
                // A-side lane share relayed to the B side.
                match message.to {
                    Endpoint::Role(PartyRole::NotaryB1) => k.share_a_u = Some(s.clone()),
                    Endpoint::Role(PartyRole::NotaryB2) => k.share_a_v = Some(s.clone()),
                    _ => {}
                }
            }
            (Step::V, Payload::Sum(s)) => sums.push((message.from, s.clone())),
            _ => {}
        }
    }
    for (from, s) in sums {
        match from {
            Endpoint::Role(PartyRole::NotaryA1) => k.x_sum = Some(s),
            Endpoint::Role(PartyRole::NotaryA2) => k.y_sum = Some(s),
            _ => {}
        }
    }

    // Derive lane differences from the blinded sums when both multipliers
    // are known, then fill in missing shares.
    let product = match (&k.mult_a, &k.mult_b) {
        (Some(a), Some(b)) => mod_inv(&(a * b % q), q).ok(),
        _ => None,
    };
    let mut val_u = None;
    let mut val_v = None;
    if let (Some(inv), Some(x)) = (&product, &k.x_sum) {
        val_u = Some(x * inv % q);
    }
    if let (Some(inv), Some(y)) = (&product, &k.y_sum) {
        val_v = Some(y * inv % q);
    }
    if let Some(vu) = &val_u {
        match (&k.share_a_u, &k.share_b_u) {
            (Some(au), None) => k.share_b_u = Some(sub_mod(au, vu, q)),
            (None, Some(bu)) => k.share_a_u = Some((bu + vu) % q),
            _ => {}
        }
    }
    if let Some(vv) = &val_v {
        match (&k.share_a_v, &k.share_b_v) {
            (Some(av), None) => k.share_b_v = Some(sub_mod(av, vv, q)),
            (None, Some(bv)) => k.share_a_v = Some((bv + vv) % q),
            _ => {}
        }
    }
    if let (Some(u), Some(v)) = (&k.share_a_u, &k.share_a_v) {
        k.value_a = Some((u + v) % q);
    }
    if let (Some(u), Some(v)) = (&k.share_b_u, &k.share_b_v) {
        k.value_b = Some((u + v) % q);
    }
    if let (Some(vu), Some(vv)) = (&val_u, &val_v) {
        k.difference = Some((vu + vv) % q);
    }
    if let (Some(a), Some(b)) = (&k.value_a, &k.value_b) {
        k.difference = Some(sub_mod(a, b, q));
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{toy_group, ScriptedValues, SeededRng};
    use crate::simnet::{no_intra_side_notary_messages, PayloadClass, TamperHook};
    use num_bigint::BigUint;
    use num_traits::One;

    fn toy_keys(params: &GroupParams) -> (KeyPair, KeyPair) {
        (
            KeyPair::from_secret(BigUint::from(2u32), params),
            KeyPair::from_secret(BigUint::from(3u32), params),
        )
    }

    /// Replays the worked 7-vs-6 example end to end.
    fn paper_session() -> PpcSession {
        let params = toy_group();
        let (key_a, key_b) = toy_keys(&params);
        let mut rng_a = ScriptedValues::new([350u32, 11, 4]);
        let mut rng_b = ScriptedValues::new([300u32, 12, 15]);
        let mut session = PpcSession::fresh(
            &params,
            ComparisonMode::Ordered,
            &key_a,
            &key_b,
            BigUint::from(7u32),
            BigUint::from(6u32),
            Some(BigUint::from(2u32)),
            Some(BigUint::from(3u32)),
            &mut rng_a,
            &mut rng_b,
        )
        .unwrap();
        session.run().unwrap();
        session
    }

    #[test]
    fn decide_matches_worked_example() {
        let params = toy_group();
        assert_eq!(
            decide(&BigUint::from(300u32), &BigUint::from(299u32), &params),
            ComparisonOutcome::Greater
        );
        assert_eq!(decide(&BigUint::ZERO, &BigUint::ZERO, &params), ComparisonOutcome::Equal);
    }

    #[test]
    fn decide_agrees_with_plaintext_exhaustively() {
        let params = toy_group();
        let q = 593u32;
        for x in 0..=11u32 {
            for y in 0..=11u32 {
                for d_a in 1..=5u32 {
                    for d_b in 1..=5u32 {
                        let d = d_a * d_b;
                        let diff = (x as i64 - y as i64).rem_euclid(q as i64) as u32;
                        let blinded = (d * diff) % q;
                        // Split the blinded difference into arbitrary X, Y.
                        let x_sum = BigUint::from(blinded.min(7));
                        let y_sum = BigUint::from((blinded + q - blinded.min(7)) % q);
                        let expected = match x.cmp(&y) {
                            std::cmp::Ordering::Greater => ComparisonOutcome::Greater,
                            std::cmp::Ordering::Less => ComparisonOutcome::Less,
                            std::cmp::Ordering::Equal => ComparisonOutcome::Equal,
                        };
                        assert_eq!(decide(&x_sum, &y_sum, &params), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn paper_example_replays_exactly() {
        let session = paper_session();
        assert_eq!(session.x_sum().unwrap(), &BigUint::from(300u32));
        assert_eq!(session.y_sum().unwrap(), &BigUint::from(299u32));
        assert_eq!(session.outcome().unwrap(), ComparisonOutcome::Greater);
        let t = session.into_transcript().unwrap();
        assert_eq!(t.message_count(), 12);
        assert_eq!(t.committed_a.first.0, BigUint::from(730u32));
        assert_eq!(t.committed_a.second.0, BigUint::from(467u32));
        assert_eq!(t.committed_b.first.0, BigUint::from(1004u32));
        assert_eq!(t.committed_b.second.0, BigUint::from(581u32));
        assert!(no_intra_side_notary_messages(&t.log));
    }

    #[test]
    fn paper_example_zkp_values() {
        let mut session = paper_session();
        let record = session.prove().unwrap();
        assert_eq!(record.relay_a_u, BigUint::from(66u32));
        assert_eq!(record.relay_a_v, BigUint::from(24u32));
        assert_eq!(record.relay_b_u, BigUint::from(72u32));
        assert_eq!(record.relay_b_v, BigUint::from(90u32));
        assert_eq!(record.h1, BigUint::from(90u32));
        assert_eq!(record.h2, BigUint::from(431u32));
        assert_eq!(record.aggregate, BigUint::from(899u32));
        assert!(record.well_formed(&toy_group()));
        let params = toy_group();
        assert!(zkp_verify(
            &record,
            &BigUint::from(300u32),
            &BigUint::from(299u32),
            &BigUint::from(9u32),
            &BigUint::from(27u32),
            &params
        ));
        let t = session.into_transcript().unwrap();
        assert_eq!(t.message_count(), 12 + 16);
    }

    #[test]
    fn zkp_verify_rejects_shifted_sum() {
        let mut session = paper_session();
        let record = session.prove().unwrap();
        let params = toy_group();
        assert!(!zkp_verify(
            &record,
            &BigUint::from(301u32),
            &BigUint::from(299u32),
            &BigUint::from(9u32),
            &BigUint::from(27u32),
            &params
        ));
    }

    #[test]
    fn equal_values_compare_equal() {
        let params = toy_group();
        let (key_a, key_b) = toy_keys(&params);
        let mut rng_a = SeededRng::from_u64(21);
        let mut rng_b = SeededRng::from_u64(22);
        let t = ppc_run(
            &params,
            &key_a,
            &key_b,
            BigUint::from(9u32),
            BigUint::from(9u32),
            None,
            None,
            &mut rng_a,
            &mut rng_b,
        )
        .unwrap();
        assert_eq!(t.outcome, ComparisonOutcome::Equal);
    }

    #[test]
    fn operand_bound_enforced_before_any_message() {
        let params = toy_group();
        let (key_a, key_b) = toy_keys(&params);
        let mut rng_a = SeededRng::from_u64(1);
        let mut rng_b = SeededRng::from_u64(2);
        let err = ppc_run(
            &params,
            &key_a,
            &key_b,
            BigUint::from(12u32),
            BigUint::from(3u32),
            None,
            None,
            &mut rng_a,
            &mut rng_b,
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::OperandOutOfBound(_)));
    }

    #[test]
    fn multiplier_bound_enforced() {
        let params = toy_group();
        let (key_a, key_b) = toy_keys(&params);
        let mut rng_a = SeededRng::from_u64(1);
        let mut rng_b = SeededRng::from_u64(2);
        let err = PpcSession::fresh(
            &params,
            ComparisonMode::Ordered,
            &key_a,
            &key_b,
            BigUint::from(3u32),
            BigUint::from(4u32),
            Some(BigUint::from(6u32)),
            None,
            &mut rng_a,
            &mut rng_b,
        )
        .err()
        .unwrap();
        assert!(matches!(err, ProtocolError::MultiplierOutOfRange(..)));
    }

    #[test]
    fn legacy_run_leaks_difference_to_coordinator() {
        let params = toy_group();
        let mut rng = SeededRng::from_u64(77);
        for _ in 0..1000 {
            let x = sample_scalar(&BigUint::from(200u32), &mut rng.derive("a"));
            let y = sample_scalar(&BigUint::from(200u32), &mut rng.derive("b"));
            let mut rng_a = rng.derive("ra");
            let mut rng_b = rng.derive("rb");
            let t = legacy_vc_run(&params, x.clone(), y.clone(), &mut rng_a, &mut rng_b).unwrap();
            assert_eq!(t.coordinator_visible_sum(), sub_mod(&x, &y, &params.q));
            assert_eq!(t.log.len(), 8);
            let expected = match x.cmp(&y) {
                std::cmp::Ordering::Greater => ComparisonOutcome::Greater,
                std::cmp::Ordering::Less => ComparisonOutcome::Less,
                std::cmp::Ordering::Equal => ComparisonOutcome::Equal,
            };
            assert_eq!(t.outcome, expected);
            rng = rng.derive("next");
        }
    }

    #[test]
    fn legacy_bound_enforced() {
        let params = toy_group();
        let mut rng_a = SeededRng::from_u64(1);
        let mut rng_b = SeededRng::from_u64(2);
        let err =
            legacy_vc_run(&params, BigUint::from(297u32), BigUint::one(), &mut rng_a, &mut rng_b)
                .unwrap_err();
        assert!(matches!(err, ProtocolError::OperandOutOfBound(_)));
    }

    #[test]
    fn prove_before_run_is_state_error() {
        let params = toy_group();
        let (key_a, key_b) = toy_keys(&params);
        let mut rng_a = SeededRng::from_u64(5);
        let mut rng_b = SeededRng::from_u64(6);
        let mut session = PpcSession::fresh(
            &params,
            ComparisonMode::Ordered,
            &key_a,
            &key_b,
            BigUint::from(3u32),
            BigUint::from(4u32),
            None,
            None,
            &mut rng_a,
            &mut rng_b,
        )
        .unwrap();
        assert!(matches!(session.prove(), Err(ProtocolError::State(_))));
    }

    #[test]
    fn tampered_sum_fails_verification() {
        let params = toy_group();
        let (key_a, key_b) = toy_keys(&params);
        let mut rng_a = SeededRng::from_u64(31);
        let mut rng_b = SeededRng::from_u64(32);
        let mut session = PpcSession::fresh(
            &params,
            ComparisonMode::Ordered,
            &key_a,
            &key_b,
            BigUint::from(7u32),
            BigUint::from(6u32),
            None,
            None,
            &mut rng_a,
            &mut rng_b,
        )
        .unwrap();
        session.add_hook(TamperHook::new(
            |m| m.payload.class() == PayloadClass::Sum,
            |p| {
                if let Payload::Sum(v) = p {
                    *v += BigUint::one();
                }
            },
        ));
        session.run().unwrap();
        let record = session.prove().unwrap();
        let x = session.x_sum().unwrap().clone();
        let y = session.y_sum().unwrap().clone();
        assert!(!zkp_verify(&record, &x, &y, &key_a.public, &key_b.public, &params));
    }

    #[test]
    fn merged_views_reconstruct_per_collusion_analysis() {
        let session = paper_session();
        let t = session.into_transcript().unwrap();

        // Both notaries of one owner: that owner's value falls.
        let k = merge_and_derive(&t, &[PartyRole::NotaryA1, PartyRole::NotaryA2]);
        assert_eq!(k.value_a, Some(BigUint::from(7u32)));
        assert_eq!(k.value_b, None);

        // One notary per owner, opposite lanes, plus the coordinator:
        // both values fall.
        let k = merge_and_derive(
            &t,
            &[PartyRole::NotaryA1, PartyRole::NotaryB2, PartyRole::Coordinator],
        );
        assert_eq!(k.value_a, Some(BigUint::from(7u32)));
        assert_eq!(k.value_b, Some(BigUint::from(6u32)));

        // Same-lane coalition: the difference is exposed, the values not.
        let k = merge_and_derive(
            &t,
            &[PartyRole::NotaryA1, PartyRole::NotaryB1, PartyRole::Coordinator],
        );
        assert_eq!(k.difference, Some(BigUint::one()));
        assert_eq!(k.value_a, None);
        assert_eq!(k.value_b, None);

        // The coordinator alone: neither value nor the difference.
        let k = merge_and_derive(&t, &[PartyRole::Coordinator]);
        assert_eq!(k.value_a, None);
        assert_eq!(k.value_b, None);
        assert_eq!(k.difference, None);
    }
}
