//! In-memory secure channels between parties: ordered delivery, a full
//! message log, merged-view audits, and tamper hooks for soundness tests.
//!
//! Channels are confidential by construction; only the recipient's mailbox
//! sees a payload. Eavesdropping is modeled exclusively through
//! [`audit_views`] over the run log.

use num_bigint::BigUint;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("endpoint {0} not registered")]
    Unregistered(String),
}

/// The seven fixed roles of one comparison run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartyRole {
    OwnerA,
    OwnerB,
    NotaryA1,
    NotaryA2,
    NotaryB1,
    NotaryB2,
    Coordinator,
}

impl fmt::Display for PartyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PartyRole::OwnerA => "Owner-A",
            PartyRole::OwnerB => "Owner-B",
            PartyRole::NotaryA1 => "Notary-A1",
            PartyRole::NotaryA2 => "Notary-A2",
            PartyRole::NotaryB1 => "Notary-B1",
            PartyRole::NotaryB2 => "Notary-B2",
            PartyRole::Coordinator => "Coordinator",
        };
        f.write_str(s)
    }
}

/// Addressable party: a comparison role, or an auction-level participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Role(PartyRole),
    Auctioneer,
    Agent(u64),
    Notary(u64),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Role(r) => write!(f, "{r}"),
            Endpoint::Auctioneer => write!(f, "Auctioneer"),
            Endpoint::Agent(i) => write!(f, "Agent-{i}"),
            Endpoint::Notary(i) => write!(f, "Notary-{i}"),
        }
    }
}

/// Protocol step a message belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    I,
    II,
    III,
    IV,
    V,
    Zkp1,
    Zkp2,
    Setup,
    Bidding,
    HandOff,
    Payment,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Step::I => "i",
            Step::II => "ii",
            Step::III => "iii",
            Step::IV => "iv",
            Step::V => "v",
            Step::Zkp1 => "zkp-1",
            Step::Zkp2 => "zkp-2",
            Step::Setup => "setup",
            Step::Bidding => "bidding",
            Step::HandOff => "handoff",
            Step::Payment => "payment",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PayloadClass {
    Commitment,
    Share,
    ScaledRelay,
    Sum,
    HelpRelay,
    Lift,
    Opening,
    Control,
}

impl fmt::Display for PayloadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PayloadClass::Commitment => "commitment",
            PayloadClass::Share => "share",
            PayloadClass::ScaledRelay => "scaled-relay",
            PayloadClass::Sum => "sum",
            PayloadClass::HelpRelay => "help-relay",
            PayloadClass::Lift => "lift",
            PayloadClass::Opening => "opening",
            PayloadClass::Control => "control",
        };
        f.write_str(s)
    }
}

/// What a message carries. Values stay as integers in memory; they are
/// rendered as decimal strings only on export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// `E(R(x))`, the two commitments of a share pair.
    CommitmentPair(BigUint, BigUint),
    /// One share plus its help value and the owner's blinding multiplier.
    ShareHandoff { share: BigUint, help: BigUint, mult: BigUint },
    /// A bare share relayed between notaries.
    Share(BigUint),
    /// A multiplier-scaled share difference.
    Scaled(BigUint),
    /// A blinded sum (`X` or `Y`) bound for the coordinator.
    Sum(BigUint),
    /// A multiplier-scaled help value on its way to the coordinator.
    HelpRelay(BigUint),
    /// A commitment raised to a private multiplier.
    Lift(BigUint),
    /// Coordinator request to lift the embedded base value.
    LiftRequest(BigUint),
    /// Opening of a commitment: the value and its (combined) help value.
    Opening { value: BigUint, help: BigUint },
    /// Auction bid submission: all-commitment, nothing in the clear.
    BidSubmission {
        value_c: BigUint,
        size_c: BigUint,
        weight: (BigUint, BigUint),
        bundle: Vec<(BigUint, BigUint)>,
    },
    /// Post-bidding hand-off from an agent to one of its notaries: its lane
    /// of the weight shares, the same lane of every bundle entry, and the
    /// two private multipliers.
    AgentHandOff {
        weight_share: BigUint,
        weight_help: BigUint,
        entry_shares: Vec<(BigUint, BigUint)>,
        value_mult: BigUint,
        item_mult: BigUint,
    },
    /// Secret per-agent identifier issued at registration.
    IdentifierAssignment(BigUint),
    /// An agent's public key on its way to the bulletin board.
    PublicKey(BigUint),
    /// Item ids, distributed to agents only.
    ItemIds(Vec<BigUint>),
    /// A computed payment reported back to the auctioneer.
    PaymentValue(BigUint),
    /// Free-form coordination notice.
    Note(&'static str),
}

impl Payload {
    pub fn class(&self) -> PayloadClass {
        match self {
            Payload::CommitmentPair(..) | Payload::BidSubmission { .. } => PayloadClass::Commitment,
            Payload::ShareHandoff { .. } | Payload::Share(_) | Payload::AgentHandOff { .. } => {
                PayloadClass::Share
            }
            Payload::Scaled(_) => PayloadClass::ScaledRelay,
            Payload::Sum(_) => PayloadClass::Sum,
            Payload::HelpRelay(_) => PayloadClass::HelpRelay,
            Payload::Lift(_) => PayloadClass::Lift,
            Payload::Opening { .. } => PayloadClass::Opening,
            Payload::LiftRequest(_)
            | Payload::IdentifierAssignment(_)
            | Payload::PublicKey(_)
            | Payload::ItemIds(_)
            | Payload::PaymentValue(_)
            | Payload::Note(_) => PayloadClass::Control,
        }
    }

    /// Decimal rendering for transcript export.
    pub fn render(&self) -> String {
        fn join(values: &[&BigUint]) -> String {
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            Payload::CommitmentPair(a, b) => join(&[a, b]),
            Payload::ShareHandoff { share, help, mult } => join(&[share, help, mult]),
            Payload::Share(v)
            | Payload::Scaled(v)
            | Payload::Sum(v)
            | Payload::HelpRelay(v)
            | Payload::Lift(v)
            | Payload::LiftRequest(v)
            | Payload::IdentifierAssignment(v)
            | Payload::PublicKey(v)
            | Payload::PaymentValue(v) => v.to_string(),
            Payload::Opening { value, help } => join(&[value, help]),
            Payload::BidSubmission { value_c, size_c, weight, bundle } => {
                let mut parts = vec![value_c.to_string(), size_c.to_string()];
                parts.push(weight.0.to_string());
                parts.push(weight.1.to_string());
                for (a, b) in bundle {
                    parts.push(a.to_string());
                    parts.push(b.to_string());
                }
                parts.join(",")
            }
            Payload::AgentHandOff { weight_share, weight_help, entry_shares, value_mult, item_mult } => {
                let mut parts = vec![weight_share.to_string(), weight_help.to_string()];
                for (s, h) in entry_shares {
                    parts.push(s.to_string());
                    parts.push(h.to_string());
                }
                parts.push(value_mult.to_string());
                parts.push(item_mult.to_string());
                parts.join(",")
            }
            Payload::ItemIds(ids) => {
                ids.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            }
            Payload::Note(s) => (*s).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub seq: u64,
    pub from: Endpoint,
    pub to: Endpoint,
    pub step: Step,
    pub payload: Payload,
}

/// One log line: the delivered message, plus the pre-tamper payload when a
/// hook fired on it.
#[derive(Debug, Clone)]
pub struct LogEntry {
    pub message: Message,
    pub original: Option<Payload>,
}

impl LogEntry {
    pub fn tampered(&self) -> bool {
        self.original.is_some()
    }

    /// `step sender receiver class payload` line for transcript export.
    pub fn render(&self) -> String {
        let m = &self.message;
        format!(
            "{} {} {} {} {}",
            m.step,
            m.from,
            m.to,
            m.payload.class(),
            m.payload.render()
        )
    }
}

/// One-shot payload mutation applied between logging and delivery.
pub struct TamperHook {
    selector: Box<dyn Fn(&Message) -> bool>,
    mutation: Box<dyn Fn(&mut Payload)>,
    fired: bool,
}

impl TamperHook {
    pub fn new(
        selector: impl Fn(&Message) -> bool + 'static,
        mutation: impl Fn(&mut Payload) + 'static,
    ) -> Self {
        Self { selector: Box::new(selector), mutation: Box::new(mutation), fired: false }
    }
}

/// Synchronous round-based network confined to one run. Delivery is FIFO;
/// every send is logged before delivery.
#[derive(Default)]
pub struct Network {
    mailboxes: BTreeMap<Endpoint, VecDeque<Message>>,
    log: Vec<LogEntry>,
    hooks: Vec<TamperHook>,
    next_seq: u64,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, endpoint: Endpoint) {
        self.mailboxes.entry(endpoint).or_default();
    }

    pub fn register_ppc_roles(&mut self) {
        for role in [
            PartyRole::OwnerA,
            PartyRole::OwnerB,
            PartyRole::NotaryA1,
            PartyRole::NotaryA2,
            PartyRole::NotaryB1,
            PartyRole::NotaryB2,
            PartyRole::Coordinator,
        ] {
            self.register(Endpoint::Role(role));
        }
    }

    pub fn add_hook(&mut self, hook: TamperHook) {
        self.hooks.push(hook);
    }

    pub fn send(
        &mut self,
        from: Endpoint,
        to: Endpoint,
        step: Step,
        payload: Payload,
    ) -> Result<(), NetError> {
        if !self.mailboxes.contains_key(&from) {
            return Err(NetError::Unregistered(from.to_string()));
        }
        if !self.mailboxes.contains_key(&to) {
            return Err(NetError::Unregistered(to.to_string()));
        }
        let mut message = Message { seq: self.next_seq, from, to, step, payload };
        self.next_seq += 1;

        let mut original = None;
        for hook in &mut self.hooks {
            if !hook.fired && (hook.selector)(&message) {
                original = Some(message.payload.clone());
                (hook.mutation)(&mut message.payload);
                hook.fired = true;
                break;
            }
        }

        self.log.push(LogEntry { message: message.clone(), original });
        self.mailboxes.get_mut(&to).expect("registered above").push_back(message);
        Ok(())
    }

    pub fn recv(&mut self, endpoint: Endpoint) -> Option<Message> {
        self.mailboxes.get_mut(&endpoint)?.pop_front()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn into_log(self) -> Vec<LogEntry> {
        self.log
    }

    pub fn tamper_count(&self) -> usize {
        self.log.iter().filter(|e| e.tampered()).count()
    }
}

/// All payloads observable by a set of roles: what they received (as
/// delivered) and what they sent (originals, for tampered sends).
pub fn audit_views<'a>(log: &'a [LogEntry], grouping: &BTreeSet<Endpoint>) -> Vec<(&'a Message, &'a Payload)> {
    let mut views = Vec::new();
    for entry in log {
        let m = &entry.message;
        if grouping.contains(&m.to) {
            views.push((m, &m.payload));
        } else if grouping.contains(&m.from) {
            let payload = entry.original.as_ref().unwrap_or(&m.payload);
            views.push((m, payload));
        }
    }
    views
}

/// Checks there is no direct channel between the two notaries of one side,
/// the structural property the collusion analysis leans on.
pub fn no_intra_side_notary_messages(log: &[LogEntry]) -> bool {
    use Endpoint::Role;
    use PartyRole::*;
    log.iter().all(|e| {
        let (f, t) = (e.message.from, e.message.to);
        !matches!(
            (f, t),
            (Role(NotaryA1), Role(NotaryA2))
                | (Role(NotaryA2), Role(NotaryA1))
                | (Role(NotaryB1), Role(NotaryB2))
                | (Role(NotaryB2), Role(NotaryB1))
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn net_with_roles() -> Network {
        let mut net = Network::new();
        net.register_ppc_roles();
        net
    }

    #[test]
    fn send_then_recv_round_trips() {
        let mut net = net_with_roles();
        let from = Endpoint::Role(PartyRole::OwnerA);
        let to = Endpoint::Role(PartyRole::NotaryA1);
        net.send(from, to, Step::II, Payload::Share(BigUint::from(350u32))).unwrap();
        let got = net.recv(to).unwrap();
        assert_eq!(got.payload, Payload::Share(BigUint::from(350u32)));
        assert_eq!(got.from, from);
        assert_eq!(net.log().len(), 1);
        assert!(!net.log()[0].tampered());
    }

    #[test]
    fn unregistered_endpoint_is_routing_error() {
        let mut net = Network::new();
        net.register(Endpoint::Auctioneer);
        let err = net
            .send(Endpoint::Auctioneer, Endpoint::Agent(0), Step::Setup, Payload::Note("hi"))
            .unwrap_err();
        assert!(matches!(err, NetError::Unregistered(_)));
    }

    #[test]
    fn seq_strictly_increases() {
        let mut net = net_with_roles();
        let a = Endpoint::Role(PartyRole::OwnerA);
        let b = Endpoint::Role(PartyRole::Coordinator);
        for _ in 0..5 {
            net.send(a, b, Step::I, Payload::Note("x")).unwrap();
        }
        let seqs: Vec<u64> = net.log().iter().map(|e| e.message.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn hook_mutates_recipient_view_and_logs_both() {
        let mut net = net_with_roles();
        net.add_hook(TamperHook::new(
            |m| m.payload.class() == PayloadClass::Sum,
            |p| {
                if let Payload::Sum(v) = p {
                    *v += BigUint::one();
                }
            },
        ));
        let from = Endpoint::Role(PartyRole::NotaryA1);
        let to = Endpoint::Role(PartyRole::Coordinator);
        net.send(from, to, Step::V, Payload::Sum(BigUint::from(300u32))).unwrap();
        let got = net.recv(to).unwrap();
        assert_eq!(got.payload, Payload::Sum(BigUint::from(301u32)));
        let entry = &net.log()[0];
        assert_eq!(entry.original, Some(Payload::Sum(BigUint::from(300u32))));
        assert_eq!(entry.message.payload, Payload::Sum(BigUint::from(301u32)));
    }

    #[test]
    fn audit_views_cover_sent_and_received() {
        let mut net = net_with_roles();
        let a = Endpoint::Role(PartyRole::OwnerA);
        let n1 = Endpoint::Role(PartyRole::NotaryA1);
        let cs = Endpoint::Role(PartyRole::Coordinator);
        net.send(a, n1, Step::II, Payload::Share(BigUint::from(1u32))).unwrap();
        net.send(n1, cs, Step::V, Payload::Sum(BigUint::from(2u32))).unwrap();

        let mut group = BTreeSet::new();
        group.insert(n1);
        let views = audit_views(net.log(), &group);
        assert_eq!(views.len(), 2);

        let mut cs_only = BTreeSet::new();
        cs_only.insert(cs);
        let views = audit_views(net.log(), &cs_only);
        assert_eq!(views.len(), 1);
        assert_eq!(views[0].1.class(), PayloadClass::Sum);
    }
}
