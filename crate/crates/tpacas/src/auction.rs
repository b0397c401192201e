//! The sealed-bid single-minded auction over the comparison protocol:
//! setup with secret identifiers and per-agent notary pairs, all-commitment
//! bidding onto the bulletin board, comparison-based bid sorting and winner
//! determination with a verifying proof per comparison, notary-mediated
//! payment computation, and an export-level verifier that re-checks every
//! proof and replays the greedy logic from the published records alone.

use crate::commit::{combine, commit, rand_rep, verify_opening, Commitment, CommittedPair, RandRep};
use crate::fixed::{critical_payment, scaled_weight};
use crate::group::{sample_in_range, sample_scalar, GroupError, GroupParams, KeyPair, SeededRng};
use crate::oracle::AuctionInstance;
use crate::ppc::{
    decide, zkp_verify, ComparisonMode, ComparisonOutcome, PpcSession, PpcTranscript,
    PreparedSide, ProtocolError, ZkpRecord,
};
use crate::sbb::{BulletinBoard, RecordKind};
use crate::simnet::{Endpoint, NetError, Network, Payload, PayloadClass, Step};
use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AuctionError {
    #[error("setup: {0}")]
    Setup(String),
    #[error("bid from {agent} rejected: {reason}")]
    BidRejected { agent: String, reason: String },
    #[error("comparison proof at record {0} failed verification")]
    ProofRejected(u64),
    #[error("opening by agent {0} failed verification")]
    OpeningRejected(String),
    #[error("auction state: {0}")]
    State(&'static str),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Public auction parameters announced at setup.
#[derive(Debug, Clone)]
pub struct AuctionConfig {
    pub group: GroupParams,
    pub item_count: u64,
    pub precision: u32,
    /// Item ids to use; sampled from `Z_q` when absent. They may exceed
    /// `q/2`, since items are only ever compared for equality.
    pub item_ids: Option<Vec<BigUint>>,
}

/// An agent's published bid: commitments of its valuation, its bundle size,
/// and the share pair of its scaled weight. Nothing in the clear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidTuple {
    pub value_c: Commitment,
    pub size_c: Commitment,
    pub weight: CommittedPair,
}

/// Exactly `m` committed item ids: every preferred item at least once,
/// padded with re-committed duplicates so the bundle size stays hidden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemBundle {
    pub entries: Vec<CommittedPair>,
}

/// Final result: winning identifiers in admission order, their scaled
/// payments, and the bulletin-board indices of every comparison proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub winners: Vec<BigUint>,
    pub payments: Vec<(BigUint, BigUint)>,
    pub precision: u32,
    pub proof_indices: Vec<u64>,
}

#[derive(Debug, Clone)]
struct EntryPrivate {
    shares: RandRep,
    helps: (BigUint, BigUint),
}

struct AgentState {
    name: String,
    valuation: u64,
    bundle_items: BTreeSet<u64>,
    rng: SeededRng,
    key: KeyPair,
    identifier: BigUint,
    notaries: (usize, usize),
    weight_scaled: BigUint,
    weight_shares: Option<RandRep>,
    weight_helps: Option<(BigUint, BigUint)>,
    value_help: Option<BigUint>,
    size_help: Option<BigUint>,
    bid: Option<BidTuple>,
    bundle: Option<ItemBundle>,
    entries: Vec<EntryPrivate>,
    d_value: Option<BigUint>,
    d_item: Option<BigUint>,
}

/// What one notary holds for its assigned agent after the post-bidding
/// hand-off: one lane of every committed value plus both multipliers.
#[derive(Debug, Default, Clone)]
struct NotaryHoldings {
    agent: usize,
    weight_share: Option<BigUint>,
    weight_help: Option<BigUint>,
    entry_shares: Vec<(BigUint, BigUint)>,
    d_value: Option<BigUint>,
    d_item: Option<BigUint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CompKind {
    Value,
    Item,
}

#[derive(Debug, Clone)]
struct PaymentEvidence {
    critical: usize,
    weight_value: BigUint,
    weight_help: BigUint,
    size_value: BigUint,
    size_help: BigUint,
}

/// One auction run: all parties, the auction-level message log, the
/// bulletin board, and the accumulated comparison state.
pub struct Auction {
    config: AuctionConfig,
    net: Network,
    sbb: BulletinBoard,
    agents: Vec<AgentState>,
    notaries: Vec<NotaryHoldings>,
    item_ids: Vec<BigUint>,
    sorted: Option<Vec<usize>>,
    winners: Option<Vec<usize>>,
    weight_outcomes: BTreeMap<(usize, usize), ComparisonOutcome>,
    pair_intersects: BTreeMap<(usize, usize), bool>,
    payments: Option<Vec<(usize, BigUint, Option<PaymentEvidence>)>>,
    proof_indices: Vec<u64>,
    transcripts: Vec<PpcTranscript>,
    value_comparisons: u64,
    item_comparisons: u64,
}

impl Auction {
    /// Protocol setup: announcement, secret identifiers, item ids to agents
    /// only, a dedicated notary pair per agent, and public keys on the
    /// bulletin board.
    pub fn setup(
        config: AuctionConfig,
        instance: &AuctionInstance,
        seed: &SeededRng,
    ) -> Result<Self, AuctionError> {
        instance.validate().map_err(|e| AuctionError::Setup(e.to_string()))?;
        config.group.validate()?;
        if config.item_count != instance.item_count {
            return Err(AuctionError::Setup("config and instance disagree on item count".into()));
        }
        let n = instance.bids.len();
        let m = config.item_count as usize;

        let mut au_rng = seed.derive("auctioneer");
        let q = config.group.q.clone();

        // Item ids: supplied or drawn; must be pairwise distinct.
        let item_ids = match &config.item_ids {
            Some(ids) => {
                if ids.len() != m {
                    return Err(AuctionError::Setup("need exactly one id per item".into()));
                }
                if ids.iter().collect::<BTreeSet<_>>().len() != m {
                    return Err(AuctionError::Setup("duplicate item ids".into()));
                }
                if ids.iter().any(|id| id >= &q) {
                    return Err(AuctionError::Setup("item id outside Z_q".into()));
                }
                ids.clone()
            }
            None => {
                let mut ids = Vec::with_capacity(m);
                let mut seen = BTreeSet::new();
                while ids.len() < m {
                    let id = sample_scalar(&q, &mut au_rng);
                    if seen.insert(id.clone()) {
                        ids.push(id);
                    }
                }
                ids
            }
        };

        // Secret identifiers, distinct per agent.
        let mut identifiers = Vec::with_capacity(n);
        let mut seen = BTreeSet::new();
        while identifiers.len() < n {
            let id = sample_scalar(&q, &mut au_rng);
            if seen.insert(id.clone()) {
                identifiers.push(id);
            }
        }

        // Dedicated notary pair per agent, drawn from a shuffled pool of 2n.
        let mut pool: Vec<usize> = (0..2 * n).collect();
        for i in (1..pool.len()).rev() {
            let j: usize = sample_scalar(&BigUint::from(i as u64 + 1), &mut au_rng)
                .try_into()
                .expect("small index");
            pool.swap(i, j);
        }

        let mut net = Network::new();
        net.register(Endpoint::Auctioneer);
        for i in 0..n {
            net.register(Endpoint::Agent(i as u64));
        }
        for k in 0..2 * n {
            net.register(Endpoint::Notary(k as u64));
        }

        let mut sbb = BulletinBoard::new();
        sbb.append(
            RecordKind::Announcement,
            format!(
                "p={} q={} g={} d_max={} m={} precision={}",
                config.group.p,
                config.group.q,
                config.group.g,
                config.group.d_max,
                config.item_count,
                config.precision
            ),
        );

        let mut agents = Vec::with_capacity(n);
        for (i, bid) in instance.bids.iter().enumerate() {
            let mut rng = seed.derive(&format!("agent-{i}"));
            let key = KeyPair::generate(&config.group, &mut rng);
            let identifier = identifiers[i].clone();

            net.send(
                Endpoint::Auctioneer,
                Endpoint::Agent(i as u64),
                Step::Setup,
                Payload::IdentifierAssignment(identifier.clone()),
            )?;
            net.send(
                Endpoint::Auctioneer,
                Endpoint::Agent(i as u64),
                Step::Setup,
                Payload::ItemIds(item_ids.clone()),
            )?;
            net.send(
                Endpoint::Agent(i as u64),
                Endpoint::Auctioneer,
                Step::Setup,
                Payload::PublicKey(key.public.clone()),
            )?;
            // Drain the setup mailboxes; contents mirror the state below.
            net.recv(Endpoint::Agent(i as u64));
            net.recv(Endpoint::Agent(i as u64));
            let published = match net.recv(Endpoint::Auctioneer).map(|msg| msg.payload) {
                Some(Payload::PublicKey(h)) => h,
                _ => return Err(AuctionError::State("expected public key")),
            };
            sbb.append(RecordKind::PublicKey, format!("id={identifier} h={published}"));

            agents.push(AgentState {
                name: bid.name.clone(),
                valuation: bid.valuation,
                bundle_items: bid.bundle.clone(),
                rng,
                key,
                identifier,
                notaries: (pool[2 * i], pool[2 * i + 1]),
                weight_scaled: BigUint::zero(),
                weight_shares: None,
                weight_helps: None,
                value_help: None,
                size_help: None,
                bid: None,
                bundle: None,
                entries: Vec::new(),
                d_value: None,
                d_item: None,
            });
        }

        let mut notaries = vec![NotaryHoldings::default(); 2 * n];
        for (i, agent) in agents.iter().enumerate() {
            notaries[agent.notaries.0].agent = i;
            notaries[agent.notaries.1].agent = i;
        }

        Ok(Self {
            config,
            net,
            sbb,
            agents,
            notaries,
            item_ids,
            sorted: None,
            winners: None,
            weight_outcomes: BTreeMap::new(),
            pair_intersects: BTreeMap::new(),
            payments: None,
            proof_indices: Vec::new(),
            transcripts: Vec::new(),
            value_comparisons: 0,
            item_comparisons: 0,
        })
    }

    /// Bidding plus the post-bidding hand-off for one agent: commit the
    /// weight, valuation, size, and the padded item bundle; publish the
    /// commitments; hand one share lane (with help values and both private
    /// multipliers) to each assigned notary.
    pub fn submit_bid(&mut self, idx: usize) -> Result<(), AuctionError> {
        if self.agents[idx].bid.is_some() {
            return Err(AuctionError::State("bid already submitted"));
        }
        let params = self.config.group.clone();
        let m = self.config.item_count as usize;
        let precision = self.config.precision;
        let item_ids = self.item_ids.clone();

        let agent = &mut self.agents[idx];
        let size = agent.bundle_items.len() as u64;
        if size < 2 {
            return Err(AuctionError::BidRejected {
                agent: agent.name.clone(),
                reason: "bundle must contain at least two items".into(),
            });
        }
        let weight = scaled_weight(agent.valuation, size, precision);
        if !params.operand_in_bound(&weight) {
            return Err(AuctionError::BidRejected {
                agent: agent.name.clone(),
                reason: format!("scaled weight {weight} exceeds the comparison bound"),
            });
        }

        let weight_shares = rand_rep(&weight, &params, &mut agent.rng)?;
        let w_r1 = sample_scalar(&params.q, &mut agent.rng);
        let w_r2 = sample_scalar(&params.q, &mut agent.rng);
        let weight_pair = CommittedPair {
            first: commit(&weight_shares.u, &w_r1, &agent.key.public, &params),
            second: commit(&weight_shares.v, &w_r2, &agent.key.public, &params),
        };
        let value_help = sample_scalar(&params.q, &mut agent.rng);
        let value_c = commit(&BigUint::from(agent.valuation), &value_help, &agent.key.public, &params);
        let size_help = sample_scalar(&params.q, &mut agent.rng);
        let size_c = commit(&BigUint::from(size), &size_help, &agent.key.public, &params);

        // Padded label list: every preferred item once, duplicates drawn
        // uniformly from the bundle, order shuffled.
        let labels: Vec<u64> = agent.bundle_items.iter().copied().collect();
        let mut padded = labels.clone();
        while padded.len() < m {
            let pick: usize = sample_scalar(&BigUint::from(labels.len() as u64), &mut agent.rng)
                .try_into()
                .expect("small index");
            padded.push(labels[pick]);
        }
        for i in (1..padded.len()).rev() {
            let j: usize = sample_scalar(&BigUint::from(i as u64 + 1), &mut agent.rng)
                .try_into()
                .expect("small index");
            padded.swap(i, j);
        }

        let mut entries = Vec::with_capacity(m);
        let mut entry_pairs = Vec::with_capacity(m);
        for &label in &padded {
            let item_id = &item_ids[(label - 1) as usize];
            let shares = rand_rep(item_id, &params, &mut agent.rng)?;
            let r1 = sample_scalar(&params.q, &mut agent.rng);
            let r2 = sample_scalar(&params.q, &mut agent.rng);
            entry_pairs.push(CommittedPair {
                first: commit(&shares.u, &r1, &agent.key.public, &params),
                second: commit(&shares.v, &r2, &agent.key.public, &params),
            });
            entries.push(EntryPrivate { shares, helps: (r1, r2) });
        }

        let d_value = sample_in_range(&params.d_max, &mut agent.rng);
        let d_item = sample_in_range(&(&params.q - 1u32), &mut agent.rng);

        agent.weight_scaled = weight;
        agent.weight_shares = Some(weight_shares.clone());
        agent.weight_helps = Some((w_r1.clone(), w_r2.clone()));
        agent.value_help = Some(value_help);
        agent.size_help = Some(size_help);
        agent.bid = Some(BidTuple {
            value_c: value_c.clone(),
            size_c: size_c.clone(),
            weight: weight_pair.clone(),
        });
        agent.bundle = Some(ItemBundle { entries: entry_pairs.clone() });
        agent.entries = entries.clone();
        agent.d_value = Some(d_value.clone());
        agent.d_item = Some(d_item.clone());
        let identifier = agent.identifier.clone();
        let (n1, n2) = agent.notaries;

        // Publish: the submission reaches the auctioneer as commitments
        // only, and the auctioneer records exactly what it received.
        self.net.send(
            Endpoint::Agent(idx as u64),
            Endpoint::Auctioneer,
            Step::Bidding,
            Payload::BidSubmission {
                value_c: value_c.0.clone(),
                size_c: size_c.0.clone(),
                weight: (weight_pair.first.0.clone(), weight_pair.second.0.clone()),
                bundle: entry_pairs.iter().map(|p| (p.first.0.clone(), p.second.0.clone())).collect(),
            },
        )?;
        let received = match self.net.recv(Endpoint::Auctioneer).map(|msg| msg.payload) {
            Some(Payload::BidSubmission { value_c, size_c, weight, bundle }) => {
                (value_c, size_c, weight, bundle)
            }
            _ => return Err(AuctionError::State("expected bid submission")),
        };
        self.sbb.append(
            RecordKind::Bid,
            format!(
                "id={identifier} value={} size={} w1={} w2={}",
                received.0, received.1, received.2 .0, received.2 .1
            ),
        );
        let rendered: Vec<String> =
            received.3.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        self.sbb.append(
            RecordKind::Bundle,
            format!("id={identifier} entries={}", rendered.join(",")),
        );

        // Post-bidding hand-off, one lane per notary.
        for (notary, lane_u) in [(n1, true), (n2, false)] {
            let payload = Payload::AgentHandOff {
                weight_share: if lane_u { weight_shares.u.clone() } else { weight_shares.v.clone() },
                weight_help: if lane_u { w_r1.clone() } else { w_r2.clone() },
                entry_shares: entries
                    .iter()
                    .map(|e| {
                        if lane_u {
                            (e.shares.u.clone(), e.helps.0.clone())
                        } else {
                            (e.shares.v.clone(), e.helps.1.clone())
                        }
                    })
                    .collect(),
                value_mult: d_value.clone(),
                item_mult: d_item.clone(),
            };
            self.net.send(
                Endpoint::Agent(idx as u64),
                Endpoint::Notary(notary as u64),
                Step::HandOff,
                payload,
            )?;
            match self.net.recv(Endpoint::Notary(notary as u64)).map(|msg| msg.payload) {
                Some(Payload::AgentHandOff {
                    weight_share,
                    weight_help,
                    entry_shares,
                    value_mult,
                    item_mult,
                }) => {
                    let holdings = &mut self.notaries[notary];
                    holdings.agent = idx;
                    holdings.weight_share = Some(weight_share);
                    holdings.weight_help = Some(weight_help);
                    holdings.entry_shares = entry_shares;
                    holdings.d_value = Some(value_mult);
                    holdings.d_item = Some(item_mult);
                }
                _ => return Err(AuctionError::State("expected hand-off")),
            }
        }
        Ok(())
    }

    pub fn submit_all_bids(&mut self) -> Result<(), AuctionError> {
        for idx in 0..self.agents.len() {
            self.submit_bid(idx)?;
        }
        Ok(())
    }

    /// Builds one side of a prepared comparison from the notary holdings
    /// (the shares as handed off) and the published commitments.
    fn prepared_side(&self, agent_idx: usize, entry: Option<usize>) -> PreparedSide {
        let agent = &self.agents[agent_idx];
        let lane_u = &self.notaries[agent.notaries.0];
        let lane_v = &self.notaries[agent.notaries.1];
        match entry {
            None => PreparedSide {
                key_public: agent.key.public.clone(),
                shares: RandRep {
                    u: lane_u.weight_share.clone().expect("hand-off done"),
                    v: lane_v.weight_share.clone().expect("hand-off done"),
                },
                helps: (
                    lane_u.weight_help.clone().expect("hand-off done"),
                    lane_v.weight_help.clone().expect("hand-off done"),
                ),
                mult: lane_u.d_value.clone().expect("hand-off done"),
                commitments: agent.bid.as_ref().expect("bid published").weight.clone(),
            },
            Some(e) => PreparedSide {
                key_public: agent.key.public.clone(),
                shares: RandRep {
                    u: lane_u.entry_shares[e].0.clone(),
                    v: lane_v.entry_shares[e].0.clone(),
                },
                helps: (lane_u.entry_shares[e].1.clone(), lane_v.entry_shares[e].1.clone()),
                mult: lane_u.d_item.clone().expect("hand-off done"),
                commitments: agent.bundle.as_ref().expect("bundle published").entries[e].clone(),
            },
        }
    }

    /// Runs one prepared comparison (steps iii-vi plus the proof), checks
    /// the proof, and publishes it. Returns the outcome.
    fn run_comparison(
        &mut self,
        left: usize,
        right: usize,
        kind: CompKind,
        entries: Option<(usize, usize)>,
    ) -> Result<ComparisonOutcome, AuctionError> {
        let (mode, le, re) = match kind {
            CompKind::Value => (ComparisonMode::Ordered, None, None),
            CompKind::Item => {
                let (e, f) = entries.expect("item comparisons name entries");
                (ComparisonMode::EqualityOnly, Some(e), Some(f))
            }
        };
        let side_a = self.prepared_side(left, le);
        let side_b = self.prepared_side(right, re);
        let mut session = PpcSession::prepared(&self.config.group, mode, &side_a, &side_b);
        session.run()?;
        let record = session.prove()?;
        let transcript = session.into_transcript()?;

        let ordinal = self.proof_indices.len() as u64;
        let body = render_proof_body(
            ordinal,
            kind,
            &self.agents[left].identifier,
            &self.agents[right].identifier,
            entries,
            &transcript.x_sum,
            &transcript.y_sum,
            transcript.outcome,
            &record,
        );
        let index = self.sbb.append(RecordKind::ComparisonProof, body);
        self.proof_indices.push(index);
        match kind {
            CompKind::Value => self.value_comparisons += 1,
            CompKind::Item => self.item_comparisons += 1,
        }

        let ok = zkp_verify(
            &record,
            &transcript.x_sum,
            &transcript.y_sum,
            &self.agents[left].key.public,
            &self.agents[right].key.public,
            &self.config.group,
        );
        let outcome = transcript.outcome;
        self.transcripts.push(transcript);
        if !ok {
            return Err(AuctionError::ProofRejected(index));
        }
        Ok(outcome)
    }

    /// Cached weight comparison, canonical orientation: outcome is relative
    /// to the lower submission index.
    fn weight_outcome(&mut self, a: usize, b: usize) -> Result<ComparisonOutcome, AuctionError> {
        let (lo, hi) = (a.min(b), a.max(b));
        if let Some(&o) = self.weight_outcomes.get(&(lo, hi)) {
            return Ok(relative_outcome(o, a == lo));
        }
        let o = self.run_comparison(lo, hi, CompKind::Value, None)?;
        self.weight_outcomes.insert((lo, hi), o);
        Ok(relative_outcome(o, a == lo))
    }

    /// Whether `a` should rank before `b`: higher weight first, ties broken
    /// by ascending secret identifier.
    fn ranks_before(&mut self, a: usize, b: usize) -> Result<bool, AuctionError> {
        Ok(match self.weight_outcome(a, b)? {
            ComparisonOutcome::Greater => true,
            ComparisonOutcome::Less => false,
            ComparisonOutcome::Equal => {
                self.agents[a].identifier < self.agents[b].identifier
            }
        })
    }

    /// Sorts the bids descending by weight using only prepared comparisons
    /// with the agents' value multipliers; every comparison lands on the
    /// board with its proof.
    pub fn sort_bids(&mut self) -> Result<Vec<BigUint>, AuctionError> {
        if self.agents.iter().any(|a| a.bid.is_none()) {
            return Err(AuctionError::State("bidding phase not closed"));
        }
        let items: Vec<usize> = (0..self.agents.len()).collect();
        let order = merge_sort_by(&items, &mut |a, b| self.ranks_before(a, b))?;
        let ids = order.iter().map(|&i| self.agents[i].identifier.clone()).collect();
        self.sorted = Some(order);
        Ok(ids)
    }

    /// Whether two agents' true bundles share an item, established by
    /// comparing committed entries pairwise for equality and short-
    /// circuiting on the first match. Cached per pair for the whole run.
    fn bundles_intersect(&mut self, a: usize, b: usize) -> Result<bool, AuctionError> {
        let key = (a.min(b), a.max(b));
        if let Some(&hit) = self.pair_intersects.get(&key) {
            return Ok(hit);
        }
        let m = self.config.item_count as usize;
        let mut hit = false;
        'outer: for e in 0..m {
            for f in 0..m {
                let outcome = self.run_comparison(key.0, key.1, CompKind::Item, Some((e, f)))?;
                if outcome == ComparisonOutcome::Equal {
                    hit = true;
                    break 'outer;
                }
            }
        }
        self.pair_intersects.insert(key, hit);
        Ok(hit)
    }

    /// Greedy admission over the sorted order: an agent joins the winners
    /// iff no committed entry of its bundle equals any entry of a winner's.
    pub fn determine_winners(&mut self) -> Result<Vec<BigUint>, AuctionError> {
        let order = self.sorted.clone().ok_or(AuctionError::State("sort the bids first"))?;
        let mut winners: Vec<usize> = Vec::new();
        for &i in &order {
            let mut conflict = false;
            for &w in &winners {
                if self.bundles_intersect(i, w)? {
                    conflict = true;
                    break;
                }
            }
            if !conflict {
                winners.push(i);
            }
        }
        let ids = winners.iter().map(|&i| self.agents[i].identifier.clone()).collect();
        self.winners = Some(winners);
        Ok(ids)
    }

    /// Critical payments: for each winner, find the first-ranked agent it
    /// alone blocks; that agent opens its weight to its own first notary,
    /// the winner opens its size to the auctioneer, and the notary returns
    /// the payment.
    pub fn determine_payments(&mut self) -> Result<Vec<(BigUint, BigUint)>, AuctionError> {
        let order = self.sorted.clone().ok_or(AuctionError::State("sort the bids first"))?;
        let winners = self.winners.clone().ok_or(AuctionError::State("determine winners first"))?;
        let mut results = Vec::new();
        for &i in &winners {
            let mut critical: Option<usize> = None;
            'scan: for (pos_j, &j) in order.iter().enumerate() {
                if j == i || !self.bundles_intersect(i, j)? {
                    continue;
                }
                for &k in &order[..pos_j] {
                    if k == i {
                        continue;
                    }
                    if self.bundles_intersect(k, j)? {
                        continue 'scan;
                    }
                }
                critical = Some(j);
                break;
            }
            match critical {
                Some(j) => {
                    let evidence = self.payment_round(i, j)?;
                    let sigma = critical_payment(
                        &evidence.weight_value,
                        u64::try_from(evidence.size_value.clone()).expect("size fits"),
                    );
                    results.push((i, sigma, Some(evidence)));
                }
                None => results.push((i, BigUint::zero(), None)),
            }
        }
        let out = results
            .iter()
            .map(|(i, sigma, _)| (self.agents[*i].identifier.clone(), sigma.clone()))
            .collect();
        self.payments = Some(results);
        Ok(out)
    }

    /// The opening exchange for one payment: the critical agent opens its
    /// weight commitments to its first notary, the winner opens its size
    /// commitment to the auctioneer, who forwards it; both openings are
    /// checked against the published commitments before use.
    fn payment_round(&mut self, winner: usize, critical: usize) -> Result<PaymentEvidence, AuctionError> {
        let params = self.config.group.clone();
        let notary = self.agents[critical].notaries.0;

        // Critical agent -> its notary: weight opening (value, combined help).
        let w_value = self.agents[critical].weight_scaled.clone();
        let helps = self.agents[critical].weight_helps.clone().expect("bid submitted");
        let w_help = (&helps.0 + &helps.1) % &params.q;
        self.net.send(
            Endpoint::Agent(critical as u64),
            Endpoint::Notary(notary as u64),
            Step::Payment,
            Payload::Opening { value: w_value, help: w_help },
        )?;
        let (w_value, w_help) = match self.net.recv(Endpoint::Notary(notary as u64)).map(|msg| msg.payload)
        {
            Some(Payload::Opening { value, help }) => (value, help),
            _ => return Err(AuctionError::State("expected weight opening")),
        };
        let weight_pair = &self.agents[critical].bid.as_ref().expect("bid").weight;
        let combined = combine(&weight_pair.first, &weight_pair.second, &params);
        if !verify_opening(&combined, &w_value, &w_help, &self.agents[critical].key.public, &params) {
            return Err(AuctionError::OpeningRejected(self.agents[critical].identifier.to_string()));
        }

        // Winner -> auctioneer: size opening, verified then forwarded.
        let size = BigUint::from(self.agents[winner].bundle_items.len() as u64);
        let size_help = self.agents[winner].size_help.clone().expect("bid submitted");
        self.net.send(
            Endpoint::Agent(winner as u64),
            Endpoint::Auctioneer,
            Step::Payment,
            Payload::Opening { value: size, help: size_help },
        )?;
        let (size_value, size_help) =
            match self.net.recv(Endpoint::Auctioneer).map(|msg| msg.payload) {
                Some(Payload::Opening { value, help }) => (value, help),
                _ => return Err(AuctionError::State("expected size opening")),
            };
        let size_c = &self.agents[winner].bid.as_ref().expect("bid").size_c;
        if !verify_opening(size_c, &size_value, &size_help, &self.agents[winner].key.public, &params) {
            return Err(AuctionError::OpeningRejected(self.agents[winner].identifier.to_string()));
        }
        self.net.send(
            Endpoint::Auctioneer,
            Endpoint::Notary(notary as u64),
            Step::Payment,
            Payload::Opening { value: size_value.clone(), help: size_help.clone() },
        )?;
        let forwarded_size = match self.net.recv(Endpoint::Notary(notary as u64)).map(|msg| msg.payload) {
            Some(Payload::Opening { value, .. }) => value,
            _ => return Err(AuctionError::State("expected forwarded size")),
        };

        // Notary computes the payment from the received openings.
        let sigma = critical_payment(&w_value, u64::try_from(forwarded_size.clone()).expect("size fits"));
        self.net.send(
            Endpoint::Notary(notary as u64),
            Endpoint::Auctioneer,
            Step::Payment,
            Payload::PaymentValue(sigma),
        )?;
        self.net.recv(Endpoint::Auctioneer);

        Ok(PaymentEvidence {
            critical,
            weight_value: w_value,
            weight_help: w_help,
            size_value,
            size_help,
        })
    }

    /// Publishes the outcome record with the payment opening evidence and
    /// returns the assembled result.
    pub fn publish_outcome(&mut self) -> Result<AuctionOutcome, AuctionError> {
        let winners = self.winners.clone().ok_or(AuctionError::State("determine winners first"))?;
        let payments =
            self.payments.as_ref().ok_or(AuctionError::State("determine payments first"))?;

        let winner_ids: Vec<String> =
            winners.iter().map(|&i| self.agents[i].identifier.to_string()).collect();
        let payment_fields: Vec<String> = payments
            .iter()
            .map(|(i, sigma, _)| format!("{}:{}", self.agents[*i].identifier, sigma))
            .collect();
        let evidence_fields: Vec<String> = payments
            .iter()
            .filter_map(|(i, sigma, ev)| {
                ev.as_ref().map(|e| {
                    format!(
                        "{}:{}:{}:{}:{}:{}:{}",
                        self.agents[*i].identifier,
                        self.agents[e.critical].identifier,
                        e.weight_value,
                        e.weight_help,
                        e.size_value,
                        e.size_help,
                        sigma
                    )
                })
            })
            .collect();
        let mut body = format!(
            "winners={} payments={} precision={}",
            winner_ids.join(","),
            payment_fields.join(","),
            self.config.precision
        );
        if !evidence_fields.is_empty() {
            body.push_str(&format!(" evidence={}", evidence_fields.join("|")));
        }
        self.sbb.append(RecordKind::Outcome, body);

        Ok(AuctionOutcome {
            winners: winners.iter().map(|&i| self.agents[i].identifier.clone()).collect(),
            payments: payments
                .iter()
                .map(|(i, sigma, _)| (self.agents[*i].identifier.clone(), sigma.clone()))
                .collect(),
            precision: self.config.precision,
            proof_indices: self.proof_indices.clone(),
        })
    }

    /// All phases in order: bidding, sorting, winner determination,
    /// payments, outcome publication.
    pub fn run(&mut self) -> Result<AuctionOutcome, AuctionError> {
        self.submit_all_bids()?;
        self.sort_bids()?;
        self.determine_winners()?;
        self.determine_payments()?;
        self.publish_outcome()
    }

    pub fn export(&self) -> String {
        self.sbb.export()
    }

    /// `id=<identifier> h=<public key>` lines, the verifier's key input.
    pub fn keys_file(&self) -> String {
        let mut out = String::new();
        for agent in &self.agents {
            out.push_str(&format!("id={} h={}\n", agent.identifier, agent.key.public));
        }
        out
    }

    pub fn sbb(&self) -> &BulletinBoard {
        &self.sbb
    }

    pub fn value_comparisons(&self) -> u64 {
        self.value_comparisons
    }

    pub fn item_comparisons(&self) -> u64 {
        self.item_comparisons
    }

    pub fn proof_count(&self) -> usize {
        self.proof_indices.len()
    }

    /// Total messages exchanged: auction-level plus every comparison run.
    pub fn total_messages(&self) -> usize {
        self.net.log().len() + self.transcripts.iter().map(|t| t.log.len()).sum::<usize>()
    }

    /// Secret identifiers by submission index.
    pub fn identifiers(&self) -> Vec<BigUint> {
        self.agents.iter().map(|a| a.identifier.clone()).collect()
    }

    /// Identifier order used for tie-breaking, as a ranking of submission
    /// indices (for oracle equivalence checks).
    pub fn identifier_ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.agents.len()).collect();
        idx.sort_by(|&a, &b| self.agents[a].identifier.cmp(&self.agents[b].identifier));
        idx
    }

    /// Privacy audit over the auction-level log and every comparison
    /// transcript: the auctioneer sees only commitments, blinded sums,
    /// proof material, and the sanctioned payment openings; notaries never
    /// see item ids, bids, or more than one share lane per value.
    pub fn audit_privacy(&self) -> Result<(), String> {
        let winner_sizes: BTreeSet<BigUint> = self
            .winners
            .as_ref()
            .map(|ws| {
                ws.iter()
                    .map(|&i| BigUint::from(self.agents[i].bundle_items.len() as u64))
                    .collect()
            })
            .unwrap_or_default();
        let critical_weights: BTreeSet<BigUint> = self
            .payments
            .as_ref()
            .map(|ps| {
                ps.iter()
                    .filter_map(|(_, _, ev)| ev.as_ref().map(|e| e.weight_value.clone()))
                    .collect()
            })
            .unwrap_or_default();

        for entry in self.net.log() {
            let msg = &entry.message;
            match msg.to {
                Endpoint::Auctioneer => match &msg.payload {
                    Payload::BidSubmission { .. } | Payload::PublicKey(_) | Payload::PaymentValue(_) => {}
                    Payload::Opening { value, .. } => {
                        if !winner_sizes.contains(value) {
                            return Err(format!(
                                "auctioneer received an opening that is not a winner's size (seq {})",
                                msg.seq
                            ));
                        }
                    }
                    other => {
                        return Err(format!(
                            "auctioneer received a {} payload (seq {})",
                            other.class(),
                            msg.seq
                        ))
                    }
                },
                Endpoint::Notary(k) => match &msg.payload {
                    Payload::AgentHandOff { .. } => {
                        let holder = &self.notaries[k as usize];
                        let expected = self.agents[holder.agent].notaries;
                        if msg.from != Endpoint::Agent(holder.agent as u64)
                            || (expected.0 != k as usize && expected.1 != k as usize)
                        {
                            return Err(format!(
                                "hand-off to a foreign notary (seq {})",
                                msg.seq
                            ));
                        }
                    }
                    Payload::Opening { value, .. } => {
                        if !critical_weights.contains(value) && !winner_sizes.contains(value) {
                            return Err(format!(
                                "notary received an unsanctioned opening (seq {})",
                                msg.seq
                            ));
                        }
                    }
                    other => {
                        return Err(format!(
                            "notary received a {} payload (seq {})",
                            other.class(),
                            msg.seq
                        ))
                    }
                },
                Endpoint::Agent(_) => match &msg.payload {
                    Payload::IdentifierAssignment(_) | Payload::ItemIds(_) => {}
                    other => {
                        return Err(format!(
                            "agent received a {} payload (seq {})",
                            other.class(),
                            msg.seq
                        ))
                    }
                },
                Endpoint::Role(_) => {
                    return Err(format!("comparison role addressed on the auction net (seq {})", msg.seq))
                }
            }
        }

        for (i, t) in self.transcripts.iter().enumerate() {
            for entry in &t.log {
                let msg = &entry.message;
                if msg.to == Endpoint::Role(crate::simnet::PartyRole::Coordinator) {
                    let class = msg.payload.class();
                    let allowed = matches!(
                        class,
                        PayloadClass::Commitment
                            | PayloadClass::Sum
                            | PayloadClass::HelpRelay
                            | PayloadClass::Lift
                    );
                    if !allowed {
                        return Err(format!(
                            "coordinator received a {class} payload in comparison {i}"
                        ));
                    }
                }
            }
            if !crate::simnet::no_intra_side_notary_messages(&t.log) {
                return Err(format!("intra-side notary channel in comparison {i}"));
            }
        }
        Ok(())
    }
}

fn relative_outcome(o: ComparisonOutcome, same_orientation: bool) -> ComparisonOutcome {
    if same_orientation {
        o
    } else {
        match o {
            ComparisonOutcome::Greater => ComparisonOutcome::Less,
            ComparisonOutcome::Less => ComparisonOutcome::Greater,
            ComparisonOutcome::Equal => ComparisonOutcome::Equal,
        }
    }
}

/// Deterministic top-down merge sort; `before(a, b)` decides whether `a`
/// ranks ahead of `b`. Both the live auction and the export verifier run
/// this same traversal, so the comparison set matches exactly.
fn merge_sort_by<E>(
    items: &[usize],
    before: &mut impl FnMut(usize, usize) -> Result<bool, E>,
) -> Result<Vec<usize>, E> {
    if items.len() <= 1 {
        return Ok(items.to_vec());
    }
    let mid = items.len() / 2;
    let left = merge_sort_by(&items[..mid], before)?;
    let right = merge_sort_by(&items[mid..], before)?;
    let mut merged = Vec::with_capacity(items.len());
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if before(left[i], right[j])? {
            merged.push(left[i]);
            i += 1;
        } else {
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    Ok(merged)
}

#[allow(clippy::too_many_arguments)]
fn render_proof_body(
    ordinal: u64,
    kind: CompKind,
    left: &BigUint,
    right: &BigUint,
    entries: Option<(usize, usize)>,
    x_sum: &BigUint,
    y_sum: &BigUint,
    outcome: ComparisonOutcome,
    record: &ZkpRecord,
) -> String {
    let kind_s = match kind {
        CompKind::Value => "value",
        CompKind::Item => "item",
    };
    let entry_part = match entries {
        Some((e, f)) => format!(" le={e} re={f}"),
        None => String::new(),
    };
    format!(
        "n={ordinal} kind={kind_s} left={left} right={right}{entry_part} x={x_sum} y={y_sum} \
         outcome={} ra_u={} ra_v={} rb_u={} rb_v={} h1={} h2={} la_u={} la_v={} lb_u={} lb_v={} c={}",
        outcome.label(),
        record.relay_a_u,
        record.relay_a_v,
        record.relay_b_u,
        record.relay_b_v,
        record.h1,
        record.h2,
        record.lift_a_u,
        record.lift_a_v,
        record.lift_b_u,
        record.lift_b_v,
        record.aggregate,
    )
}

/// Exact probability that an observer who knows one winner's full bundle
/// (size `s` of `m` items) pins down a conflicting loser's entire bundle:
/// `1 / (2^m - 2^(m-s))`.
pub fn topology_leak_probability(s: u64, m: u64) -> Result<Ratio<BigUint>, AuctionError> {
    if s == 0 || s > m {
        return Err(AuctionError::Setup(format!("bundle size {s} outside [1, {m}]")));
    }
    let denom = (BigUint::one() << m) - (BigUint::one() << (m - s));
    Ok(Ratio::new(BigUint::one(), denom))
}

/// First verification failure of an export: the record index it was
/// detected at and why.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("record {index}: {reason}")]
pub struct VerifyFailure {
    pub index: u64,
    pub reason: String,
}

fn fail(index: u64, reason: impl Into<String>) -> VerifyFailure {
    VerifyFailure { index, reason: reason.into() }
}

fn parse_kv(body: &str) -> BTreeMap<&str, &str> {
    body.split_whitespace().filter_map(|tok| tok.split_once('=')).collect()
}

fn parse_big(map: &BTreeMap<&str, &str>, key: &str, index: u64) -> Result<BigUint, VerifyFailure> {
    map.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fail(index, format!("missing or bad field {key}")))
}

/// Parses `id=<decimal> h=<decimal>` lines.
pub fn parse_keys_file(text: &str) -> Result<BTreeMap<String, BigUint>, String> {
    let mut keys = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let map = parse_kv(line);
        let id = map.get("id").ok_or_else(|| format!("line {}: missing id", n + 1))?;
        let h: BigUint = map
            .get("h")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("line {}: missing or bad h", n + 1))?;
        keys.insert((*id).to_string(), h);
    }
    Ok(keys)
}

struct ProofRow {
    outcome: ComparisonOutcome,
}

struct ExportState {
    group: GroupParams,
    item_count: usize,
    precision: u32,
    keys: BTreeMap<String, BigUint>,
    submission_order: Vec<String>,
    bids: BTreeMap<String, (Commitment, Commitment, CommittedPair)>,
    value_proofs: BTreeMap<(String, String), ProofRow>,
    item_proofs: BTreeMap<(String, String, usize, usize), ProofRow>,
    outcome_index: u64,
    outcome_winners: Vec<String>,
    outcome_payments: Vec<(String, BigUint)>,
    evidence: BTreeMap<String, (String, BigUint, BigUint, BigUint, BigUint, BigUint)>,
}

/// Re-checks a full export: hash chain, every comparison proof against the
/// published keys, outcome consistency of each proof with the decision
/// rule, and finally a replay of the sort, the greedy admission, and the
/// payment search to confirm the outcome record is entailed.
pub fn verify_auction(
    export: &str,
    keys: &BTreeMap<String, BigUint>,
) -> Result<(), VerifyFailure> {
    let board = BulletinBoard::import(export)
        .map_err(|e| fail(0, format!("malformed export: {e}")))?;
    if let Err(index) = board.verify_chain() {
        return Err(fail(index, "hash chain mismatch"));
    }

    let state = collect_export(&board, keys)?;
    replay_outcome(&state)
}

fn collect_export(
    board: &BulletinBoard,
    expected_keys: &BTreeMap<String, BigUint>,
) -> Result<ExportState, VerifyFailure> {
    let records = board.records();
    if records.is_empty() {
        return Err(fail(0, "empty export"));
    }
    if records[0].kind != RecordKind::Announcement {
        return Err(fail(0, "first record must be the announcement"));
    }
    let map = parse_kv(&records[0].body);
    let group = GroupParams {
        p: parse_big(&map, "p", 0)?,
        q: parse_big(&map, "q", 0)?,
        g: parse_big(&map, "g", 0)?,
        d_max: parse_big(&map, "d_max", 0)?,
    };
    let item_count: usize = map
        .get("m")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fail(0, "missing item count"))?;
    let precision: u32 = map
        .get("precision")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fail(0, "missing precision"))?;

    let mut state = ExportState {
        group,
        item_count,
        precision,
        keys: BTreeMap::new(),
        submission_order: Vec::new(),
        bids: BTreeMap::new(),
        value_proofs: BTreeMap::new(),
        item_proofs: BTreeMap::new(),
        outcome_index: 0,
        outcome_winners: Vec::new(),
        outcome_payments: Vec::new(),
        evidence: BTreeMap::new(),
    };
    let mut bundles: BTreeMap<String, usize> = BTreeMap::new();
    let mut outcome_seen = false;

    for record in &records[1..] {
        let index = record.index;
        let map = parse_kv(&record.body);
        match record.kind {
            RecordKind::Announcement => return Err(fail(index, "duplicate announcement")),
            RecordKind::PublicKey => {
                let id = map.get("id").ok_or_else(|| fail(index, "missing id"))?.to_string();
                let h = parse_big(&map, "h", index)?;
                match expected_keys.get(&id) {
                    Some(expected) if *expected == h => {}
                    Some(_) => return Err(fail(index, "published key disagrees with keys file")),
                    None => return Err(fail(index, "identifier absent from keys file")),
                }
                state.keys.insert(id, h);
            }
            RecordKind::Bid => {
                let id = map.get("id").ok_or_else(|| fail(index, "missing id"))?.to_string();
                let bid = (
                    Commitment(parse_big(&map, "value", index)?),
                    Commitment(parse_big(&map, "size", index)?),
                    CommittedPair {
                        first: Commitment(parse_big(&map, "w1", index)?),
                        second: Commitment(parse_big(&map, "w2", index)?),
                    },
                );
                if state.bids.insert(id.clone(), bid).is_some() {
                    return Err(fail(index, "duplicate bid record"));
                }
                state.submission_order.push(id);
            }
            RecordKind::Bundle => {
                let id = map.get("id").ok_or_else(|| fail(index, "missing id"))?.to_string();
                let entries = map.get("entries").ok_or_else(|| fail(index, "missing entries"))?;
                let count = entries.split(',').count();
                if count != item_count {
                    return Err(fail(index, "bundle must hold exactly one entry per item"));
                }
                bundles.insert(id, count);
            }
            RecordKind::ComparisonProof => {
                collect_proof(&mut state, index, &map)?;
            }
            RecordKind::Outcome => {
                if outcome_seen {
                    return Err(fail(index, "duplicate outcome record"));
                }
                outcome_seen = true;
                state.outcome_index = index;
                let stated: u32 = map
                    .get("precision")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| fail(index, "missing precision"))?;
                if stated != state.precision {
                    return Err(fail(index, "outcome precision contradicts the announcement"));
                }
                let winners = map.get("winners").ok_or_else(|| fail(index, "missing winners"))?;
                state.outcome_winners =
                    winners.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
                let payments = map.get("payments").ok_or_else(|| fail(index, "missing payments"))?;
                for tok in payments.split(',').filter(|s| !s.is_empty()) {
                    let (id, amount) = tok
                        .split_once(':')
                        .ok_or_else(|| fail(index, "bad payment field"))?;
                    let amount: BigUint =
                        amount.parse().map_err(|_| fail(index, "bad payment amount"))?;
                    state.outcome_payments.push((id.to_string(), amount));
                }
                if let Some(ev) = map.get("evidence") {
                    for block in ev.split('|').filter(|s| !s.is_empty()) {
                        let parts: Vec<&str> = block.split(':').collect();
                        if parts.len() != 7 {
                            return Err(fail(index, "bad evidence block"));
                        }
                        let nums: Vec<BigUint> = parts[2..]
                            .iter()
                            .map(|s| s.parse())
                            .collect::<Result<_, _>>()
                            .map_err(|_| fail(index, "bad evidence number"))?;
                        state.evidence.insert(
                            parts[0].to_string(),
                            (
                                parts[1].to_string(),
                                nums[0].clone(),
                                nums[1].clone(),
                                nums[2].clone(),
                                nums[3].clone(),
                                nums[4].clone(),
                            ),
                        );
                    }
                }
            }
        }
    }
    if !outcome_seen {
        return Err(fail(records.len() as u64, "missing outcome record"));
    }
    for id in &state.submission_order {
        if !bundles.contains_key(id) {
            return Err(fail(state.outcome_index, format!("no bundle record for {id}")));
        }
        if !state.keys.contains_key(id) {
            return Err(fail(state.outcome_index, format!("no public key for {id}")));
        }
    }
    Ok(state)
}

fn collect_proof(
    state: &mut ExportState,
    index: u64,
    map: &BTreeMap<&str, &str>,
) -> Result<(), VerifyFailure> {
    let left = map.get("left").ok_or_else(|| fail(index, "missing left"))?.to_string();
    let right = map.get("right").ok_or_else(|| fail(index, "missing right"))?.to_string();
    let x_sum = parse_big(map, "x", index)?;
    let y_sum = parse_big(map, "y", index)?;
    let outcome = map
        .get("outcome")
        .and_then(|s| ComparisonOutcome::parse(s))
        .ok_or_else(|| fail(index, "bad outcome"))?;
    let record = ZkpRecord {
        relay_a_u: parse_big(map, "ra_u", index)?,
        relay_a_v: parse_big(map, "ra_v", index)?,
        relay_b_u: parse_big(map, "rb_u", index)?,
        relay_b_v: parse_big(map, "rb_v", index)?,
        h1: parse_big(map, "h1", index)?,
        h2: parse_big(map, "h2", index)?,
        lift_a_u: parse_big(map, "la_u", index)?,
        lift_a_v: parse_big(map, "la_v", index)?,
        lift_b_u: parse_big(map, "lb_u", index)?,
        lift_b_v: parse_big(map, "lb_v", index)?,
        aggregate: parse_big(map, "c", index)?,
    };

    if !record.well_formed(&state.group) {
        return Err(fail(index, "malformed proof record"));
    }
    let key_left =
        state.keys.get(&left).ok_or_else(|| fail(index, "unknown left identifier"))?;
    let key_right =
        state.keys.get(&right).ok_or_else(|| fail(index, "unknown right identifier"))?;
    if !zkp_verify(&record, &x_sum, &y_sum, key_left, key_right, &state.group) {
        return Err(fail(index, "proof verification failed"));
    }
    if decide(&x_sum, &y_sum, &state.group) != outcome {
        return Err(fail(index, "stated outcome contradicts the decision rule"));
    }

    let row = ProofRow { outcome };
    match map.get("kind").copied() {
        Some("value") => {
            if state.value_proofs.insert((left, right), row).is_some() {
                return Err(fail(index, "duplicate value comparison"));
            }
        }
        Some("item") => {
            let e: usize = map
                .get("le")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| fail(index, "missing left entry"))?;
            let f: usize = map
                .get("re")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| fail(index, "missing right entry"))?;
            if state.item_proofs.insert((left, right, e, f), row).is_some() {
                return Err(fail(index, "duplicate item comparison"));
            }
        }
        _ => return Err(fail(index, "bad comparison kind")),
    }
    Ok(())
}

/// Replays the greedy logic over the proven outcomes and checks the
/// outcome record claims exactly that result.
fn replay_outcome(state: &ExportState) -> Result<(), VerifyFailure> {
    let out_idx = state.outcome_index;
    let n = state.submission_order.len();
    let ids = &state.submission_order;

    // The sort, with the proven value comparisons as the comparator.
    let mut before = |a: usize, b: usize| -> Result<bool, VerifyFailure> {
        let (lo, hi) = (a.min(b), a.max(b));
        let row = state
            .value_proofs
            .get(&(ids[lo].clone(), ids[hi].clone()))
            .ok_or_else(|| {
                fail(out_idx, format!("missing value comparison proof {} vs {}", ids[lo], ids[hi]))
            })?;
        let o = relative_outcome(row.outcome, a == lo);
        Ok(match o {
            ComparisonOutcome::Greater => true,
            ComparisonOutcome::Less => false,
            ComparisonOutcome::Equal => {
                let id_a: BigUint = ids[a].parse().expect("decimal id");
                let id_b: BigUint = ids[b].parse().expect("decimal id");
                id_a < id_b
            }
        })
    };
    let items: Vec<usize> = (0..n).collect();
    let order = merge_sort_by(&items, &mut before)?;

    // Conflict replay mirrors the protocol's scan order and caching.
    let mut cache: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    let mut intersects = |a: usize, b: usize| -> Result<bool, VerifyFailure> {
        let key = (a.min(b), a.max(b));
        if let Some(&hit) = cache.get(&key) {
            return Ok(hit);
        }
        let (id_lo, id_hi) = (&ids[key.0], &ids[key.1]);
        let mut hit = false;
        'outer: for e in 0..state.item_count {
            for f in 0..state.item_count {
                let row = state
                    .item_proofs
                    .get(&(id_lo.clone(), id_hi.clone(), e, f))
                    .ok_or_else(|| {
                        fail(
                            out_idx,
                            format!("missing item comparison proof {id_lo}#{e} vs {id_hi}#{f}"),
                        )
                    })?;
                if row.outcome == ComparisonOutcome::Equal {
                    hit = true;
                    break 'outer;
                }
            }
        }
        cache.insert(key, hit);
        Ok(hit)
    };

    let mut winners: Vec<usize> = Vec::new();
    for &i in &order {
        let mut conflict = false;
        for &w in &winners {
            if intersects(i, w)? {
                conflict = true;
                break;
            }
        }
        if !conflict {
            winners.push(i);
        }
    }
    let winner_ids: Vec<String> = winners.iter().map(|&i| ids[i].clone()).collect();
    if winner_ids != state.outcome_winners {
        return Err(fail(out_idx, "winner set not entailed by the proven comparisons"));
    }

    // Payments: replay the critical search, check the openings, recompute.
    let mut expected_payments = Vec::new();
    for &i in &winners {
        let mut critical: Option<usize> = None;
        'scan: for (pos_j, &j) in order.iter().enumerate() {
            if j == i || !intersects(i, j)? {
                continue;
            }
            for &k in &order[..pos_j] {
                if k == i {
                    continue;
                }
                if intersects(k, j)? {
                    continue 'scan;
                }
            }
            critical = Some(j);
            break;
        }
        let sigma = match critical {
            None => BigUint::zero(),
            Some(j) => {
                let (claimed_critical, w_value, w_help, size_value, size_help, sigma) = state
                    .evidence
                    .get(&ids[i])
                    .ok_or_else(|| fail(out_idx, format!("missing payment evidence for {}", ids[i])))?;
                if claimed_critical != &ids[j] {
                    return Err(fail(out_idx, "evidence names the wrong critical agent"));
                }
                let (_, size_c, _) =
                    state.bids.get(&ids[i]).ok_or_else(|| fail(out_idx, "missing winner bid"))?;
                let (_, _, critical_pair) =
                    state.bids.get(&ids[j]).ok_or_else(|| fail(out_idx, "missing critical bid"))?;
                let combined = combine(&critical_pair.first, &critical_pair.second, &state.group);
                let key_j = &state.keys[&ids[j]];
                if !verify_opening(&combined, w_value, w_help, key_j, &state.group) {
                    return Err(fail(out_idx, "weight opening does not match the bid record"));
                }
                let key_i = &state.keys[&ids[i]];
                if !verify_opening(size_c, size_value, size_help, key_i, &state.group) {
                    return Err(fail(out_idx, "size opening does not match the bid record"));
                }
                let size: u64 = u64::try_from(size_value.clone())
                    .map_err(|_| fail(out_idx, "absurd size opening"))?;
                let recomputed = critical_payment(w_value, size);
                if &recomputed != sigma {
                    return Err(fail(out_idx, "payment amount not entailed by the openings"));
                }
                recomputed
            }
        };
        expected_payments.push((ids[i].clone(), sigma));
    }
    if expected_payments != state.outcome_payments {
        return Err(fail(out_idx, "payments not entailed by the proven comparisons"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::format_scaled;
    use crate::group::generate_group;
    use crate::oracle::{icasm_solve, SingleMindedBid};

    fn test_group() -> GroupParams {
        let mut rng = SeededRng::from_label("auction-test-group");
        generate_group(64, BigUint::from(8u32), &mut rng).unwrap()
    }

    fn abc_instance() -> AuctionInstance {
        AuctionInstance {
            item_count: 4,
            bids: vec![
                SingleMindedBid { name: "A".into(), valuation: 10, bundle: [1, 2].into() },
                SingleMindedBid { name: "B".into(), valuation: 8, bundle: [2, 3].into() },
                SingleMindedBid { name: "C".into(), valuation: 5, bundle: [3, 4].into() },
            ],
        }
    }

    fn run_abc(seed: u64) -> (Auction, AuctionOutcome) {
        let group = test_group();
        let config = AuctionConfig { group, item_count: 4, precision: 2, item_ids: None };
        let seed = SeededRng::from_u64(seed);
        let mut auction = Auction::setup(config, &abc_instance(), &seed).unwrap();
        let outcome = auction.run().unwrap();
        (auction, outcome)
    }

    #[test]
    fn abc_auction_matches_hand_execution() {
        let (auction, outcome) = run_abc(42);
        // Winners are A then C (by valuation/sqrt(size) order), payments
        // 8.00 and 0.
        let id = |name: &str| {
            auction
                .agents
                .iter()
                .find(|a| a.name == name)
                .map(|a| a.identifier.clone())
                .unwrap()
        };
        assert_eq!(outcome.winners, vec![id("A"), id("C")]);
        assert_eq!(outcome.payments.len(), 2);
        assert_eq!(outcome.payments[0], (id("A"), BigUint::from(800u32)));
        assert_eq!(format_scaled(&outcome.payments[0].1, 2), "8.00");
        assert_eq!(outcome.payments[1], (id("C"), BigUint::zero()));
    }

    #[test]
    fn abc_auction_matches_oracle() {
        let (auction, outcome) = run_abc(7);
        let ranking = auction.identifier_ranking();
        let oracle = icasm_solve(&abc_instance(), 2, &ranking).unwrap();
        let oracle_winner_ids: Vec<BigUint> =
            oracle.winners.iter().map(|&i| auction.agents[i].identifier.clone()).collect();
        assert_eq!(outcome.winners, oracle_winner_ids);
        let oracle_payments: Vec<(BigUint, BigUint)> = oracle
            .payments
            .iter()
            .map(|(i, p)| (auction.agents[*i].identifier.clone(), p.clone()))
            .collect();
        assert_eq!(outcome.payments, oracle_payments);
    }

    #[test]
    fn honest_export_verifies_and_audits() {
        let (auction, _) = run_abc(11);
        let keys = parse_keys_file(&auction.keys_file()).unwrap();
        verify_auction(&auction.export(), &keys).unwrap();
        auction.audit_privacy().unwrap();
    }

    #[test]
    fn tampered_record_fails_with_its_index() {
        let (auction, _) = run_abc(13);
        let keys = parse_keys_file(&auction.keys_file()).unwrap();
        let export = auction.export();
        // Flip a digit of the x field inside some comparison-proof line.
        let target = export
            .lines()
            .find(|l| l.contains("comparison-proof"))
            .expect("has proofs")
            .to_string();
        let mutated = target.replacen(" x=", " x=1", 1);
        let tampered = export.replacen(&target, &mutated, 1);
        let err = verify_auction(&tampered, &keys).unwrap_err();
        let expected_index: u64 = target.split('\t').next().unwrap().parse().unwrap();
        assert_eq!(err.index, expected_index);
    }

    #[test]
    fn same_seed_byte_identical_export() {
        let (a1, _) = run_abc(99);
        let (a2, _) = run_abc(99);
        assert_eq!(a1.export(), a2.export());
        assert_eq!(a1.keys_file(), a2.keys_file());
        let (a3, _) = run_abc(100);
        assert_ne!(a1.export(), a3.export());
    }

    #[test]
    fn setup_publishes_announcement_and_keys() {
        let group = test_group();
        let instance = AuctionInstance {
            item_count: 2,
            bids: vec![
                SingleMindedBid { name: "x".into(), valuation: 4, bundle: [1, 2].into() },
                SingleMindedBid { name: "y".into(), valuation: 3, bundle: [1, 2].into() },
            ],
        };
        let config = AuctionConfig { group, item_count: 2, precision: 2, item_ids: None };
        let auction = Auction::setup(config, &instance, &SeededRng::from_u64(5)).unwrap();
        let kinds: Vec<RecordKind> = auction.sbb().records().iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![RecordKind::Announcement, RecordKind::PublicKey, RecordKind::PublicKey]
        );
    }

    #[test]
    fn item_ids_beyond_half_q_accepted() {
        let group = test_group();
        let big_id = &group.q - 1u32; // far above q/2
        let ids = vec![big_id, BigUint::from(7u32)];
        let instance = AuctionInstance {
            item_count: 2,
            bids: vec![
                SingleMindedBid { name: "x".into(), valuation: 4, bundle: [1, 2].into() },
                SingleMindedBid { name: "y".into(), valuation: 9, bundle: [1, 2].into() },
            ],
        };
        let config = AuctionConfig { group, item_count: 2, precision: 2, item_ids: Some(ids) };
        let seed = SeededRng::from_u64(3);
        let mut auction = Auction::setup(config, &instance, &seed).unwrap();
        let outcome = auction.run().unwrap();
        assert_eq!(outcome.winners.len(), 1);
    }

    #[test]
    fn duplicate_item_ids_rejected() {
        let group = test_group();
        let ids = vec![BigUint::from(7u32), BigUint::from(7u32)];
        let instance = AuctionInstance {
            item_count: 2,
            bids: vec![SingleMindedBid { name: "x".into(), valuation: 4, bundle: [1, 2].into() }],
        };
        let config = AuctionConfig { group, item_count: 2, precision: 2, item_ids: Some(ids) };
        let err = match Auction::setup(config, &instance, &SeededRng::from_u64(1)) {
            Err(e) => e,
            Ok(_) => panic!("duplicate item ids must be rejected"),
        };
        assert!(matches!(err, AuctionError::Setup(_)));
    }

    #[test]
    fn singleton_bundle_rejected_at_bidding() {
        let group = test_group();
        let instance = AuctionInstance {
            item_count: 3,
            bids: vec![SingleMindedBid { name: "solo".into(), valuation: 5, bundle: [2].into() }],
        };
        let config = AuctionConfig { group, item_count: 3, precision: 2, item_ids: None };
        let mut auction = Auction::setup(config, &instance, &SeededRng::from_u64(2)).unwrap();
        let err = auction.submit_bid(0).unwrap_err();
        assert!(matches!(err, AuctionError::BidRejected { .. }));
    }

    #[test]
    fn oversized_weight_rejected_at_bidding() {
        // The toy group bounds operands at 11, so any realistic weight
        // overflows it.
        let instance = AuctionInstance {
            item_count: 2,
            bids: vec![SingleMindedBid { name: "big".into(), valuation: 20, bundle: [1, 2].into() }],
        };
        let config = AuctionConfig {
            group: crate::group::toy_group(),
            item_count: 2,
            precision: 0,
            item_ids: None,
        };
        let mut auction = Auction::setup(config, &instance, &SeededRng::from_u64(2)).unwrap();
        let err = auction.submit_bid(0).unwrap_err();
        assert!(matches!(err, AuctionError::BidRejected { .. }));
    }

    #[test]
    fn single_bidder_trivial_order_zero_comparisons() {
        let group = test_group();
        let instance = AuctionInstance {
            item_count: 3,
            bids: vec![SingleMindedBid { name: "solo".into(), valuation: 5, bundle: [1, 3].into() }],
        };
        let config = AuctionConfig { group, item_count: 3, precision: 2, item_ids: None };
        let seed = SeededRng::from_u64(2);
        let mut auction = Auction::setup(config, &instance, &seed).unwrap();
        let outcome = auction.run().unwrap();
        assert_eq!(auction.value_comparisons(), 0);
        assert_eq!(auction.item_comparisons(), 0);
        assert_eq!(outcome.winners.len(), 1);
        assert_eq!(outcome.payments[0].1, BigUint::zero());
        let keys = parse_keys_file(&auction.keys_file()).unwrap();
        verify_auction(&auction.export(), &keys).unwrap();
    }

    #[test]
    fn disjoint_bundles_everyone_wins() {
        let group = test_group();
        let instance = AuctionInstance {
            item_count: 6,
            bids: vec![
                SingleMindedBid { name: "a".into(), valuation: 4, bundle: [1, 2].into() },
                SingleMindedBid { name: "b".into(), valuation: 6, bundle: [3, 4].into() },
                SingleMindedBid { name: "c".into(), valuation: 2, bundle: [5, 6].into() },
            ],
        };
        let config = AuctionConfig { group, item_count: 6, precision: 2, item_ids: None };
        let mut auction = Auction::setup(config, &instance, &SeededRng::from_u64(21)).unwrap();
        let outcome = auction.run().unwrap();
        assert_eq!(outcome.winners.len(), 3);
        assert!(outcome.payments.iter().all(|(_, p)| p.is_zero()));
    }

    #[test]
    fn identical_bundles_single_winner() {
        let group = test_group();
        let instance = AuctionInstance {
            item_count: 2,
            bids: vec![
                SingleMindedBid { name: "a".into(), valuation: 4, bundle: [1, 2].into() },
                SingleMindedBid { name: "b".into(), valuation: 6, bundle: [1, 2].into() },
                SingleMindedBid { name: "c".into(), valuation: 2, bundle: [1, 2].into() },
            ],
        };
        let config = AuctionConfig { group, item_count: 2, precision: 2, item_ids: None };
        let mut auction = Auction::setup(config, &instance, &SeededRng::from_u64(22)).unwrap();
        let outcome = auction.run().unwrap();
        assert_eq!(outcome.winners.len(), 1);
        let top = auction.agents.iter().find(|a| a.name == "b").unwrap();
        assert_eq!(outcome.winners[0], top.identifier);
    }

    #[test]
    fn leak_probability_values() {
        let p = |s, m| topology_leak_probability(s, m).unwrap();
        assert_eq!(p(2, 3), Ratio::new(BigUint::one(), BigUint::from(6u32)));
        assert_eq!(p(3, 3), Ratio::new(BigUint::one(), BigUint::from(7u32)));
        assert_eq!(p(1, 1), Ratio::new(BigUint::one(), BigUint::one()));
        assert_eq!(p(2, 15), Ratio::new(BigUint::one(), BigUint::from(24576u32)));
        // Worst case s=2: exactly (4/3) / 2^m.
        let four_thirds_over = Ratio::new(BigUint::from(4u32), BigUint::from(3u32) << 15);
        assert_eq!(p(2, 15), four_thirds_over);
        assert!(topology_leak_probability(4, 3).is_err());
        assert!(topology_leak_probability(0, 3).is_err());
    }
}
