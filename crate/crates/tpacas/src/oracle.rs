//! Plaintext ground truth: the greedy single-minded mechanism run directly
//! on clear values, brute-force optimal welfare, and a random instance
//! generator. The auction's outcome must match [`icasm_solve`] exactly;
//! the two paths share only the fixed-point arithmetic in [`crate::fixed`].

use crate::fixed::{critical_payment, scaled_weight};
use crate::group::RandomSource;
use num_bigint::BigUint;
use num_rational::Ratio;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance invalid: {0}")]
    Invalid(String),
    #[error("too many bids for exhaustive search: {0} > {1}")]
    TooLarge(usize, usize),
}

/// One sealed bid: a value for exactly one bundle of items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleMindedBid {
    pub name: String,
    pub valuation: u64,
    pub bundle: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionInstance {
    pub item_count: u64,
    pub bids: Vec<SingleMindedBid>,
}

impl AuctionInstance {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.item_count == 0 {
            return Err(OracleError::Invalid("need at least one item".into()));
        }
        if self.bids.is_empty() {
            return Err(OracleError::Invalid("no bids".into()));
        }
        for bid in &self.bids {
            if bid.valuation == 0 {
                return Err(OracleError::Invalid(format!("{}: zero valuation", bid.name)));
            }
            if bid.bundle.is_empty() {
                return Err(OracleError::Invalid(format!("{}: empty bundle", bid.name)));
            }
            if bid.bundle.iter().any(|&i| i == 0 || i > self.item_count) {
                return Err(OracleError::Invalid(format!("{}: item outside 1..=m", bid.name)));
            }
        }
        Ok(())
    }
}

/// Greedy outcome on clear values: winners as bid indices in admission
/// order, and each winner's scaled payment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub order: Vec<usize>,
    pub winners: Vec<usize>,
    pub payments: Vec<(usize, BigUint)>,
    pub welfare: u128,
}

/// The greedy mechanism: sort by scaled weight descending (ties by the
/// `tie_break` ranking, lower first), admit conflict-free bidders, charge
/// each winner the critical weight of the first bidder it blocks.
pub fn icasm_solve(
    instance: &AuctionInstance,
    precision: u32,
    tie_break: &[usize],
) -> Result<OracleOutcome, OracleError> {
    instance.validate()?;
    let n = instance.bids.len();
    assert_eq!(tie_break.len(), n, "tie_break must rank every bid");

    let weights: Vec<BigUint> = instance
        .bids
        .iter()
        .map(|b| scaled_weight(b.valuation, b.bundle.len() as u64, precision))
        .collect();
    let mut rank = vec![0usize; n];
    for (pos, &i) in tie_break.iter().enumerate() {
        rank[i] = pos;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].cmp(&weights[a]).then_with(|| rank[a].cmp(&rank[b])));

    let disjoint = |a: usize, b: usize| instance.bids[a].bundle.is_disjoint(&instance.bids[b].bundle);

    let mut winners = Vec::new();
    for &i in &order {
        if winners.iter().all(|&w| disjoint(i, w)) {
            winners.push(i);
        }
    }

    let mut payments = Vec::new();
    for &i in &winners {
        let mut payment = BigUint::from(0u32);
        for (pos_j, &j) in order.iter().enumerate() {
            if j == i || disjoint(i, j) {
                continue;
            }
            let blocked_only_by_i =
                order[..pos_j].iter().filter(|&&k| k != i).all(|&k| disjoint(k, j));
            if blocked_only_by_i {
                payment = critical_payment(&weights[j], instance.bids[i].bundle.len() as u64);
                break;
            }
        }
        payments.push((i, payment));
    }

    let welfare = winners.iter().map(|&i| instance.bids[i].valuation as u128).sum();
    Ok(OracleOutcome { order, winners, payments, welfare })
}

const EXHAUSTIVE_LIMIT: usize = 20;

/// Maximum total valuation over all conflict-free bid subsets, by exhaustive
/// search over item bitmasks. Limited to 20 bids.
pub fn optimal_welfare(instance: &AuctionInstance) -> Result<u128, OracleError> {
    instance.validate()?;
    let n = instance.bids.len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(OracleError::TooLarge(n, EXHAUSTIVE_LIMIT));
    }
    let masks: Vec<u64> = instance
        .bids
        .iter()
        .map(|b| b.bundle.iter().fold(0u64, |m, &i| m | (1 << (i - 1))))
        .collect();
    let mut best = 0u128;
    for subset in 0u32..(1 << n) {
        let mut used = 0u64;
        let mut total = 0u128;
        let mut feasible = true;
        for (i, mask) in masks.iter().enumerate() {
            if subset & (1 << i) == 0 {
                continue;
            }
            if used & mask != 0 {
                feasible = false;
                break;
            }
            used |= mask;
            total += instance.bids[i].valuation as u128;
        }
        if feasible && total > best {
            best = total;
        }
    }
    Ok(best)
}

/// `optimal welfare / greedy welfare` as an exact rational; always >= 1.
pub fn approximation_ratio(
    instance: &AuctionInstance,
    precision: u32,
) -> Result<Ratio<u128>, OracleError> {
    let n = instance.bids.len();
    let tie_break: Vec<usize> = (0..n).collect();
    let greedy = icasm_solve(instance, precision, &tie_break)?;
    let opt = optimal_welfare(instance)?;
    Ok(Ratio::new(opt, greedy.welfare))
}

/// Random instance: `n` bids over `m` items, bundles uniform among subsets
/// of size >= 2, valuations uniform in `[1, max_valuation]`.
pub fn random_instance(
    bid_count: usize,
    item_count: u64,
    max_valuation: u64,
    rng: &mut dyn RandomSource,
) -> AuctionInstance {
    assert!(item_count >= 2, "bundles of size >= 2 need at least 2 items");
    let mask_space = BigUint::from(1u64) << item_count;
    let bids = (0..bid_count)
        .map(|i| {
            let bundle = loop {
                let mask: u64 = rng.sample_below(&mask_space).try_into().expect("m <= 63");
                if mask.count_ones() >= 2 {
                    break (1..=item_count).filter(|&it| mask & (1 << (it - 1)) != 0).collect();
                }
            };
            let valuation: u64 = u64::try_from(rng.sample_below(&BigUint::from(max_valuation)))
                .expect("fits")
                + 1;
            SingleMindedBid { name: format!("b{}", i + 1), valuation, bundle }
        })
        .collect();
    AuctionInstance { item_count, bids }
}
