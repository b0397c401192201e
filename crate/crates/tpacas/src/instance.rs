//! Auction instance files: a line-oriented text format shared by the
//! auction runner and the plaintext oracle.
//!
//! ```text
//! # three single-minded bidders over four items
//! items 4
//! precision 2
//! seed 7
//! bits 256
//! agent A 10 1 2
//! agent B 8 2 3
//! agent C 5 3 4
//! ```

use crate::oracle::{AuctionInstance, SingleMindedBid};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct InstanceParseError {
    pub line: usize,
    pub message: String,
}

/// Optional run settings an instance file may carry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceOptions {
    pub seed: Option<u64>,
    pub precision: Option<u32>,
    pub group_bits: Option<u32>,
    pub d_max_bits: Option<u32>,
}

pub fn parse_instance(
    text: &str,
) -> Result<(AuctionInstance, InstanceOptions), InstanceParseError> {
    let mut item_count: Option<u64> = None;
    let mut options = InstanceOptions::default();
    let mut bids = Vec::new();

    let err = |line: usize, message: &str| InstanceParseError { line, message: message.into() };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().expect("non-empty line");
        match keyword {
            "items" => {
                let m = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line_no, "items needs a positive integer"))?;
                item_count = Some(m);
            }
            "precision" => {
                options.precision = Some(
                    tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(line_no, "precision needs an integer"))?,
                );
            }
            "seed" => {
                options.seed = Some(
                    tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(line_no, "seed needs an integer"))?,
                );
            }
            "bits" => {
                options.group_bits = Some(
                    tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(line_no, "bits needs an integer"))?,
                );
            }
            "dmax-bits" => {
                options.d_max_bits = Some(
                    tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(line_no, "dmax-bits needs an integer"))?,
                );
            }
            "agent" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| err(line_no, "agent needs a name"))?
                    .to_string();
                let valuation: u64 = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line_no, "agent needs a positive valuation"))?;
                let mut bundle = BTreeSet::new();
                for t in tokens {
                    let item: u64 = t
                        .parse()
                        .map_err(|_| err(line_no, &format!("bad item number {t:?}")))?;
                    if !bundle.insert(item) {
                        return Err(err(line_no, &format!("duplicate item {item}")));
                    }
                }
                if bundle.is_empty() {
                    return Err(err(line_no, "agent needs at least one item"));
                }
                bids.push(SingleMindedBid { name, valuation, bundle });
            }
            other => return Err(err(line_no, &format!("unknown keyword {other:?}"))),
        }
    }

    let item_count = item_count.ok_or_else(|| err(text.lines().count() + 1, "missing items line"))?;
    Ok((AuctionInstance { item_count, bids }, options))
}

pub fn render_instance(instance: &AuctionInstance, options: &InstanceOptions) -> String {
    let mut out = format!("items {}\n", instance.item_count);
    if let Some(p) = options.precision {
        out.push_str(&format!("precision {p}\n"));
    }
    if let Some(s) = options.seed {
        out.push_str(&format!("seed {s}\n"));
    }
    if let Some(b) = options.group_bits {
        out.push_str(&format!("bits {b}\n"));
    }
    if let Some(b) = options.d_max_bits {
        out.push_str(&format!("dmax-bits {b}\n"));
    }
    for bid in &instance.bids {
        let items: Vec<String> = bid.bundle.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("agent {} {} {}\n", bid.name, bid.valuation, items.join(" ")));
    }
    out
}
