//! The secure bulletin board: an append-only, logically timestamped record
//! log whose entries are SHA-256 hash-chained, so any mutation, deletion,
//! or reordering of published records is detectable from the export alone.

use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SbbError {
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error("unsupported export header: {0}")]
    Header(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Announcement,
    PublicKey,
    Bid,
    Bundle,
    ComparisonProof,
    Outcome,
}

impl RecordKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "announcement" => Some(RecordKind::Announcement),
            "public-key" => Some(RecordKind::PublicKey),
            "bid" => Some(RecordKind::Bid),
            "bundle" => Some(RecordKind::Bundle),
            "comparison-proof" => Some(RecordKind::ComparisonProof),
            "outcome" => Some(RecordKind::Outcome),
            _ => None,
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RecordKind::Announcement => "announcement",
            RecordKind::PublicKey => "public-key",
            RecordKind::Bid => "bid",
            RecordKind::Bundle => "bundle",
            RecordKind::ComparisonProof => "comparison-proof",
            RecordKind::Outcome => "outcome",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbbRecord {
    pub index: u64,
    pub timestamp: u64,
    pub kind: RecordKind,
    pub body: String,
    pub chain: String,
}

const GENESIS: &str = "sbb-genesis";
const HEADER: &str = "sbb-export v1 digest=sha256";

fn chain_hash(prev: &str, index: u64, timestamp: u64, kind: RecordKind, body: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prev.as_bytes());
    hasher.update(b"\n");
    hasher.update(format!("{index} {timestamp} {kind} {body}").as_bytes());
    hex_encode(&hasher.finalize())
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Append-only board with a logical clock. Records cannot be edited once
/// appended; the chain field of each record covers everything before it.
#[derive(Debug, Default, Clone)]
pub struct BulletinBoard {
    records: Vec<SbbRecord>,
    clock: u64,
}

impl BulletinBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, kind: RecordKind, body: String) -> u64 {
        debug_assert!(
            !body.contains('\t') && !body.contains('\n'),
            "record bodies must be single-line, tab-free"
        );
        let index = self.records.len() as u64;
        let timestamp = self.clock;
        self.clock += 1;
        let prev = self.records.last().map(|r| r.chain.as_str()).unwrap_or(GENESIS);
        let chain = chain_hash(prev, index, timestamp, kind, &body);
        self.records.push(SbbRecord { index, timestamp, kind, body, chain });
        index
    }

    pub fn records(&self) -> &[SbbRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Recomputes the chain end to end; returns the index of the first
    /// record whose stored position or chain hash does not match.
    pub fn verify_chain(&self) -> Result<(), u64> {
        let mut prev = GENESIS.to_string();
        for (pos, record) in self.records.iter().enumerate() {
            if record.index != pos as u64 {
                return Err(pos as u64);
            }
            let expected =
                chain_hash(&prev, record.index, record.timestamp, record.kind, &record.body);
            if expected != record.chain {
                return Err(pos as u64);
            }
            prev = record.chain.clone();
        }
        Ok(())
    }

    /// Line-delimited export, one record per line after the header.
    pub fn export(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.index, r.timestamp, r.kind, r.chain, r.body
            ));
        }
        out
    }

    /// Parses an export without verifying it; run [`Self::verify_chain`]
    /// afterwards.
    pub fn import(text: &str) -> Result<Self, SbbError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, line)) if line == HEADER => {}
            Some((n, line)) => return Err(SbbError::Header(format!("line {}: {line}", n + 1))),
            None => return Err(SbbError::Header("empty export".into())),
        }
        let mut records = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.splitn(5, '\t');
            let parse_err = |what: &str| SbbError::Malformed(n + 1, what.to_string());
            let index: u64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("bad index"))?;
            let timestamp: u64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("bad timestamp"))?;
            let kind = fields
                .next()
                .and_then(RecordKind::parse)
                .ok_or_else(|| parse_err("bad record kind"))?;
            let chain =
                fields.next().map(str::to_string).ok_or_else(|| parse_err("missing chain"))?;
            let body =
                fields.next().map(str::to_string).ok_or_else(|| parse_err("missing body"))?;
            records.push(SbbRecord { index, timestamp, kind, body, chain });
        }
        let clock = records.last().map(|r| r.timestamp + 1).unwrap_or(0);
        Ok(Self { records, clock })
    }
}
