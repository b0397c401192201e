//! Secure two-party integer comparison with semi-honest third parties and
//! zero-knowledge verification, plus a privacy-preserving single-minded
//! combinatorial auction built on top of it.
//!
//! The crate is organized around one comparison primitive and one auction
//! protocol:
//!
//! - [`group`]: Schnorr-group parameters, modular arithmetic, seeded
//!   randomness.
//! - [`commit`]: Pedersen commitments and the two-share representation of
//!   committed values.
//! - [`simnet`]: simulated secure channels with full logging, merged-view
//!   audits, and tamper hooks.
//! - [`ppc`]: the comparison protocol, its leaky predecessor, and the
//!   interactive proof binding each comparison to its commitments.
//! - [`sbb`]: the append-only, hash-chained bulletin board.
//! - [`fixed`]: exact fixed-point weight and payment arithmetic.
//! - [`auction`]: the full auction protocol over the bulletin board.
//! - [`oracle`]: the plaintext greedy mechanism and brute-force optimum used
//!   as ground truth.
//! - [`instance`]: the auction instance file format.

pub mod auction;
pub mod commit;
pub mod fixed;
pub mod group;
pub mod instance;
pub mod oracle;
pub mod ppc;
pub mod sbb;
pub mod simnet;

pub use auction::{
    parse_keys_file, topology_leak_probability, verify_auction, Auction, AuctionConfig,
    AuctionError, AuctionOutcome, BidTuple, ItemBundle, VerifyFailure,
};
pub use commit::{combine, commit, rand_rep, verify_opening, CommittedPair, Commitment, RandRep};
pub use fixed::{critical_payment, format_scaled, scaled_weight};
pub use instance::{parse_instance, render_instance, InstanceOptions, InstanceParseError};
pub use oracle::{
    approximation_ratio, icasm_solve, optimal_welfare, random_instance, AuctionInstance,
    OracleError, OracleOutcome, SingleMindedBid,
};
pub use group::{
    generate_group, mod_exp, modp_1024, sample_scalar, toy_group, GroupError, GroupParams,
    KeyPair, RandomSource, ScriptedValues, SeededRng,
};
pub use ppc::{
    decide, legacy_vc_run, ppc_run, ppc_run_verified, zkp_verify, ComparisonMode,
    ComparisonOutcome, LegacyTranscript, PpcSession, PpcTranscript, PreparedSide, ProtocolError,
    ZkpRecord,
};
pub use sbb::{BulletinBoard, RecordKind, SbbError, SbbRecord};
pub use simnet::{
    audit_views, Endpoint, LogEntry, Message, NetError, Network, PartyRole, Payload,
    PayloadClass, Step, TamperHook,
};
