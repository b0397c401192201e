//! Command-line front end: one-shot comparisons with optional proof
//! verification, full auction runs with bulletin-board exports, export
//! verification, and the bundle-leak probability calculator.

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use tpacas::auction::{parse_keys_file, topology_leak_probability, verify_auction, Auction, AuctionConfig};
use tpacas::fixed::{format_scaled, scaled_weight};
use tpacas::group::{generate_group, modp_1024, toy_group, GroupParams, KeyPair, SeededRng};
use tpacas::instance::parse_instance;
use tpacas::oracle::icasm_solve;
use tpacas::ppc::{ComparisonMode, ComparisonOutcome, PpcSession};
use tpacas::ScriptedValues;

#[derive(Parser)]
#[command(name = "tpacas", about = "Privacy-preserving comparisons and sealed-bid auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare two integers through the notary protocol.
    Compare(CompareArgs),
    /// Run a full auction from an instance file.
    Auction(AuctionArgs),
    /// Verify a bulletin-board export against a keys file.
    Verify(VerifyArgs),
    /// Print the probability of a complete bundle leak.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct CompareArgs {
    x: u64,
    y: u64,
    /// Use the small fixed demonstration group (p=1187, q=593, g=3, d_max=5).
    #[arg(long)]
    toy_group: bool,
    /// Bit length of the generated group (1024 selects a fixed standard group).
    #[arg(long, default_value_t = 64)]
    bits: u32,
    /// Private multiplier bound for generated groups.
    #[arg(long, default_value_t = 8)]
    d_max: u64,
    /// Run id: an integer, a label, or "paper" to replay the worked example.
    #[arg(long, default_value = "0")]
    seed: String,
    /// Also run the proof procedure and verify it.
    #[arg(long)]
    verify: bool,
    /// Directory for the transcript file.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct AuctionArgs {
    instance: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    precision: Option<u32>,
    /// Group bit length (1024 selects a fixed standard group).
    #[arg(long)]
    bits: Option<u32>,
    /// Also solve the instance in the clear and check the outcome matches.
    #[arg(long)]
    oracle_check: bool,
    /// Directory for the export and keys files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    export: PathBuf,
    keys: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Winner bundle size.
    s: u64,
    /// Item count.
    m: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compare(args) => cmd_compare(args),
        Command::Auction(args) => cmd_auction(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Analyze(args) => cmd_analyze(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn seeded(label: &str) -> SeededRng {
    match label.parse::<u64>() {
        Ok(n) => SeededRng::from_u64(n),
        Err(_) => SeededRng::from_label(label),
    }
}

fn pick_group(toy: bool, bits: u32, d_max: u64, rng: &mut SeededRng) -> Result<GroupParams, String> {
    if toy {
        return Ok(toy_group());
    }
    match bits {
        1024 => Ok(modp_1024()),
        b => generate_group(b, BigUint::from(d_max), rng).map_err(|e| e.to_string()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn cmd_compare(args: CompareArgs) -> Result<(), String> {
    let started = Instant::now();
    let paper_replay = args.seed == "paper";
    let master = seeded(&args.seed);

    let params = if paper_replay {
        toy_group()
    } else {
        pick_group(args.toy_group, args.bits, args.d_max, &mut master.derive("group"))?
    };
    let x = BigUint::from(args.x);
    let y = BigUint::from(args.y);

    let (key_a, key_b, d_a, d_b) = if paper_replay {
        (
            KeyPair::from_secret(BigUint::from(2u32), &params),
            KeyPair::from_secret(BigUint::from(3u32), &params),
            Some(BigUint::from(2u32)),
            Some(BigUint::from(3u32)),
        )
    } else {
        (
            KeyPair::generate(&params, &mut master.derive("key-a")),
            KeyPair::generate(&params, &mut master.derive("key-b")),
            None,
            None,
        )
    };

    // The coordinator draws the four distinct notaries from the registered
    // pool; with a pool of four this fixes which member plays which role.
    let mut pool = vec!["n1", "n2", "n3", "n4"];
    let mut assign_rng = master.derive("assign");
    for i in (1..pool.len()).rev() {
        let j: usize = tpacas::sample_scalar(&BigUint::from(i as u64 + 1), &mut assign_rng)
            .try_into()
            .expect("small");
        pool.swap(i, j);
    }

    let mut session = if paper_replay {
        let mut rng_a = ScriptedValues::new([350u32, 11, 4]);
        let mut rng_b = ScriptedValues::new([300u32, 12, 15]);
        PpcSession::fresh(
            &params,
            ComparisonMode::Ordered,
            &key_a,
            &key_b,
            x.clone(),
            y.clone(),
            d_a,
            d_b,
            &mut rng_a,
            &mut rng_b,
        )
    } else {
        let mut rng_a = master.derive("owner-a");
        let mut rng_b = master.derive("owner-b");
        PpcSession::fresh(
            &params,
            ComparisonMode::Ordered,
            &key_a,
            &key_b,
            x.clone(),
            y.clone(),
            None,
            None,
            &mut rng_a,
            &mut rng_b,
        )
    }
    .map_err(|e| e.to_string())?;

    session.run().map_err(|e| e.to_string())?;
    let mut verified = None;
    if args.verify || paper_replay {
        let record = session.prove().map_err(|e| e.to_string())?;
        let ok = tpacas::zkp_verify(
            &record,
            session.x_sum().expect("ran"),
            session.y_sum().expect("ran"),
            &key_a.public,
            &key_b.public,
            &params,
        );
        verified = Some(ok);
    }
    let transcript = session.into_transcript().map_err(|e| e.to_string())?;

    let mut rendered = transcript.render(&args.seed);
    rendered.push_str(&format!(
        "notaries A1={} A2={} B1={} B2={}\n",
        pool[0], pool[1], pool[2], pool[3]
    ));
    let run_id = format!("compare-{}", args.seed);
    let path = args.out.join(format!("{run_id}.transcript"));
    write_file(&path, &rendered)?;

    let symbol = match transcript.outcome {
        ComparisonOutcome::Greater => ">",
        ComparisonOutcome::Less => "<",
        ComparisonOutcome::Equal => "=",
    };
    println!("mode: compare");
    println!("seed: {}", args.seed);
    println!("group: {} ({}-bit q)", if args.toy_group || paper_replay { "toy" } else { "generated" }, params.q.bits());
    println!("outcome: {} {} {}", args.x, symbol, args.y);
    println!("messages: {}", transcript.message_count());
    if let Some(ok) = verified {
        println!("proof: {}", if ok { "verified" } else { "REJECTED" });
    }
    println!("transcript: {}", path.display());
    println!("wall: {:.3}s", started.elapsed().as_secs_f64());
    if verified == Some(false) {
        return Err("comparison proof failed verification".into());
    }
    Ok(())
}

fn cmd_auction(args: AuctionArgs) -> Result<(), String> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.instance)
        .map_err(|e| format!("reading {}: {e}", args.instance.display()))?;
    let (instance, options) = parse_instance(&text).map_err(|e| e.to_string())?;

    let seed_value = args.seed.or(options.seed).unwrap_or(0);
    let precision = args.precision.or(options.precision).unwrap_or(2);
    let bits = args.bits.or(options.group_bits).unwrap_or(256);
    let d_max_bits = options.d_max_bits.unwrap_or(4);

    let master = SeededRng::from_u64(seed_value);
    let group = pick_group(false, bits, 1u64 << d_max_bits, &mut master.derive("group"))?;

    // Report every bound violation up front, per agent.
    let mut rejected = Vec::new();
    for bid in &instance.bids {
        if bid.bundle.len() < 2 {
            rejected.push(format!("{}: bundle smaller than two items", bid.name));
            continue;
        }
        let w = scaled_weight(bid.valuation, bid.bundle.len() as u64, precision);
        if !group.operand_in_bound(&w) {
            rejected.push(format!("{}: scaled weight {w} exceeds the comparison bound", bid.name));
        }
    }
    if !rejected.is_empty() {
        for line in &rejected {
            eprintln!("rejected: {line}");
        }
        return Err(format!("{} bid(s) rejected", rejected.len()));
    }

    let config = AuctionConfig {
        group,
        item_count: instance.item_count,
        precision,
        item_ids: None,
    };
    let mut auction = Auction::setup(config, &instance, &master).map_err(|e| e.to_string())?;
    let outcome = auction.run().map_err(|e| e.to_string())?;

    let run_id = format!("auction-{seed_value}");
    let export_path = args.out.join(format!("{run_id}.sbb"));
    let keys_path = args.out.join(format!("{run_id}.keys"));
    write_file(&export_path, &auction.export())?;
    write_file(&keys_path, &auction.keys_file())?;

    println!("mode: auction");
    println!("seed: {seed_value}");
    println!("group: {bits}-bit, precision {precision}");
    println!("agents: {}, items: {}", instance.bids.len(), instance.item_count);
    println!("winners: {}", outcome.winners.len());
    for (id, payment) in &outcome.payments {
        println!("  id {} pays {}", id, format_scaled(payment, precision));
    }
    println!(
        "comparisons: {} value, {} item; proofs: {}",
        auction.value_comparisons(),
        auction.item_comparisons(),
        auction.proof_count()
    );
    println!("messages: {}", auction.total_messages());
    println!("export: {}", export_path.display());
    println!("keys: {}", keys_path.display());

    let mut failed = false;
    if args.oracle_check {
        let ranking = auction.identifier_ranking();
        let oracle = icasm_solve(&instance, precision, &ranking).map_err(|e| e.to_string())?;
        let ids_by_index: Vec<BigUint> = auction.identifiers();
        let oracle_winners: Vec<BigUint> =
            oracle.winners.iter().map(|&i| ids_by_index[i].clone()).collect();
        let oracle_payments: Vec<(BigUint, BigUint)> = oracle
            .payments
            .iter()
            .map(|(i, p)| (ids_by_index[*i].clone(), p.clone()))
            .collect();
        let matches = outcome.winners == oracle_winners && outcome.payments == oracle_payments;
        println!("oracle-check: {}", if matches { "pass" } else { "FAIL" });
        failed |= !matches;
    }
    println!("wall: {:.3}s", started.elapsed().as_secs_f64());
    if failed {
        return Err("oracle check failed".into());
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), String> {
    let export = std::fs::read_to_string(&args.export)
        .map_err(|e| format!("reading {}: {e}", args.export.display()))?;
    let keys_text = std::fs::read_to_string(&args.keys)
        .map_err(|e| format!("reading {}: {e}", args.keys.display()))?;
    let keys = parse_keys_file(&keys_text)?;
    match verify_auction(&export, &keys) {
        Ok(()) => {
            println!("verify: pass");
            Ok(())
        }
        Err(failure) => {
            println!("verify: FAIL at record {}: {}", failure.index, failure.reason);
            Err("export verification failed".into())
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), String> {
    let ratio = topology_leak_probability(args.s, args.m).map_err(|e| e.to_string())?;
    let (numer, denom) = (ratio.numer(), ratio.denom());
    // Twelve decimal places, computed exactly.
    let scaled = numer * BigUint::from(10u64).pow(12) / denom;
    let decimal = if denom.is_one() && numer.is_one() {
        "1.000000000000".to_string()
    } else {
        format!("0.{:012}", scaled.to_u64().unwrap_or(0))
    };
    println!("bundle-leak probability for s={} of m={} items:", args.s, args.m);
    println!("  exact:   {numer}/{denom}");
    println!("  decimal: {decimal}");
    Ok(())
}

