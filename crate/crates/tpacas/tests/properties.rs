//! Property tests for the arithmetic and protocol invariants.

use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use tpacas::commit::{combine, commit, rand_rep, verify_opening};
use tpacas::fixed::{critical_payment, scaled_weight};
use tpacas::group::{mod_exp, sub_mod, toy_group, KeyPair, ScriptedValues};
use tpacas::ppc::{decide, ComparisonOutcome};
use tpacas::sbb::{BulletinBoard, RecordKind};

fn toy_keys() -> (KeyPair, KeyPair) {
    let params = toy_group();
    (
        KeyPair::from_secret(BigUint::from(2u32), &params),
        KeyPair::from_secret(BigUint::from(3u32), &params),
    )
}

proptest! {
    /// g^(a+b) = g^a * g^b mod p.
    #[test]
    fn exponent_addition_law(a in 0u64..100_000, b in 0u64..100_000) {
        let params = toy_group();
        let lhs = mod_exp(&params.g, &BigInt::from(a + b), &params.p).unwrap();
        let ga = mod_exp(&params.g, &BigInt::from(a), &params.p).unwrap();
        let gb = mod_exp(&params.g, &BigInt::from(b), &params.p).unwrap();
        prop_assert_eq!(lhs, ga * gb % &params.p);
    }

    /// g has order q, so exponents reduce modulo q.
    #[test]
    fn exponent_order_reduction(x in 0u64..10_000_000) {
        let params = toy_group();
        let full = mod_exp(&params.g, &BigInt::from(x), &params.p).unwrap();
        let reduced_exp = BigUint::from(x) % &params.q;
        let reduced = params.g.modpow(&reduced_exp, &params.p);
        prop_assert_eq!(full, reduced);
    }

    /// Share pairs always reconstruct the represented value.
    #[test]
    fn share_pair_reconstructs(x in 0u32..593, u in 0u32..593) {
        let params = toy_group();
        let mut rng = ScriptedValues::new([u]);
        let rep = rand_rep(&BigUint::from(x), &params, &mut rng).unwrap();
        prop_assert_eq!(rep.reconstruct(&params.q), BigUint::from(x));
    }

    /// Same-key commitments combine homomorphically.
    #[test]
    fn commitments_homomorphic(
        x1 in 0u32..593, r1 in 0u32..593,
        x2 in 0u32..593, r2 in 0u32..593,
    ) {
        let params = toy_group();
        let (key_a, _) = toy_keys();
        let c1 = commit(&x1.into(), &r1.into(), &key_a.public, &params);
        let c2 = commit(&x2.into(), &r2.into(), &key_a.public, &params);
        let combined = combine(&c1, &c2, &params);
        let direct = commit(
            &((BigUint::from(x1) + BigUint::from(x2)) % &params.q),
            &((BigUint::from(r1) + BigUint::from(r2)) % &params.q),
            &key_a.public,
            &params,
        );
        prop_assert_eq!(combined, direct);
    }

    /// Honest openings verify; any shifted message does not.
    #[test]
    fn opening_binds_message(x in 0u32..593, r in 0u32..593, shift in 1u32..593) {
        let params = toy_group();
        let (key_a, _) = toy_keys();
        let c = commit(&x.into(), &r.into(), &key_a.public, &params);
        prop_assert!(verify_opening(&c, &x.into(), &r.into(), &key_a.public, &params));
        let shifted = (BigUint::from(x) + BigUint::from(shift)) % &params.q;
        prop_assert!(!verify_opening(&c, &shifted, &r.into(), &key_a.public, &params));
    }

    /// The decision rule agrees with the plaintext sign of x - y whenever
    /// the blinded sums split D * (x - y) mod q.
    #[test]
    fn decision_rule_matches_sign(
        x in 0u32..12, y in 0u32..12,
        d_a in 1u32..6, d_b in 1u32..6,
        split in 0u32..593,
    ) {
        let params = toy_group();
        let blinded = BigUint::from(d_a * d_b)
            * sub_mod(&BigUint::from(x), &BigUint::from(y), &params.q)
            % &params.q;
        let x_sum = BigUint::from(split) % &params.q;
        let y_sum = sub_mod(&blinded, &x_sum, &params.q);
        let expected = match x.cmp(&y) {
            std::cmp::Ordering::Greater => ComparisonOutcome::Greater,
            std::cmp::Ordering::Less => ComparisonOutcome::Less,
            std::cmp::Ordering::Equal => ComparisonOutcome::Equal,
        };
        prop_assert_eq!(decide(&x_sum, &y_sum, &params), expected);
    }

    /// Weight quantization brackets the exact value:
    /// w^2 * s <= (10^p * v)^2 < (w+1)^2 * s.
    #[test]
    fn weight_brackets_exact_value(v in 1u64..100_000, s in 1u64..64) {
        let w = scaled_weight(v, s, 2);
        let target = BigUint::from(v) * BigUint::from(100u32);
        let target2 = &target * &target;
        prop_assert!(&w * &w * s <= target2);
        let next = &w + 1u32;
        prop_assert!(&next * &next * s > target2);
    }

    /// A winner's payment never exceeds its own scaled valuation, even at
    /// the quantization boundary.
    #[test]
    fn payment_below_scaled_valuation(v in 1u64..100_000, s in 2u64..16) {
        let w = scaled_weight(v, s, 2);
        let sigma = critical_payment(&w, s);
        prop_assert!(sigma <= BigUint::from(v) * BigUint::from(100u32));
    }

    /// Any single-character corruption of a record body breaks the chain at
    /// exactly that record.
    #[test]
    fn chain_detects_any_body_corruption(which in 0usize..4, digit in 0u8..10) {
        let mut board = BulletinBoard::new();
        board.append(RecordKind::Announcement, "p=1187 q=593 g=3 d_max=5 m=2 precision=2".into());
        board.append(RecordKind::PublicKey, "id=101 h=9".into());
        board.append(RecordKind::Bid, "id=101 value=12 size=34 w1=56 w2=78".into());
        board.append(RecordKind::Outcome, "winners=101 payments=101:0 precision=2".into());

        let export = board.export();
        let mut lines: Vec<String> = export.lines().map(str::to_string).collect();
        let line = &lines[which + 1];
        let tab = line.rfind('\t').unwrap();
        let body_digits: Vec<usize> = line
            .char_indices()
            .filter(|(i, c)| *i > tab && c.is_ascii_digit())
            .map(|(i, _)| i)
            .collect();
        let pos = body_digits[digit as usize % body_digits.len()];
        let old = line.as_bytes()[pos] - b'0';
        let new = (old + 1) % 10;
        let mut mutated = line.clone().into_bytes();
        mutated[pos] = b'0' + new;
        lines[which + 1] = String::from_utf8(mutated).unwrap();

        let tampered = BulletinBoard::import(&(lines.join("\n") + "\n")).unwrap();
        prop_assert_eq!(tampered.verify_chain(), Err(which as u64));
    }
}
