//! Pedersen commitments `E(x, r) = g^x h^r mod p`, the two-share random
//! representation of committed values, homomorphic combination, and opening
//! verification.

use crate::group::{sample_scalar, sub_mod, GroupError, GroupParams, RandomSource};
use num_bigint::BigUint;

/// Split of a value into shares `(u, v)` with `x = (u + v) mod q`.
/// Either share alone reveals nothing about `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandRep {
    pub u: BigUint,
    pub v: BigUint,
}

impl RandRep {
    pub fn reconstruct(&self, q: &BigUint) -> BigUint {
        (&self.u + &self.v) % q
    }
}

/// Draws `u` uniformly and sets `v = (x - u) mod q`.
pub fn rand_rep(
    x: &BigUint,
    params: &GroupParams,
    rng: &mut dyn RandomSource,
) -> Result<RandRep, GroupError> {
    if x >= &params.q {
        return Err(GroupError::OutOfRange(x.clone(), params.q.clone()));
    }
    let u = sample_scalar(&params.q, rng);
    let v = sub_mod(x, &u, &params.q);
    Ok(RandRep { u, v })
}

/// The public value of one Pedersen commitment. The committed message and
/// help value stay with the committing party; audits rely on that split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment(pub BigUint);

/// The pair `E(R(x)) = (E(u, r), E(v, r'))` committing both shares of a value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommittedPair {
    pub first: Commitment,
    pub second: Commitment,
}

/// Committer-side opening of a single commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opening {
    pub value: BigUint,
    pub help: BigUint,
}

/// `E(x, r) = g^x h^r mod p` under the committer's public key `h`.
/// Inputs reduce modulo `q` first, since `g` and `h` have order `q`.
pub fn commit(x: &BigUint, r: &BigUint, key: &BigUint, params: &GroupParams) -> Commitment {
    let x = x % &params.q;
    let r = r % &params.q;
    let c = params.g.modpow(&x, &params.p) * key.modpow(&r, &params.p) % &params.p;
    Commitment(c)
}

/// Homomorphic product `c1 * c2 mod p`; for same-key inputs this commits
/// `(x1 + x2, r1 + r2)`.
pub fn combine(c1: &Commitment, c2: &Commitment, params: &GroupParams) -> Commitment {
    Commitment(&c1.0 * &c2.0 % &params.p)
}

/// True iff `c = g^x h^r mod p`.
pub fn verify_opening(
    c: &Commitment,
    x: &BigUint,
    r: &BigUint,
    key: &BigUint,
    params: &GroupParams,
) -> bool {
    commit(x, r, key, params) == *c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{toy_group, ScriptedValues, SeededRng};
    use num_bigint::BigUint;
    use num_traits::{One, Zero};

    fn toy_keys() -> (BigUint, BigUint) {
        (BigUint::from(9u32), BigUint::from(27u32))
    }

    #[test]
    fn rand_rep_replays_worked_pairs() {
        let params = toy_group();
        let mut s = ScriptedValues::new([350u32]);
        let rep = rand_rep(&BigUint::from(7u32), &params, &mut s).unwrap();
        assert_eq!(rep.u, BigUint::from(350u32));
        assert_eq!(rep.v, BigUint::from(250u32));
        assert_eq!(rep.reconstruct(&params.q), BigUint::from(7u32));

        let mut s = ScriptedValues::new([300u32]);
        let rep = rand_rep(&BigUint::from(6u32), &params, &mut s).unwrap();
        assert_eq!(rep.u, BigUint::from(300u32));
        assert_eq!(rep.v, BigUint::from(299u32));
    }

    #[test]
    fn rand_rep_zero_reconstructs_zero() {
        let params = toy_group();
        let mut rng = SeededRng::from_u64(5);
        let rep = rand_rep(&BigUint::zero(), &params, &mut rng).unwrap();
        assert_eq!(rep.reconstruct(&params.q), BigUint::zero());
    }

    #[test]
    fn rand_rep_rejects_out_of_domain() {
        let params = toy_group();
        let mut rng = SeededRng::from_u64(5);
        let err = rand_rep(&params.q.clone(), &params, &mut rng).unwrap_err();
        assert!(matches!(err, GroupError::OutOfRange(..)));
    }

    #[test]
    fn commit_zero_zero_is_identity() {
        let params = toy_group();
        let (h_a, _) = toy_keys();
        assert!(commit(&BigUint::zero(), &BigUint::zero(), &h_a, &params).0.is_one());
    }

    #[test]
    fn commit_matches_worked_example_values() {
        let params = toy_group();
        let (h_a, h_b) = toy_keys();
        let c = |x: u32, r: u32, h: &BigUint| commit(&x.into(), &r.into(), h, &params).0;
        assert_eq!(c(350, 11, &h_a), BigUint::from(730u32));
        assert_eq!(c(250, 4, &h_a), BigUint::from(467u32));
        assert_eq!(c(300, 12, &h_b), BigUint::from(1004u32));
        assert_eq!(c(299, 15, &h_b), BigUint::from(581u32));
    }

    #[test]
    fn commit_reduces_modulo_q() {
        let params = toy_group();
        let (h_a, _) = toy_keys();
        let x = BigUint::from(1000u32);
        let r = BigUint::from(700u32);
        assert_eq!(
            commit(&x, &r, &h_a, &params),
            commit(&(x % &params.q), &(r % &params.q), &h_a, &params)
        );
    }

    #[test]
    fn combine_is_homomorphic_same_key() {
        let params = toy_group();
        let (h_a, _) = toy_keys();
        let mut rng = SeededRng::from_u64(99);
        for _ in 0..1000 {
            let x1 = sample_scalar(&params.q, &mut rng);
            let r1 = sample_scalar(&params.q, &mut rng);
            let x2 = sample_scalar(&params.q, &mut rng);
            let r2 = sample_scalar(&params.q, &mut rng);
            let combined = combine(
                &commit(&x1, &r1, &h_a, &params),
                &commit(&x2, &r2, &h_a, &params),
                &params,
            );
            let direct =
                commit(&((&x1 + &x2) % &params.q), &((&r1 + &r2) % &params.q), &h_a, &params);
            assert_eq!(combined, direct);
        }
    }

    #[test]
    fn combine_with_identity_is_noop() {
        let params = toy_group();
        let (h_a, _) = toy_keys();
        let c = commit(&BigUint::from(42u32), &BigUint::from(17u32), &h_a, &params);
        let identity = commit(&BigUint::zero(), &BigUint::zero(), &h_a, &params);
        assert_eq!(combine(&c, &identity, &params), c);
    }

    #[test]
    fn verify_opening_accepts_honest_and_rejects_shifted() {
        let params = toy_group();
        let (h_a, _) = toy_keys();
        let x = BigUint::from(123u32);
        let r = BigUint::from(98u32);
        let c = commit(&x, &r, &h_a, &params);
        assert!(verify_opening(&c, &x, &r, &h_a, &params));
        assert!(!verify_opening(&c, &(&x + 1u32), &r, &h_a, &params));
        assert!(!verify_opening(&c, &x, &(&r + 1u32), &h_a, &params));
    }

    #[test]
    fn random_search_never_finds_unexplained_second_opening() {
        // Binding check at toy scale: a random (x', r') != (x, r) verifies
        // only when it lands on the discrete-log relation
        // g^(x'-x) = h^(r-r'), never otherwise.
        let params = toy_group();
        let (h_a, _) = toy_keys();
        let x = BigUint::from(77u32);
        let r = BigUint::from(41u32);
        let c = commit(&x, &r, &h_a, &params);
        let mut rng = SeededRng::from_u64(1234);
        let mut unexplained = 0u32;
        for _ in 0..1_000_000 {
            let x2 = sample_scalar(&params.q, &mut rng);
            let r2 = sample_scalar(&params.q, &mut rng);
            if (x2 == x) && (r2 == r) {
                continue;
            }
            if verify_opening(&c, &x2, &r2, &h_a, &params) {
                let dx = crate::group::sub_mod(&x2, &x, &params.q);
                let dr = crate::group::sub_mod(&r, &r2, &params.q);
                let lhs = params.g.modpow(&dx, &params.p);
                let rhs = h_a.modpow(&dr, &params.p);
                if lhs != rhs {
                    unexplained += 1;
                }
            }
        }
        assert_eq!(unexplained, 0);
    }

    #[test]
    fn hiding_distribution_identical_over_all_help_values() {
        // Exhaustive at toy scale: over all r in [0, q), the multiset of
        // commitment values of x1 equals that of x2.
        let params = toy_group();
        let (h_a, _) = toy_keys();
        let all_values = |x: &BigUint| {
            let mut vs: Vec<BigUint> = (0u32..593)
                .map(|r| commit(x, &BigUint::from(r), &h_a, &params).0)
                .collect();
            vs.sort();
            vs
        };
        assert_eq!(all_values(&BigUint::from(7u32)), all_values(&BigUint::from(6u32)));
    }
}
