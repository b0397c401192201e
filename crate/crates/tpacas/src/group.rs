//! Schnorr-group arithmetic: the public parameters `(p, q, g)` with the
//! multiplier bound `d_max`, modular exponentiation over `Z_p`, key pairs,
//! and seeded randomness used by every protocol run.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("zero has no inverse modulo {0}")]
    NoInverse(BigUint),
    #[error("bit length {0} too small, need at least {1}")]
    BitLength(u32, u32),
    #[error("multiplier bound {d_max} squared must stay below the group order {q}")]
    MultiplierBound { d_max: BigUint, q: BigUint },
    #[error("invalid group parameters: {0}")]
    Invalid(&'static str),
    #[error("value {0} outside [0, {1})")]
    OutOfRange(BigUint, BigUint),
    #[error("malformed group record: {0}")]
    Parse(String),
}

/// Source of uniform values below a bound. One instance is confined to one
/// protocol run, so every run is replayable from its seed.
pub trait RandomSource {
    /// Uniform value in `[0, bound)`; `bound >= 1`.
    fn sample_below(&mut self, bound: &BigUint) -> BigUint;
}

/// ChaCha20-backed deterministic source.
pub struct SeededRng {
    seed: [u8; 32],
    rng: ChaCha20Rng,
}

impl SeededRng {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self { seed, rng: ChaCha20Rng::from_seed(seed) }
    }

    pub fn from_u64(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        Self::from_seed(bytes)
    }

    pub fn from_label(label: &str) -> Self {
        Self::from_seed(Sha256::digest(label.as_bytes()).into())
    }

    /// Independent child stream, e.g. one per party of a run.
    pub fn derive(&self, label: &str) -> SeededRng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed);
        hasher.update(label.as_bytes());
        Self::from_seed(hasher.finalize().into())
    }

    pub fn seed_bytes(&self) -> [u8; 32] {
        self.seed
    }
}

impl RandomSource for SeededRng {
    fn sample_below(&mut self, bound: &BigUint) -> BigUint {
        assert!(!bound.is_zero(), "sampling bound must be positive");
        self.rng.gen_biguint_below(bound)
    }
}

/// Replays a fixed sequence of draws; used to pin a run to known values.
pub struct ScriptedValues {
    queue: VecDeque<BigUint>,
}

impl ScriptedValues {
    pub fn new<I, T>(values: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<BigUint>,
    {
        Self { queue: values.into_iter().map(Into::into).collect() }
    }
}

impl RandomSource for ScriptedValues {
    fn sample_below(&mut self, bound: &BigUint) -> BigUint {
        let v = self.queue.pop_front().expect("scripted value sequence exhausted");
        assert!(&v < bound, "scripted value {v} not below bound {bound}");
        v
    }
}

/// Uniform integer in `[0, range_max)`, deterministic under a fixed seed.
pub fn sample_scalar(range_max: &BigUint, rng: &mut dyn RandomSource) -> BigUint {
    assert!(!range_max.is_zero(), "range_max must be at least 1");
    rng.sample_below(range_max)
}

/// Uniform integer in `[1, max_inclusive]`.
pub fn sample_in_range(max_inclusive: &BigUint, rng: &mut dyn RandomSource) -> BigUint {
    sample_scalar(max_inclusive, rng) + 1u32
}

/// Public parameters shared by every party: primes `p`, `q` with `q | p-1`,
/// a generator `g` of the order-`q` subgroup of `Z*_p`, and the private
/// multiplier bound `d_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    pub p: BigUint,
    pub q: BigUint,
    pub g: BigUint,
    pub d_max: BigUint,
}

impl GroupParams {
    pub fn new(p: BigUint, q: BigUint, g: BigUint, d_max: BigUint) -> Result<Self, GroupError> {
        let params = Self { p, q, g, d_max };
        params.validate()?;
        Ok(params)
    }

    /// Checks every structural invariant: primality of `p` and `q`,
    /// `q | p-1`, `g` generates an order-`q` subgroup, and `d_max^2 < q`.
    pub fn validate(&self) -> Result<(), GroupError> {
        if !is_probable_prime(&self.p) {
            return Err(GroupError::Invalid("p is not prime"));
        }
        if !is_probable_prime(&self.q) {
            return Err(GroupError::Invalid("q is not prime"));
        }
        if !((&self.p - 1u32) % &self.q).is_zero() {
            return Err(GroupError::Invalid("q does not divide p-1"));
        }
        if self.g <= BigUint::one() || self.g >= self.p {
            return Err(GroupError::Invalid("g outside (1, p)"));
        }
        if !self.g.modpow(&self.q, &self.p).is_one() {
            return Err(GroupError::Invalid("g does not have order q"));
        }
        if self.d_max.is_zero() {
            return Err(GroupError::Invalid("d_max must be at least 1"));
        }
        if self.big_d_max() >= self.q {
            return Err(GroupError::MultiplierBound {
                d_max: self.d_max.clone(),
                q: self.q.clone(),
            });
        }
        Ok(())
    }

    /// `D_max = d_max^2`, the largest possible blinding product.
    pub fn big_d_max(&self) -> BigUint {
        &self.d_max * &self.d_max
    }

    /// Whether an operand is small enough for an ordered comparison,
    /// i.e. `x < q / (2 * D_max)` (checked exactly as `2 * D_max * x < q`).
    pub fn operand_in_bound(&self, x: &BigUint) -> bool {
        2u32 * self.big_d_max() * x < self.q
    }

    /// `(q - 1) / 2`, the threshold of the comparison decision rule.
    pub fn half_order(&self) -> BigUint {
        (&self.q - 1u32) >> 1
    }

    /// Canonical one-line text record, decimal fields.
    pub fn to_record(&self) -> String {
        format!("group p={} q={} g={} d_max={}", self.p, self.q, self.g, self.d_max)
    }

    pub fn parse_record(line: &str) -> Result<Self, GroupError> {
        let mut p = None;
        let mut q = None;
        let mut g = None;
        let mut d_max = None;
        for token in line.split_whitespace() {
            if token == "group" {
                continue;
            }
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| GroupError::Parse(format!("expected key=value, got {token:?}")))?;
            let value: BigUint = value
                .parse()
                .map_err(|_| GroupError::Parse(format!("bad decimal in {token:?}")))?;
            match key {
                "p" => p = Some(value),
                "q" => q = Some(value),
                "g" => g = Some(value),
                "d_max" => d_max = Some(value),
                _ => return Err(GroupError::Parse(format!("unknown field {key:?}"))),
            }
        }
        match (p, q, g, d_max) {
            (Some(p), Some(q), Some(g), Some(d_max)) => Ok(Self { p, q, g, d_max }),
            _ => Err(GroupError::Parse("missing field".into())),
        }
    }
}

/// The 11-bit group used throughout the worked examples:
/// `p = 1187 = 2 * 593 + 1`, `q = 593`, `g = 3`, `d_max = 5`.
pub fn toy_group() -> GroupParams {
    GroupParams {
        p: BigUint::from(1187u32),
        q: BigUint::from(593u32),
        g: BigUint::from(3u32),
        d_max: BigUint::from(5u32),
    }
}

/// Fixed 1024-bit safe-prime group (the well-known Oakley Group 2 modulus),
/// generator 2, with a 32-bit multiplier bound.
pub fn modp_1024() -> GroupParams {
    let p = BigUint::parse_bytes(
        b"FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
          020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
          4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
          EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF",
        16,
    )
    .expect("fixed constant");
    let q = (&p - 1u32) >> 1;
    GroupParams { p, q, g: BigUint::from(2u32), d_max: BigUint::one() << 32 }
}

/// Secret/public key pair: `h = g^a mod p` with `a` drawn from `[1, q)`.
#[derive(Debug, Clone)]
pub struct KeyPair {
    pub secret: BigUint,
    pub public: BigUint,
}

impl KeyPair {
    pub fn generate(params: &GroupParams, rng: &mut dyn RandomSource) -> Self {
        let a = sample_scalar(&(&params.q - 1u32), rng) + 1u32;
        Self::from_secret(a, params)
    }

    pub fn from_secret(secret: BigUint, params: &GroupParams) -> Self {
        let public = params.g.modpow(&secret, &params.p);
        Self { secret, public }
    }
}

/// `base^exponent mod p`; negative exponents go through the modular inverse
/// of the base, so `base` must be invertible for those.
pub fn mod_exp(base: &BigUint, exponent: &BigInt, p: &BigUint) -> Result<BigUint, GroupError> {
    let base = base % p;
    if exponent.is_negative() {
        let inv = mod_inv(&base, p)?;
        let e = exponent
            .magnitude()
            .clone();
        Ok(inv.modpow(&e, p))
    } else {
        Ok(base.modpow(exponent.magnitude(), p))
    }
}

/// Multiplicative inverse modulo `m` via the extended Euclidean algorithm.
pub fn mod_inv(a: &BigUint, m: &BigUint) -> Result<BigUint, GroupError> {
    let a = a % m;
    if a.is_zero() {
        return Err(GroupError::NoInverse(m.clone()));
    }
    let e = BigInt::from(a).extended_gcd(&BigInt::from(m.clone()));
    if !e.gcd.is_one() {
        return Err(GroupError::NoInverse(m.clone()));
    }
    let m_int = BigInt::from(m.clone());
    let x = e.x.mod_floor(&m_int);
    Ok(x.magnitude().clone())
}

/// Canonical representative of `a - b` in `[0, q)`.
pub fn sub_mod(a: &BigUint, b: &BigUint, q: &BigUint) -> BigUint {
    let a = a % q;
    let b = b % q;
    if a >= b {
        a - b
    } else {
        q - b + a
    }
}

/// `-a mod q`, canonicalized into `[0, q)`.
pub fn neg_mod(a: &BigUint, q: &BigUint) -> BigUint {
    sub_mod(&BigUint::zero(), a, q)
}

const SMALL_PRIMES: [u32; 60] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281,
];

const MILLER_RABIN_ROUNDS: usize = 40;

/// Miller-Rabin with 40 pseudo-random bases derived from the candidate
/// itself, so validation is deterministic. Error probability below 2^-80.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for sp in SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    // n - 1 = 2^s * d with d odd
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().expect("n > 2 is odd here");
    let d = &n_minus_1 >> s;

    let mut base_rng = ChaCha20Rng::from_seed(Sha256::digest(n.to_bytes_be()).into());
    let two = BigUint::from(2u32);
    let span = n - 3u32; // bases in [2, n-2]
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = base_rng.gen_biguint_below(&span) + &two;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn passes_small_prime_screen(n: &BigUint) -> bool {
    SMALL_PRIMES.iter().all(|&sp| {
        let sp = BigUint::from(sp);
        n == &sp || !(n % sp).is_zero()
    })
}

/// Generates fresh parameters with a `bit_length`-bit prime `q` and safe
/// prime `p = 2q + 1`, then picks a random order-`q` generator.
pub fn generate_group(
    bit_length: u32,
    d_max: BigUint,
    rng: &mut dyn RandomSource,
) -> Result<GroupParams, GroupError> {
    if bit_length < 16 {
        return Err(GroupError::BitLength(bit_length, 16));
    }
    let big_d = &d_max * &d_max;
    if big_d.bits() > u64::from(bit_length) {
        // D_max needs more bits than q will have, so d_max^2 >= q is certain.
        return Err(GroupError::MultiplierBound { d_max, q: BigUint::one() << bit_length });
    }

    let top = BigUint::one() << (bit_length - 1);
    let q = loop {
        // Random odd candidate with the top bit set.
        let mut cand = &top | rng.sample_below(&top);
        cand |= BigUint::one();
        if !passes_small_prime_screen(&cand) {
            continue;
        }
        let p = 2u32 * &cand + 1u32;
        if !passes_small_prime_screen(&p) {
            continue;
        }
        if is_probable_prime(&cand) && is_probable_prime(&p) {
            break cand;
        }
    };
    let p = 2u32 * &q + 1u32;
    if big_d >= q {
        return Err(GroupError::MultiplierBound { d_max, q });
    }

    // Any quadratic residue other than 1 generates the order-q subgroup.
    let g = loop {
        let h = rng.sample_below(&(&p - 3u32)) + 2u32;
        let g = h.modpow(&BigUint::from(2u32), &p);
        if !g.is_one() {
            break g;
        }
    };

    Ok(GroupParams { p, q, g, d_max })
}
