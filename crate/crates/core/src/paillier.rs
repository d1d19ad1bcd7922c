//! Paillier cryptosystem with `beta = alpha + 1`, plus the affine evaluation
//! the operator performs over state ciphertexts.

use std::fmt;

use num_bigint::{BigInt, RandBigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{encode, pow10, FixedPointError, ScaledDecimal};
use crate::problem::AffineRow;

pub const MIN_KEY_BITS: u64 = 16;
const MILLER_RABIN_ROUNDS: usize = 64;
const MAX_PRIME_ATTEMPTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("key size {0} bits is below the minimum of {MIN_KEY_BITS}")]
    KeyTooShort(u64),
    #[error("no admissible prime pair found after {0} attempts")]
    PrimeGenerationFailure(usize),
    #[error("invalid primes: {0}")]
    InvalidPrimes(String),
    #[error("randomizer {0} is not a unit mod alpha")]
    InvalidRandomizer(String),
    #[error("plaintext {0} outside [0, alpha)")]
    PlaintextOutOfRange(String),
    #[error("ciphertext key {got} does not match key {expected}")]
    KeyMismatch { expected: KeyId, got: KeyId },
    #[error("no ciphertext for state variable {0}")]
    MissingVariable(usize),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

/// Short fingerprint of a public modulus, `alpha mod (2^61 - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyId(pub u64);

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PaillierPublicKey {
    alpha: BigInt,
    beta: BigInt,
    alpha_sq: BigInt,
    id: KeyId,
}

impl PaillierPublicKey {
    pub fn new(alpha: BigInt, beta: BigInt) -> Self {
        let mersenne = (BigInt::one() << 61u32) - 1u32;
        let id = KeyId(
            alpha
                .mod_floor(&mersenne)
                .to_u64_digits()
                .1
                .first()
                .copied()
                .unwrap_or(0),
        );
        PaillierPublicKey {
            alpha_sq: &alpha * &alpha,
            alpha,
            beta,
            id,
        }
    }

    pub fn alpha(&self) -> &BigInt {
        &self.alpha
    }

    pub fn beta(&self) -> &BigInt {
        &self.beta
    }

    pub fn alpha_squared(&self) -> &BigInt {
        &self.alpha_sq
    }

    pub fn id(&self) -> KeyId {
        self.id
    }

    pub fn bit_length(&self) -> u64 {
        self.alpha.bits()
    }

    fn check(&self, ct: &PaillierCiphertext) -> Result<(), PaillierError> {
        if ct.key_id != self.id {
            return Err(PaillierError::KeyMismatch {
                expected: self.id,
                got: ct.key_id,
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct WirePublicKey {
    alpha: String,
    beta: String,
}

impl Serialize for PaillierPublicKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WirePublicKey {
            alpha: self.alpha.to_string(),
            beta: self.beta.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PaillierPublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WirePublicKey::deserialize(d)?;
        let alpha = wire.alpha.parse().map_err(serde::de::Error::custom)?;
        let beta = wire.beta.parse().map_err(serde::de::Error::custom)?;
        Ok(PaillierPublicKey::new(alpha, beta))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierKeypair {
    public: PaillierPublicKey,
    nu: BigInt,
    pi: BigInt,
    p: BigInt,
    q: BigInt,
}

/// `L(u) = (u - 1) / alpha`.
fn l_function(u: &BigInt, alpha: &BigInt) -> BigInt {
    (u - 1u32) / alpha
}

impl PaillierKeypair {
    /// Builds a keypair from two distinct primes with
    /// `gcd(pq, (p-1)(q-1)) = 1`.
    pub fn from_primes(p: BigInt, q: BigInt) -> Result<Self, PaillierError> {
        let mut check_rng = ChaCha20Rng::seed_from_u64(0);
        if p == q || !is_probable_prime(&p, &mut check_rng) || !is_probable_prime(&q, &mut check_rng) {
            return Err(PaillierError::InvalidPrimes(format!("p = {p}, q = {q}")));
        }
        let alpha = &p * &q;
        let phi = (&p - 1u32) * (&q - 1u32);
        if !alpha.gcd(&phi).is_one() {
            return Err(PaillierError::InvalidPrimes(format!(
                "gcd(pq, (p-1)(q-1)) != 1 for p = {p}, q = {q}"
            )));
        }
        let nu = (&p - 1u32).lcm(&(&q - 1u32));
        let beta = &alpha + 1u32;
        let public = PaillierPublicKey::new(alpha.clone(), beta.clone());
        let mu = l_function(&beta.modpow(&nu, public.alpha_squared()), &alpha);
        let pi = mu
            .modinv(&alpha)
            .ok_or_else(|| PaillierError::InvalidPrimes(format!("L(beta^nu) not invertible for p = {p}, q = {q}")))?;
        Ok(PaillierKeypair { public, nu, pi, p, q })
    }

    /// Random keypair whose modulus has exactly `bits` bits.
    pub fn generate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, PaillierError> {
        if bits < MIN_KEY_BITS {
            return Err(PaillierError::KeyTooShort(bits));
        }
        let p_bits = bits / 2;
        let q_bits = bits - p_bits;
        for _ in 0..MAX_PRIME_ATTEMPTS / 100 {
            let p = random_prime(p_bits, rng)?;
            let q = random_prime(q_bits, rng)?;
            if let Ok(kp) = Self::from_primes(p, q) {
                if kp.public.bit_length() == bits {
                    return Ok(kp);
                }
            }
        }
        Err(PaillierError::PrimeGenerationFailure(MAX_PRIME_ATTEMPTS / 100))
    }

    pub fn public(&self) -> &PaillierPublicKey {
        &self.public
    }

    pub fn nu(&self) -> &BigInt {
        &self.nu
    }

    pub fn pi(&self) -> &BigInt {
        &self.pi
    }

    pub fn primes(&self) -> (&BigInt, &BigInt) {
        (&self.p, &self.q)
    }
}

/// Miller-Rabin with random bases.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigInt, rng: &mut R) -> bool {
    let two = BigInt::from(2);
    if *n < two {
        return false;
    }
    for small in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let s = BigInt::from(small);
        if *n == s {
            return true;
        }
        if (n % &s).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let shift = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> shift;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_bigint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..shift {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Random prime with exactly `bits` bits and its two top bits set.
fn random_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<BigInt, PaillierError> {
    for _ in 0..MAX_PRIME_ATTEMPTS {
        let mut c = BigInt::from_biguint(Sign::Plus, rng.gen_biguint(bits));
        c.set_bit(bits - 1, true);
        c.set_bit(bits - 2, true);
        c.set_bit(0, true);
        if is_probable_prime(&c, rng) {
            return Ok(c);
        }
    }
    Err(PaillierError::PrimeGenerationFailure(MAX_PRIME_ATTEMPTS))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PaillierCiphertext {
    pub value: BigInt,
    pub key_id: KeyId,
}

#[derive(Serialize, Deserialize)]
struct WireCiphertext {
    v: String,
    key: KeyId,
}

impl Serialize for PaillierCiphertext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireCiphertext {
            v: self.value.to_string(),
            key: self.key_id,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PaillierCiphertext {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WireCiphertext::deserialize(d)?;
        let value = wire.v.parse().map_err(serde::de::Error::custom)?;
        Ok(PaillierCiphertext {
            value,
            key_id: wire.key,
        })
    }
}

/// Uniform unit of `Z_alpha`, by rejection.
pub fn draw_randomizer<R: RngCore + ?Sized>(pk: &PaillierPublicKey, rng: &mut R) -> BigInt {
    loop {
        let r = rng.gen_bigint_range(&BigInt::one(), &pk.alpha);
        if r.gcd(&pk.alpha).is_one() {
            return r;
        }
    }
}

/// `beta^pt * r^alpha mod alpha^2`.
pub fn encrypt_with(pk: &PaillierPublicKey, pt: &BigInt, r: &BigInt) -> Result<PaillierCiphertext, PaillierError> {
    if pt.is_negative() || *pt >= pk.alpha {
        return Err(PaillierError::PlaintextOutOfRange(pt.to_string()));
    }
    if !r.is_positive() || *r >= pk.alpha || !r.gcd(&pk.alpha).is_one() {
        return Err(PaillierError::InvalidRandomizer(r.to_string()));
    }
    let value = (pk.beta.modpow(pt, &pk.alpha_sq) * r.modpow(&pk.alpha, &pk.alpha_sq)) % &pk.alpha_sq;
    Ok(PaillierCiphertext { value, key_id: pk.id })
}

pub fn encrypt<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    pt: &BigInt,
    rng: &mut R,
) -> Result<PaillierCiphertext, PaillierError> {
    let r = draw_randomizer(pk, rng);
    encrypt_with(pk, pt, &r)
}

/// `L(ct^nu mod alpha^2) * pi mod alpha`.
pub fn decrypt(kp: &PaillierKeypair, ct: &PaillierCiphertext) -> Result<BigInt, PaillierError> {
    let pk = &kp.public;
    pk.check(ct)?;
    let u = ct.value.modpow(&kp.nu, &pk.alpha_sq);
    Ok((l_function(&u, &pk.alpha) * &kp.pi).mod_floor(&pk.alpha))
}

/// Ciphertext of the sum of the plaintexts.
pub fn homomorphic_add(
    pk: &PaillierPublicKey,
    cts: &[PaillierCiphertext],
) -> Result<PaillierCiphertext, PaillierError> {
    let mut value = BigInt::one();
    for ct in cts {
        pk.check(ct)?;
        value = (value * &ct.value) % &pk.alpha_sq;
    }
    Ok(PaillierCiphertext { value, key_id: pk.id })
}

/// Ciphertext of `k * pt`, with `k` reduced into `Z_alpha` first.
pub fn homomorphic_scale(
    pk: &PaillierPublicKey,
    ct: &PaillierCiphertext,
    k: &BigInt,
) -> Result<PaillierCiphertext, PaillierError> {
    pk.check(ct)?;
    let e = k.mod_floor(&pk.alpha);
    Ok(PaillierCiphertext {
        value: ct.value.modpow(&e, &pk.alpha_sq),
        key_id: pk.id,
    })
}

/// Ciphertext of `10^(2 sigma) (a . x + b)` from state ciphertexts indexed
/// by global state variable. Zero weights skip their variable, so `x_cts`
/// may leave those entries empty.
pub fn eval_affine(
    pk: &PaillierPublicKey,
    x_cts: &[Option<PaillierCiphertext>],
    row: &AffineRow,
    sigma: u32,
) -> Result<PaillierCiphertext, PaillierError> {
    let b = encode(&row.b, 2 * sigma)?.mod_floor(&pk.alpha);
    let mut value = pk.beta.modpow(&b, &pk.alpha_sq);
    for (v, a) in row.a.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let ct = x_cts
            .get(v)
            .and_then(Option::as_ref)
            .ok_or(PaillierError::MissingVariable(v))?;
        pk.check(ct)?;
        let e = encode(a, sigma)?.mod_floor(&pk.alpha);
        value = (value * ct.value.modpow(&e, &pk.alpha_sq)) % &pk.alpha_sq;
    }
    Ok(PaillierCiphertext { value, key_id: pk.id })
}

/// `1 + 2 * 10^(2 sigma) * bound`, rounded up.
pub fn key_bound_threshold(bound: &ScaledDecimal, sigma: u32) -> BigInt {
    let scaled = bound.abs().to_rational() * BigRational::from_integer(pow10(2 * sigma));
    BigInt::one() + scaled.ceil().to_integer() * 2
}

/// Whether `alpha` is large enough for affine values of magnitude up to
/// `bound`.
pub fn check_key_bound(alpha: &BigInt, bound: &ScaledDecimal, sigma: u32) -> bool {
    *alpha >= key_bound_threshold(bound, sigma)
}

/// Worst-case `max_l |a_l . x + b_l|` over `|x_v| <= state_bound`.
pub fn affine_worst_case(rows: &[AffineRow], state_bound: &ScaledDecimal) -> ScaledDecimal {
    rows.iter()
        .map(|row| {
            let weight: ScaledDecimal = row.a.iter().map(ScaledDecimal::abs).sum();
            &(&weight * &state_bound.abs()) + &row.b.abs()
        })
        .max()
        .unwrap_or_else(ScaledDecimal::zero)
}
