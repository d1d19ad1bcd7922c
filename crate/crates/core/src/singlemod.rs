//! Private-key somewhat homomorphic scheme over a single odd modulus `w`.
//!
//! A plaintext `z` (already scaled by `10^sigma`) is hidden as `u*w + z`.
//! Sums and products of ciphertexts stay congruent to the matching integer
//! expression mod `w`, so a polynomial can be evaluated without the key as
//! long as every monomial is brought to the same total scale.

use num_bigint::{BigInt, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{pow10, t_transform, FixedPointError, ScaledDecimal};
use crate::problem::PolynomialFunction;

pub const MIN_KEY_BITS: u64 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SingleModError {
    #[error("key size {0} bits is below the minimum of {MIN_KEY_BITS}")]
    KeyTooShort(u64),
    #[error("modulus {0} must be odd and at least 3")]
    InvalidModulus(String),
    #[error("plaintext {z} does not fit in (w-1)/2")]
    PlaintextTooLarge { z: String },
    #[error("no ciphertext for variable {0}")]
    MissingVariable(String),
    #[error("monomial reaches degree {got}, above the polynomial degree {expected}")]
    DegreeMismatch { expected: u32, got: u32 },
    #[error("literal {0} is not an integer; fold it into a coefficient")]
    FractionalLiteral(String),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SingleModKey {
    w: BigInt,
}

impl SingleModKey {
    pub fn from_modulus(w: BigInt) -> Result<Self, SingleModError> {
        if w < BigInt::from(3) || w.is_even() {
            return Err(SingleModError::InvalidModulus(w.to_string()));
        }
        Ok(SingleModKey { w })
    }

    /// Uniformly random odd modulus with exactly `bits` bits.
    pub fn generate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, SingleModError> {
        if bits < MIN_KEY_BITS {
            return Err(SingleModError::KeyTooShort(bits));
        }
        let mut w = BigInt::from_biguint(Sign::Plus, rng.gen_biguint(bits));
        w.set_bit(bits - 1, true);
        w.set_bit(0, true);
        Ok(SingleModKey { w })
    }

    pub fn modulus(&self) -> &BigInt {
        &self.w
    }

    pub fn bit_length(&self) -> u64 {
        self.w.bits()
    }

    fn half(&self) -> BigInt {
        (&self.w - 1u32) / 2u32
    }
}

/// Ciphertext together with the number of `10^sigma` factors its plaintext
/// carries.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SingleModCiphertext {
    pub value: BigInt,
    pub degree: u32,
}

#[derive(Serialize, Deserialize)]
struct WireCiphertext {
    v: String,
    d: u32,
}

impl Serialize for SingleModCiphertext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireCiphertext {
            v: self.value.to_string(),
            d: self.degree,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SingleModCiphertext {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WireCiphertext::deserialize(d)?;
        let value = wire.v.parse().map_err(serde::de::Error::custom)?;
        Ok(SingleModCiphertext { value, degree: wire.d })
    }
}

impl SingleModCiphertext {
    /// Unblinded degree-1 value, used for operator-held coefficients.
    pub fn unblinded(z: BigInt) -> Self {
        SingleModCiphertext { value: z, degree: 1 }
    }
}

/// Draws a blinding factor uniformly from `[1, 2^bits)`.
pub fn draw_blinding<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigInt {
    let hi = BigInt::one() << bits;
    rng.gen_bigint_range(&BigInt::one(), &hi)
}

/// `u*w + z` for a caller-supplied blinding factor `u >= 1`.
pub fn encrypt_with(key: &SingleModKey, z: &BigInt, u: &BigInt) -> Result<SingleModCiphertext, SingleModError> {
    if z.abs() > key.half() {
        return Err(SingleModError::PlaintextTooLarge { z: z.to_string() });
    }
    Ok(SingleModCiphertext {
        value: u * &key.w + z,
        degree: 1,
    })
}

/// Encrypts with a fresh blinding factor of `key.bit_length()` bits.
pub fn encrypt<R: RngCore + ?Sized>(
    key: &SingleModKey,
    z: &BigInt,
    rng: &mut R,
) -> Result<SingleModCiphertext, SingleModError> {
    let u = draw_blinding(key.bit_length(), rng);
    encrypt_with(key, z, &u)
}

/// `value mod w`, the residue the recipient decodes.
pub fn residue(key: &SingleModKey, ct: &SingleModCiphertext) -> BigInt {
    ct.value.mod_floor(&key.w)
}

pub fn decrypt(key: &SingleModKey, ct: &SingleModCiphertext, sigma: u32) -> Result<ScaledDecimal, SingleModError> {
    Ok(t_transform(&residue(key, ct), ct.degree * sigma, &key.w)?)
}

/// Evaluates `poly` over ciphertexts, padding every monomial to the
/// polynomial degree with powers of `10^sigma`. `x` and `y` hold the state
/// and coefficient ciphertexts by variable index; `None` entries may only
/// belong to variables the polynomial does not use.
pub fn eval_polynomial(
    x: &[Option<SingleModCiphertext>],
    y: &[Option<SingleModCiphertext>],
    poly: &PolynomialFunction,
    sigma: u32,
) -> Result<SingleModCiphertext, SingleModError> {
    let target = poly.degree();
    let mut acc = BigInt::zero();
    for mono in poly.monomials() {
        if !mono.literal.is_integer() {
            return Err(SingleModError::FractionalLiteral(mono.literal.to_string()));
        }
        let mut term = mono.literal.reduced().mantissa().clone();
        let mut degree = 0u32;
        let factors = mono
            .x
            .iter()
            .map(|(&v, &e)| (x.get(v).and_then(Option::as_ref), e, format!("x{v}")))
            .chain(
                mono.y
                    .iter()
                    .map(|(&c, &e)| (y.get(c).and_then(Option::as_ref), e, format!("y{c}"))),
            );
        for (ct, e, name) in factors {
            let ct = ct.ok_or(SingleModError::MissingVariable(name))?;
            term *= num_traits::pow(ct.value.clone(), e as usize);
            degree += ct.degree * e;
        }
        if degree > target {
            return Err(SingleModError::DegreeMismatch {
                expected: target,
                got: degree,
            });
        }
        acc += term * pow10((target - degree) * sigma);
    }
    Ok(SingleModCiphertext {
        value: acc,
        degree: target,
    })
}

/// `1 + 2 * max 10^(deg*sigma) |bound|`, rounded up to an integer.
pub fn key_bound_threshold(bounds: &[ScaledDecimal], degrees: &[u32], sigma: u32) -> BigInt {
    let worst = bounds
        .iter()
        .zip(degrees)
        .map(|(b, &d)| {
            let scaled = b.abs().to_rational() * num_rational::BigRational::from_integer(pow10(d * sigma));
            scaled.ceil().to_integer()
        })
        .max()
        .unwrap_or_default();
    BigInt::one() + worst * 2
}

/// Whether `key` is large enough for gradients of the given sizes and degrees.
pub fn check_key_bound(key: &SingleModKey, bounds: &[ScaledDecimal], degrees: &[u32], sigma: u32) -> bool {
    debug_assert_eq!(bounds.len(), degrees.len());
    key.w >= key_bound_threshold(bounds, degrees, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::{dec, encode};
    use crate::problem::{PolynomialFunction as P, ProblemBuilder};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn golden_key() -> SingleModKey {
        SingleModKey::from_modulus(BigInt::from(25_400_001)).unwrap()
    }

    fn big(s: &str) -> BigInt {
        s.parse().unwrap()
    }

    #[test]
    fn modulus_validation() {
        assert!(SingleModKey::from_modulus(BigInt::from(25_400_000)).is_err());
        assert!(SingleModKey::from_modulus(BigInt::from(1)).is_err());
        assert_eq!(golden_key().bit_length(), 25);
    }

    #[test]
    fn keygen_is_deterministic_and_exact_size() {
        let a = SingleModKey::generate(25, &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
        let b = SingleModKey::generate(25, &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bit_length(), 25);
        assert!(a.modulus().is_odd());
        assert!(SingleModKey::generate(8, &mut ChaCha20Rng::seed_from_u64(7)).is_err());
    }

    #[test]
    fn encrypt_examples() {
        let key = golden_key();
        let ct = encrypt_with(&key, &BigInt::from(332), &BigInt::from(103)).unwrap();
        assert_eq!(ct.value, big("2616200435"));
        let ct = encrypt_with(&key, &BigInt::from(-235), &BigInt::from(409)).unwrap();
        assert_eq!(ct.value, big("10388600174"));
        let small = SingleModKey::from_modulus(BigInt::from(101)).unwrap();
        assert_eq!(
            encrypt_with(&small, &BigInt::zero(), &BigInt::one()).unwrap().value,
            BigInt::from(101)
        );
        assert!(encrypt_with(&small, &BigInt::from(51), &BigInt::one()).is_err());
    }

    #[test]
    fn key_bound_examples() {
        let bound = [dec("12.665213")];
        assert_eq!(key_bound_threshold(&bound, &[3], 2), BigInt::from(25_330_427));
        assert!(check_key_bound(&golden_key(), &bound, &[3], 2));
        let tight = SingleModKey::from_modulus(BigInt::from(25_330_425)).unwrap();
        assert!(!check_key_bound(&tight, &bound, &[3], 2));
        let tiny = SingleModKey::from_modulus(BigInt::from(3)).unwrap();
        assert!(check_key_bound(&tiny, &[dec("0")], &[5], 2));
    }

    /// The two-agent cubic walkthrough: Phi_1 = c1 x1^2 + c2 x2^2 + c3 x1 x2
    /// + c4 x1 + c5, with c5 held by the operator.
    #[test]
    fn polynomial_walkthrough() {
        let key = golden_key();
        let mut b = ProblemBuilder::new(2);
        let all = crate::problem::FeasibleSet::AllReals { dim: 1 };
        b.add_agent(all.clone(), vec![dec("0.76")]);
        b.add_agent(all, vec![dec("-2.35")]);
        let ids: Vec<usize> = (1..=5)
            .map(|i| b.add_coefficient(format!("c{i}"), dec("0"), &[crate::problem::Participant(1)]))
            .collect();
        let (x1, x2) = (b.x(0, 0), b.x(1, 0));
        let y = |i: usize| b.y(ids[i]);
        let phi: P = &(&(&(&y(0) * &(&x1 * &x1)) + &(&y(1) * &(&x2 * &x2))) + &(&y(2) * &(&x1 * &x2)))
            + &(&(&y(3) * &x1) + &y(4));

        let enc = |z: &str, u: u32| Some(encrypt_with(&key, &encode(&dec(z), 2).unwrap(), &BigInt::from(u)).unwrap());
        let ys = vec![
            enc("3.32", 103),
            enc("-1.53", 501),
            enc("4.67", 307),
            enc("-0.28", 205),
            Some(SingleModCiphertext::unblinded(encode(&dec("2.42"), 2).unwrap())),
        ];
        assert_eq!(ys[0].as_ref().unwrap().value, big("2616200435"));
        let xs = vec![enc("0.76", 107), enc("-2.35", 409)];
        assert_eq!(xs[1].as_ref().unwrap().value, big("10388600174"));

        let out = eval_polynomial(&xs, &ys, &phi, 2).unwrap();
        assert_eq!(out.value, big("1612852152286627752945361608571"));
        assert_eq!(out.degree, 3);
        assert_eq!(decrypt(&key, &out, 2).unwrap(), dec("-12.665213"));
    }

    #[test]
    fn identity_polynomial_and_zero() {
        let key = golden_key();
        let ct = SingleModCiphertext {
            value: big("2616200435"),
            degree: 1,
        };
        let out = eval_polynomial(&[], &[Some(ct.clone())], &P::coeff(0, 1, 0), 2).unwrap();
        assert_eq!(out, ct);
        let zero = encrypt(&key, &BigInt::zero(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(decrypt(&key, &zero, 2).unwrap(), dec("0"));
    }

    #[test]
    fn rejects_missing_variables_and_fractional_literals() {
        let p = P::state(1, 0, 0);
        assert!(matches!(
            eval_polynomial(&[None], &[], &p, 2),
            Err(SingleModError::MissingVariable(_))
        ));
        let frac = p.scale(&dec("0.5"));
        let ct = SingleModCiphertext::unblinded(BigInt::from(3));
        assert!(matches!(
            eval_polynomial(&[Some(ct)], &[], &frac, 2),
            Err(SingleModError::FractionalLiteral(_))
        ));
    }

    #[test]
    fn ciphertext_json() {
        let ct = SingleModCiphertext {
            value: big("-12"),
            degree: 3,
        };
        let s = serde_json::to_string(&ct).unwrap();
        assert_eq!(s, r#"{"v":"-12","d":3}"#);
        assert_eq!(serde_json::from_str::<SingleModCiphertext>(&s).unwrap(), ct);
    }

    #[test]
    fn fresh_encryptions_differ() {
        let key = SingleModKey::generate(64, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let z = BigInt::from(1234);
        let a = encrypt(&key, &z, &mut rng).unwrap();
        let b = encrypt(&key, &z, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    fn small_decimal() -> impl Strategy<Value = ScaledDecimal> {
        (-999i64..=999, 0u32..=2).prop_map(|(m, s)| ScaledDecimal::new(m, s))
    }

    /// Random monomials of total degree at most 3 over two state variables
    /// and one coefficient variable, with small integer literals.
    fn cubic() -> impl Strategy<Value = P> {
        let mono = (-5i64..=5, 0u32..=3, 0u32..=3, 0u32..=3).prop_filter_map("degree <= 3", |(l, a, b, c)| {
            (a + b + c <= 3).then(|| {
                let mut x = std::collections::BTreeMap::new();
                let mut y = std::collections::BTreeMap::new();
                if a > 0 {
                    x.insert(0, a);
                }
                if b > 0 {
                    x.insert(1, b);
                }
                if c > 0 {
                    y.insert(0, c);
                }
                crate::problem::Monomial {
                    x,
                    y,
                    literal: ScaledDecimal::from_integer(l),
                }
            })
        });
        proptest::collection::vec(mono, 1..6).prop_map(|ms| P::from_monomials(2, 1, ms).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn homomorphic_evaluation_matches_plain(
            poly in cubic(),
            xs in proptest::collection::vec(small_decimal(), 2),
            c in small_decimal(),
            seed in any::<u64>(),
        ) {
            let sigma = 2;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let key = SingleModKey::generate(96, &mut rng).unwrap();
            let plain = poly.eval(&xs, std::slice::from_ref(&c)).unwrap();
            prop_assume!(check_key_bound(&key, std::slice::from_ref(&plain), &[poly.degree()], sigma));
            let mut enc = |v: &ScaledDecimal| Some(encrypt(&key, &encode(v, sigma).unwrap(), &mut rng).unwrap());
            let x_ct: Vec<_> = xs.iter().map(&mut enc).collect();
            let y_ct = vec![enc(&c)];
            let out = eval_polynomial(&x_ct, &y_ct, &poly, sigma).unwrap();
            // ciphertext is congruent to the scaled plaintext mod w
            let scaled = plain.to_rational() * num_rational::BigRational::from_integer(pow10(poly.degree() * sigma));
            prop_assert!(scaled.is_integer());
            prop_assert!((&out.value - scaled.to_integer()).mod_floor(key.modulus()).is_zero());
            prop_assert_eq!(decrypt(&key, &out, sigma).unwrap(), plain);
        }
    }
}
