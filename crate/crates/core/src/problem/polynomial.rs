//! Sparse polynomials over state variables `x` and coefficient variables `y`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::ProblemError;
use crate::fixedpoint::ScaledDecimal;

/// One term `literal * prod x_v^e * prod y_c^e`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub x: BTreeMap<usize, u32>,
    pub y: BTreeMap<usize, u32>,
    pub literal: ScaledDecimal,
}

impl Monomial {
    pub fn constant(literal: ScaledDecimal) -> Self {
        Monomial {
            x: BTreeMap::new(),
            y: BTreeMap::new(),
            literal,
        }
    }

    pub fn degree(&self) -> u32 {
        self.state_degree() + self.x_free_degree()
    }

    pub fn state_degree(&self) -> u32 {
        self.x.values().sum()
    }

    fn x_free_degree(&self) -> u32 {
        self.y.values().sum()
    }

    fn same_powers(&self, other: &Self) -> bool {
        self.x == other.x && self.y == other.y
    }

    fn mul(&self, other: &Self) -> Self {
        let mut x = self.x.clone();
        for (v, e) in &other.x {
            *x.entry(*v).or_insert(0) += e;
        }
        let mut y = self.y.clone();
        for (v, e) in &other.y {
            *y.entry(*v).or_insert(0) += e;
        }
        Monomial {
            x,
            y,
            literal: &self.literal * &other.literal,
        }
    }

    pub fn eval(&self, x: &[ScaledDecimal], c: &[ScaledDecimal]) -> Result<ScaledDecimal, ProblemError> {
        let mut acc = self.literal.clone();
        for (&v, &e) in &self.x {
            let val = x.get(v).ok_or(ProblemError::DimensionMismatch {
                what: "state vector",
                expected: v + 1,
                got: x.len(),
            })?;
            for _ in 0..e {
                acc = &acc * val;
            }
        }
        for (&v, &e) in &self.y {
            let val = c.get(v).ok_or(ProblemError::DimensionMismatch {
                what: "coefficient vector",
                expected: v + 1,
                got: c.len(),
            })?;
            for _ in 0..e {
                acc = &acc * val;
            }
        }
        Ok(acc)
    }
}

/// Compares two sparse exponent maps as dense exponent vectors.
fn dense_cmp(a: &BTreeMap<usize, u32>, b: &BTreeMap<usize, u32>) -> Ordering {
    let mut ia = a.iter().peekable();
    let mut ib = b.iter().peekable();
    loop {
        match (ia.peek(), ib.peek()) {
            (None, None) => return Ordering::Equal,
            // the side with a remaining nonzero entry is larger
            (Some(_), None) => return Ordering::Greater,
            (None, Some(_)) => return Ordering::Less,
            (Some((va, ea)), Some((vb, eb))) => {
                if va != vb {
                    // lower index present only on one side dominates
                    return if va < vb { Ordering::Greater } else { Ordering::Less };
                }
                match ea.cmp(eb) {
                    Ordering::Equal => {
                        ia.next();
                        ib.next();
                    }
                    o => return o,
                }
            }
        }
    }
}

fn monomial_order(a: &Monomial, b: &Monomial) -> Ordering {
    dense_cmp(&a.x, &b.x).then_with(|| dense_cmp(&a.y, &b.y))
}

/// Canonical sum of monomials in `n` state variables and `m` coefficient
/// variables. Monomials are coalesced, nonzero and sorted lexicographically
/// on their exponent vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialFunction {
    monomials: Vec<Monomial>,
    n: usize,
    m: usize,
}

impl PolynomialFunction {
    pub fn zero(n: usize, m: usize) -> Self {
        PolynomialFunction {
            monomials: Vec::new(),
            n,
            m,
        }
    }

    pub fn from_monomials(n: usize, m: usize, monomials: Vec<Monomial>) -> Result<Self, ProblemError> {
        for mono in &monomials {
            if let Some((&v, _)) = mono.x.iter().next_back() {
                if v >= n {
                    return Err(ProblemError::DimensionMismatch {
                        what: "state variable index",
                        expected: n,
                        got: v + 1,
                    });
                }
            }
            if let Some((&v, _)) = mono.y.iter().next_back() {
                if v >= m {
                    return Err(ProblemError::DimensionMismatch {
                        what: "coefficient variable index",
                        expected: m,
                        got: v + 1,
                    });
                }
            }
        }
        let mut p = PolynomialFunction { monomials, n, m };
        p.canonicalize();
        Ok(p)
    }

    pub fn constant(n: usize, m: usize, value: ScaledDecimal) -> Self {
        let mut p = PolynomialFunction {
            monomials: vec![Monomial::constant(value)],
            n,
            m,
        };
        p.canonicalize();
        p
    }

    /// The polynomial `x_v`.
    pub fn state(n: usize, m: usize, v: usize) -> Self {
        assert!(v < n, "state variable {v} out of range {n}");
        let mut mono = Monomial::constant(ScaledDecimal::one());
        mono.x.insert(v, 1);
        PolynomialFunction {
            monomials: vec![mono],
            n,
            m,
        }
    }

    /// The polynomial `y_c`.
    pub fn coeff(n: usize, m: usize, c: usize) -> Self {
        assert!(c < m, "coefficient variable {c} out of range {m}");
        let mut mono = Monomial::constant(ScaledDecimal::one());
        mono.y.insert(c, 1);
        PolynomialFunction {
            monomials: vec![mono],
            n,
            m,
        }
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn coeff_dim(&self) -> usize {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Total degree in the joint `(x, y)` variables.
    pub fn degree(&self) -> u32 {
        self.monomials.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Degree in the state variables only.
    pub fn state_degree(&self) -> u32 {
        self.monomials.iter().map(Monomial::state_degree).max().unwrap_or(0)
    }

    pub fn scale(&self, factor: &ScaledDecimal) -> Self {
        let monomials = self
            .monomials
            .iter()
            .map(|mono| Monomial {
                literal: &mono.literal * factor,
                ..mono.clone()
            })
            .collect();
        let mut p = PolynomialFunction { monomials, ..*self };
        p.canonicalize();
        p
    }

    pub fn eval(&self, x: &[ScaledDecimal], c: &[ScaledDecimal]) -> Result<ScaledDecimal, ProblemError> {
        if x.len() != self.n {
            return Err(ProblemError::DimensionMismatch {
                what: "state vector",
                expected: self.n,
                got: x.len(),
            });
        }
        if c.len() != self.m {
            return Err(ProblemError::DimensionMismatch {
                what: "coefficient vector",
                expected: self.m,
                got: c.len(),
            });
        }
        let mut acc = ScaledDecimal::zero();
        for mono in &self.monomials {
            acc = &acc + &mono.eval(x, c)?;
        }
        Ok(acc)
    }

    fn canonicalize(&mut self) {
        let mut monos = std::mem::take(&mut self.monomials);
        for mono in &mut monos {
            mono.x.retain(|_, e| *e > 0);
            mono.y.retain(|_, e| *e > 0);
        }
        monos.sort_by(monomial_order);
        let mut out: Vec<Monomial> = Vec::with_capacity(monos.len());
        for mono in monos {
            match out.last_mut() {
                Some(last) if last.same_powers(&mono) => {
                    last.literal = &last.literal + &mono.literal;
                }
                _ => out.push(mono),
            }
        }
        out.retain(|mono| !mono.literal.is_zero());
        for mono in &mut out {
            mono.literal = mono.literal.reduced();
        }
        self.monomials = out;
    }

    fn check_compatible(&self, other: &Self) {
        assert!(
            self.n == other.n && self.m == other.m,
            "polynomial dimensions differ: ({}, {}) vs ({}, {})",
            self.n,
            self.m,
            other.n,
            other.m
        );
    }
}

impl Add for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn add(self, rhs: &PolynomialFunction) -> PolynomialFunction {
        self.check_compatible(rhs);
        let mut monomials = self.monomials.clone();
        monomials.extend(rhs.monomials.iter().cloned());
        let mut p = PolynomialFunction { monomials, ..*self };
        p.canonicalize();
        p
    }
}

impl Sub for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn sub(self, rhs: &PolynomialFunction) -> PolynomialFunction {
        self + &(-rhs)
    }
}

impl Neg for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn neg(self) -> PolynomialFunction {
        self.scale(&ScaledDecimal::from_integer(-1))
    }
}

impl Mul for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn mul(self, rhs: &PolynomialFunction) -> PolynomialFunction {
        self.check_compatible(rhs);
        let mut monomials = Vec::with_capacity(self.monomials.len() * rhs.monomials.len());
        for a in &self.monomials {
            for b in &rhs.monomials {
                monomials.push(a.mul(b));
            }
        }
        let mut p = PolynomialFunction { monomials, ..*self };
        p.canonicalize();
        p
    }
}

macro_rules! forward_owned_poly {
    ($tr:ident, $method:ident) => {
        impl $tr for PolynomialFunction {
            type Output = PolynomialFunction;
            fn $method(self, rhs: PolynomialFunction) -> PolynomialFunction {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned_poly!(Add, add);
forward_owned_poly!(Sub, sub);
forward_owned_poly!(Mul, mul);

impl Neg for PolynomialFunction {
    type Output = PolynomialFunction;
    fn neg(self) -> PolynomialFunction {
        -&self
    }
}

/// `Phi(x) = a . x + b` with coefficient values already substituted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineRow {
    pub a: Vec<ScaledDecimal>,
    pub b: ScaledDecimal,
}

/// Extracts the affine form of `poly` in the state variables, substituting
/// `coeffs` for every coefficient variable. Pass an empty slice when the
/// polynomial only carries literals.
pub fn to_affine(poly: &PolynomialFunction, coeffs: &[ScaledDecimal]) -> Result<AffineRow, ProblemError> {
    let mut a = vec![ScaledDecimal::zero(); poly.state_dim()];
    let mut b = ScaledDecimal::zero();
    let no_x: Vec<ScaledDecimal> = Vec::new();
    for mono in poly.monomials() {
        if mono.state_degree() > 1 {
            return Err(ProblemError::NotAffine {
                degree: mono.state_degree(),
            });
        }
        let weight = Monomial {
            x: BTreeMap::new(),
            ..mono.clone()
        }
        .eval(&no_x, coeffs)?;
        match mono.x.keys().next() {
            Some(&v) => a[v] = &a[v] + &weight,
            None => b = &b + &weight,
        }
    }
    Ok(AffineRow {
        a: a.into_iter().map(|v| v.reduced()).collect(),
        b: b.reduced(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::dec;

    fn x(n: usize, v: usize) -> PolynomialFunction {
        PolynomialFunction::state(n, 0, v)
    }

    fn k(n: usize, s: &str) -> PolynomialFunction {
        PolynomialFunction::constant(n, 0, dec(s))
    }

    #[test]
    fn coalesces_and_drops_zero_terms() {
        let p = &(&x(2, 0) + &x(2, 0)) - &(&k(2, "2") * &x(2, 0));
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
        let q = &(&x(2, 0) * &x(2, 1)) + &(&x(2, 1) * &x(2, 0));
        assert_eq!(q.monomials().len(), 1);
        assert_eq!(q.monomials()[0].literal, dec("2"));
    }

    #[test]
    fn ordering_is_lexicographic_and_stable() {
        let a = &(&x(2, 1) + &k(2, "1")) + &(&x(2, 0) * &x(2, 0));
        let b = &(&(&x(2, 0) * &x(2, 0)) + &k(2, "1")) + &x(2, 1);
        assert_eq!(a, b);
        let order: Vec<_> = a.monomials().iter().map(|m| m.x.clone()).collect();
        // (0,0) < (0,1) < (2,0)
        assert_eq!(order[0], BTreeMap::new());
        assert_eq!(order[1], BTreeMap::from([(1, 1)]));
        assert_eq!(order[2], BTreeMap::from([(0, 2)]));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn eval_dimension_checks() {
        let p = x(2, 0);
        assert!(p.eval(&[dec("1")], &[]).is_err());
        assert_eq!(p.eval(&[dec("1"), dec("2")], &[]).unwrap(), dec("1"));
        assert!(PolynomialFunction::zero(1, 0).eval(&[dec("3")], &[]).unwrap().is_zero());
    }

    #[test]
    fn affine_extraction() {
        let p = &(&(&k(2, "2.45") * &x(2, 0)) + &(&k(2, "-3.03") * &x(2, 1))) + &k(2, "5.22");
        let row = to_affine(&p, &[]).unwrap();
        assert_eq!(row.a, vec![dec("2.45"), dec("-3.03")]);
        assert_eq!(row.b, dec("5.22"));

        let c = to_affine(&k(2, "4"), &[]).unwrap();
        assert_eq!(c.a, vec![dec("0"), dec("0")]);
        assert_eq!(c.b, dec("4"));

        let q = &x(2, 0) * &x(2, 1);
        assert!(matches!(to_affine(&q, &[]), Err(ProblemError::NotAffine { degree: 2 })));
    }

    #[test]
    fn affine_extraction_substitutes_coefficients() {
        // 2 * a * P - lambda + b   with a = 0.1, b = 10
        let (n, m) = (2, 2);
        let p = &(&(&PolynomialFunction::constant(n, m, dec("2")) * &PolynomialFunction::coeff(n, m, 0))
            * &PolynomialFunction::state(n, m, 0))
            + &(&PolynomialFunction::coeff(n, m, 1) - &PolynomialFunction::state(n, m, 1));
        let row = to_affine(&p, &[dec("0.1"), dec("10")]).unwrap();
        assert_eq!(row.a, vec![dec("0.2"), dec("-1")]);
        assert_eq!(row.b, dec("10"));
    }

    #[test]
    fn rejects_out_of_range_variables() {
        let mut mono = Monomial::constant(dec("1"));
        mono.x.insert(3, 1);
        assert!(PolynomialFunction::from_monomials(2, 0, vec![mono]).is_err());
    }
}
