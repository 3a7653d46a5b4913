use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{format_rational, int, Rational};
use crate::error::{Error, Result};

/// Univariate polynomial with exact rational coefficients, lowest degree
/// first. Trailing zeros are always trimmed, so the zero polynomial has no
/// coefficients at all.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RatPoly {
    coeffs: Vec<Rational>,
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        RatPoly { coeffs }
    }

    pub fn zero() -> Self {
        RatPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Self::new(vec![Rational::zero(), Rational::one()])
    }

    pub fn monomial(degree: usize, c: Rational) -> Self {
        let mut coeffs = vec![Rational::zero(); degree + 1];
        coeffs[degree] = c;
        Self::new(coeffs)
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn from_bigints(coeffs: &[BigInt]) -> Self {
        Self::new(coeffs.iter().map(|c| Rational::from_integer(c.clone())).collect())
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Coefficient of `x^i` (zero past the degree).
    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        use num_traits::ToPrimitive;
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * int(i as i64))
                .collect(),
        )
    }

    pub fn pow(&self, exp: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    /// Returns `(quotient, remainder)` of Euclidean division.
    pub fn div_rem(&self, divisor: &RatPoly) -> (RatPoly, RatPoly) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let dd = divisor.coeffs.len() - 1;
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (RatPoly::zero(), self.clone());
        }
        let mut quot = vec![Rational::zero(); rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let q = &rem[i + dd] / &lead;
            if !q.is_zero() {
                for (j, c) in divisor.coeffs.iter().enumerate() {
                    rem[i + j] -= &q * c;
                }
            }
            quot[i] = q;
        }
        rem.truncate(dd);
        (RatPoly::new(quot), RatPoly::new(rem))
    }

    /// Sturm chain `p, p', -rem(p, p'), ...`.
    fn sturm_chain(&self) -> Vec<RatPoly> {
        let mut chain = vec![self.clone(), self.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            // Normalise to keep coefficients small; only signs matter.
            let lead = r.leading().abs();
            chain.push(-&r.scale(&(Rational::one() / lead)));
        }
        chain
    }

    fn sign_changes(chain: &[ScaledPoly], x: &Rational) -> usize {
        let mut changes = 0;
        let mut last = 0i8;
        for p in chain {
            let s = p.sign_at(x);
            if s != 0 {
                if last != 0 && s != last {
                    changes += 1;
                }
                last = s;
            }
        }
        changes
    }

    /// Bisects `(a, b]`, known to hold exactly one simple root, by the sign
    /// of the polynomial alone.
    fn refine_simple_root(
        fast: &ScaledPoly,
        mut a: Rational,
        mut b: Rational,
        width: &Rational,
    ) -> (Rational, Rational) {
        let sb = fast.sign_at(&b);
        if sb == 0 {
            return (b.clone(), b);
        }
        while &(&b - &a) > width {
            let mid = (&a + &b) / int(2);
            let sm = fast.sign_at(&mid);
            if sm == 0 {
                return (mid.clone(), mid);
            }
            if sm == sb {
                b = mid;
            } else {
                a = mid;
            }
        }
        (a, b)
    }

    /// Isolates the distinct real roots of a square-free polynomial lying in
    /// the half-open interval `(lo, hi]` into disjoint rational intervals
    /// of width at most `width`. Each returned `(a, b)` contains exactly one
    /// root and the polynomial has opposite signs (or a zero) at `a` and `b`.
    pub fn isolate_roots(&self, lo: &Rational, hi: &Rational, width: &Rational) -> Vec<(Rational, Rational)> {
        if self.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let chain: Vec<ScaledPoly> = self.sturm_chain().iter().map(ScaledPoly::new).collect();
        let count =
            |a: &Rational, b: &Rational| Self::sign_changes(&chain, a) as i64 - Self::sign_changes(&chain, b) as i64;
        let mut out = Vec::new();
        let mut stack = vec![(lo.clone(), hi.clone())];
        while let Some((a, b)) = stack.pop() {
            let c = count(&a, &b);
            if c <= 0 {
                continue;
            }
            if c == 1 {
                out.push(Self::refine_simple_root(&chain[0], a, b, width));
                continue;
            }
            let mid = (&a + &b) / int(2);
            stack.push((mid.clone(), b));
            stack.push((a, mid));
        }
        out.sort();
        out
    }
}

/// A rational polynomial stored as integer coefficients over one positive
/// denominator, for fast evaluation without intermediate gcds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledPoly {
    coeffs: Vec<BigInt>,
    denom: BigInt,
}

impl ScaledPoly {
    pub fn new(p: &RatPoly) -> Self {
        let denom = p
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| num_integer::Integer::lcm(&acc, c.denom()));
        let coeffs = p.coeffs.iter().map(|c| c.numer() * (&denom / c.denom())).collect();
        ScaledPoly { coeffs, denom }
    }

    /// Numerator of `p(n/d)·d^deg·denom`, which has the sign of `p(x)`.
    fn scaled_value(&self, x: &Rational) -> BigInt {
        let mut it = self.coeffs.iter().rev();
        let Some(top) = it.next() else {
            return BigInt::zero();
        };
        let (n, d) = (x.numer(), x.denom());
        let mut acc = top.clone();
        let mut dpow = d.clone();
        for c in it {
            acc = acc * n + c * &dpow;
            dpow *= d;
        }
        acc
    }

    pub fn sign_at(&self, x: &Rational) -> i8 {
        let v = self.scaled_value(x);
        if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        }
    }

    /// `p(k)·denom()` at an integer point, exact.
    pub fn scaled_at_int(&self, k: &BigInt) -> BigInt {
        self.coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * k + c)
    }

    pub fn denom(&self) -> &BigInt {
        &self.denom
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let deg = self.coeffs.len().saturating_sub(1);
        let den = num_traits::pow(x.denom().clone(), deg) * &self.denom;
        Rational::new(self.scaled_value(x), den)
    }
}

impl fmt::Display for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{}", format_rational(c))?,
                1 => write!(f, "({})x", format_rational(c))?,
                _ => write!(f, "({})x^{}", format_rational(c), i)?,
            }
        }
        Ok(())
    }
}

impl Serialize for RatPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.coeffs.len()))?;
        for c in &self.coeffs {
            seq.serialize_element(&format_rational(c))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for RatPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        let coeffs = raw
            .iter()
            .map(|s| super::parse_rational(s))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Ok(RatPoly::new(coeffs))
    }
}

impl Add for &RatPoly {
    type Output = RatPoly;
    fn add(self, rhs: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RatPoly::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &RatPoly {
    type Output = RatPoly;
    fn sub(self, rhs: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RatPoly::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &RatPoly {
    type Output = RatPoly;
    fn mul(self, rhs: &RatPoly) -> RatPoly {
        if self.is_zero() || rhs.is_zero() {
            return RatPoly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RatPoly::new(out)
    }
}

impl Neg for &RatPoly {
    type Output = RatPoly;
    fn neg(self) -> RatPoly {
        RatPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for RatPoly {
            type Output = RatPoly;
            fn $method(self, rhs: RatPoly) -> RatPoly {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Returns `q` with `q(x) = p(a·x + b)` exactly.
pub fn affine_substitute(p: &RatPoly, a: &Rational, b: &Rational) -> Result<RatPoly> {
    if a.is_zero() {
        return Err(Error::invalid("a", "affine substitution needs a != 0"));
    }
    let inner = RatPoly::new(vec![b.clone(), a.clone()]);
    // Horner in the composed ring.
    let mut acc = RatPoly::zero();
    for c in p.coeffs().iter().rev() {
        acc = &(&acc * &inner) + &RatPoly::constant(c.clone());
    }
    Ok(acc)
}
