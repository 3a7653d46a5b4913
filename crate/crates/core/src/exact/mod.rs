//! Exact arithmetic substrate.
//!
//! Every identity and every positive-semidefiniteness decision in this crate
//! is made over [`Rational`]. Transcendental quantities (`e^x`, `ln x`, `√x`)
//! only ever appear inside [`IntervalBound`] enclosures whose endpoints are
//! themselves rationals rounded outward.

mod interval;
mod matrix;
mod poly;

pub use interval::{default_precision, set_default_precision, IntervalBound};
pub use matrix::{first_non_psd_prefix, ldl_status, solve_linear, vandermonde_solve, PsdStatus, SymMatrix};
pub use poly::{affine_substitute, RatPoly, ScaledPoly};

use std::sync::RwLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Exact arbitrary-precision rational, always in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn big(value: &BigInt) -> Rational {
    Rational::from_integer(value.clone())
}

/// Formats as `p/q`, including integers (`3/1`).
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let parse_int = |s: &str| {
        s.trim()
            .parse::<BigInt>()
            .map_err(|_| Error::Parse(format!("not a rational: `{text}`")))
    };
    match text.split_once('/') {
        Some((p, q)) => {
            let q = parse_int(q)?;
            if q.is_zero() {
                return Err(Error::Parse(format!("zero denominator in `{text}`")));
            }
            Ok(Rational::new(parse_int(p)?, q))
        }
        None => Ok(Rational::from_integer(parse_int(text)?)),
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_rational {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

static FACTORIALS: RwLock<Vec<BigInt>> = RwLock::new(Vec::new());

/// `n!`, served from a process-wide table. Concurrent fills are idempotent:
/// every writer extends the table with the same values.
pub fn factorial(n: usize) -> BigInt {
    {
        let table = FACTORIALS.read().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = table.get(n) {
            return v.clone();
        }
    }
    let mut table = FACTORIALS.write().unwrap_or_else(|e| e.into_inner());
    if table.is_empty() {
        table.push(BigInt::one());
    }
    while table.len() <= n {
        let next = table.last().unwrap() * BigInt::from(table.len());
        table.push(next);
    }
    table[n].clone()
}

/// Exact `C(n, k)`; zero when `k < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> Result<BigInt> {
    if n < 0 {
        return Err(Error::invalid("n", format!("binomial needs n >= 0, got {n}")));
    }
    if k < 0 || k > n {
        return Ok(BigInt::zero());
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    Ok(acc)
}

/// `Π_{a=0}^{count-1} (x - a)`.
pub fn falling(x: &Rational, count: usize) -> Rational {
    let mut acc = Rational::one();
    for a in 0..count {
        acc *= x - int(a as i64);
    }
    acc
}

/// `p^e` for a rational base.
pub fn pow(base: &Rational, exp: usize) -> Rational {
    num_traits::pow(base.clone(), exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pascal(n: usize) -> Vec<Vec<BigInt>> {
        let mut rows = vec![vec![BigInt::one()]];
        for i in 1..=n {
            let prev = &rows[i - 1];
            let mut row = vec![BigInt::one(); i + 1];
            for j in 1..i {
                row[j] = &prev[j - 1] + &prev[j];
            }
            rows.push(row);
        }
        rows
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial(5, 2).unwrap(), BigInt::from(10));
        for n in 0..12 {
            assert_eq!(binomial(n, 0).unwrap(), BigInt::one());
        }
        assert_eq!(binomial(9, 2).unwrap(), BigInt::from(36));
        assert_eq!(binomial(4, 7).unwrap(), BigInt::zero());
        assert_eq!(binomial(4, -1).unwrap(), BigInt::zero());
        assert!(binomial(-1, 0).is_err());
    }

    #[test]
    fn binomial_matches_pascal_triangle() {
        let rows = pascal(40);
        for (n, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert_eq!(&binomial(n as i64, k as i64).unwrap(), v, "C({n},{k})");
            }
        }
    }

    #[test]
    fn factorial_table() {
        assert_eq!(factorial(0), BigInt::one());
        assert_eq!(factorial(5), BigInt::from(120));
        assert_eq!(factorial(20), BigInt::from(2_432_902_008_176_640_000u64));
    }

    #[test]
    fn rational_text_round_trip() {
        let r = rat(-6, 4);
        assert_eq!(format_rational(&r), "-3/2");
        assert_eq!(parse_rational("-3/2").unwrap(), r);
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert_eq!(format_rational(&int(1)), "1/1");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
