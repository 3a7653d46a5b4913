use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU32, Ordering as AtomicOrdering};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{format_rational, int, Rational};
use crate::error::{Error, Result};

static PRECISION: AtomicU32 = AtomicU32::new(128);

/// Significant bits kept by outward rounding of interval endpoints.
pub fn default_precision() -> u32 {
    PRECISION.load(AtomicOrdering::Relaxed)
}

/// Sets the process-wide endpoint precision; values below 32 bits are raised to 32.
pub fn set_default_precision(bits: u32) {
    PRECISION.store(bits.max(32), AtomicOrdering::Relaxed);
}

fn bit_len(v: &BigInt) -> i64 {
    v.bits() as i64
}

fn pow2(e: i64) -> Rational {
    if e >= 0 {
        Rational::from_integer(BigInt::one() << e as usize)
    } else {
        Rational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Rounds `x` to roughly `bits` significant bits, towards -∞ (`up = false`)
/// or +∞ (`up = true`). Short rationals are returned unchanged.
fn round_dir(x: &Rational, bits: u32, up: bool) -> Rational {
    if x.is_zero() {
        return x.clone();
    }
    let nb = bit_len(x.numer());
    let db = bit_len(x.denom());
    if nb + db <= 2 * bits as i64 + 16 {
        return x.clone();
    }
    let shift = bits as i64 - (nb - db);
    let scaled = x * pow2(shift);
    let r = if up { scaled.ceil() } else { scaled.floor() };
    r * pow2(-shift)
}

/// Closed interval `[lo, hi]` with rational endpoints, outward rounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalBound {
    lo: Rational,
    hi: Rational,
}

impl IntervalBound {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid("lo", "lower endpoint exceeds upper endpoint"));
        }
        Ok(IntervalBound { lo, hi })
    }

    fn rounded(lo: Rational, hi: Rational) -> Self {
        let bits = default_precision();
        IntervalBound {
            lo: round_dir(&lo, bits, false),
            hi: round_dir(&hi, bits, true),
        }
    }

    pub fn point(x: Rational) -> Self {
        IntervalBound { lo: x.clone(), hi: x }
    }

    pub fn from_int(v: i64) -> Self {
        Self::point(int(v))
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn mid_f64(&self) -> f64 {
        ((&self.lo + &self.hi) / int(2)).to_f64().unwrap_or(f64::NAN)
    }

    /// Every point of `self` is `<=` every point of `other`.
    pub fn certainly_le(&self, other: &IntervalBound) -> bool {
        self.hi <= other.lo
    }

    pub fn certainly_lt(&self, other: &IntervalBound) -> bool {
        self.hi < other.lo
    }

    /// Interval union (hull).
    pub fn hull(&self, other: &IntervalBound) -> IntervalBound {
        IntervalBound {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    pub fn abs(&self) -> IntervalBound {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            -self.clone()
        } else {
            IntervalBound {
                lo: Rational::zero(),
                hi: self.hi.clone().max(-self.lo.clone()),
            }
        }
    }

    pub fn checked_div(&self, other: &IntervalBound) -> Result<IntervalBound> {
        if !other.lo.is_positive() && !other.hi.is_negative() {
            return Err(Error::invalid("divisor", "interval contains zero"));
        }
        let inv = IntervalBound::rounded(Rational::one() / &other.hi, Rational::one() / &other.lo);
        Ok(self * &inv)
    }

    pub fn powi(&self, e: u32) -> IntervalBound {
        if e == 0 {
            return IntervalBound::from_int(1);
        }
        let base = if e.is_multiple_of(2) { self.abs() } else { self.clone() };
        // Monotone on the non-negative part; odd powers are monotone everywhere.
        let lo = num_traits::pow(base.lo.clone(), e as usize);
        let hi = num_traits::pow(base.hi.clone(), e as usize);
        IntervalBound::rounded(lo, hi)
    }

    /// Enclosure of `e^x` over the interval.
    pub fn exp(&self) -> IntervalBound {
        let lo = exp_enclosure(&self.lo).lo;
        let hi = exp_enclosure(&self.hi).hi;
        IntervalBound { lo, hi }
    }

    /// Enclosure of `ln x`; the interval must be strictly positive.
    pub fn ln(&self) -> Result<IntervalBound> {
        if !self.lo.is_positive() {
            return Err(Error::invalid("x", "ln needs a strictly positive argument"));
        }
        let lo = ln_enclosure(&self.lo).lo;
        let hi = ln_enclosure(&self.hi).hi;
        Ok(IntervalBound { lo, hi })
    }

    /// Enclosure of `√x`; the interval must be non-negative.
    pub fn sqrt(&self) -> Result<IntervalBound> {
        if self.lo.is_negative() {
            return Err(Error::invalid("x", "sqrt needs a non-negative argument"));
        }
        Ok(IntervalBound {
            lo: sqrt_bounds(&self.lo).0,
            hi: sqrt_bounds(&self.hi).1,
        })
    }
}

impl fmt::Display for IntervalBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_rational(&self.lo), format_rational(&self.hi))
    }
}

impl From<Rational> for IntervalBound {
    fn from(x: Rational) -> Self {
        IntervalBound::point(x)
    }
}

impl<'a> Add<&'a IntervalBound> for &'a IntervalBound {
    type Output = IntervalBound;
    fn add(self, o: &IntervalBound) -> IntervalBound {
        IntervalBound::rounded(&self.lo + &o.lo, &self.hi + &o.hi)
    }
}

impl<'a> Sub<&'a IntervalBound> for &'a IntervalBound {
    type Output = IntervalBound;
    fn sub(self, o: &IntervalBound) -> IntervalBound {
        IntervalBound::rounded(&self.lo - &o.hi, &self.hi - &o.lo)
    }
}

impl<'a> Mul<&'a IntervalBound> for &'a IntervalBound {
    type Output = IntervalBound;
    fn mul(self, o: &IntervalBound) -> IntervalBound {
        let c = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        IntervalBound::rounded(lo, hi)
    }
}

impl<'a> Div<&'a IntervalBound> for &'a IntervalBound {
    type Output = IntervalBound;
    /// Panics when the divisor straddles zero; use [`IntervalBound::checked_div`] otherwise.
    fn div(self, o: &IntervalBound) -> IntervalBound {
        self.checked_div(o)
            .expect("interval division by an interval containing zero")
    }
}

impl Neg for IntervalBound {
    type Output = IntervalBound;
    fn neg(self) -> IntervalBound {
        IntervalBound {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for IntervalBound {
            type Output = IntervalBound;
            fn $m(self, o: IntervalBound) -> IntervalBound {
                (&self).$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

fn target_error(bits: u32) -> Rational {
    pow2(-(bits as i64) - 8)
}

/// Σ_{i=0}^{N} r^i / i! with the Lagrange bound 2|r|^{N+1}/(N+1)! for |r| ≤ 1/2,
/// or 3|r|^{N+1}/(N+1)! for |r| ≤ 1.
fn exp_series(r: &Rational, bits: u32) -> IntervalBound {
    let tol = target_error(bits);
    let ra = r.abs();
    let remainder_factor = if ra <= Rational::new(1.into(), 2.into()) {
        int(2)
    } else {
        int(3)
    };
    let mut sum = Rational::zero();
    let mut term = Rational::one();
    let mut i = 0i64;
    loop {
        sum += &term;
        i += 1;
        term = &term * r / int(i);
        let bound = &remainder_factor * term.abs();
        if bound <= tol || term.is_zero() {
            return IntervalBound::rounded(&sum - &bound, &sum + &bound);
        }
    }
}

fn e_enclosure(bits: u32) -> IntervalBound {
    static CACHE: OnceLock<std::sync::Mutex<Vec<(u32, IntervalBound)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| std::sync::Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((_, v)) = guard.iter().find(|(b, _)| *b == bits) {
        return v.clone();
    }
    let v = exp_series(&int(1), bits + 16);
    guard.push((bits, v.clone()));
    v
}

fn exp_enclosure(x: &Rational) -> IntervalBound {
    if x.is_zero() {
        return IntervalBound::from_int(1);
    }
    let bits = default_precision();
    let k = x.round();
    let r = x - &k;
    let k = k.to_integer().to_i64().expect("exponent argument out of range");
    let base = exp_series(&r, bits + 8);
    if k == 0 {
        return base;
    }
    let e = e_enclosure(bits + 8 + (64 - (k.unsigned_abs()).leading_zeros()));
    let ek = e.powi(k.unsigned_abs() as u32);
    let ek = if k > 0 {
        ek
    } else {
        IntervalBound::from_int(1).checked_div(&ek).expect("e^k is positive")
    };
    &base * &ek
}

/// atanh(y) for 0 ≤ y < 1 via Σ y^{2i+1}/(2i+1) with tail ≤ y^{2N+3}/((2N+3)(1−y²)).
fn atanh_series(y: &Rational, bits: u32) -> IntervalBound {
    let tol = target_error(bits);
    let y2 = y * y;
    let denom_factor = Rational::one() - &y2;
    let mut sum = Rational::zero();
    let mut power = y.clone();
    let mut i = 0i64;
    loop {
        sum += &power / int(2 * i + 1);
        power = &power * &y2;
        i += 1;
        let tail = &power / (int(2 * i + 1) * &denom_factor);
        if tail <= tol || power.is_zero() {
            return IntervalBound::rounded(sum.clone(), &sum + &tail);
        }
    }
}

fn ln2_enclosure(bits: u32) -> IntervalBound {
    let a = atanh_series(&Rational::new(1.into(), 3.into()), bits + 4);
    &IntervalBound::from_int(2) * &a
}

fn ln_enclosure(x: &Rational) -> IntervalBound {
    if x.is_one() {
        return IntervalBound::from_int(0);
    }
    let bits = default_precision();
    // x = m · 2^e with 1 ≤ m < 2.
    let mut e = bit_len(x.numer()) - bit_len(x.denom());
    let mut m = x * pow2(-e);
    while m < Rational::one() {
        m *= int(2);
        e -= 1;
    }
    while m >= int(2) {
        m /= int(2);
        e += 1;
    }
    let y = (&m - int(1)) / (&m + int(1));
    let lnm = &IntervalBound::from_int(2) * &atanh_series(&y, bits + 8);
    if e == 0 {
        return lnm;
    }
    let extra = 64 - e.unsigned_abs().leading_zeros();
    let l2 = ln2_enclosure(bits + 8 + extra);
    &lnm + &(&IntervalBound::from_int(e) * &l2)
}

fn sqrt_bounds(x: &Rational) -> (Rational, Rational) {
    if x.is_zero() {
        return (Rational::zero(), Rational::zero());
    }
    let bits = default_precision() as usize;
    let q = x.denom().clone();
    let pq = x.numer() * &q;
    let s = bits + 2;
    let scaled = &pq << (2 * s);
    let root = scaled.sqrt();
    let scale = &q << s;
    let lo = Rational::new(root.clone(), scale.clone());
    let hi = if &root * &root == scaled {
        lo.clone()
    } else {
        Rational::new(root + 1, scale)
    };
    (lo, hi)
}

impl PartialOrd for IntervalBound {
    /// Defined only when the intervals are disjoint or identical points.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.hi < other.lo {
            Some(Ordering::Less)
        } else if self.lo > other.hi {
            Some(Ordering::Greater)
        } else if self.lo == self.hi && other.lo == other.hi && self.lo == other.lo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain Taylor series at 0 with N terms and Lagrange remainder
    /// |x|^{N+1} e^{|x|} / (N+1)!, using e^{|x|} ≤ 3^{⌈|x|⌉}.
    fn oracle_exp(x: &Rational, n: i64) -> (Rational, Rational) {
        let mut sum = Rational::zero();
        let mut term = Rational::one();
        for i in 1..=n + 1 {
            sum += &term;
            term = term * x / int(i);
        }
        let ceil = x.abs().ceil().to_integer().to_usize().unwrap();
        let rem = term.abs() * num_traits::pow(int(3), ceil);
        (&sum - &rem, sum + rem)
    }

    #[test]
    fn exp_at_zero_is_exact() {
        let v = IntervalBound::from_int(0).exp();
        assert_eq!(v, IntervalBound::from_int(1));
    }

    #[test]
    fn exp_enclosures_contain_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = rat(rng.gen_range(-5000..=5000), 1000);
            let v = IntervalBound::point(x.clone()).exp();
            let (olo, ohi) = oracle_exp(&x, 60);
            // The true value lies in both [olo, ohi] and [v.lo, v.hi].
            assert!(v.lo() <= &ohi && &olo <= v.hi(), "e^{x} enclosure {v} misses oracle");
            assert!(v.width() < rat(1, 1_000_000_000_000));
        }
    }

    #[test]
    fn exp_large_arguments() {
        let v = IntervalBound::from_int(40).exp();
        assert!(v.lo_f64() > 2.35385266837e17 && v.hi_f64() < 2.35385266838e17);
        let w = IntervalBound::from_int(-40).exp();
        assert!(w.lo().is_positive());
        assert!((w.mid_f64() * v.mid_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ln_enclosures() {
        assert_eq!(IntervalBound::from_int(1).ln().unwrap(), IntervalBound::from_int(0));
        for (x, expect) in [
            (2i64, std::f64::consts::LN_2),
            (20, 20f64.ln()),
            (10_000, 10_000f64.ln()),
        ] {
            let v = IntervalBound::from_int(x).ln().unwrap();
            assert!(v.lo_f64() <= expect + 1e-15 && expect - 1e-15 <= v.hi_f64());
            // exp(ln x) must contain x.
            assert!(v.exp().contains(&int(x)));
        }
        let v = IntervalBound::point(rat(1, 7)).ln().unwrap();
        assert!(v.exp().contains(&rat(1, 7)));
        assert!(IntervalBound::from_int(0).ln().is_err());
    }

    #[test]
    fn sqrt_enclosures() {
        assert_eq!(IntervalBound::from_int(16).sqrt().unwrap(), IntervalBound::from_int(4));
        let s = IntervalBound::from_int(2).sqrt().unwrap();
        assert!(s.lo() * s.lo() <= int(2) && s.hi() * s.hi() >= int(2));
        let t = IntervalBound::point(rat(9, 4)).sqrt().unwrap();
        assert_eq!(t, IntervalBound::point(rat(3, 2)));
        assert!(IntervalBound::from_int(-1).sqrt().is_err());
    }

    #[test]
    fn arithmetic_is_outward() {
        let a = IntervalBound::new(int(-1), int(2)).unwrap();
        let b = IntervalBound::new(int(3), int(4)).unwrap();
        assert_eq!(&a * &b, IntervalBound::new(int(-4), int(8)).unwrap());
        assert_eq!(&a - &b, IntervalBound::new(int(-5), int(-1)).unwrap());
        assert_eq!(a.powi(2), IntervalBound::new(int(0), int(4)).unwrap());
        assert!(a.checked_div(&a).is_err());
        let third = IntervalBound::from_int(1)
            .checked_div(&IntervalBound::from_int(3))
            .unwrap();
        assert!(third.contains(&rat(1, 3)));
    }

    #[test]
    fn rounding_keeps_enclosure() {
        let x = rat(1, 3);
        let mut acc = IntervalBound::point(x.clone());
        let mut exact = x.clone();
        for _ in 0..30 {
            acc = &acc * &IntervalBound::point(rat(22, 7));
            exact *= rat(22, 7);
        }
        assert!(acc.contains(&exact));
        assert!(acc.lo().denom().bits() < 400);
    }
}
