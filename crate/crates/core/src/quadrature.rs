//! Discrete sums against `x e^{−x}`: the corrected rule with coefficients
//! `c_t`, an explicit error bound, and the comparison between the binomial
//! weights of `Ω` and the exponential weights.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    affine_substitute, binomial, default_precision, factorial, format_rational, int, pow, rat, vandermonde_solve,
    IntervalBound, RatPoly, Rational, ScaledPoly,
};
use crate::laguerre::{h_poly, weighted_inner_product};

/// Largest supported order of the corrected rule.
pub const MAX_ORDER: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuadScheme {
    pub t: usize,
    #[serde(serialize_with = "crate::witness::serialize_rationals")]
    pub c: Vec<Rational>,
}

impl QuadScheme {
    /// `Σ_b b^a c_b = t^a/(a+1)` for every `a = 0..=t`.
    pub fn moment_conditions_hold(&self) -> bool {
        (0..=self.t).all(|a| {
            let lhs: Rational = self.c.iter().enumerate().map(|(b, c)| pow(&int(b as i64), a) * c).sum();
            lhs == pow(&int(self.t as i64), a) / int(a as i64 + 1)
        })
    }

    /// `Σ_{b≥1} |c_b|`.
    pub fn abs_tail_sum(&self) -> Rational {
        self.c.iter().skip(1).map(|c| c.abs()).sum()
    }
}

pub fn quad_coefficients(t: usize) -> Result<QuadScheme> {
    if !(1..=MAX_ORDER).contains(&t) {
        return Err(Error::invalid(
            "t",
            format!("order must lie in 1..={MAX_ORDER}, got {t}"),
        ));
    }
    let v: Vec<Rational> = (0..=t).map(|a| pow(&int(t as i64), a) / int(a as i64 + 1)).collect();
    Ok(QuadScheme {
        t,
        c: vandermonde_solve(t, &v)?,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceFactor {
    pub name: String,
    pub value: String,
    pub reason: String,
}

/// `C_t1`, `C_t2` for a given `(t, d)`, every factor logged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorBoundConstants {
    pub t: usize,
    pub d: usize,
    #[serde(with = "crate::exact::serde_rational")]
    pub c_t1: Rational,
    #[serde(with = "crate::exact::serde_rational")]
    pub c_t2: Rational,
    pub trace: Vec<TraceFactor>,
}

fn factor(name: &str, value: &Rational, reason: &str) -> TraceFactor {
    TraceFactor {
        name: name.into(),
        value: format_rational(value),
        reason: reason.into(),
    }
}

/// Assembles the constants of the error bound
/// `|Δ Σ f(jΔ) − ∫f| ≤ (C_t1 (dΔ)² e^{2tdΔ} + C_t2 d (dΔ)^{t+1}) ∫g² x e^{−x}`
/// for `f = g² x e^{−x}`, `deg g ≤ d`.
///
/// Three pieces, by the triangle inequality:
/// * window start, `|∫f − (1/t)Σ_{b<t} ∫_{bΔ}^∞ f| ≤ (tΔ)² (d+1)² e^{2dtΔ} A`;
/// * boundary correction, `≤ (tΔ)² (d+1)² e^{2dtΔ} S A` with `S = Σ_{b≥1}|c_b|`;
/// * the rule itself, `≤ (tΔ)^{t+1} K_t (t+4)(d+8)(d+1)(3d)^t A`,
///   `K_t = t/(t+1)! + S/t!`.
///
/// Here `A = Σ a_k² = ∫g² x e^{−x}`; the first two use `f ≤ tΔ(d+1)² e^{2dtΔ} A`
/// on `[0, tΔ]`, the last bounds `∫|f^{(t+1)}|` through the derivative
/// expansion of `h_k` and the two `|h_j h_j′|` integral bounds.
pub fn error_bound_constants(t: usize, d: usize) -> Result<ErrorBoundConstants> {
    if d == 0 {
        return Err(Error::invalid("d", "needs d >= 1"));
    }
    let scheme = quad_coefficients(t)?;
    let (ti, di) = (int(t as i64), int(d as i64));
    let s = scheme.abs_tail_sum();
    let k_t = &ti / Rational::from_integer(factorial(t + 1)) + &s / Rational::from_integer(factorial(t));
    let near_zero = (&di + int(1)).pow(2) / (&di * &di);
    let c_t1 = &ti * &ti * (int(1) + &s) * &near_zero;
    let deriv = int(t as i64 + 4) * (&di + int(8)) * (&di + int(1)) * pow(&int(3), t) / (&di * &di);
    let c_t2 = pow(&ti, t + 1) * &k_t * &deriv;
    let trace = vec![
        factor(
            "sum_abs_c",
            &s,
            "sum of |c_b| over b = 1..t, exact from the Vandermonde solve",
        ),
        factor(
            "t_squared",
            &(&ti * &ti),
            "window start plus boundary correction scale as (t·Delta)^2",
        ),
        factor(
            "one_plus_sum_abs_c",
            &(int(1) + &s),
            "window start contributes 1, boundary correction contributes sum_abs_c",
        ),
        factor(
            "(d+1)^2/d^2",
            &near_zero,
            "near-zero size of g^2 x e^-x rewritten against (d·Delta)^2",
        ),
        factor("C_t1", &c_t1, "product of the four factors above"),
        factor("K_t", &k_t, "t/(t+1)! + sum_abs_c/t!, per-window Taylor remainder"),
        factor(
            "t^(t+1)",
            &pow(&ti, t + 1),
            "(t·Delta)^(t+1) rewritten against (d·Delta)^(t+1)",
        ),
        factor(
            "(t+4)(d+8)(d+1)3^t/d^2",
            &deriv,
            "integral of |(t+1)-th derivative| over sum a_k^2, divided by d·d^t",
        ),
        factor("C_t2", &c_t2, "t^(t+1) · K_t · derivative factor"),
    ];
    Ok(ErrorBoundConstants {
        t,
        d,
        c_t1,
        c_t2,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorBound {
    pub constants: ErrorBoundConstants,
    #[serde(with = "crate::exact::serde_rational")]
    pub delta: Rational,
    /// Enclosure of the bound normalized by `∫g² x e^{−x}`.
    #[serde(serialize_with = "serialize_interval")]
    pub value: IntervalBound,
}

pub(crate) fn serialize_interval<S: serde::Serializer>(
    v: &IntervalBound,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&format_rational(v.lo()))?;
    seq.serialize_element(&format_rational(v.hi()))?;
    seq.end()
}

pub fn integration_error_bound(t: usize, d: usize, delta: &Rational) -> Result<ErrorBound> {
    if !delta.is_positive() {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let constants = error_bound_constants(t, d)?;
    let dd = int(d as i64) * delta;
    let first =
        IntervalBound::point(&constants.c_t1 * &dd * &dd) * IntervalBound::point(int(2 * (t * d) as i64) * delta).exp();
    let second = IntervalBound::point(&constants.c_t2 * int(d as i64) * pow(&dd, t + 1));
    Ok(ErrorBound {
        constants,
        delta: delta.clone(),
        value: &first + &second,
    })
}

/// `⌈(50 + 4d·ln(max(d, 2)))/Δ⌉`, using an upper enclosure of the log.
pub fn default_k_max(d: usize, delta: &Rational) -> Result<u64> {
    if !delta.is_positive() {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let ln = IntervalBound::from_int(d.max(2) as i64).ln()?;
    let top = int(50) + int(4 * d as i64) * ln.hi();
    (top / delta)
        .ceil()
        .to_integer()
        .try_into()
        .map_err(|_| Error::Budget("k_max does not fit in 64 bits".into()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiscreteSum {
    pub k_max: u64,
    /// `Δ Σ_{k ≤ k_max} (kΔ) e^{−kΔ} g(kΔ)²`.
    #[serde(serialize_with = "serialize_interval")]
    pub value: IntervalBound,
    /// Upper bound on the omitted `k > k_max` part.
    #[serde(with = "crate::exact::serde_rational")]
    pub tail_bound: Rational,
}

impl DiscreteSum {
    /// Enclosure of the full infinite sum.
    pub fn total(&self) -> IntervalBound {
        IntervalBound::new(self.value.lo().clone(), self.value.hi() + &self.tail_bound).expect("ordered")
    }
}

/// `Δ Σ_{k=from}^{to} (kΔ) e^{−kΔ} g(kΔ)²`.
fn discrete_range(g: &RatPoly, delta: &Rational, from: u64, to: u64) -> IntervalBound {
    if from > to || g.is_zero() {
        return IntervalBound::from_int(0);
    }
    // In k: Δ·(kΔ)·g(kΔ)², nonnegative at every integer k ≥ 0.
    let r = affine_substitute(g, delta, &Rational::zero()).expect("delta is nonzero");
    let s = ScaledPoly::new(&(&(&r * &r) * &RatPoly::monomial(1, delta * delta)));
    // e^{−kΔ} in fixed point over 2^shift, floored and ceiled per step. The
    // shift covers the decay range plus the endpoint precision and the
    // per-step truncations.
    let span = (int(to as i64) * delta).ceil().to_integer();
    let span_bits = usize::try_from(span * 3 / 2).unwrap_or(usize::MAX / 4);
    let shift = default_precision() as usize + span_bits + 64 + 64 - (to - from).leading_zeros() as usize;
    let fixed = |x: &Rational, up: bool| {
        let v = x * Rational::from_integer(BigInt::one() << shift);
        if up {
            v.ceil().to_integer()
        } else {
            v.floor().to_integer()
        }
    };
    let step = IntervalBound::point(-delta.clone()).exp();
    let (step_lo, step_hi) = (fixed(step.lo(), false), fixed(step.hi(), true));
    let start = IntervalBound::point(-(int(from as i64) * delta)).exp();
    let (mut dec_lo, mut dec_hi) = (fixed(start.lo(), false), fixed(start.hi(), true));
    let (mut sum_lo, mut sum_hi) = (BigInt::zero(), BigInt::zero());
    for k in from..=to {
        let v = s.scaled_at_int(&BigInt::from(k));
        debug_assert!(!v.is_negative());
        sum_lo += &v * &dec_lo;
        sum_hi += &v * &dec_hi;
        dec_lo = (&dec_lo * &step_lo) >> shift;
        // Ceiling division by 2^shift.
        dec_hi = -((-(&dec_hi * &step_hi)) >> shift);
    }
    let scale = Rational::from_integer(s.denom() << shift);
    let acc = IntervalBound::new(
        Rational::from_integer(sum_lo) / &scale,
        Rational::from_integer(sum_hi) / &scale,
    )
    .expect("ordered");
    // Adding zero rounds the endpoints outward to the working precision.
    &acc + &IntervalBound::from_int(0)
}

/// Upper bound on `Δ Σ_{k>k0} (kΔ) e^{−kΔ} g(kΔ)²` via `g(y)² ≤ 2(2y)^{2d}⟨g,g⟩`
/// and `Σ_{k>k0} Δ φ(kΔ) ≤ ∫_{k0Δ}^∞ φ` for the decreasing `φ = y^{2d+1}e^{−y}`.
fn tail_envelope(g: &RatPoly, delta: &Rational, k0: u64) -> Result<Rational> {
    if g.is_zero() {
        return Ok(Rational::zero());
    }
    let d = g.degree().unwrap_or(0);
    let p = 2 * d + 1;
    let y = int(k0 as i64) * delta;
    if y < int(p as i64).max(int(1)) {
        return Err(Error::Precondition(format!(
            "tail start {y} is below the monotone range y >= {p}"
        )));
    }
    // Γ(p+1, y) = p!·e^{−y}·Σ_{i≤p} y^i/i!.
    let mut poly_part = Rational::zero();
    for i in 0..=p {
        poly_part += pow(&y, i) / Rational::from_integer(factorial(i));
    }
    let gamma = IntervalBound::point(Rational::from_integer(factorial(p)) * poly_part) * IntervalBound::point(-y).exp();
    let norm = weighted_inner_product(g, g);
    Ok(int(2) * pow(&int(4), d) * norm * gamma.hi())
}

pub fn weighted_discrete_sum(g: &RatPoly, delta: &Rational, k_max: u64) -> Result<DiscreteSum> {
    if !delta.is_positive() {
        return Err(Error::invalid("delta", "must be positive"));
    }
    Ok(DiscreteSum {
        k_max,
        value: discrete_range(g, delta, 0, k_max),
        tail_bound: tail_envelope(g, delta, k_max)?,
    })
}

/// Enclosure of `Δ Σ_{k ≥ k0} (kΔ) e^{−kΔ} g(kΔ)²`.
pub fn discrete_tail_from(g: &RatPoly, delta: &Rational, k0: u64) -> Result<IntervalBound> {
    let d = g.degree().unwrap_or(0);
    let k_max = default_k_max(d, delta)?.max(k0);
    let head = discrete_range(g, delta, k0, k_max);
    let tail = tail_envelope(g, delta, k_max)?;
    IntervalBound::new(head.lo().clone(), head.hi() + tail)
}

/// Enclosure of `Δ Σ_k (kΔ)e^{−kΔ}g(kΔ)² − ∫g² x e^{−x}`.
pub fn measured_integration_error(g: &RatPoly, delta: &Rational) -> Result<IntervalBound> {
    let k_max = default_k_max(g.degree().unwrap_or(0), delta)?;
    let sum = weighted_discrete_sum(g, delta, k_max)?;
    Ok(&sum.total() - &IntervalBound::point(weighted_inner_product(g, g)))
}

/// `|measured_integration_error|` for `g = P_d`, cached since it does not depend on `t`.
fn measured_basis_error(d: usize, delta: &Rational) -> Result<IntervalBound> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, Rational), IntervalBound>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, delta.clone());
    if let Some(v) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(v.clone());
    }
    let err = measured_integration_error(&h_poly(d).p, delta)?.abs();
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, err.clone());
    Ok(err)
}

/// Measured error stays under the assembled bound for `g = P_d`,
/// `d ∈ {2, 4, 8}`, `Δ ∈ {1/10, 1/100}`. Cached per `t`.
pub fn validate_error_bound(t: usize) -> Result<bool> {
    static CACHE: OnceLock<Mutex<HashMap<usize, bool>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&t) {
        return Ok(v);
    }
    let mut ok = true;
    for d in [2usize, 4, 8] {
        let g = h_poly(d).p;
        let norm = weighted_inner_product(&g, &g);
        for delta in [rat(1, 10), rat(1, 100)] {
            let err = measured_basis_error(d, &delta)?;
            let bound = &integration_error_bound(t, d, &delta)?.value * &IntervalBound::point(norm.clone());
            ok &= err.certainly_le(&bound);
        }
    }
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(t, ok);
    Ok(ok)
}

/// `(4d+2)·ln(d2) + 2·ln(20)` as an enclosure.
pub fn window_lower_value(d: usize, d2: u64) -> Result<IntervalBound> {
    let ln_d2 = IntervalBound::from_int(d2 as i64).ln()?;
    let ln_20 = IntervalBound::from_int(20).ln()?;
    Ok(&(&IntervalBound::from_int(4 * d as i64 + 2) * &ln_d2) + &(&IntervalBound::from_int(2) * &ln_20))
}

/// `(4d+2)ln(d2) + 2ln(20) ≤ d2 ≤ √n/4`, the first check certified by the
/// upper enclosure and the second decided exactly as `16·d2² ≤ n`.
pub fn window_holds(n: u64, d: usize, d2: u64) -> Result<bool> {
    if d2 == 0 {
        return Ok(false);
    }
    let lower = window_lower_value(d, d2)?.certainly_le(&IntervalBound::from_int(d2 as i64));
    Ok(lower && 16 * (d2 as u128) * (d2 as u128) <= n as u128)
}

/// `S_i = Σ_{k=0}^{n−d2−1} C(n−k−2, d2−1)·k^i` for `i = 0..=p_max`.
fn binomial_power_sums(n: u64, d2: u64, p_max: usize) -> Vec<BigInt> {
    let mut sums = vec![BigInt::zero(); p_max + 1];
    if d2 == 0 || d2 >= n {
        return sums;
    }
    let top = n - d2 - 1;
    let r = BigInt::from(d2 - 1);
    // C(m, r) with m = n−k−2 walks up from m = d2−1 as k walks down.
    let mut w = BigInt::one();
    for k in (0..=top).rev() {
        if k < top {
            let m = BigInt::from(n - k - 2);
            w = w * &m / (&m - &r);
        }
        let kb = BigInt::from(k);
        let mut term = w.clone();
        for s in sums.iter_mut() {
            *s += &term;
            term *= &kb;
        }
    }
    sums
}

/// `Δ Σ_{k=0}^{n−d2−1} (kΔ)·C(n−k−2, d2−1)/C(n−1, d2−1)·g(kΔ)²`, exact, `Δ = 2d2/n`.
pub fn binomial_weighted_sum(n: u64, d2: u64, g: &RatPoly) -> Result<Rational> {
    if d2 < 1 || d2 > n {
        return Err(Error::invalid("d2", format!("need 1 <= d2 <= n, got n={n}, d2={d2}")));
    }
    let delta = Rational::new(BigInt::from(2 * d2), BigInt::from(n));
    let r = affine_substitute(g, &delta, &Rational::zero())?;
    let s = &(&r * &r) * &RatPoly::monomial(1, &delta * &delta);
    let sums = binomial_power_sums(n, d2, s.degree().unwrap_or(0));
    let mut acc = Rational::zero();
    for (c, sum) in s.coeffs().iter().zip(&sums) {
        acc += c * Rational::from_integer(sum.clone());
    }
    Ok(acc / Rational::from_integer(binomial(n as i64 - 1, d2 as i64 - 1)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DifferenceMargin {
    #[serde(with = "crate::exact::serde_rational")]
    pub delta: Rational,
    #[serde(with = "crate::exact::serde_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "serialize_interval")]
    pub rhs: IntervalBound,
    #[serde(serialize_with = "serialize_interval")]
    pub margin: IntervalBound,
}

/// `lhs − rhs` with `lhs` the binomial-weighted sum and
/// `rhs = (Δ/2)·Σ(kΔ)e^{−kΔ}g(kΔ)² − (1/10)∫g² x e^{−x}`. Refuses inputs
/// outside the window `(4d+2)ln d2 + 2ln 20 ≤ d2 ≤ √n/4` or with `deg g > d`.
pub fn distribution_difference_margin(n: u64, d2: u64, d: usize, g: &RatPoly) -> Result<DifferenceMargin> {
    if g.degree().unwrap_or(0) > d {
        return Err(Error::invalid("g", format!("degree exceeds d={d}")));
    }
    if !window_holds(n, d, d2)? {
        return Err(Error::Precondition(format!(
            "(4d+2)ln(d2) + 2ln(20) <= d2 <= sqrt(n)/4 fails for n={n}, d={d}, d2={d2}"
        )));
    }
    distribution_difference_margin_unchecked(n, d2, g)
}

/// Same as [`distribution_difference_margin`] without the parameter window.
pub fn distribution_difference_margin_unchecked(n: u64, d2: u64, g: &RatPoly) -> Result<DifferenceMargin> {
    let delta = Rational::new(BigInt::from(2 * d2), BigInt::from(n));
    let lhs = binomial_weighted_sum(n, d2, g)?;
    let k_max = default_k_max(g.degree().unwrap_or(0), &delta)?;
    let sum = weighted_discrete_sum(g, &delta, k_max)?.total();
    let rhs = &(&IntervalBound::point(&delta / int(2)) * &sum)
        - &IntervalBound::point(weighted_inner_product(g, g) / int(10));
    let margin = &IntervalBound::point(lhs.clone()) - &rhs;
    Ok(DifferenceMargin {
        delta,
        lhs,
        rhs,
        margin,
    })
}

/// `C(n−k−2, d2−1)/C(n−1, d2−1) ≥ ½ e^{−kΔ}`, certified.
pub fn low_k_bound_holds(n: u64, d2: u64, k: u64) -> Result<bool> {
    if d2 < 1 || 16 * (d2 as u128).pow(2) > n as u128 || 4 * k > n {
        return Err(Error::Precondition(format!(
            "needs d2 <= sqrt(n)/4 and k <= n/4, got n={n} d2={d2} k={k}"
        )));
    }
    // C(n−k−2, d2−1)/C(n−1, d2−1) = Π_{i<d2−1} (n−k−2−i)/(n−1−i).
    let (mut num, mut den) = (BigInt::one(), BigInt::one());
    for i in 0..d2 - 1 {
        num *= BigInt::from(n - k - 2 - i);
        den *= BigInt::from(n - 1 - i);
    }
    let ratio = Rational::new(num, den);
    let delta = Rational::new(BigInt::from(2 * d2), BigInt::from(n));
    let half_exp = IntervalBound::point(rat(1, 2)) * IntervalBound::point(-(int(k as i64) * delta)).exp();
    Ok(half_exp.certainly_le(&IntervalBound::point(ratio)))
}

/// `(1 − k/n) ≥ e^{−2k/n}`, certified.
pub fn exponential_comparison_holds(n: u64, k: u64) -> bool {
    let lhs = int(1) - Rational::new(BigInt::from(k), BigInt::from(n));
    let rhs = IntervalBound::point(-Rational::new(BigInt::from(2 * k), BigInt::from(n))).exp();
    rhs.certainly_le(&IntervalBound::point(lhs))
}

/// `Π_{j=1}^{d2−1} ((n−j−k−1)/(n−j))/(1−k/n) ≥ (1 − 2d2/n)(1 − 2d2²k/n²)`, exact.
pub fn product_lower_bound_holds(n: u64, d2: u64, k: u64) -> bool {
    let (ni, ki) = (int(n as i64), int(k as i64));
    let one_minus = int(1) - &ki / &ni;
    let mut prod = int(1);
    for j in 1..d2 as i64 {
        let jj = int(j);
        prod *= (&ni - &jj - &ki - int(1)) / (&ni - &jj) / &one_minus;
    }
    let d2r = int(d2 as i64);
    let rhs = (int(1) - int(2) * &d2r / &ni) * (int(1) - int(2) * &d2r * &d2r * &ki / (&ni * &ni));
    prod >= rhs
}

/// `binomial_weighted_sum − (3/20)∫g² x e^{−x}`, exact. The caller decides
/// whether the parameters satisfy the sum-to-integral conditions.
pub fn sum_to_integral_margin(n: u64, d2: u64, g: &RatPoly) -> Result<Rational> {
    Ok(binomial_weighted_sum(n, d2, g)? - rat(3, 20) * weighted_inner_product(g, g))
}

/// The error-bound condition `C_t1(dΔ)²e^{2tdΔ} + C_t2 d(dΔ)^{t+1} ≤ 1/2`.
pub fn error_condition_holds(t: usize, d: usize, delta: &Rational) -> Result<bool> {
    Ok(integration_error_bound(t, d, delta)?
        .value
        .certainly_le(&IntervalBound::point(rat(1, 2))))
}
