//! Orthonormal polynomials for the weight `x·e^{−x}` on `[0, ∞)`.
//!
//! `h_k = P_k / √N_k` with `P_k` monic and integral and `N_k = k!(k+1)!`.
//! Every exact claim is decided on `P_k`; the surd only appears in
//! [`Surd`] values handed back to callers.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{factorial, format_rational, int, pow, IntervalBound, RatPoly, Rational, ScaledPoly};

/// `coeff · √radicand` with a square-free radicand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Surd {
    pub coeff: Rational,
    pub radicand: u64,
}

impl Surd {
    pub fn new(coeff: Rational, radicand: u64) -> Self {
        let (s, r) = split_square(radicand);
        Surd {
            coeff: coeff * int(s as i64),
            radicand: r,
        }
    }

    pub fn rational(coeff: Rational) -> Self {
        Surd { coeff, radicand: 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    pub fn square(&self) -> Rational {
        &self.coeff * &self.coeff * int(self.radicand as i64)
    }

    pub fn mul(&self, other: &Surd) -> Surd {
        Surd::new(&self.coeff * &other.coeff, self.radicand * other.radicand)
    }

    pub fn to_interval(&self) -> IntervalBound {
        let root = IntervalBound::from_int(self.radicand as i64)
            .sqrt()
            .expect("radicand is non-negative");
        &IntervalBound::point(self.coeff.clone()) * &root
    }

    pub fn to_f64(&self) -> f64 {
        self.coeff.to_f64().unwrap_or(f64::NAN) * (self.radicand as f64).sqrt()
    }
}

impl std::fmt::Display for Surd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.radicand == 1 || self.coeff.is_zero() {
            write!(f, "{}", format_rational(&self.coeff))
        } else {
            write!(f, "{}*sqrt({})", format_rational(&self.coeff), self.radicand)
        }
    }
}

impl Serialize for Surd {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Surd", 2)?;
        st.serialize_field("coeff", &format_rational(&self.coeff))?;
        st.serialize_field("radicand", &self.radicand)?;
        st.end()
    }
}

/// `v = s²·r` with `r` square-free.
fn split_square(mut v: u64) -> (u64, u64) {
    if v == 0 {
        return (0, 1);
    }
    let mut s = 1;
    let mut p = 2;
    while p * p <= v {
        while v.is_multiple_of(p * p) {
            v /= p * p;
            s *= p;
        }
        p += 1;
    }
    (s, v)
}

/// `N_k = k!(k+1)!`.
pub fn normalizer(k: usize) -> BigInt {
    factorial(k) * factorial(k + 1)
}

/// `1/√N_k` as a surd: `√N_k = k!·√(k+1)`.
pub fn inv_sqrt_normalizer(k: usize) -> Surd {
    let (s, r) = split_square(k as u64 + 1);
    let den = factorial(k) * BigInt::from(s * r);
    Surd {
        coeff: Rational::new(BigInt::from(1), den),
        radicand: r,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HBasisElement {
    pub k: usize,
    pub p: RatPoly,
    pub normalizer: BigInt,
}

impl Serialize for HBasisElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("HBasisElement", 3)?;
        st.serialize_field("k", &self.k)?;
        let coeffs: Vec<String> = self.p.coeffs().iter().map(|c| c.numer().to_string()).collect();
        st.serialize_field("coefficients", &coeffs)?;
        st.serialize_field("normalizer", &self.normalizer.to_string())?;
        st.end()
    }
}

/// `P_k(x) = Σ_j (−1)^{k−j} C(k,j) (k+1)!/(j+1)! x^j`.
pub fn h_poly(k: usize) -> HBasisElement {
    static CACHE: OnceLock<Mutex<Vec<RatPoly>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let cached = cache.lock().unwrap_or_else(|e| e.into_inner()).get(k).cloned();
    let p = cached.unwrap_or_else(|| {
        let top = factorial(k + 1);
        let coeffs: Vec<BigInt> = (0..=k)
            .map(|j| {
                let c = crate::exact::binomial(k as i64, j as i64).expect("k >= 0") * &top / factorial(j + 1);
                if (k - j) % 2 == 1 {
                    -c
                } else {
                    c
                }
            })
            .collect();
        let p = RatPoly::from_bigints(&coeffs);
        let mut table = cache.lock().unwrap_or_else(|e| e.into_inner());
        if table.len() == k {
            table.push(p.clone());
        }
        p
    });
    HBasisElement {
        k,
        p,
        normalizer: normalizer(k),
    }
}

/// Basis export for `k = 0..=k_max`.
pub fn basis_json(k_max: usize) -> serde_json::Value {
    let basis: Vec<HBasisElement> = (0..=k_max).map(h_poly).collect();
    serde_json::to_value(basis).expect("basis serializes")
}

/// `∫₀^∞ f g x e^{−x} dx`, using `∫ x^{p+q+1} e^{−x} = (p+q+1)!`.
pub fn weighted_inner_product(f: &RatPoly, g: &RatPoly) -> Rational {
    moment_pairing(f, g, 1)
}

/// `∫₀^∞ f g e^{−x} dx`.
pub fn plain_inner_product(f: &RatPoly, g: &RatPoly) -> Rational {
    moment_pairing(f, g, 0)
}

fn moment_pairing(f: &RatPoly, g: &RatPoly, shift: usize) -> Rational {
    let mut acc = Rational::zero();
    for (p, a) in f.coeffs().iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (q, b) in g.coeffs().iter().enumerate() {
            if !b.is_zero() {
                acc += a * b * Rational::from_integer(factorial(p + q + shift));
            }
        }
    }
    acc
}

/// Coefficients `c_{k′}` of `h_k′ = Σ_{k′<k} c_{k′} h_{k′}`.
pub fn h_derivative_expansion(k: usize) -> BTreeMap<usize, Surd> {
    let mut out = BTreeMap::new();
    for kp in 0..k {
        let sign = if (k - 1 - kp).is_multiple_of(2) { 1 } else { -1 };
        let ratio = Rational::new(factorial(k) * sign, factorial(kp));
        // √N_{k′}/√N_k = (k′!·√(k′+1)) / (k!·√(k+1)).
        let root = Surd::new(
            Rational::new(factorial(kp), factorial(k) * BigInt::from(k + 1)),
            (kp as u64 + 1) * (k as u64 + 1),
        );
        out.insert(kp, Surd::new(&ratio * &root.coeff, root.radicand));
    }
    out
}

/// Checks `h_derivative_expansion(k)` against differentiation of `P_k`, with
/// the surds cleared: `P_k′ = Σ c_{k′}·√(N_k/N_{k′})·P_{k′}`.
pub fn derivative_identity_holds(k: usize) -> bool {
    let mut rebuilt = RatPoly::zero();
    for (kp, c) in h_derivative_expansion(k) {
        // c·√(N_k/N_{k′}) must be the rational (−1)^{k−1−k′} k!/k′!.
        let scale_sq = c.square() * Rational::new(normalizer(k), normalizer(kp));
        let sign = if (k - 1 - kp).is_multiple_of(2) { 1 } else { -1 };
        let expect = Rational::new(factorial(k) * sign, factorial(kp));
        if scale_sq != &expect * &expect || c.coeff.signum() != expect.signum() {
            return false;
        }
        rebuilt = &rebuilt + &h_poly(kp).p.scale(&expect);
    }
    rebuilt == h_poly(k).p.derivative()
}

/// `g = Σ a_k h_k` with `a_k = ⟨g, P_k⟩/√N_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GExpansion {
    pub coefficients: Vec<Surd>,
    #[serde(skip)]
    pairings: Vec<Rational>,
}

impl GExpansion {
    /// `Σ a_k h_k` as a rational polynomial; equals the expanded input.
    pub fn reconstruct(&self) -> RatPoly {
        let mut acc = RatPoly::zero();
        for (k, b) in self.pairings.iter().enumerate() {
            let c = b / Rational::from_integer(normalizer(k));
            acc = &acc + &h_poly(k).p.scale(&c);
        }
        acc
    }

    /// `Σ a_k²`.
    pub fn squared_norm(&self) -> Rational {
        self.coefficients.iter().map(Surd::square).sum()
    }
}

pub fn expand_in_h(g: &RatPoly) -> GExpansion {
    let d = g.degree().unwrap_or(0);
    let pairings: Vec<Rational> = (0..=d).map(|k| weighted_inner_product(g, &h_poly(k).p)).collect();
    let coefficients = pairings
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let s = inv_sqrt_normalizer(k);
            Surd {
                coeff: b * &s.coeff,
                radicand: s.radicand,
            }
        })
        .collect();
    GExpansion { coefficients, pairings }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApproxMargin {
    #[serde(with = "crate::exact::serde_rational")]
    pub lhs: Rational,
    #[serde(with = "crate::exact::serde_rational")]
    pub rhs: Rational,
    #[serde(with = "crate::exact::serde_rational")]
    pub margin: Rational,
    /// Whether `10(d+1)²Δ²e^{2dΔ} ≤ 1` is certified.
    pub condition_holds: bool,
}

/// `10(d+1)²Δ²e^{2dΔ}` as an enclosure.
pub fn approx_condition_value(d: usize, delta: &Rational) -> IntervalBound {
    let poly = int(10) * int((d + 1) as i64).pow(2) * delta * delta;
    &IntervalBound::point(poly) * &IntervalBound::point(int(2 * d as i64) * delta).exp()
}

/// `⟨g, g⟩ − 10Δ²g(−Δ)²`.
pub fn approx_statement_margin(d: usize, delta: &Rational, g: &RatPoly) -> Result<ApproxMargin> {
    if g.degree().unwrap_or(0) > d {
        return Err(Error::invalid("g", format!("degree exceeds d={d}")));
    }
    if !delta.is_positive() {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let lhs = weighted_inner_product(g, g);
    let at = g.eval(&-delta);
    let rhs = int(10) * delta * delta * &at * &at;
    let condition_holds = approx_condition_value(d, delta).certainly_le(&IntervalBound::from_int(1));
    Ok(ApproxMargin {
        margin: &lhs - &rhs,
        lhs,
        rhs,
        condition_holds,
    })
}

/// `|h_k(x)| ≤ √(k+1)·e^{k|x|}`, certified as `P_k(x)² ≤ (k+1)N_k e^{2k|x|}`.
pub fn growth_bound_holds(k: usize, x: &Rational) -> bool {
    let v = h_poly(k).p.eval(x);
    let lhs = IntervalBound::point(&v * &v);
    let scale = IntervalBound::point(Rational::from_integer(normalizer(k) * BigInt::from(k + 1)));
    let e = IntervalBound::point(int(2 * k as i64) * x.abs()).exp();
    lhs.certainly_le(&(&scale * &e))
}

/// `|h_k(x)| ≤ (2x)^k` for `x ≥ 1`, decided exactly.
pub fn large_x_bound_holds(k: usize, x: &Rational) -> Result<bool> {
    if x < &int(1) {
        return Err(Error::invalid("x", "needs x >= 1"));
    }
    let v = h_poly(k).p.eval(x);
    Ok(&v * &v <= Rational::from_integer(normalizer(k)) * pow(&(int(2) * x), 2 * k))
}

/// `g(y)² ≤ 2(2y)^{2d}·⟨g,g⟩` for `y ≥ 1`, `d = deg g`, decided exactly.
pub fn tail_envelope_holds(g: &RatPoly, y: &Rational) -> Result<bool> {
    if y < &int(1) {
        return Err(Error::invalid("y", "needs y >= 1"));
    }
    let d = g.degree().unwrap_or(0);
    let v = g.eval(y);
    Ok(&v * &v <= int(2) * pow(&(int(2) * y), 2 * d) * weighted_inner_product(g, g))
}

/// `∫₀^∞ h_j² e^{−x} dx`, exact.
pub fn unweighted_square_integral(j: usize) -> Rational {
    let p = h_poly(j).p;
    plain_inner_product(&p, &p) / Rational::from_integer(normalizer(j))
}

/// A root of `P_k` inside `[lo, hi]`, with `e^{−mid}` enclosed once.
#[derive(Clone, Debug)]
struct RootCell {
    mid: Rational,
    half: Rational,
    decay_mid: IntervalBound,
    /// Upper bound on `e^{−lo}`.
    decay_lo: Rational,
}

const ROOT_WIDTH_BITS: usize = 200;

fn root_cells(k: usize) -> Vec<RootCell> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Vec<RootCell>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(v) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&k) {
        return v.clone();
    }
    let p = h_poly(k).p;
    // Cauchy bound for a monic polynomial.
    let bound = p.coeffs().iter().map(|c| c.abs()).max().unwrap_or_else(Rational::zero) + int(1);
    let width = Rational::new(BigInt::from(1), BigInt::from(1) << ROOT_WIDTH_BITS);
    let coarse = Rational::new(BigInt::from(1), BigInt::from(1) << 64usize);
    let cells: Vec<RootCell> = p
        .isolate_roots(&int(0), &bound, &width)
        .into_iter()
        .map(|(lo, hi)| {
            let mid = (&lo + &hi) / int(2);
            // e^{−mid} through a 64-bit dyadic bracket of mid keeps the series short.
            let lo64 = (&mid / &coarse).floor() * &coarse;
            let hi64 = (&mid / &coarse).ceil() * &coarse;
            let decay_mid = (-IntervalBound::new(lo64.clone(), hi64).expect("ordered")).exp();
            let floor_lo = (&lo / &coarse).floor() * &coarse;
            let decay_lo = (-IntervalBound::point(floor_lo)).exp().hi().clone();
            RootCell {
                half: (&hi - &lo) / int(2),
                mid,
                decay_mid,
                decay_lo,
            }
        })
        .collect();
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(k, cells.clone());
    cells
}

/// `sup |p|` over `[m − h, m + h] ⊂ [0, ∞)`, by the mean value theorem with a
/// termwise bound on `|p′|`.
fn sup_abs_near(p: &RatPoly, m: &Rational, h: &Rational) -> Rational {
    // Coarse `top` is fine: the bound only needs to be an upper bound.
    let top = (m + h).ceil();
    let abs_der = RatPoly::new(
        p.coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.abs() * int(i as i64))
            .collect(),
    );
    ScaledPoly::new(p).eval(m).abs() + h * abs_der.eval(&top)
}

/// Enclosure of `∫₀^∞ |h_j h_{j′}| x e^{−x} dx`.
///
/// The sign changes of the integrand are the roots of `P_j` and `P_{j′}`,
/// isolated to width `2^{−200}`. Between consecutive breakpoints the integral
/// is exact: `∫_a^b q e^{−x} = Q(a)e^{−a} − Q(b)e^{−b}` with `Q = Σ_i q^{(i)}`.
/// Replacing each root by its interval midpoint costs at most the integrand's
/// mass over half the isolating interval; that mass is bounded and added on
/// both sides.
pub fn abs_product_integral(j: usize, jp: usize) -> IntervalBound {
    if j == jp {
        // Non-negative integrand: the absolute value is the norm itself.
        let p = h_poly(j).p;
        return IntervalBound::point(weighted_inner_product(&p, &p) / Rational::from_integer(normalizer(j)));
    }
    abs_product_enclosure(j, jp)
}

fn abs_product_enclosure(j: usize, jp: usize) -> IntervalBound {
    let (pj, pjp) = (h_poly(j).p, h_poly(jp).p);
    let q = &(&pj * &pjp) * &RatPoly::x();
    let mut big_q = RatPoly::zero();
    let mut der = q.clone();
    while !der.is_zero() {
        big_q = &big_q + &der;
        der = der.derivative();
    }

    let fast_q = ScaledPoly::new(&big_q);
    let mut cells = root_cells(j);
    cells.extend(root_cells(jp));
    cells.sort_by(|a, b| a.mid.cmp(&b.mid));
    let mut slack = Rational::zero();
    // Antiderivative values Q(b)e^{−b} at the breakpoints 0, mids, ∞.
    let mut anti = vec![IntervalBound::point(big_q.eval(&Rational::zero()))];
    for c in &cells {
        let sup_q = (&c.mid + &c.half) * sup_abs_near(&pj, &c.mid, &c.half) * sup_abs_near(&pjp, &c.mid, &c.half);
        slack += &c.half * sup_q * &c.decay_lo;
        anti.push(&IntervalBound::point(fast_q.eval(&c.mid)) * &c.decay_mid);
    }
    anti.push(IntervalBound::from_int(0));

    let mut total = IntervalBound::from_int(0);
    for pair in anti.windows(2) {
        total = &total + &(&pair[0] - &pair[1]).abs();
    }

    let slack = int(2) * slack;
    let raw = IntervalBound::new((total.lo() - &slack).max(Rational::zero()), total.hi() + &slack)
        .expect("ordered endpoints");
    let norm = IntervalBound::point(Rational::from_integer(normalizer(j) * normalizer(jp)))
        .sqrt()
        .expect("positive");
    &raw / &norm
}
