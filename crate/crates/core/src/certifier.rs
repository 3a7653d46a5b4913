//! Rigorous checks of the lower-bound conditions, and the variant of the
//! pseudo-expectation with Boolean auxiliary variables.
//!
//! A certified `(n, d, d2, t)` rules out `Ẽ_{2n}[g²] < 0` for every `g` of
//! degree at most `d/2`. The element count is `2n`, not `n`: the conditions
//! are stated on `Ω_{n,d2}`, which arises from `Ẽ_{2n}`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    binomial, factorial, falling, first_non_psd_prefix, int, rat, IntervalBound, RatPoly, Rational, SymMatrix,
};
use crate::omega::OmegaDist;
use crate::pe::{IndexMonomial, PEContext};
use crate::quadrature::{
    integration_error_bound, serialize_interval, validate_error_bound, window_lower_value, MAX_ORDER,
};
use crate::witness::FailingDegree;

/// Orders of the corrected rule tried by [`best_certified_lower_bound`].
pub const SCAN_ORDERS: [usize; 4] = [1, 2, 3, 4];

/// One inequality `lhs ≤ rhs` with outward-rounded enclosures of both sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionResult {
    pub name: String,
    #[serde(rename = "lhs_interval", serialize_with = "serialize_interval")]
    pub lhs: IntervalBound,
    #[serde(rename = "rhs_interval", serialize_with = "serialize_interval")]
    pub rhs: IntervalBound,
    /// `rhs − lhs`.
    #[serde(serialize_with = "serialize_interval")]
    pub margin: IntervalBound,
    /// Both sides are exact rationals, so a zero margin is a rigorous pass.
    pub exact: bool,
    pub pass: bool,
}

impl ConditionResult {
    fn new(name: impl Into<String>, lhs: IntervalBound, rhs: IntervalBound, exact: bool) -> Self {
        let margin = &rhs - &lhs;
        // Transcendental sides must separate strictly; exact sides may touch.
        let pass = if exact {
            lhs.certainly_le(&rhs)
        } else {
            lhs.certainly_lt(&rhs)
        };
        ConditionResult {
            name: name.into(),
            lhs,
            rhs,
            margin,
            exact,
            pass,
        }
    }

    fn exact(name: impl Into<String>, lhs: Rational, rhs: Rational) -> Self {
        Self::new(name, IntervalBound::point(lhs), IntervalBound::point(rhs), true)
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1 } else { 0 };
        Self::exact(name, int(1 - v), int(0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateReport {
    pub n: u64,
    pub d: usize,
    pub d2: u64,
    pub t: usize,
    #[serde(with = "crate::exact::serde_rational")]
    pub delta: Rational,
    /// Auxiliary variables per element; present only for the Boolean variant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    /// Size of the ordering instance the verdict is about.
    pub elements: u64,
    /// Largest degree of `g` excluded, as `p/q`: `d/2`.
    pub sos_degree: String,
    pub degenerate: bool,
    pub conditions: Vec<ConditionResult>,
    pub certified: bool,
}

impl CertificateReport {
    fn finish(
        n: u64,
        d: usize,
        d2: u64,
        t: usize,
        delta: Rational,
        m: Option<u64>,
        degenerate: bool,
        conditions: Vec<ConditionResult>,
    ) -> Self {
        let certified = !degenerate && !conditions.is_empty() && conditions.iter().all(|c| c.pass);
        let half = rat(d as i64, 2);
        CertificateReport {
            n,
            d,
            d2,
            t,
            delta,
            m,
            elements: 2 * n,
            sos_degree: format!("{}/{}", half.numer(), half.denom()),
            degenerate,
            conditions,
            certified,
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &ConditionResult> {
        self.conditions.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "n={} d={} d2={} t={} delta={} certified={}",
            self.n, self.d, self.d2, self.t, self.delta, self.certified
        )?;
        for c in &self.conditions {
            writeln!(f, "  {:<24} {} <= {} : {}", c.name, c.lhs, c.rhs, c.pass)?;
        }
        Ok(())
    }
}

/// `16·d2² ≤ n`, the exact form of `d2 ≤ √n/4`.
fn upper_window(n: u64, d2: u64) -> bool {
    16 * (d2 as u128) * (d2 as u128) <= n as u128
}

/// Smallest `d2` with `(4d+2)ln(d2) + 2ln(20) ≤ d2 ≤ √n/4`.
///
/// `d2 − (4d+2)ln d2` is decreasing below `4d+2` and increasing above, and
/// it is below `2ln 20` everywhere up to `4d+2`, so the feasible set of the
/// lower inequality is a ray and a binary search over `[4d+2, ⌊√n/4⌋]` finds
/// its first point.
pub fn find_d2(d: usize, n: u64) -> Option<u64> {
    if d == 0 {
        return None;
    }
    let lower_ok = |d2: u64| {
        window_lower_value(d, d2)
            .map(|v| v.certainly_le(&IntervalBound::from_int(d2 as i64)))
            .unwrap_or(false)
    };
    let hi_start = (n / 16).isqrt();
    debug_assert!(upper_window(n, hi_start) && !upper_window(n, hi_start + 1));
    let mut hi = hi_start;
    let mut lo = 4 * d as u64 + 2;
    if hi < lo || !lower_ok(hi) {
        return None;
    }
    // Invariant: lower_ok(hi), and every d2 < lo fails.
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if lower_ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(hi)
}

fn window_conditions(d: usize, d2: u64, n_eff: u64) -> Result<Vec<ConditionResult>> {
    let lower = ConditionResult::new(
        "window_lower",
        window_lower_value(d, d2)?,
        IntervalBound::from_int(d2 as i64),
        false,
    );
    let quarter_root = &IntervalBound::from_int(n_eff as i64).sqrt()? * &IntervalBound::point(rat(1, 4));
    let mut upper = ConditionResult::new("window_upper", IntervalBound::from_int(d2 as i64), quarter_root, true);
    // Decided exactly by squaring; the enclosure is only for display.
    upper.pass = upper_window(n_eff, d2);
    Ok(vec![lower, upper])
}

fn quadrature_conditions(t: usize, d: usize, delta: &Rational) -> Result<Vec<ConditionResult>> {
    let validated = (1..=MAX_ORDER).contains(&t) && validate_error_bound(t)?;
    let mut out = vec![ConditionResult::flag("error_bound_validated", validated)];
    if (1..=MAX_ORDER).contains(&t) {
        let bound = integration_error_bound(t, d, delta)?.value;
        out.push(ConditionResult::new(
            "integration_error",
            bound,
            IntervalBound::point(rat(1, 2)),
            false,
        ));
    }
    Ok(out)
}

/// Evaluates the three conditions for `Ẽ_{2n}` with `Δ = 2d2/n`.
///
/// Inputs with `d = 0`, `d2 = 0` or `2d > d2` or `d2 > n` are flagged as
/// degenerate and never certify.
pub fn check_conditions(n: u64, d: usize, d2: u64, t: usize) -> CertificateReport {
    let delta = if n == 0 {
        Rational::zero()
    } else {
        Rational::new(BigInt::from(2 * d2), BigInt::from(n))
    };
    let degenerate = d == 0 || n == 0 || d2 == 0;
    let mut conditions = vec![ConditionResult::exact("d2_range", int(2 * d as i64), int(d2 as i64))];
    if d2 > n {
        conditions.push(ConditionResult::exact("d2_at_most_n", int(d2 as i64), int(n as i64)));
    }
    if degenerate {
        return CertificateReport::finish(n, d, d2, t, delta, None, true, conditions);
    }
    let built = (|| -> Result<Vec<ConditionResult>> {
        let mut out = window_conditions(d, d2, n)?;
        let dd = int(d as i64 + 1);
        let growth = IntervalBound::point(int(10) * &dd * &dd * &delta * &delta)
            * IntervalBound::point(int(2 * d as i64) * &delta).exp();
        out.push(ConditionResult::new(
            "approximate_statement",
            growth,
            IntervalBound::from_int(1),
            false,
        ));
        out.extend(quadrature_conditions(t, d, &delta)?);
        Ok(out)
    })();
    match built {
        Ok(c) => conditions.extend(c),
        Err(e) => {
            conditions.push(ConditionResult::flag(format!("evaluable: {e}"), false));
        }
    }
    CertificateReport::finish(n, d, d2, t, delta, None, false, conditions)
}

/// Largest `d` certified by [`check_conditions`] for order `t`, trying the
/// smallest feasible `d2` for each `d`. Every condition other than the
/// lower window only gets harder as `Δ = 2d2/n` or `d` grows, so the
/// smallest `d2` is optimal and the scan stops at the first uncertified `d`.
/// The result is about `2n` elements, with SOS degree `d/2`.
pub fn certified_lower_bound(n: u64, t: usize) -> usize {
    certified_lower_bound_report(n, t).map_or(0, |r| r.d)
}

/// The report behind [`certified_lower_bound`], if any `d ≥ 1` certifies.
pub fn certified_lower_bound_report(n: u64, t: usize) -> Option<CertificateReport> {
    let mut best = None;
    for d in 1.. {
        let Some(d2) = find_d2(d, n) else { break };
        let report = check_conditions(n, d, d2, t);
        if !report.certified {
            break;
        }
        best = Some(report);
    }
    best
}

/// Best of [`certified_lower_bound`] over [`SCAN_ORDERS`], with the winning `t`
/// (the smallest one among ties).
pub fn best_certified_lower_bound(n: u64) -> (usize, Option<CertificateReport>) {
    let mut best: (usize, Option<CertificateReport>) = (0, None);
    for t in SCAN_ORDERS {
        if let Some(r) = certified_lower_bound_report(n, t) {
            if r.d > best.0 {
                best = (r.d, Some(r));
            }
        }
    }
    best
}

/// `Ẽ` with Boolean auxiliary variables `z_{jk}`, `k ∈ [m]`, standing in for `z_j²`.
#[derive(Debug)]
pub struct BooleanPEContext {
    n: usize,
    m: usize,
    base: PEContext,
}

impl BooleanPEContext {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        let base = PEContext::new(n)?;
        if m + 2 < n {
            return Err(Error::invalid("m", format!("need m >= n-2 = {}, got {m}", n - 2)));
        }
        Ok(BooleanPEContext { n, m, base })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn base(&self) -> &PEContext {
        &self.base
    }
}

/// `x`-monomial times Boolean auxiliary variables; `z_{jk}² = z_{jk}` so
/// each block is a set of `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BooleanMonomial {
    x: IndexMonomial,
    z: BTreeMap<usize, std::collections::BTreeSet<usize>>,
}

impl BooleanMonomial {
    pub fn one() -> Self {
        Self::default()
    }

    /// The `x` part must be `z`-free.
    pub fn from_x(x: IndexMonomial) -> Result<Self> {
        if !x.is_z_free() {
            return Err(Error::invalid("x", "expected an x-only monomial"));
        }
        Ok(BooleanMonomial { x, z: BTreeMap::new() })
    }

    /// # Panics
    /// If `j` or `k` is zero.
    pub fn z(j: usize, k: usize) -> Self {
        assert!(j > 0 && k > 0, "z({j},{k}) is not a valid variable");
        let mut out = Self::default();
        out.z.entry(j).or_default().insert(k);
        out
    }

    pub fn mul(&self, other: &BooleanMonomial) -> BooleanMonomial {
        let mut out = BooleanMonomial {
            x: self.x.mul(&other.x),
            z: self.z.clone(),
        };
        for (j, ks) in &other.z {
            out.z.entry(*j).or_default().extend(ks.iter().copied());
        }
        out
    }

    pub fn x_part(&self) -> &IndexMonomial {
        &self.x
    }

    pub fn z_blocks(&self) -> &BTreeMap<usize, std::collections::BTreeSet<usize>> {
        &self.z
    }

    pub fn degree(&self) -> u32 {
        self.x.degree() + self.z.values().map(|s| s.len() as u32).sum::<u32>()
    }
}

impl fmt::Display for BooleanMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.x.degree() > 0 {
            parts.push(self.x.to_string());
        }
        for (j, ks) in &self.z {
            for k in ks {
                parts.push(format!("z({j},{k})"));
            }
        }
        if parts.is_empty() {
            return write!(f, "1");
        }
        write!(f, "{}", parts.join("*"))
    }
}

/// Coefficients of `w(w−1)⋯(w−r+1)` in powers of `w`.
fn falling_poly(r: usize) -> RatPoly {
    (0..r).fold(RatPoly::one(), |p, a| &p * &RatPoly::from_ints(&[-(a as i64), 1]))
}

/// Exact `Ẽ` of a Boolean monomial: each block `Π_{k∈K} z_{jk}` becomes
/// `w_j(w_j−1)⋯(w_j−|K|+1) / (m(m−1)⋯(m−|K|+1))`, and the resulting powers
/// of `w_j` are evaluated as `z_j²` powers by the base context.
pub fn boolean_pe_eval(ctx: &BooleanPEContext, mono: &BooleanMonomial) -> Result<Rational> {
    for (&j, ks) in &mono.z {
        if j == 0 || j > ctx.n {
            return Err(Error::invalid(
                "monomial",
                format!("element index {j} outside [1,{}]", ctx.n),
            ));
        }
        if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > ctx.m) {
            return Err(Error::invalid(
                "monomial",
                format!("auxiliary index {k} outside [1,{}]", ctx.m),
            ));
        }
    }
    // Expand the product over blocks into (w-exponent vector, coefficient).
    let mut terms: Vec<(IndexMonomial, Rational)> = vec![(mono.x.clone(), Rational::one())];
    for (&j, ks) in &mono.z {
        let r = ks.len();
        let poly = falling_poly(r);
        let scale = Rational::one() / falling(&int(ctx.m as i64), r);
        let mut next = Vec::new();
        for (m, c) in &terms {
            for (e, coef) in poly.coeffs().iter().enumerate() {
                if coef.is_zero() {
                    continue;
                }
                let w_pow = IndexMonomial::z(j).pow(2 * e as u32);
                next.push((m.mul(&w_pow), c * coef * &scale));
            }
        }
        terms = next;
    }
    let mut total = Rational::zero();
    for (m, c) in &terms {
        total += c * ctx.base.pe_eval(m)?;
    }
    Ok(total)
}

/// Polynomial in Boolean monomials.
pub type BooleanPoly = Vec<(BooleanMonomial, Rational)>;

pub fn boolean_pe_eval_poly(ctx: &BooleanPEContext, p: &BooleanPoly) -> Result<Rational> {
    let mut total = Rational::zero();
    for (m, c) in p {
        total += c * boolean_pe_eval(ctx, m)?;
    }
    Ok(total)
}

/// `Σ_{i≠j} x_ij − 1 − Σ_k z_{jk}`, the Boolean form of `Σ_{i≠j} x_ij = 1 + Σ_k z_{jk}²`.
pub fn boolean_constraint(ctx: &BooleanPEContext, j: usize) -> BooleanPoly {
    let mut p: BooleanPoly = vec![(BooleanMonomial::one(), int(-1))];
    for i in (1..=ctx.n).filter(|&i| i != j) {
        p.push((BooleanMonomial::from_x(IndexMonomial::x(i, j)).expect("x only"), int(1)));
    }
    for k in 1..=ctx.m {
        p.push((BooleanMonomial::z(j, k), int(-1)));
    }
    p
}

/// Boolean monomials of degree at most `deg` with no repeated variable.
pub fn boolean_monomials(n: usize, m: usize, deg: u32) -> Vec<BooleanMonomial> {
    let mut vars = Vec::new();
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            vars.push(BooleanMonomial::from_x(IndexMonomial::x(i, j)).expect("x only"));
        }
    }
    for j in 1..=n {
        for k in 1..=m {
            vars.push(BooleanMonomial::z(j, k));
        }
    }
    let mut out = vec![BooleanMonomial::one()];
    let mut layer: Vec<(usize, BooleanMonomial)> = vec![(0, BooleanMonomial::one())];
    for _ in 0..deg {
        let mut next = Vec::new();
        for (start, mono) in &layer {
            for (v, var) in vars.iter().enumerate().skip(*start) {
                next.push((v + 1, mono.mul(var)));
            }
        }
        out.extend(next.iter().map(|(_, m)| m.clone()));
        layer = next;
    }
    out
}

/// `Ẽ[p·(Σ_{i≠j} x_ij − 1 − Σ_k z_{jk})] = 0` for every `j` and every
/// Boolean monomial `p` of degree at most `p_degree`.
pub fn boolean_constraint_ideal(n: usize, m: usize, p_degree: u32) -> Result<crate::pe::identities::IdentityOutcome> {
    let ctx = BooleanPEContext::new(n, m)?;
    let mut out = crate::pe::identities::IdentityOutcome::new(format!("boolean_constraint_n{n}_m{m}"));
    let constraints: Vec<BooleanPoly> = (1..=n).map(|j| boolean_constraint(&ctx, j)).collect();
    for p in boolean_monomials(n, m, p_degree) {
        for (j, s) in constraints.iter().enumerate() {
            let prod: BooleanPoly = s.iter().map(|(mono, c)| (p.mul(mono), c.clone())).collect();
            let v = boolean_pe_eval_poly(&ctx, &prod)?;
            out.record(v.is_zero(), || format!("p={p} j={}: {v}", j + 1));
        }
    }
    Ok(out)
}

/// `Π_{a=1}^{j}(u−a) / j!`.
pub fn falling_weight(u: i64, j: usize) -> Rational {
    let mut num = BigInt::one();
    for a in 1..=j as i64 {
        num *= BigInt::from(u - a);
    }
    Rational::new(num, factorial(j))
}

/// `Π_{a=1}^{j}(u−a)/j! ≥ C(2j−1, j)·(u − 2j + 1)` for all `1 ≤ j ≤ j_max`, `0 ≤ u ≤ u_max`.
pub fn shifting_lemma(j_max: usize, u_max: u64) -> crate::pe::identities::IdentityOutcome {
    let mut out = crate::pe::identities::IdentityOutcome::new("shifting_lemma");
    for j in 1..=j_max {
        let c = binomial(2 * j as i64 - 1, j as i64).expect("small");
        for u in 0..=u_max as i64 {
            let lhs = falling_weight(u, j);
            let rhs = Rational::from_integer(&c * BigInt::from(u - 2 * j as i64 + 1));
            out.record(lhs >= rhs, || format!("j={j} u={u}: {lhs} < {rhs}"));
        }
    }
    out
}

/// `B(a, b) = Σ_{u=1}^{n−d2} C(n−u−1, d2−1)/C(n−1, d2−1) · (Π_{a=1}^{j}(u−a)/j!) · u^{a+b}`
/// for `0 ≤ a, b ≤ d`, optionally minus `6/5` at `(0, 0)`.
fn boolean_form(n: u64, d2: u64, j: usize, d: usize, boundary: bool) -> Result<SymMatrix> {
    let dist = OmegaDist::new(n, d2)?;
    if j == 0 {
        return Err(Error::invalid("j", "need j >= 1"));
    }
    // pmf(u)·C(n,d2)/C(n−1,d2−1) = C(n−u−1,d2−1)/C(n−1,d2−1).
    let rescale = Rational::new(binomial(n as i64, d2 as i64)?, binomial(n as i64 - 1, d2 as i64 - 1)?);
    let mut sums = vec![Rational::zero(); 2 * d + 1];
    for u in 1..=(n - d2) as i64 {
        let w = falling_weight(u, j);
        if w.is_zero() {
            continue;
        }
        let mut term = dist.pmf(u) * &rescale * w;
        let ub = int(u);
        for s in sums.iter_mut() {
            *s += &term;
            term *= &ub;
        }
    }
    let labels = (0..=d).map(|a| format!("u^{a}")).collect();
    Ok(SymMatrix::from_fn(labels, |a, b| {
        let v = sums[a + b].clone();
        if boundary && a == 0 && b == 0 {
            v - rat(6, 5)
        } else {
            v
        }
    }))
}

/// The quadratic form `Σ_u (…)·g(u)² − 1.2·g(0)²` in the basis `1, u, …, u^d`.
pub fn boolean_signed_form(n: u64, d2: u64, j: usize, d: usize) -> Result<SymMatrix> {
    boolean_form(n, d2, j, d, true)
}

/// [`boolean_signed_form`] without the boundary term; PSD since every weight is non-negative.
pub fn boolean_weight_form(n: u64, d2: u64, j: usize, d: usize) -> Result<SymMatrix> {
    boolean_form(n, d2, j, d, false)
}

pub fn boolean_first_failure_witness(n: u64, d2: u64, j: usize, d_max: usize) -> Result<Option<FailingDegree>> {
    if j == 0 || j > d_max {
        return Err(Error::invalid("j", format!("need 1 <= j <= d_max = {d_max}, got {j}")));
    }
    let form = boolean_signed_form(n, d2, j, d_max)?;
    Ok(
        first_non_psd_prefix(&form).map(|(m_star, direction, value)| FailingDegree {
            m_star,
            direction,
            value,
        }),
    )
}

/// First degree at which the Boolean-weighted form fails to be PSD.
pub fn boolean_first_failure(n: u64, d2: u64, j: usize, d_max: usize) -> Result<Option<usize>> {
    Ok(boolean_first_failure_witness(n, d2, j, d_max)?.map(|f| f.m_star))
}

/// `(n−1)!(n′−d2)! / ((n′−1)!(n−d2)!·C(2j−1, j))`, exact.
pub fn boolean_shift_factor(n: u64, n_prime: u64, d2: u64, j: usize) -> Result<Rational> {
    if n_prime == 0 || n_prime < d2 || n < n_prime {
        return Err(Error::invalid(
            "n_prime",
            format!("need d2 <= n' <= n, got n={n} n'={n_prime} d2={d2}"),
        ));
    }
    // (n−1)!/(n′−1)! and (n−d2)!/(n′−d2)! are both products of n − n′ factors.
    let gap = (n - n_prime) as usize;
    let num = falling(&int(n as i64 - 1), gap);
    let den = falling(&int((n - d2) as i64), gap);
    Ok(num / den / Rational::from_integer(binomial(2 * j as i64 - 1, j as i64)?))
}

/// Conditions for the Boolean encoding with `m` auxiliary variables per
/// element, `n′ = n − 2d + 2` and `Δ = 2d2/n′`. Certification needs
/// `m ≥ 15nd`.
pub fn check_boolean_conditions(n: u64, d: usize, d2: u64, t: usize, m: u64) -> CertificateReport {
    let n_prime = (n + 2).saturating_sub(2 * d as u64);
    let degenerate = d == 0 || d2 == 0 || n_prime == 0 || n_prime < d2;
    let delta = if n_prime == 0 {
        Rational::zero()
    } else {
        Rational::new(BigInt::from(2 * d2), BigInt::from(n_prime))
    };
    let mut conditions = vec![
        ConditionResult::exact("d2_range", int(2 * d as i64), int(d2 as i64)),
        ConditionResult::exact(
            "aux_count",
            Rational::from_integer(BigInt::from(15u64) * n * d),
            int(m as i64),
        ),
    ];
    if d2 > n {
        conditions.push(ConditionResult::exact("d2_at_most_n", int(d2 as i64), int(n as i64)));
    }
    if degenerate {
        return CertificateReport::finish(n, d, d2, t, delta, Some(m), true, conditions);
    }
    let built = (|| -> Result<Vec<ConditionResult>> {
        let mut out = window_conditions(d, d2, n_prime)?;
        let dd = int(d as i64 + 1);
        for j in 1..=d {
            let factor = boolean_shift_factor(n, n_prime, d2, j)?;
            let lhs = IntervalBound::point(factor * &delta * &delta * &dd * &dd)
                * IntervalBound::point(int((2 * d * (2 * j - 1)) as i64) * &delta).exp();
            out.push(ConditionResult::new(
                format!("shifted_statement_j{j}"),
                lhs,
                IntervalBound::point(rat(1, 10)),
                false,
            ));
        }
        out.extend(quadrature_conditions(t, d, &delta)?);
        Ok(out)
    })();
    match built {
        Ok(c) => conditions.extend(c),
        Err(e) => conditions.push(ConditionResult::flag(format!("evaluable: {e}"), false)),
    }
    CertificateReport::finish(n, d, d2, t, delta, Some(m), false, conditions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ldl_status;
    use crate::omega::{omega_first_failure, omega_signed_form};

    #[test]
    fn find_d2_examples() {
        assert_eq!(find_d2(1, 1 << 40), Some(26));
        assert_eq!(find_d2(1, 100), None);
        assert_eq!(find_d2(0, 1 << 40), None);
        // 26 = √10816/4 exactly, accepted at the boundary.
        assert_eq!(find_d2(1, 10_816), Some(26));
        assert_eq!(find_d2(1, 10_815), None);
        // Brute force with f64 away from the boundary.
        for d in 1..=4usize {
            let d2 = find_d2(d, 1 << 40).unwrap();
            let f = |x: f64| (4.0 * d as f64 + 2.0) * x.ln() + 2.0 * 20f64.ln() <= x;
            assert!(f(d2 as f64) && !f(d2 as f64 - 1.0), "d={d} d2={d2}");
            assert!((1..d2).all(|x| !f(x as f64)));
        }
    }

    #[test]
    fn check_conditions_examples() {
        let big = check_conditions(1 << 40, 1, 26, 2);
        assert!(big.certified, "{big}");
        assert!(big
            .conditions
            .iter()
            .filter(|c| !c.exact)
            .all(|c| c.margin.lo() > &Rational::zero()));
        let small = check_conditions(100, 1, 26, 2);
        assert!(!small.certified);
        let verdict = |name: &str| small.conditions.iter().find(|c| c.name == name).map(|c| c.pass);
        assert_eq!(verdict("window_upper"), Some(false));
        assert_eq!(verdict("window_lower"), Some(true));
        let zero = check_conditions(1 << 40, 0, 26, 2);
        assert!(zero.degenerate && !zero.certified);
        assert!(!check_conditions(1 << 40, 20, 26, 2).certified);
        assert_eq!(big.elements, 1 << 41);
        assert_eq!(big.sos_degree, "1/2");
    }

    #[test]
    fn report_json_schema() {
        let r = check_conditions(1 << 20, 1, 26, 3);
        let v = serde_json::to_value(&r).unwrap();
        for key in ["n", "d", "d2", "t", "delta", "conditions", "certified"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["delta"], "13/262144");
        let c = &v["conditions"][0];
        for key in ["name", "lhs_interval", "rhs_interval", "pass"] {
            assert!(c.get(key).is_some(), "{key}");
        }
        assert!(v.get("m").is_none());
    }

    #[test]
    fn certified_implies_positive_margins() {
        for (n, d, d2, t) in [
            (1u64 << 30, 3usize, 60u64, 2usize),
            (10_816, 1, 26, 1),
            (1 << 24, 2, 44, 4),
        ] {
            let r = check_conditions(n, d, d2, t);
            if r.certified {
                for c in &r.conditions {
                    assert!(c.pass);
                    if c.exact {
                        assert!(c.margin.lo() >= &Rational::zero());
                    } else {
                        assert!(c.margin.lo() > &Rational::zero(), "{}", c.name);
                    }
                }
            }
        }
    }

    #[test]
    fn certified_bound_small_n() {
        assert_eq!(certified_lower_bound(16, 2), 0);
        assert_eq!(certified_lower_bound(10_815, 2), 0);
        assert_eq!(certified_lower_bound(10_816, 1), 1);
    }

    #[test]
    fn certified_bound_monotone() {
        for t in 1..=2 {
            let mut n = 10_000u64;
            let mut prev = certified_lower_bound(n, t);
            while n < 10_000_000 {
                n *= 4;
                let cur = certified_lower_bound(n, t);
                assert!(cur >= prev, "t={t} n={n}: {cur} < {prev}");
                prev = cur;
            }
        }
    }

    #[test]
    fn soundness_on_desk_scale() {
        // Every certified tuple has a PSD signed form through degree d.
        for (n, t) in [(10_816u64, 1usize), (12_000, 2), (31_000, 3)] {
            let Some(r) = certified_lower_bound_report(n, t) else {
                continue;
            };
            assert_eq!(omega_first_failure(r.n, r.d2, r.d).unwrap(), None, "{r}");
        }
    }

    #[test]
    fn boolean_pe_examples() {
        let ctx = BooleanPEContext::new(5, 4).unwrap();
        let base = ctx.base();
        let x = BooleanMonomial::from_x(IndexMonomial::x(2, 3)).unwrap();
        let z11 = BooleanMonomial::z(1, 1);
        let w1 = IndexMonomial::z(1).pow(2);
        // Ẽ[z11·p] = Ẽ[w1·p]/m.
        let lhs = boolean_pe_eval(&ctx, &z11.mul(&x)).unwrap();
        assert_eq!(lhs, base.pe_eval(&w1.mul(&IndexMonomial::x(2, 3))).unwrap() / int(4));
        // Ẽ[z11 z12] = Ẽ[w1(w1−1)]/(m(m−1)).
        let lhs = boolean_pe_eval(&ctx, &z11.mul(&BooleanMonomial::z(1, 2))).unwrap();
        let rhs = (base.pe_eval(&w1.pow(2)).unwrap() - base.pe_eval(&w1).unwrap()) / int(12);
        assert_eq!(lhs, rhs);
        // z²=z.
        assert_eq!(
            boolean_pe_eval(&ctx, &z11.mul(&z11)).unwrap(),
            boolean_pe_eval(&ctx, &z11).unwrap()
        );
        // z-free delegates.
        assert_eq!(boolean_pe_eval(&ctx, &x).unwrap(), rat(1, 2));
        assert!(BooleanPEContext::new(6, 3).is_err());
        assert!(boolean_pe_eval(&ctx, &BooleanMonomial::z(1, 5)).is_err());
    }

    #[test]
    fn boolean_probabilities_are_probabilities() {
        // Ẽ[z_{j1}] = E[w_j]/m lies in [0,1], and every block of size up to m stays in [0,1].
        let ctx = BooleanPEContext::new(5, 3).unwrap();
        let mut block = BooleanMonomial::one();
        for k in 1..=3 {
            block = block.mul(&BooleanMonomial::z(2, k));
            let v = boolean_pe_eval(&ctx, &block).unwrap();
            assert!(v >= Rational::zero() && v <= int(1), "k={k}: {v}");
        }
    }

    #[test]
    fn boolean_constraint_ideal_n4_m3() {
        let out = boolean_constraint_ideal(4, 3, 2).unwrap();
        assert!(out.holds(), "{out:?}");
        // 24 variables: 1 + 24 + C(24, 2) monomials, four constraints each.
        assert_eq!(out.cases, 4 * (1 + 24 + 276));
    }

    #[test]
    fn shifting_lemma_exhaustive() {
        let out = shifting_lemma(8, 500);
        assert!(out.holds(), "{out:?}");
        assert_eq!(out.cases, 8 * 501);
        // Equality at u = 2j.
        assert_eq!(falling_weight(4, 2), int(3));
        for j in 1..=8usize {
            let c = binomial(2 * j as i64 - 1, j as i64).unwrap();
            assert_eq!(falling_weight(2 * j as i64, j), Rational::from_integer(c));
        }
    }

    #[test]
    fn boolean_weight_form_psd() {
        for j in 1..=3 {
            for d in 0..=3 {
                assert!(
                    ldl_status(&boolean_weight_form(40, 3, j, d).unwrap()).is_psd(),
                    "j={j} d={d}"
                );
            }
        }
    }

    #[test]
    fn boolean_j1_matches_omega() {
        for (n, d2) in [(12u64, 2u64), (30, 3), (50, 5)] {
            let rescale = Rational::new(
                binomial(n as i64, d2 as i64).unwrap(),
                binomial(n as i64 - 1, d2 as i64 - 1).unwrap(),
            );
            let d = 4;
            let omega = omega_signed_form(n, d2, d).unwrap();
            let boolean = boolean_signed_form(n, d2, 1, d).unwrap();
            for a in 0..=d {
                for b in 0..=d {
                    let mut expected = omega.get(a, b) * &rescale;
                    if a == 0 && b == 0 {
                        expected -= rat(1, 5);
                    }
                    assert_eq!(boolean.get(a, b), &expected, "n={n} d2={d2} ({a},{b})");
                }
            }
            // The extra boundary weight can only make failure come earlier.
            let fb = boolean_first_failure(n, d2, 1, 12).unwrap();
            let fo = omega_first_failure(n, d2, 12).unwrap();
            if let Some(o) = fo {
                assert!(fb.is_some_and(|b| b <= o), "n={n} d2={d2}: {fb:?} vs {fo:?}");
            }
        }
        assert!(boolean_first_failure(12, 2, 0, 3).is_err());
        assert!(boolean_first_failure(12, 2, 4, 3).is_err());
    }

    #[test]
    fn boolean_shift_factor_exact() {
        // n′ = n: factor is 1/C(2j−1, j).
        assert_eq!(boolean_shift_factor(100, 100, 10, 2).unwrap(), rat(1, 3));
        // n = 10, n′ = 8, d2 = 3: (9·8)/(7·6) = 12/7.
        assert_eq!(boolean_shift_factor(10, 8, 3, 1).unwrap(), rat(12, 7));
        let direct = Rational::new(
            factorial(9) * factorial(5),
            factorial(7) * factorial(7) * binomial(3, 2).unwrap(),
        );
        assert_eq!(boolean_shift_factor(10, 8, 3, 2).unwrap(), direct);
    }

    #[test]
    fn boolean_conditions() {
        let n = 1u64 << 40;
        let r = check_boolean_conditions(n, 1, 26, 2, 15 * n);
        assert!(r.certified, "{r}");
        assert_eq!(r.m, Some(15 * n));
        let short = check_boolean_conditions(n, 1, 26, 2, n - 2);
        assert!(!short.certified);
        assert_eq!(
            short.failed().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            vec!["aux_count"]
        );
        // n′ = n − 2d + 2 tightens the upper window: n = 10816, d = 2.
        let d2 = find_d2(2, 1 << 40).unwrap();
        let n = 16 * d2 * d2;
        let r = check_boolean_conditions(n, 2, d2, 2, 30 * n);
        assert!(r.failed().any(|c| c.name == "window_upper"), "{r}");
    }
}
