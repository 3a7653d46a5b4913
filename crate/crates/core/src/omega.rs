//! The single-variable law `Ω_{n,d}` and its signed quadratic form.
//!
//! `Pr[u = k] = C(n−k−1, d−1) / C(n, d)` on `k ∈ [0, n−d]`; equivalently `u`
//! is the smallest element of a uniform `d`-subset of `{0, …, n−1}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{binomial, first_non_psd_prefix, int, solve_linear, RatPoly, Rational, SymMatrix};
use crate::pe::identities::IdentityOutcome;
use crate::witness::FailingDegree;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OmegaDist {
    n: u64,
    d: u64,
}

impl OmegaDist {
    pub fn new(n: u64, d: u64) -> Result<Self> {
        if d < 1 || d > n {
            return Err(Error::invalid("d", format!("need 1 <= d <= n, got n={n}, d={d}")));
        }
        Ok(OmegaDist { n, d })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    fn total(&self) -> BigInt {
        binomial(self.n as i64, self.d as i64).expect("n >= 0")
    }

    /// Exact `Pr[u = k]`; zero outside `[0, n−d]`.
    pub fn pmf(&self, k: i64) -> Rational {
        if k < 0 || k > (self.n - self.d) as i64 {
            return Rational::zero();
        }
        let num = binomial(self.n as i64 - k - 1, self.d as i64 - 1).expect("in range");
        Rational::new(num, self.total())
    }

    /// `C(n−k−1, d−1)` for `k = 0..=n−d`, the unnormalized weights.
    fn weights(&self) -> Vec<BigInt> {
        let top = (self.n - self.d) as usize;
        let mut w = Vec::with_capacity(top + 1);
        // Start from k = n−d where the weight is C(d−1, d−1) = 1 and walk down:
        // C(m+1, r) = C(m, r)·(m+1)/(m+1−r) with m = n−k−1, r = d−1.
        let r = BigInt::from(self.d - 1);
        let mut cur = BigInt::one();
        w.push(cur.clone());
        for k in (0..top).rev() {
            let m1 = BigInt::from(self.n - k as u64 - 1);
            cur = cur * &m1 / (&m1 - &r);
            w.push(cur.clone());
        }
        w.reverse();
        w
    }

    /// `E[u^p]` for `p = 0..=max_p`, by direct summation.
    pub fn moments(&self, max_p: usize) -> Vec<Rational> {
        let mut sums = vec![BigInt::zero(); max_p + 1];
        for (k, w) in self.weights().into_iter().enumerate() {
            if k == 0 {
                sums[0] += &w;
                continue;
            }
            let kb = BigInt::from(k);
            let mut term = w;
            for s in sums.iter_mut() {
                *s += &term;
                term *= &kb;
            }
        }
        let total = self.total();
        sums.into_iter().map(|s| Rational::new(s, total.clone())).collect()
    }

    pub fn moment(&self, p: usize) -> Rational {
        self.moments(p).pop().expect("non-empty")
    }

    /// `E[f(u)]` for a polynomial `f`.
    pub fn expect_poly(&self, f: &RatPoly) -> Rational {
        let mut acc = Rational::zero();
        for (k, w) in self.weights().into_iter().enumerate() {
            acc += Rational::from_integer(w) * f.eval(&int(k as i64));
        }
        acc / Rational::from_integer(self.total())
    }
}

/// `A(a, b) = E_{Ω_{n,d2}}[(u−1)·u^{a+b}]` for `0 ≤ a, b ≤ d`.
pub fn omega_signed_form(n: u64, d2: u64, d: usize) -> Result<SymMatrix> {
    let dist = OmegaDist::new(n, d2)?;
    let m = dist.moments(2 * d + 1);
    let labels = (0..=d).map(|a| format!("u^{a}")).collect();
    Ok(SymMatrix::from_fn(labels, |a, b| &m[a + b + 1] - &m[a + b]))
}

/// Smallest `d ≤ d_max` whose signed form is not PSD, with a negative direction.
pub fn omega_first_failure_witness(n: u64, d2: u64, d_max: usize) -> Result<Option<FailingDegree>> {
    let form = omega_signed_form(n, d2, d_max)?;
    Ok(
        first_non_psd_prefix(&form).map(|(m_star, direction, value)| FailingDegree {
            m_star,
            direction,
            value,
        }),
    )
}

pub fn omega_first_failure(n: u64, d2: u64, d_max: usize) -> Result<Option<usize>> {
    Ok(omega_first_failure_witness(n, d2, d_max)?.map(|f| f.m_star))
}

/// `E_{Ω_{n,d2}}[(u−1) g(u)²]`.
pub fn signed_expectation(n: u64, d2: u64, g: &RatPoly) -> Result<Rational> {
    let dist = OmegaDist::new(n, d2)?;
    let f = &(&RatPoly::from_ints(&[-1, 1]) * g) * g;
    Ok(dist.expect_poly(&f))
}

/// `Σ_{k=0}^{n−d2−1} C(n−k−2, d2−1)/C(n−1, d2−1) · k · g(k+1)²`.
pub fn shifted_sum(n: u64, d2: u64, g: &RatPoly) -> Result<Rational> {
    if d2 < 1 || d2 > n {
        return Err(Error::invalid("d2", format!("need 1 <= d2 <= n, got n={n}, d2={d2}")));
    }
    let den = binomial(n as i64 - 1, d2 as i64 - 1)?;
    let mut acc = Rational::zero();
    for k in 0..(n - d2) as i64 {
        let w = binomial(n as i64 - k - 2, d2 as i64 - 1)?;
        let gk = g.eval(&int(k + 1));
        acc += Rational::from_integer(w) * int(k) * &gk * &gk;
    }
    Ok(acc / Rational::from_integer(den))
}

/// The exact link `E[(u−1)g²] = C(n−1,d2−1)/C(n,d2) · (shifted_sum − g(0)²)`.
pub fn shifted_sum_identity_holds(n: u64, d2: u64, g: &RatPoly) -> Result<bool> {
    let lhs = signed_expectation(n, d2, g)?;
    let g0 = g.eval(&Rational::zero());
    let factor = Rational::new(binomial(n as i64 - 1, d2 as i64 - 1)?, binomial(n as i64, d2 as i64)?);
    Ok(lhs == factor * (shifted_sum(n, d2, g)? - &g0 * &g0))
}

/// `C(n−k−1, d2−1)/C(n−1, d2−1) ≤ (C(2n−k−1, d2−1)/C(2n−1, d2−1))²` for
/// all `n ≤ n_max`, `1 ≤ d2 ≤ n`, `0 < k ≤ n − d2`.
pub fn two_n_to_n_lemma(n_max: u64) -> Result<IdentityOutcome> {
    let mut out = IdentityOutcome::new("two_n_to_n");
    for n in 1..=n_max as i64 {
        for d2 in 1..=n {
            let base = binomial(n - 1, d2 - 1)?;
            let base2 = binomial(2 * n - 1, d2 - 1)?;
            for k in 1..=(n - d2) {
                let lhs = Rational::new(binomial(n - k - 1, d2 - 1)?, base.clone());
                let r = Rational::new(binomial(2 * n - k - 1, d2 - 1)?, base2.clone());
                let rhs = &r * &r;
                out.record(lhs <= rhs, || format!("n={n} d2={d2} k={k}: {lhs} > {rhs}"));
            }
        }
    }
    Ok(out)
}

/// Largest total degree accepted by [`balls_in_bins_poly`].
pub const BINS_DEGREE_BUDGET: u32 = 4;
/// Largest bin count accepted by [`balls_in_bins_poly`].
pub const BINS_COUNT_BUDGET: usize = 4;

type Placements = Arc<HashMap<Vec<u32>, u64>>;

/// Bin occupancy counts over every ordered placement of `n_prime` labeled
/// balls and `d2 − 1` identical dividers in a row.
pub fn placements(d2: usize, n_prime: usize) -> Placements {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Placements>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&(d2, n_prime)) {
        return v.clone();
    }
    fn rec(balls_left: usize, bars_left: usize, bins: &mut Vec<u32>, out: &mut HashMap<Vec<u32>, u64>) {
        if balls_left == 0 && bars_left == 0 {
            *out.entry(bins.clone()).or_insert(0) += 1;
            return;
        }
        if balls_left > 0 {
            // Each remaining labeled ball is a distinct choice.
            *bins.last_mut().unwrap() += 1;
            let mut sub = HashMap::new();
            rec(balls_left - 1, bars_left, bins, &mut sub);
            *bins.last_mut().unwrap() -= 1;
            for (k, v) in sub {
                *out.entry(k).or_insert(0) += v * balls_left as u64;
            }
        }
        if bars_left > 0 {
            bins.push(0);
            rec(balls_left, bars_left - 1, bins, out);
            bins.pop();
        }
    }
    let mut out = HashMap::new();
    rec(n_prime, d2 - 1, &mut vec![0], &mut out);
    let out = Arc::new(out);
    cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert((d2, n_prime), out.clone());
    out
}

/// `E[Π_j u_j^{e_j}]` at a given ball count, by placement enumeration.
pub fn balls_in_bins_expectation(exponents: &[u32], n_prime: usize) -> Rational {
    let table = placements(exponents.len(), n_prime);
    let mut num = BigInt::zero();
    let mut den = BigInt::zero();
    for (bins, &count) in table.iter() {
        let mut v = BigInt::from(count);
        for (u, &e) in bins.iter().zip(exponents) {
            v *= num_traits::pow(BigInt::from(*u), e as usize);
        }
        num += v;
        den += count;
    }
    Rational::new(num, den)
}

/// The polynomial `p(n′) = E[Π_j u_j^{e_j}]` over uniform placements into
/// `exponents.len()` bins, interpolated at `n′ = 0..=deg` and confirmed at
/// two further nodes.
pub fn balls_in_bins_poly(exponents: &[u32]) -> Result<RatPoly> {
    let d2 = exponents.len();
    let deg: u32 = exponents.iter().sum();
    if d2 == 0 {
        return Err(Error::invalid("exponents", "need at least one bin"));
    }
    if deg > BINS_DEGREE_BUDGET || d2 > BINS_COUNT_BUDGET {
        return Err(Error::Budget(format!(
            "degree {deg} with {d2} bins exceeds the enumeration budget ({BINS_DEGREE_BUDGET}, {BINS_COUNT_BUDGET})"
        )));
    }
    let deg = deg as usize;
    let a: Vec<Vec<Rational>> = (0..=deg)
        .map(|node| (0..=deg).map(|p| crate::exact::pow(&int(node as i64), p)).collect())
        .collect();
    let b: Vec<Rational> = (0..=deg)
        .map(|node| balls_in_bins_expectation(exponents, node))
        .collect();
    let poly = RatPoly::new(solve_linear(a, b)?);
    for node in deg + 1..=deg + 2 {
        if poly.eval(&int(node as i64)) != balls_in_bins_expectation(exponents, node) {
            return Err(Error::Precondition(format!("interpolant disagrees at n'={node}")));
        }
    }
    Ok(poly)
}
