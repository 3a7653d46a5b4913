//! Chebyshev witnesses for the failure of `Ẽ_n`.
//!
//! Under a uniformly random ordering `w_1` is uniform on `{−1, …, n−2}`, so
//! `Ẽ_n[(z_1 g(w_1))²] = E[u·g(u)²]` for `u` uniform on those `n` integers.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    affine_substitute, first_non_psd_prefix, format_rational, int, rat, serde_rational, IntervalBound, RatPoly,
    Rational, SymMatrix,
};

/// `T_m` by the three-term recurrence `T_{k+1} = 2x T_k − T_{k−1}`.
pub fn chebyshev_poly(m: usize) -> RatPoly {
    let two_x = RatPoly::monomial(1, int(2));
    let mut prev = RatPoly::one();
    if m == 0 {
        return prev;
    }
    let mut cur = RatPoly::x();
    for _ in 1..m {
        let next = &(&two_x * &cur) - &prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `T_m(x)` by the recurrence at a single point, without expanding the polynomial.
pub fn chebyshev_eval(m: usize, x: &Rational) -> Rational {
    if m == 0 {
        return int(1);
    }
    let two_x = int(2) * x;
    let (mut prev, mut cur) = (int(1), x.clone());
    for _ in 1..m {
        let next = &two_x * &cur - &prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn is_power_of_four(n: u64) -> Option<u32> {
    if n.is_power_of_two() && n.trailing_zeros().is_multiple_of(2) {
        Some(n.trailing_zeros() / 2)
    } else {
        None
    }
}

/// `⌈½·√n·(log₂ n + 1)⌉`, decided exactly.
///
/// The argument is rational only when `n` is a power of four; otherwise it
/// is irrational and an interval enclosure settles the ceiling.
pub fn witness_degree_bound(n: u64) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("n", "need n >= 1"));
    }
    if let Some(k) = is_power_of_four(n) {
        // √n = 2^k, log₂ n = 2k.
        let v = Rational::new(BigInt::from(1u64 << k) * BigInt::from(2 * k + 1), BigInt::from(2));
        return Ok(v.ceil().to_integer().to_usize().expect("small"));
    }
    let nn = IntervalBound::point(int(n as i64));
    let log2 = nn.ln()?.checked_div(&IntervalBound::from_int(2).ln()?)?;
    let v = &(&nn.sqrt()? * &(&log2 + &IntervalBound::from_int(1))) * &IntervalBound::point(rat(1, 2));
    let lo = v.lo().ceil();
    let hi = v.hi().ceil();
    if lo != hi {
        return Err(Error::Precondition(format!(
            "ceiling undecided at n={n}; raise the interval precision"
        )));
    }
    Ok(lo.to_integer().to_usize().expect("small"))
}

/// Hankel form `(1/n)·Σ_{u=−1}^{n−2} u^{a+b+1}` for `0 ≤ a, b ≤ d`.
#[derive(Clone, Debug, Serialize)]
pub struct WMomentForm {
    pub n: u64,
    pub d: usize,
    pub matrix: SymMatrix,
}

impl WMomentForm {
    pub fn new(n: u64, d: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("n", format!("need n >= 3, got {n}")));
        }
        let sums = power_sums(n, 2 * d + 1);
        let nn = int(n as i64);
        let labels = (0..=d).map(|a| format!("u^{a}")).collect();
        let matrix = SymMatrix::from_fn(labels, |a, b| &sums[a + b + 1] / &nn);
        Ok(WMomentForm { n, d, matrix })
    }
}

/// `Σ_{u=−1}^{n−2} u^p` for `p = 0..=max_p`.
fn power_sums(n: u64, max_p: usize) -> Vec<Rational> {
    let mut sums = vec![BigInt::zero(); max_p + 1];
    for u in -1i64..=(n as i64 - 2) {
        let b = BigInt::from(u);
        let mut pw = BigInt::one();
        for s in sums.iter_mut() {
            *s += &pw;
            pw *= &b;
        }
    }
    sums.into_iter().map(Rational::from_integer).collect()
}

/// The Chebyshev witness at `n` and its exact signed moment.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessResult {
    pub n: u64,
    pub m: usize,
    pub g: RatPoly,
    /// `E[u·g(u)²]` with weight `1/n` on each of the `n` support points.
    #[serde(with = "serde_rational")]
    pub value: Rational,
    /// The same sum weighted by `1/(n−1)`.
    #[serde(with = "serde_rational")]
    pub value_over_n_minus_1: Rational,
    #[serde(with = "serde_rational")]
    pub g_at_minus_one: Rational,
}

/// `g(w) = T_m(−1 + 2w/n)` at `m = ⌈½√n(log₂n + 1)⌉`.
pub fn chebyshev_witness(n: u64) -> Result<WitnessResult> {
    if n < 4 {
        return Err(Error::invalid("n", format!("need n >= 4, got {n}")));
    }
    let m = witness_degree_bound(n)?;
    let g = affine_substitute(&chebyshev_poly(m), &rat(2, n as i64), &int(-1))?;
    // n^m·g(u) in integers: V_{k+1} = 2(2u − n)V_k − n²V_{k−1}.
    let scaled = |u: i64| {
        let nn = BigInt::from(n);
        let step = BigInt::from(2 * (2 * u - n as i64));
        let n2 = &nn * &nn;
        let (mut prev, mut cur) = (BigInt::one(), BigInt::from(2 * u - n as i64));
        if m == 0 {
            return prev;
        }
        for _ in 1..m {
            let next = &step * &cur - &n2 * &prev;
            prev = cur;
            cur = next;
        }
        cur
    };
    let mut total = BigInt::zero();
    for u in -1i64..=(n as i64 - 2) {
        let v = scaled(u);
        total += BigInt::from(u) * &v * &v;
    }
    let scale = num_traits::pow(BigInt::from(n), m);
    let sum = Rational::new(total, &scale * &scale);
    Ok(WitnessResult {
        n,
        m,
        g_at_minus_one: Rational::new(scaled(-1), scale),
        g,
        value: &sum / int(n as i64),
        value_over_n_minus_1: &sum / int(n as i64 - 1),
    })
}

/// Smallest failing degree and an exact negative direction.
#[derive(Clone, Debug, Serialize)]
pub struct FailingDegree {
    pub m_star: usize,
    /// Coefficients of `g` in the monomial basis `1, u, …, u^{m_star}`.
    #[serde(serialize_with = "serialize_rationals")]
    pub direction: Vec<Rational>,
    #[serde(with = "serde_rational")]
    pub value: Rational,
}

pub(crate) fn serialize_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(format_rational))
}

/// Ascends `m = 0, 1, …, d_max` and returns the first `m` whose form is not PSD.
pub fn minimal_failing_degree(n: u64, d_max: usize) -> Result<Option<FailingDegree>> {
    let form = WMomentForm::new(n, d_max)?;
    Ok(
        first_non_psd_prefix(&form.matrix).map(|(m_star, direction, value)| FailingDegree {
            m_star,
            direction,
            value,
        }),
    )
}

/// One row of the witness scan.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessRow {
    pub n: u64,
    pub m_star: Option<usize>,
    pub paper_bound: usize,
    #[serde(with = "serde_rational")]
    pub chebyshev_value: Rational,
}

pub fn witness_row(n: u64) -> Result<WitnessRow> {
    let w = chebyshev_witness(n)?;
    let m_star = minimal_failing_degree(n, w.m)?.map(|f| f.m_star);
    Ok(WitnessRow {
        n,
        m_star,
        paper_bound: w.m,
        chebyshev_value: w.value,
    })
}

/// `|g(u)| ≤ 1` at every integer `u ∈ [0, n−2]` and `|g(−1)| ≥ n`.
pub fn witness_bounds_hold(w: &WitnessResult) -> bool {
    let inside =
        (0..=(w.n as i64 - 2)).all(|u| chebyshev_eval(w.m, &(int(-1) + rat(2 * u, w.n as i64))).abs() <= int(1));
    inside && w.g_at_minus_one.abs() >= int(w.n as i64)
}
