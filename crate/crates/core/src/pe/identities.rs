//! Exhaustive small-scale checks of the ordering identities and of the
//! structural properties of `Ẽ_n`.

use serde::Serialize;

use num_traits::{One, Zero};

use super::{IndexMonomial, MonoPoly, PEContext};
use crate::error::Result;
use crate::exact::{int, Rational};

/// Result of an exhaustive identity check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityOutcome {
    pub name: String,
    pub cases: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

impl IdentityOutcome {
    pub(crate) fn new(name: impl Into<String>) -> Self {
        IdentityOutcome {
            name: name.into(),
            cases: 0,
            failures: 0,
            first_failure: None,
        }
    }

    pub(crate) fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn holds(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Every total order of `k` elements as a rank vector (`rank[a]` for element `a`).
fn total_orders(k: usize) -> Vec<Vec<usize>> {
    permutations(k)
}

fn chain(order: &[usize], rank: &[usize]) -> bool {
    order.windows(2).all(|w| rank[w[0]] < rank[w[1]])
}

/// Inserting a new element into a known chain: for `r ≤ r_max`, every
/// ordering `π` of the first `r` elements and every total order of all
/// `r + 1` elements,
/// `P = x_{new,π1} P + Σ_k P_{<k} x_{πk,new} x_{new,πk+1} P_{>k} + P x_{πr,new}`
/// where `P = Π_j x_{πj,πj+1}`.
pub fn insertion_identity(r_max: usize) -> IdentityOutcome {
    let mut out = IdentityOutcome::new("insertion");
    for r in 1..=r_max {
        let new = r;
        for pi in permutations(r) {
            for rank in total_orders(r + 1) {
                let x = |a: usize, b: usize| i64::from(rank[a] < rank[b]);
                let link = |j: usize| x(pi[j], pi[j + 1]);
                let p: i64 = (0..r - 1).map(link).product();
                let mut rhs = x(new, pi[0]) * p + p * x(pi[r - 1], new);
                for k in 0..r - 1 {
                    let before: i64 = (0..k).map(link).product();
                    let after: i64 = (k + 1..r - 1).map(link).product();
                    rhs += before * x(pi[k], new) * x(new, pi[k + 1]) * after;
                }
                out.record(p == rhs, || format!("r={r} pi={pi:?} ranks={rank:?}: {p} vs {rhs}"));
            }
        }
    }
    out
}

/// `Σ_{π∈S_k} Π_j x_{πj,πj+1} = 1` on every total order, for `k ≤ k_max`.
pub fn case_split_identity(k_max: usize) -> IdentityOutcome {
    let mut out = IdentityOutcome::new("case_split");
    for k in 1..=k_max {
        let perms = permutations(k);
        for rank in total_orders(k) {
            let total = perms.iter().filter(|pi| chain(pi, &rank)).count();
            out.record(total == 1, || format!("k={k} ranks={rank:?}: sum {total}"));
        }
    }
    out
}

/// On every point of `{0,1}^k`, `Σ x_i − 1` equals both
/// `−Π(1−x_i) + Σ_{J≠∅} (|J|−1) Π_J x_i Π_{J^c} (1−x_i)` and the same
/// expression with squared factors.
pub fn min_element_identity(k_max: usize) -> IdentityOutcome {
    let mut out = IdentityOutcome::new("min_element");
    for k in 1..=k_max {
        for point in 0u32..(1 << k) {
            let x = |i: usize| int(((point >> i) & 1) as i64);
            let lhs: Rational = (0..k).map(x).sum::<Rational>() - int(1);
            let none: Rational = (0..k).map(|i| int(1) - x(i)).product();
            let mut plain = -none.clone();
            let mut squared = -none;
            for set in 1u32..(1 << k) {
                let size = set.count_ones() as i64;
                let mut a = Rational::one();
                let mut b = Rational::one();
                for i in 0..k {
                    let f = if (set >> i) & 1 == 1 { x(i) } else { int(1) - x(i) };
                    b *= &f * &f;
                    a *= f;
                }
                plain += int(size - 1) * a;
                squared += int(size - 1) * b;
            }
            out.record(lhs == plain && lhs == squared, || {
                format!("k={k} point={point:0k$b}: {lhs} vs {plain} / {squared}", k = k)
            });
        }
    }
    out
}

fn variables(n: usize) -> Vec<IndexMonomial> {
    let mut vars = Vec::new();
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            vars.push(IndexMonomial::x(i, j));
        }
    }
    for j in 1..=n {
        vars.push(IndexMonomial::z(j));
    }
    vars
}

/// All monomials of degree at most `deg` (repeated factors allowed).
pub fn monomials_up_to(n: usize, deg: u32) -> Vec<IndexMonomial> {
    let vars = variables(n);
    let mut layer = vec![(IndexMonomial::one(), 0usize)];
    let mut all = vec![IndexMonomial::one()];
    for _ in 0..deg {
        let mut next = Vec::new();
        for (m, start) in &layer {
            for (v, var) in vars.iter().enumerate().skip(*start) {
                next.push((m.mul(var), v));
            }
        }
        all.extend(next.iter().map(|(m, _)| m.clone()));
        layer = next;
    }
    all
}

fn constraint_polys(n: usize) -> Vec<(String, MonoPoly)> {
    let mono = MonoPoly::from_monomial;
    let mut out = Vec::new();
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            if i < j {
                let p = mono(IndexMonomial::x(i, j))
                    .add(&mono(IndexMonomial::x(j, i)))
                    .add(&MonoPoly::constant(int(-1)));
                out.push((format!("x({i},{j})+x({j},{i})-1"), p));
            }
            let sq = mono(IndexMonomial::x(i, j).pow(2)).add(&mono(IndexMonomial::x(i, j)).scale(&int(-1)));
            out.push((format!("x({i},{j})^2-x({i},{j})"), sq));
            for k in (1..=n).filter(|&k| k != i && k != j) {
                let xy = IndexMonomial::x(i, j).mul(&IndexMonomial::x(j, k));
                let p = mono(xy.clone()).add(&mono(xy.mul(&IndexMonomial::x(i, k))).scale(&int(-1)));
                out.push((format!("x({i},{j})x({j},{k})(1-x({i},{k}))"), p));
            }
        }
    }
    for j in 1..=n {
        let p = MonoPoly::w(j, n).add(&mono(IndexMonomial::z(j).pow(2)).scale(&int(-1)));
        out.push((format!("w({j})-z({j})^2"), p));
    }
    out
}

/// `Ẽ_n[p·s] = 0` for every constraint `s` of the ordering equations and
/// every monomial `p` of degree at most `p_degree`.
pub fn constraint_ideal(n: usize, p_degree: u32) -> Result<IdentityOutcome> {
    let ctx = PEContext::new(n)?;
    let mut out = IdentityOutcome::new(format!("constraint_ideal_n{n}"));
    let constraints = constraint_polys(n);
    for p in monomials_up_to(n, p_degree) {
        let pp = MonoPoly::from_monomial(p.clone());
        for (name, s) in &constraints {
            let v = ctx.pe_eval_poly(&pp.mul(s))?;
            out.record(v.is_zero(), || format!("p={p} s={name}: {v}"));
        }
    }
    Ok(out)
}

/// Subsets of `[n]` of size at most `max`.
fn small_subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &layer {
            let start = s.last().map_or(1, |&l| l + 1);
            for j in start..=n {
                let mut t: Vec<usize> = s.clone();
                t.push(j);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Multilinear `x`-monomials with distinct factors, of degree at most `deg`.
fn x_monomials(n: usize, deg: u32) -> Vec<IndexMonomial> {
    let mut out = monomials_up_to(n, deg);
    out.retain(|m| m.is_z_free() && m.x_factors().values().all(|&e| e == 1));
    out
}

fn z_product(a: &[usize]) -> IndexMonomial {
    a.iter().fold(IndexMonomial::one(), |m, &j| m.mul(&IndexMonomial::z(j)))
}

fn w_product(a: &[usize], n: usize) -> MonoPoly {
    a.iter()
        .fold(MonoPoly::constant(int(1)), |p, &j| p.mul(&MonoPoly::w(j, n)))
}

/// Decomposition of `Ẽ_n[g²]` for `g = Σ_A (Π_{j∈A} z_j) g_A` at degree `2·half`:
/// every basis square satisfies `Ẽ[(z_A q)²] = Ẽ[(Π_{j∈A} w_j) q²]`, and
/// for structured dense `g` the cross terms vanish so that
/// `Ẽ[g²] = Σ_A Ẽ[(Π_{j∈A} w_j) g_A²]`. The right-hand sides are built
/// `z`-free and evaluated through the literal route.
pub fn decomposition_lemma(n: usize, half: u32) -> Result<IdentityOutcome> {
    let ctx = PEContext::new(n)?;
    let mut out = IdentityOutcome::new(format!("decomposition_n{n}_d{}", 2 * half));
    let subsets = small_subsets(n, half as usize);
    for a in &subsets {
        let za = z_product(a);
        let wa = w_product(a, n);
        for q in x_monomials(n, half - a.len() as u32) {
            let lhs = ctx.pe_eval(&za.mul(&q).pow(2))?;
            let q2 = MonoPoly::from_monomial(q.pow(2));
            let rhs = ctx.pe_eval_literal(&wa.mul(&q2))?;
            out.record(lhs == rhs, || format!("A={a:?} q={q}: {lhs} vs {rhs}"));
        }
    }
    for seed in 0..3i64 {
        let mut g = MonoPoly::zero();
        let mut parts = Vec::new();
        let mut counter = seed;
        for a in &subsets {
            let za = MonoPoly::from_monomial(z_product(a));
            let mut ga = MonoPoly::zero();
            for q in x_monomials(n, half - a.len() as u32) {
                counter += 1;
                let c = Rational::new(((counter * 7 + 3) % 11 - 5).into(), ((counter % 4) + 1).into());
                ga.add_term(q, c);
            }
            g = g.add(&za.mul(&ga));
            parts.push((a.clone(), ga));
        }
        let lhs = ctx.pe_eval_poly(&g.mul(&g))?;
        let mut rhs = Rational::zero();
        for (a, ga) in &parts {
            rhs += ctx.pe_eval_literal(&w_product(a, n).mul(&ga.mul(ga)))?;
        }
        out.record(lhs == rhs, || format!("dense g seed={seed}: {lhs} vs {rhs}"));
    }
    Ok(out)
}

/// `Ẽ_n[m] = Ẽ_n[π(m)]` for every monomial of degree at most `deg` and
/// every permutation `π` of `[n]`.
pub fn symmetry(n: usize, deg: u32) -> Result<IdentityOutcome> {
    let ctx = PEContext::new(n)?;
    let mut out = IdentityOutcome::new(format!("symmetry_n{n}"));
    let perms = permutations(n);
    for m in monomials_up_to(n, deg) {
        let base = ctx.pe_eval(&m)?;
        for pi in &perms {
            let moved = m.relabel(|i| pi[i - 1] + 1);
            let v = ctx.pe_eval(&moved)?;
            out.record(v == base, || format!("m={m} moved={moved}: {base} vs {v}"));
        }
    }
    Ok(out)
}

/// The full suite at the default sizes.
pub fn run_suite() -> Result<Vec<IdentityOutcome>> {
    let mut all = vec![insertion_identity(4), case_split_identity(5), min_element_identity(4)];
    for n in 2..=5 {
        all.push(constraint_ideal(n, 2)?);
    }
    for n in 2..=5 {
        all.push(decomposition_lemma(n, 1)?);
    }
    all.push(symmetry(5, 2)?);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_holds() {
        let o = insertion_identity(4);
        assert!(o.holds(), "{o:?}");
        // Σ_{r=1}^4 r!·(r+1)!
        assert_eq!(o.cases, 2 + 12 + 144 + 2880);
    }

    #[test]
    fn case_split_holds() {
        let o = case_split_identity(5);
        assert!(o.holds(), "{o:?}");
        assert_eq!(o.cases, 1 + 2 + 6 + 24 + 120);
    }

    #[test]
    fn min_element_holds() {
        let o = min_element_identity(4);
        assert!(o.holds(), "{o:?}");
        assert_eq!(o.cases, 2 + 4 + 8 + 16);
    }

    #[test]
    fn broken_identity_is_detected() {
        // Dropping the final insertion slot must fail somewhere.
        let mut o = IdentityOutcome::new("probe");
        for rank in total_orders(3) {
            let x = |a: usize, b: usize| i64::from(rank[a] < rank[b]);
            let p = x(0, 1);
            let partial = x(2, 0) * p + x(0, 2) * x(2, 1);
            o.record(p == partial, String::new);
        }
        assert!(!o.holds());
    }

    #[test]
    fn constraint_ideal_small() {
        for n in 2..=4 {
            let o = constraint_ideal(n, 2).unwrap();
            assert!(o.holds(), "{o:?}");
        }
    }

    #[test]
    fn constraint_ideal_n5() {
        let o = constraint_ideal(5, 2).unwrap();
        assert!(o.holds(), "{o:?}");
    }

    #[test]
    fn decomposition_holds() {
        for n in 2..=5 {
            let o = decomposition_lemma(n, 1).unwrap();
            assert!(o.holds(), "{o:?}");
        }
        let o = decomposition_lemma(4, 2).unwrap();
        assert!(o.holds(), "{o:?}");
    }

    #[test]
    fn symmetry_holds() {
        let o = symmetry(5, 2).unwrap();
        assert!(o.holds(), "{o:?}");
    }

    #[test]
    fn subsets_and_monomials_counts() {
        assert_eq!(small_subsets(4, 2).len(), 1 + 4 + 6);
        // 1 + 25 + C(26, 2) monomials over 25 variables.
        assert_eq!(monomials_up_to(5, 2).len(), 1 + 25 + 325);
    }
}
