//! Pseudo-expectation values for the ordering-principle equations.
//!
//! `Ẽ_n` on an `x`-only monomial is the probability, over a uniformly random
//! ordering of `n` elements, that every factor `x_ij` ("i precedes j")
//! holds. A factor `z_j²` is replaced by `w_j = Σ_{i≠j} x_ij − 1`, and any
//! odd power of a `z` variable evaluates to zero.

pub mod identities;

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{factorial, int, Rational, SymMatrix};

/// Cap on the number of terms produced by `z²` expansions.
pub const TERM_BUDGET: usize = 1_000_000;
/// Largest vertex count handled by linear-extension counting.
pub const MAX_SPAN: usize = 20;
/// Largest moment-matrix basis built by [`PEContext::moment_matrix`].
pub const BASIS_BUDGET: usize = 700;

/// Product of ordering variables `x_ij` and auxiliary variables `z_j`, with
/// multiplicities. Indices are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexMonomial {
    x: BTreeMap<(usize, usize), u32>,
    z: BTreeMap<usize, u32>,
}

impl IndexMonomial {
    pub fn one() -> Self {
        Self::default()
    }

    /// # Panics
    /// If `i == j` or either index is zero.
    pub fn x(i: usize, j: usize) -> Self {
        assert!(i != j && i > 0 && j > 0, "x({i},{j}) is not a valid variable");
        let mut m = Self::default();
        m.x.insert((i, j), 1);
        m
    }

    /// # Panics
    /// If `j` is zero.
    pub fn z(j: usize) -> Self {
        assert!(j > 0, "z(0) is not a valid variable");
        let mut m = Self::default();
        m.z.insert(j, 1);
        m
    }

    pub fn x_factors(&self) -> &BTreeMap<(usize, usize), u32> {
        &self.x
    }

    pub fn z_factors(&self) -> &BTreeMap<usize, u32> {
        &self.z
    }

    pub fn is_z_free(&self) -> bool {
        self.z.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.x.values().sum::<u32>() + self.z.values().sum::<u32>()
    }

    pub fn mul(&self, other: &IndexMonomial) -> IndexMonomial {
        let mut out = self.clone();
        for (k, e) in &other.x {
            *out.x.entry(*k).or_insert(0) += e;
        }
        for (k, e) in &other.z {
            *out.z.entry(*k).or_insert(0) += e;
        }
        out
    }

    pub fn pow(&self, e: u32) -> IndexMonomial {
        let mut out = IndexMonomial::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// All indices mentioned by `x` or `z` factors.
    pub fn indices(&self) -> BTreeSet<usize> {
        let mut s: BTreeSet<usize> = self.z.keys().copied().collect();
        for &(i, j) in self.x.keys() {
            s.insert(i);
            s.insert(j);
        }
        s
    }

    /// Applies an index map, which must be injective on the mentioned indices.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> IndexMonomial {
        let mut out = IndexMonomial::one();
        for (&(i, j), &e) in &self.x {
            *out.x.entry((f(i), f(j))).or_insert(0) += e;
        }
        for (&j, &e) in &self.z {
            *out.z.entry(f(j)).or_insert(0) += e;
        }
        out
    }

    /// The same monomial with every `x` exponent reduced to one.
    pub fn boolean_reduced(&self) -> IndexMonomial {
        IndexMonomial {
            x: self.x.keys().map(|&k| (k, 1)).collect(),
            z: self.z.clone(),
        }
    }
}

impl fmt::Display for IndexMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.x.is_empty() && self.z.is_empty() {
            return write!(f, "1");
        }
        let mut parts = Vec::new();
        for (&(i, j), &e) in &self.x {
            parts.push(if e == 1 {
                format!("x({i},{j})")
            } else {
                format!("x({i},{j})^{e}")
            });
        }
        for (&j, &e) in &self.z {
            parts.push(if e == 1 {
                format!("z({j})")
            } else {
                format!("z({j})^{e}")
            });
        }
        write!(f, "{}", parts.join("*"))
    }
}

impl FromStr for IndexMonomial {
    type Err = Error;

    /// Parses `x(i,j)` and `z(j)` factors joined by `*`, each with an
    /// optional `^e`. The empty product is written `1`.
    fn from_str(text: &str) -> Result<Self> {
        let text: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if text.is_empty() {
            return Err(Error::Parse("empty monomial".into()));
        }
        let mut out = IndexMonomial::one();
        if text == "1" {
            return Ok(out);
        }
        for token in text.split('*') {
            let bad = || Error::Parse(format!("bad factor `{token}`"));
            let (body, exp) = match token.split_once('^') {
                Some((b, e)) => (b, e.parse::<u32>().map_err(|_| bad())?),
                None => (token, 1),
            };
            if exp == 0 {
                continue;
            }
            let kind = body.chars().next().ok_or_else(bad)?;
            let args = body[1..]
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(bad)?;
            let idx: Vec<usize> = args
                .split(',')
                .map(|s| s.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if idx.contains(&0) {
                return Err(Error::Parse(format!("indices are 1-based in `{token}`")));
            }
            match (kind, idx.as_slice()) {
                ('x', &[i, j]) if i != j => *out.x.entry((i, j)).or_insert(0) += exp,
                ('x', &[_, _]) => return Err(Error::Parse(format!("self-pair in `{token}`"))),
                ('z', &[j]) => *out.z.entry(j).or_insert(0) += exp,
                _ => return Err(bad()),
            }
        }
        Ok(out)
    }
}

impl Serialize for IndexMonomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for IndexMonomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Finite linear combination of monomials with rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonoPoly {
    terms: BTreeMap<IndexMonomial, Rational>,
}

impl MonoPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::default();
        p.add_term(IndexMonomial::one(), c);
        p
    }

    pub fn from_monomial(m: IndexMonomial) -> Self {
        let mut p = Self::default();
        p.add_term(m, Rational::one());
        p
    }

    pub fn add_term(&mut self, m: IndexMonomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&IndexMonomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &MonoPoly) -> MonoPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> MonoPoly {
        let mut out = MonoPoly::zero();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &MonoPoly) -> MonoPoly {
        let mut out = MonoPoly::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.mul(b), ca * cb);
            }
        }
        out
    }

    /// `w_j = Σ_{i≠j, i∈[n]} x_ij − 1`.
    pub fn w(j: usize, n: usize) -> MonoPoly {
        let mut p = MonoPoly::constant(int(-1));
        for i in (1..=n).filter(|&i| i != j) {
            p.add_term(IndexMonomial::x(i, j), Rational::one());
        }
        p
    }
}

impl fmt::Display for MonoPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(m, c)| format!("({c})*{m}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Precedence constraints of a `z`-free monomial: edge `(i, j)` means `i` before `j`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintDigraph {
    vertices: BTreeSet<usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl ConstraintDigraph {
    pub fn new(
        vertices: impl IntoIterator<Item = usize>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = ConstraintDigraph {
            vertices: vertices.into_iter().collect(),
            edges: BTreeSet::new(),
        };
        for (i, j) in edges {
            if i == j {
                return Err(Error::invalid("edges", format!("self-loop at {i}")));
            }
            g.vertices.insert(i);
            g.vertices.insert(j);
            g.edges.insert((i, j));
        }
        Ok(g)
    }

    pub fn from_monomial(m: &IndexMonomial) -> Result<Self> {
        if !m.is_z_free() {
            return Err(Error::invalid("m", "monomial still contains z factors"));
        }
        Self::new(m.indices(), m.x_factors().keys().copied())
    }

    pub fn vertices(&self) -> &BTreeSet<usize> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }
}

/// Number of total orders of the vertex set that respect every edge, by
/// dynamic programming over the set of already placed vertices.
pub fn linear_extension_count(g: &ConstraintDigraph) -> Result<u64> {
    let k = g.vertices.len();
    if k > MAX_SPAN {
        return Err(Error::Budget(format!("{k} vertices exceed the limit of {MAX_SPAN}")));
    }
    let pos: HashMap<usize, usize> = g.vertices.iter().enumerate().map(|(p, &v)| (v, p)).collect();
    let mut preds = vec![0u32; k];
    for &(i, j) in &g.edges {
        preds[pos[&j]] |= 1 << pos[&i];
    }
    let mut ways = vec![0u64; 1 << k];
    ways[0] = 1;
    for mask in 0..(1u32 << k) {
        let w = ways[mask as usize];
        if w == 0 {
            continue;
        }
        for v in 0..k {
            let bit = 1u32 << v;
            if mask & bit == 0 && preds[v] & !mask == 0 {
                ways[(mask | bit) as usize] += w;
            }
        }
    }
    Ok(ways[(1usize << k) - 1])
}

/// Rewrites every `z_j²` as `w_j` summed over all of `[n]`, reduces
/// `x_ij² → x_ij`, and drops monomials with an odd `z` power.
pub fn z_reduce(p: &MonoPoly, n: usize) -> Result<MonoPoly> {
    let mut out = MonoPoly::zero();
    let mut produced = 0usize;
    for (m, c) in p.terms() {
        if m.z.values().any(|e| e % 2 == 1) {
            continue;
        }
        let base = IndexMonomial {
            x: m.x.clone(),
            z: BTreeMap::new(),
        }
        .boolean_reduced();
        let mut acc = MonoPoly::from_monomial(base);
        for (&j, &e) in &m.z {
            let w = MonoPoly::w(j, n);
            for _ in 0..e / 2 {
                let next = acc.mul(&w);
                produced += next.len();
                if produced > TERM_BUDGET {
                    return Err(Error::Budget(format!("z expansion exceeds {TERM_BUDGET} terms")));
                }
                acc = MonoPoly::zero();
                for (t, v) in next.terms() {
                    acc.add_term(t.boolean_reduced(), v.clone());
                }
            }
        }
        for (t, v) in acc.terms() {
            out.add_term(t.clone(), v * c);
        }
    }
    Ok(out)
}

type Signature = Vec<(u8, u8)>;

/// Evaluation context for `Ẽ_n`, with a memo of ordering probabilities
/// keyed by the relabeled constraint graph.
#[derive(Debug)]
pub struct PEContext {
    n: usize,
    memo: RwLock<HashMap<Signature, Rational>>,
}

impl PEContext {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("need n >= 2, got {n}")));
        }
        Ok(PEContext {
            n,
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    fn check_indices(&self, m: &IndexMonomial) -> Result<()> {
        match m.indices().into_iter().find(|&i| i == 0 || i > self.n) {
            Some(i) => Err(Error::invalid("m", format!("index {i} outside [1,{}]", self.n))),
            None => Ok(()),
        }
    }

    /// Probability that a uniformly random ordering satisfies every edge.
    pub fn ordering_probability(&self, edges: &BTreeSet<(usize, usize)>) -> Result<Rational> {
        let verts: BTreeSet<usize> = edges.iter().flat_map(|&(i, j)| [i, j]).collect();
        if verts.len() > MAX_SPAN {
            return Err(Error::Budget(format!("index span {} exceeds {MAX_SPAN}", verts.len())));
        }
        let pos: HashMap<usize, u8> = verts.iter().enumerate().map(|(p, &v)| (v, p as u8)).collect();
        let mut key: Signature = edges.iter().map(|(i, j)| (pos[i], pos[j])).collect();
        key.sort_unstable();
        if let Some(v) = self.memo.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(v.clone());
        }
        let g = ConstraintDigraph::new(0..verts.len(), key.iter().map(|&(a, b)| (a as usize, b as usize)))?;
        let count = linear_extension_count(&g)?;
        let value = Rational::new(BigInt::from(count), factorial(verts.len()));
        self.memo
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, value.clone());
        Ok(value)
    }

    /// Exact `Ẽ_n[m]`.
    ///
    /// Each `w_j` factor is expanded only over indices already in play plus
    /// one representative fresh index weighted by the number of unused
    /// indices; every unused index contributes the same value because the
    /// remaining factors are invariant under permutations fixing the
    /// mentioned indices.
    pub fn pe_eval(&self, m: &IndexMonomial) -> Result<Rational> {
        self.check_indices(m)?;
        if m.z.values().any(|e| e % 2 == 1) {
            return Ok(Rational::zero());
        }
        let edges: BTreeSet<(usize, usize)> = m.x.keys().copied().collect();
        if edges.iter().any(|&(i, j)| edges.contains(&(j, i))) {
            return Ok(Rational::zero());
        }
        let z_indices: BTreeSet<usize> = m.z.keys().copied().collect();
        let mut terms: BTreeMap<BTreeSet<(usize, usize)>, Rational> = BTreeMap::new();
        terms.insert(edges, Rational::one());
        let mut produced = 0usize;
        for (&j, &e) in &m.z {
            for _ in 0..e / 2 {
                let mut next: BTreeMap<BTreeSet<(usize, usize)>, Rational> = BTreeMap::new();
                for (t, c) in &terms {
                    let mut mentioned = z_indices.clone();
                    mentioned.extend(t.iter().flat_map(|&(a, b)| [a, b]));
                    for &i in mentioned.iter().filter(|&&i| i != j) {
                        if t.contains(&(j, i)) {
                            continue;
                        }
                        let mut t2 = t.clone();
                        t2.insert((i, j));
                        *next.entry(t2).or_insert_with(Rational::zero) += c;
                    }
                    let fresh = self.n - mentioned.len();
                    if fresh > 0 {
                        let f = (1..=self.n)
                            .find(|i| !mentioned.contains(i))
                            .expect("fresh index exists");
                        let mut t2 = t.clone();
                        t2.insert((f, j));
                        *next.entry(t2).or_insert_with(Rational::zero) += c * int(fresh as i64);
                    }
                    *next.entry(t.clone()).or_insert_with(Rational::zero) -= c;
                }
                next.retain(|_, v| !v.is_zero());
                produced += next.len();
                if produced > TERM_BUDGET {
                    return Err(Error::Budget(format!("w expansion exceeds {TERM_BUDGET} terms")));
                }
                terms = next;
            }
        }
        let mut total = Rational::zero();
        for (t, c) in &terms {
            total += c * self.ordering_probability(t)?;
        }
        Ok(total)
    }

    /// `Ẽ_n` extended linearly to polynomials.
    pub fn pe_eval_poly(&self, p: &MonoPoly) -> Result<Rational> {
        let mut total = Rational::zero();
        for (m, c) in p.terms() {
            total += c * self.pe_eval(m)?;
        }
        Ok(total)
    }

    /// `Ẽ_n` through the literal route: [`z_reduce`] over all of `[n]`,
    /// then ordering probabilities of each `z`-free monomial.
    pub fn pe_eval_literal(&self, p: &MonoPoly) -> Result<Rational> {
        let reduced = z_reduce(p, self.n)?;
        let mut total = Rational::zero();
        for (m, c) in reduced.terms() {
            self.check_indices(m)?;
            let edges: BTreeSet<(usize, usize)> = m.x.keys().copied().collect();
            if edges.iter().any(|&(i, j)| edges.contains(&(j, i))) {
                continue;
            }
            total += c * self.ordering_probability(&edges)?;
        }
        Ok(total)
    }

    /// Monomials of degree at most `half` in the `x` and `z` variables,
    /// omitting those with a repeated `x` factor (their rows coincide with
    /// the Boolean-reduced monomial's row). Sorted by degree, then by the
    /// monomial order.
    pub fn moment_basis(&self, half: u32) -> Vec<IndexMonomial> {
        let mut vars: Vec<IndexMonomial> = Vec::new();
        for i in 1..=self.n {
            for j in (1..=self.n).filter(|&j| j != i) {
                vars.push(IndexMonomial::x(i, j));
            }
        }
        for j in 1..=self.n {
            vars.push(IndexMonomial::z(j));
        }
        let mut layer = vec![(IndexMonomial::one(), 0usize)];
        let mut basis = vec![IndexMonomial::one()];
        for _ in 0..half {
            let mut next = Vec::new();
            for (m, start) in &layer {
                for (v_idx, v) in vars.iter().enumerate().skip(*start) {
                    let prod = m.mul(v);
                    if prod.x.values().any(|&e| e > 1) {
                        continue;
                    }
                    next.push((prod, v_idx));
                }
            }
            basis.extend(next.iter().map(|(m, _)| m.clone()));
            layer = next;
        }
        basis
    }

    /// Moment matrix `M[p][q] = Ẽ_n[p·q]` over [`PEContext::moment_basis`] at degree `d`.
    pub fn moment_matrix(&self, d: u32) -> Result<SymMatrix> {
        if !d.is_multiple_of(2) {
            return Err(Error::invalid("d", format!("degree must be even, got {d}")));
        }
        let basis = self.moment_basis(d / 2);
        if basis.len() > BASIS_BUDGET {
            return Err(Error::Budget(format!(
                "moment basis has {} elements, limit {BASIS_BUDGET}",
                basis.len()
            )));
        }
        let labels = basis.iter().map(|m| m.to_string()).collect();
        let mut err = None;
        let m = SymMatrix::from_fn(labels, |a, b| match self.pe_eval(&basis[a].mul(&basis[b])) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                Rational::zero()
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{ldl_status, rat};
    use proptest::prelude::*;

    fn mono(s: &str) -> IndexMonomial {
        s.parse().unwrap()
    }

    /// Brute-force oracle: average of the literal polynomial over all n! orderings.
    fn brute_force(n: usize, p: &MonoPoly) -> Rational {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = Rational::zero();
        let mut count = 0i64;
        loop {
            // perm[r] is the rank of element r+1.
            let x = |i: usize, j: usize| if perm[i - 1] < perm[j - 1] { 1i64 } else { 0 };
            for (m, c) in p.terms() {
                if m.z.values().any(|e| e % 2 == 1) {
                    continue;
                }
                let mut v = int(1);
                for &(i, j) in m.x.keys() {
                    v *= int(x(i, j));
                }
                for (&j, &e) in &m.z {
                    let w: i64 = (1..=n).filter(|&i| i != j).map(|i| x(i, j)).sum::<i64>() - 1;
                    v *= num_traits::pow(int(w), (e / 2) as usize);
                }
                total += c * v;
            }
            count += 1;
            if !next_permutation(&mut perm) {
                break;
            }
        }
        total / int(count)
    }

    fn next_permutation(v: &mut [usize]) -> bool {
        let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
            return false;
        };
        let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
        v.swap(i - 1, j);
        v[i..].reverse();
        true
    }

    #[test]
    fn parse_and_display() {
        let m = mono("x(1,2)*x(2,3)*z(1)^2");
        assert_eq!(m.to_string(), "x(1,2)*x(2,3)*z(1)^2");
        assert_eq!(mono(" x(2,3) * x(1,2) ").to_string(), "x(1,2)*x(2,3)");
        assert_eq!(mono("1"), IndexMonomial::one());
        assert!("x(1,1)".parse::<IndexMonomial>().is_err());
        assert!("x(0,1)".parse::<IndexMonomial>().is_err());
        assert!("y(1)".parse::<IndexMonomial>().is_err());
        assert!("".parse::<IndexMonomial>().is_err());
    }

    #[test]
    fn linear_extension_examples() {
        let g = ConstraintDigraph::new([1, 2, 3], []).unwrap();
        assert_eq!(linear_extension_count(&g).unwrap(), 6);
        let chain = ConstraintDigraph::new([], [(1, 2), (2, 3)]).unwrap();
        assert_eq!(linear_extension_count(&chain).unwrap(), 1);
        let one = ConstraintDigraph::new([1, 2, 3], [(1, 2)]).unwrap();
        assert_eq!(linear_extension_count(&one).unwrap(), 3);
        let cycle = ConstraintDigraph::new([], [(1, 2), (2, 3), (3, 1)]).unwrap();
        assert_eq!(linear_extension_count(&cycle).unwrap(), 0);
        assert!(ConstraintDigraph::new([], [(1, 1)]).is_err());
        let big = ConstraintDigraph::new(1..=21, []).unwrap();
        assert!(matches!(linear_extension_count(&big), Err(Error::Budget(_))));
    }

    #[test]
    fn linear_extensions_of_antichain_is_factorial() {
        for k in 0..=10usize {
            let g = ConstraintDigraph::new(1..=k, []).unwrap();
            assert_eq!(BigInt::from(linear_extension_count(&g).unwrap()), factorial(k));
        }
    }

    #[test]
    fn pe_eval_examples() {
        let ctx = PEContext::new(6).unwrap();
        assert_eq!(ctx.pe_eval(&mono("x(1,2)")).unwrap(), rat(1, 2));
        assert_eq!(ctx.pe_eval(&mono("x(1,2)*x(2,3)")).unwrap(), rat(1, 6));
        assert_eq!(ctx.pe_eval(&mono("x(1,2)*x(2,1)")).unwrap(), int(0));
        assert_eq!(ctx.pe_eval(&mono("z(1)*x(1,2)")).unwrap(), int(0));
        let ctx4 = PEContext::new(4).unwrap();
        assert_eq!(ctx4.pe_eval(&mono("z(1)^2")).unwrap(), rat(1, 2));
        assert!(ctx4.pe_eval(&mono("x(1,5)")).is_err());
    }

    #[test]
    fn z_reduce_examples() {
        let n = 4;
        let p = MonoPoly::from_monomial(mono("z(1)^2*x(2,3)"));
        let expected = MonoPoly::w(1, n).mul(&MonoPoly::from_monomial(mono("x(2,3)")));
        assert_eq!(z_reduce(&p, n).unwrap(), expected);
        assert!(z_reduce(&MonoPoly::from_monomial(mono("z(1)*x(1,2)")), n)
            .unwrap()
            .is_empty());
        let fixed = MonoPoly::from_monomial(mono("x(1,2)"));
        assert_eq!(z_reduce(&fixed, n).unwrap(), fixed);
        let sq = MonoPoly::from_monomial(mono("x(1,2)^2"));
        assert_eq!(z_reduce(&sq, n).unwrap(), fixed);
    }

    #[test]
    fn fresh_index_collapse_matches_brute_force() {
        for n in 2..=6usize {
            let ctx = PEContext::new(n).unwrap();
            let cases = [
                "z(1)^2",
                "z(1)^4",
                "z(1)^2*z(2)^2",
                "z(1)^2*x(1,2)",
                "z(2)^2*x(1,2)",
                "z(1)^6",
                "z(1)^2*z(2)^2*x(2,1)",
            ];
            for s in cases {
                let m = mono(s);
                if m.indices().into_iter().any(|i| i > n) {
                    continue;
                }
                let p = MonoPoly::from_monomial(m.clone());
                let oracle = brute_force(n, &p);
                assert_eq!(ctx.pe_eval(&m).unwrap(), oracle, "n={n} m={s}");
                assert_eq!(ctx.pe_eval_literal(&p).unwrap(), oracle, "literal n={n} m={s}");
            }
        }
    }

    #[test]
    fn moment_matrix_small() {
        let ctx = PEContext::new(4).unwrap();
        let m = ctx.moment_matrix(2).unwrap();
        assert_eq!(m.dim(), 1 + 12 + 4);
        assert_eq!(m.get(0, 0), &int(1));
        let idx = m.labels().iter().position(|l| l == "x(1,2)").unwrap();
        assert_eq!(m.get(idx, idx), &rat(1, 2));
        assert!(ldl_status(&m).is_psd());
        assert!(ctx.moment_matrix(3).is_err());
    }

    #[test]
    fn moment_matrix_budget() {
        let ctx = PEContext::new(7).unwrap();
        assert!(matches!(ctx.moment_matrix(4), Err(Error::Budget(_))));
    }

    #[test]
    fn moment_matrix_n4_d2_float_eigen_oracle() {
        use nalgebra::DMatrix;
        use num_traits::ToPrimitive;
        let ctx = PEContext::new(4).unwrap();
        let m = ctx.moment_matrix(2).unwrap();
        let k = m.dim();
        let dm = DMatrix::from_fn(k, k, |i, j| m.get(i, j).to_f64().unwrap());
        let eig = dm.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-9, "smallest eigenvalue {min}");
        assert!(ldl_status(&m).is_psd());
    }

    fn arb_monomial(n: usize, max_x: usize, max_z: usize) -> impl Strategy<Value = IndexMonomial> {
        let pair = (1..=n, 1..=n).prop_filter("distinct", |(i, j)| i != j);
        (
            prop::collection::vec(pair, 0..=max_x),
            prop::collection::vec((1..=n, 1u32..=4), 0..=max_z),
        )
            .prop_map(|(xs, zs)| {
                let mut m = IndexMonomial::one();
                for (i, j) in xs {
                    m = m.mul(&IndexMonomial::x(i, j));
                }
                for (j, e) in zs {
                    m = m.mul(&IndexMonomial::z(j).pow(e));
                }
                m
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn smart_and_literal_routes_agree(m in arb_monomial(5, 3, 2)) {
            let ctx = PEContext::new(5).unwrap();
            let p = MonoPoly::from_monomial(m.clone());
            prop_assert_eq!(ctx.pe_eval(&m).unwrap(), ctx.pe_eval_literal(&p).unwrap());
        }

        #[test]
        fn smart_route_matches_brute_force(m in arb_monomial(5, 3, 2)) {
            let ctx = PEContext::new(5).unwrap();
            let p = MonoPoly::from_monomial(m.clone());
            prop_assert_eq!(ctx.pe_eval(&m).unwrap(), brute_force(5, &p));
        }

        #[test]
        fn invariant_under_index_permutation(m in arb_monomial(5, 4, 2), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let ctx = PEContext::new(7).unwrap();
            let mut perm: Vec<usize> = (1..=7).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let moved = m.relabel(|i| perm[i - 1]);
            prop_assert_eq!(ctx.pe_eval(&m).unwrap(), ctx.pe_eval(&moved).unwrap());
        }

        #[test]
        fn text_round_trip(m in arb_monomial(9, 4, 3)) {
            let back: IndexMonomial = m.to_string().parse().unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
