use num_traits::{One, Signed, Zero};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use super::{format_rational, int, pow, Rational};
use crate::error::{Error, Result};

/// Symmetric matrix with exact entries and a label per basis element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<Rational>,
    labels: Vec<String>,
}

impl SymMatrix {
    /// Builds from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let dim = labels.len();
        let mut entries = vec![Rational::zero(); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[j * dim + i] = v.clone();
                entries[i * dim + j] = v;
            }
        }
        SymMatrix { dim, entries, labels }
    }

    /// Same as [`SymMatrix::from_fn`] with labels `0..dim`.
    pub fn from_fn_unlabeled(dim: usize, f: impl FnMut(usize, usize) -> Rational) -> Self {
        Self::from_fn((0..dim).map(|i| i.to_string()).collect(), f)
    }

    /// Validates exact symmetry of a dense row-major matrix.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows", "matrix is not square"));
        }
        for i in 0..dim {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(
                        "rows",
                        format!("entry ({i},{j}) differs from ({j},{i})"),
                    ));
                }
            }
        }
        Ok(SymMatrix {
            dim,
            entries: rows.into_iter().flatten().collect(),
            labels: (0..dim).map(|i| i.to_string()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.dim + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> Vec<Vec<Rational>> {
        self.entries
            .chunks(self.dim.max(1))
            .take(self.dim)
            .map(|r| r.to_vec())
            .collect()
    }

    /// Leading principal `k × k` block.
    pub fn leading_block(&self, k: usize) -> SymMatrix {
        SymMatrix::from_fn(self.labels[..k].to_vec(), |i, j| self.get(i, j).clone())
    }

    pub fn quadratic_form(&self, v: &[Rational]) -> Rational {
        assert_eq!(v.len(), self.dim);
        let mut acc = Rational::zero();
        for i in 0..self.dim {
            if v[i].is_zero() {
                continue;
            }
            let mut row = Rational::zero();
            for j in 0..self.dim {
                if !v[j].is_zero() {
                    row += self.get(i, j) * &v[j];
                }
            }
            acc += &v[i] * row;
        }
        acc
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.dim))?;
        for row in self.rows() {
            let row: Vec<String> = row.iter().map(format_rational).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

/// Outcome of the exact semidefiniteness test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PsdStatus {
    Psd,
    /// `witness` satisfies `witnessᵀ M witness = value < 0`.
    NotPsd {
        witness: Vec<Rational>,
        value: Rational,
    },
}

impl PsdStatus {
    pub fn is_psd(&self) -> bool {
        matches!(self, PsdStatus::Psd)
    }
}

struct Step {
    pivot: usize,
    pivot_value: Rational,
    row: Vec<(usize, Rational)>,
}

/// Exact PSD decision by symmetric-pivoted LDLᵀ.
///
/// Positive pivots are eliminated one at a time. A negative diagonal entry
/// yields a witness directly; if every remaining diagonal entry is zero, a
/// nonzero off-diagonal entry yields `e_i - sign(a_ij) e_j`, and an all-zero
/// trailing block means the matrix is semidefinite. Witnesses are lifted
/// back through the eliminated pivots so that they are directions for the
/// original matrix.
pub fn ldl_status(m: &SymMatrix) -> PsdStatus {
    let n = m.dim();
    let mut a = m.rows();
    let mut active: Vec<usize> = (0..n).collect();
    let mut steps: Vec<Step> = Vec::new();

    let local = loop {
        if active.is_empty() {
            return PsdStatus::Psd;
        }
        if let Some(&i) = active.iter().find(|&&i| a[i][i].is_negative()) {
            break vec![(i, Rational::one())];
        }
        let Some(pos) = active.iter().position(|&i| a[i][i].is_positive()) else {
            let mut found = None;
            'outer: for (x, &i) in active.iter().enumerate() {
                for &j in &active[x + 1..] {
                    if !a[i][j].is_zero() {
                        found = Some((i, j));
                        break 'outer;
                    }
                }
            }
            match found {
                Some((i, j)) => {
                    let s = if a[i][j].is_positive() {
                        -Rational::one()
                    } else {
                        Rational::one()
                    };
                    break vec![(i, Rational::one()), (j, s)];
                }
                None => return PsdStatus::Psd,
            }
        };
        let p = active.remove(pos);
        let pivot_value = a[p][p].clone();
        let row: Vec<(usize, Rational)> = active.iter().map(|&j| (j, a[p][j].clone())).collect();
        for (x, &(i, ref api)) in row.iter().enumerate() {
            if api.is_zero() {
                continue;
            }
            let factor = api / &pivot_value;
            for &(j, ref apj) in &row[x..] {
                if apj.is_zero() {
                    continue;
                }
                let delta = &factor * apj;
                a[i][j] -= &delta;
                if i != j {
                    a[j][i] = a[i][j].clone();
                }
            }
        }
        steps.push(Step {
            pivot: p,
            pivot_value,
            row,
        });
    };

    let mut v = vec![Rational::zero(); n];
    for (i, val) in local {
        v[i] = val;
    }
    for step in steps.iter().rev() {
        let mut acc = Rational::zero();
        for (j, apj) in &step.row {
            if !v[*j].is_zero() {
                acc += apj * &v[*j];
            }
        }
        v[step.pivot] = -acc / &step.pivot_value;
    }
    let value = m.quadratic_form(&v);
    debug_assert!(value.is_negative(), "lifted witness must be a negative direction");
    PsdStatus::NotPsd { witness: v, value }
}

/// First leading principal block that is not PSD.
///
/// Returns `(k, witness, value)` where the `(k+1) × (k+1)` leading block is
/// the smallest one failing, `witness` has length `k + 1`, and
/// `witnessᵀ block witness = value < 0`. Because each leading block is a
/// principal submatrix of the next, every larger block fails as well.
///
/// Grows an LDLᵀ factorization one row at a time while all pivots stay
/// positive, and falls back to [`ldl_status`] per block after a zero pivot.
pub fn first_non_psd_prefix(m: &SymMatrix) -> Option<(usize, Vec<Rational>, Rational)> {
    let n = m.dim();
    // l[i][j] for j < i, unit diagonal implied.
    let mut l: Vec<Vec<Rational>> = Vec::with_capacity(n);
    let mut d: Vec<Rational> = Vec::with_capacity(n);
    for k in 0..n {
        // y = L^{-1} c with c the new column above the diagonal.
        let mut y: Vec<Rational> = Vec::with_capacity(k);
        for i in 0..k {
            let mut acc = m.get(i, k).clone();
            for j in 0..i {
                if !l[i][j].is_zero() {
                    acc -= &l[i][j] * &y[j];
                }
            }
            y.push(acc);
        }
        let row: Vec<Rational> = y.iter().zip(&d).map(|(yi, di)| yi / di).collect();
        let mut dk = m.get(k, k).clone();
        for (yi, li) in y.iter().zip(&row) {
            dk -= yi * li;
        }
        l.push(row);
        if dk.is_negative() {
            // Lᵀ v = e_k gives vᵀ A v = d_k.
            let mut v = vec![Rational::zero(); k + 1];
            v[k] = Rational::one();
            for i in (0..k).rev() {
                let mut acc = Rational::zero();
                for j in i + 1..=k {
                    if !v[j].is_zero() {
                        acc += &l[j][i] * &v[j];
                    }
                }
                v[i] = -acc;
            }
            let value = m.leading_block(k + 1).quadratic_form(&v);
            debug_assert_eq!(value, dk);
            return Some((k, v, value));
        }
        if dk.is_zero() {
            for kk in k + 1..n {
                if let PsdStatus::NotPsd { witness, value } = ldl_status(&m.leading_block(kk + 1)) {
                    return Some((kk, witness, value));
                }
            }
            return None;
        }
        d.push(dk);
    }
    None
}

/// Solves the square system `a · x = b` exactly.
pub fn solve_linear(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Result<Vec<Rational>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("a", "system dimensions do not match"));
    }
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Err(Error::invalid("a", "matrix is singular"));
        };
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &a[col][col];
            for c in col..n {
                let delta = &f * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &f * &b[col];
            b[r] -= delta;
        }
    }
    let mut x = vec![Rational::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            acc -= &a[r][c] * &x[c];
        }
        x[r] = acc / &a[r][r];
    }
    Ok(x)
}

/// The `(t+1) × (t+1)` matrix with entry `(a, b) = b^a` (0-based, `0^0 = 1`).
pub(crate) fn vandermonde_matrix(t: usize) -> Vec<Vec<Rational>> {
    (0..=t)
        .map(|a| (0..=t).map(|b| pow(&int(b as i64), a)).collect())
        .collect()
}

/// Solves `M_t · c = rhs` with `M_t` the power-of-node Vandermonde matrix.
pub fn vandermonde_solve(t: usize, rhs: &[Rational]) -> Result<Vec<Rational>> {
    if rhs.len() != t + 1 {
        return Err(Error::invalid(
            "rhs",
            format!("expected length {}, got {}", t + 1, rhs.len()),
        ));
    }
    solve_linear(vandermonde_matrix(t), rhs.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use proptest::prelude::*;

    fn mat(rows: &[&[i64]]) -> SymMatrix {
        SymMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()).unwrap()
    }

    #[test]
    fn ldl_examples() {
        assert_eq!(ldl_status(&mat(&[&[1, 0], &[0, 1]])), PsdStatus::Psd);
        assert_eq!(ldl_status(&mat(&[&[0, 0], &[0, 0]])), PsdStatus::Psd);
        match ldl_status(&mat(&[&[1, 2], &[2, 1]])) {
            PsdStatus::NotPsd { witness, value } => {
                assert!(value.is_negative());
                let m = mat(&[&[1, 2], &[2, 1]]);
                assert_eq!(m.quadratic_form(&witness), value);
                // (1,-1) gives exactly -2.
                assert_eq!(m.quadratic_form(&[int(1), int(-1)]), int(-2));
            }
            PsdStatus::Psd => panic!("[[1,2],[2,1]] is indefinite"),
        }
    }

    #[test]
    fn ldl_boundary_and_zero_diagonal_cases() {
        // Rank-one semidefinite.
        assert!(ldl_status(&mat(&[&[1, 1], &[1, 1]])).is_psd());
        // Zero diagonal with coupling is indefinite.
        assert!(!ldl_status(&mat(&[&[0, 1], &[1, 0]])).is_psd());
        assert!(!ldl_status(&mat(&[&[0, 1, 0], &[1, 5, 0], &[0, 0, 3]])).is_psd());
        // Semidefinite after elimination leaves an all-zero block.
        assert!(ldl_status(&mat(&[&[2, 2, 2], &[2, 2, 2], &[2, 2, 2]])).is_psd());
    }

    #[test]
    fn asymmetric_rows_rejected() {
        let rows = vec![vec![int(1), int(2)], vec![int(3), int(1)]];
        assert!(SymMatrix::from_rows(rows).is_err());
    }

    #[test]
    fn vandermonde_examples() {
        assert_eq!(
            vandermonde_solve(1, &[int(1), rat(1, 2)]).unwrap(),
            vec![rat(1, 2), rat(1, 2)]
        );
        assert_eq!(vandermonde_solve(0, &[int(1)]).unwrap(), vec![int(1)]);
        assert_eq!(
            vandermonde_solve(2, &[int(1), int(1), rat(4, 3)]).unwrap(),
            vec![rat(1, 6), rat(2, 3), rat(1, 6)]
        );
        assert!(vandermonde_solve(2, &[int(1)]).is_err());
    }

    #[test]
    fn vandermonde_residual_is_zero() {
        for t in 0..=6usize {
            let rhs: Vec<Rational> = (0..=t).map(|a| rat((a * a) as i64 - 3, (a + 2) as i64)).collect();
            let c = vandermonde_solve(t, &rhs).unwrap();
            let m = vandermonde_matrix(t);
            for (row, r) in m.iter().zip(&rhs) {
                let lhs: Rational = row.iter().zip(&c).map(|(a, b)| a * b).sum();
                assert_eq!(&lhs, r);
            }
        }
    }

    /// Independent PSD oracle for 3×3: all principal minors non-negative.
    fn principal_minors_psd(m: &[[i64; 3]; 3]) -> bool {
        let d1 = [m[0][0], m[1][1], m[2][2]];
        let d2 = [
            m[0][0] * m[1][1] - m[0][1] * m[1][0],
            m[0][0] * m[2][2] - m[0][2] * m[2][0],
            m[1][1] * m[2][2] - m[1][2] * m[2][1],
        ];
        let d3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        d1.iter().all(|&v| v >= 0) && d2.iter().all(|&v| v >= 0) && d3 >= 0
    }

    fn prefix_oracle(m: &SymMatrix) -> Option<usize> {
        (0..m.dim()).find(|&k| !ldl_status(&m.leading_block(k + 1)).is_psd())
    }

    #[test]
    fn prefix_scan_handles_zero_pivot() {
        let m = mat(&[&[1, 1, 0], &[1, 1, 1], &[0, 1, 0]]);
        assert_eq!(first_non_psd_prefix(&m).map(|r| r.0), Some(2));
        let z = mat(&[&[0, 0], &[0, 0]]);
        assert_eq!(first_non_psd_prefix(&z), None);
        let neg = mat(&[&[-1]]);
        let (k, v, val) = first_non_psd_prefix(&neg).unwrap();
        assert_eq!((k, v, val), (0, vec![int(1)], int(-1)));
    }

    proptest! {
        #[test]
        fn prefix_scan_matches_blockwise_ldl(vals in prop::collection::vec(-3i64..4, 10)) {
            let mut it = vals.into_iter();
            let mut upper = [[0i64; 4]; 4];
            for i in 0..4 {
                for j in i..4 {
                    upper[i][j] = it.next().unwrap();
                }
            }
            let sm = SymMatrix::from_fn_unlabeled(4, |i, j| int(upper[i][j]));
            let got = first_non_psd_prefix(&sm);
            prop_assert_eq!(got.as_ref().map(|r| r.0), prefix_oracle(&sm));
            if let Some((k, v, value)) = got {
                prop_assert!(value.is_negative());
                prop_assert_eq!(sm.leading_block(k + 1).quadratic_form(&v), value);
            }
        }

        #[test]
        fn ldl_agrees_with_principal_minors(vals in prop::array::uniform6(-4i64..5)) {
            let m = [
                [vals[0], vals[1], vals[2]],
                [vals[1], vals[3], vals[4]],
                [vals[2], vals[4], vals[5]],
            ];
            let sm = SymMatrix::from_fn_unlabeled(3, |i, j| int(m[i][j]));
            let status = ldl_status(&sm);
            prop_assert_eq!(status.is_psd(), principal_minors_psd(&m));
            if let PsdStatus::NotPsd { witness, value } = status {
                prop_assert!(value.is_negative());
                prop_assert_eq!(sm.quadratic_form(&witness), value);
            }
        }
    }
}
