use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Triplet = (usize, usize, f64);

/// Compressed sparse row matrix.
///
/// Assembly from triplets sorts by `(row, col, value)` before summing
/// duplicates, so the result does not depend on the order in which entries
/// were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<Triplet>) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= n_rows {
                return Err(Error::IndexOutOfRange { index: r, dim: n_rows });
            }
            if c >= n_cols {
                return Err(Error::IndexOutOfRange { index: c, dim: n_cols });
            }
        }
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, t).expect("indices in range")
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: other.n_rows,
            });
        }
        let mut t = Vec::new();
        let mut acc = vec![0.0; other.n_cols];
        let mut touched = Vec::new();
        let mut mark = vec![false; other.n_cols];
        for i in 0..self.n_rows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                t.push((i, j, acc[j]));
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.n_rows, other.n_cols, t)
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows * self.n_cols,
                got: other.n_rows * other.n_cols,
            });
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            t.extend(self.row(i).map(|(j, v)| (i, j, alpha * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, beta * v)));
        }
        Self::from_triplets(self.n_rows, self.n_cols, t)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// Row-major dense copy; intended for tests and small problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }
}

/// Imposes `x[i] = values[i]` for every `i` with `fixed[i]` by symmetric
/// elimination: constrained rows and columns are replaced by the identity and
/// the right-hand side is corrected with the eliminated column contributions.
pub fn constrain_dirichlet(
    a: &SparseMatrix,
    rhs: &mut [f64],
    fixed: &[bool],
    values: &[f64],
) -> Result<SparseMatrix> {
    let n = a.n_rows();
    if a.n_cols() != n || rhs.len() != n || fixed.len() != n || values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len().min(fixed.len()).min(values.len()),
        });
    }
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..n {
        if fixed[i] {
            t.push((i, i, 1.0));
            continue;
        }
        for (j, v) in a.row(i) {
            if fixed[j] {
                rhs[i] -= v * values[j];
            } else {
                t.push((i, j, v));
            }
        }
    }
    for i in 0..n {
        if fixed[i] {
            rhs[i] = values[i];
        }
    }
    SparseMatrix::from_triplets(n, n, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_independent_of_order() {
        let t1 = vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 1e-17), (0, 1, 3.0), (0, 0, 0.5)];
        let mut t2 = t1.clone();
        t2.reverse();
        let a = SparseMatrix::from_triplets(2, 2, t1).unwrap();
        let b = SparseMatrix::from_triplets(2, 2, t2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(0, 0), 1.5 + 1e-17);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 5, 1.0)]).is_err());
    }

    #[test]
    fn products_and_transpose() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]).unwrap();
        let at = a.transpose();
        assert_eq!(at.n_rows(), 3);
        assert_eq!(at.get(2, 0), 2.0);
        let aat = a.matmul(&at).unwrap();
        assert_eq!(aat.to_dense(), vec![vec![5.0, 0.0], vec![0.0, 9.0]]);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        let s = aat.add_scaled(1.0, &SparseMatrix::identity(2), -1.0).unwrap();
        assert_eq!(s.diag(), vec![4.0, 8.0]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn dirichlet_elimination_keeps_symmetry() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        )
        .unwrap();
        let mut rhs = vec![0.0, 0.0, 0.0];
        let c = constrain_dirichlet(&a, &mut rhs, &[true, false, false], &[4.0, 0.0, 0.0]).unwrap();
        assert!(c.is_symmetric(0.0));
        assert_eq!(rhs, vec![4.0, 4.0, 0.0]);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(1, 0), 0.0);
    }
}
