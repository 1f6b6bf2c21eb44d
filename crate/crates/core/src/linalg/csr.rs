use std::ops::{AddAssign, Mul};

use rayon::prelude::*;

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct Csr<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<T>,
}

impl<T> Csr<T>
where
    T: Copy + Default + PartialEq + Send + Sync + AddAssign + Mul<Output = T>,
{
    /// Builds a matrix from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(total);
        let mut data = Vec::with_capacity(total);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < ncols, "column {c} out of range {ncols}");
                if last == Some(c) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c as u32);
                    data.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().zip(&self.data[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .into_par_iter()
            .map(|r| {
                let mut acc = T::default();
                for (c, v) in self.row(r) {
                    acc += v * x[c];
                }
                acc
            })
            .collect()
    }

    /// `Aᵀ y` (plain transpose, no conjugation). Sequential scatter, so the
    /// summation order is fixed.
    pub fn matvec_t(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![T::default(); self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == T::default() {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<T> {
        let n = self.nrows.min(self.ncols);
        (0..n)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map(|e| e.1).unwrap_or_default())
            .collect()
    }

    /// Squared Euclidean norm of each column, given a modulus-squared map.
    pub fn column_norms_sqr(&self, abs2: impl Fn(T) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (c, v) in self.indices.iter().zip(&self.data) {
            out[*c as usize] += abs2(*v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_matrix_products() {
        // [[1, 2, 0], [0, 0, 3]]
        let a = Csr::from_rows(3, vec![vec![(1, 1.0), (0, 1.0), (1, 1.0)], vec![(2, 3.0)]]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(a.matvec_t(&[1.0, 2.0]), vec![1.0, 2.0, 6.0]);
        assert_eq!(a.diagonal(), vec![1.0, 0.0]);
    }
}
