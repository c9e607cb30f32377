//! Sparse design matrices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A sparse vector as parallel index/value arrays, indices strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec<T> {
    pub indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseVec<T> {
    /// Builds a row from `(index, value)` pairs, sorting by index and
    /// rejecting duplicates.
    pub fn from_pairs(mut pairs: Vec<(usize, T)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidData(format!("duplicate index {}", w[0].0)));
            }
        }
        let (indices, values) = pairs.into_iter().unzip();
        Ok(SparseVec { indices, values })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    #[inline]
    pub fn dot_dense(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            acc += v * x[i];
        }
        acc
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// `l` sparse rows `a_i` with labels `b_i` over `n` features.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix<T> {
    rows: Vec<SparseVec<T>>,
    labels: Vec<T>,
    dim: usize,
}

impl<T: Scalar> DatasetMatrix<T> {
    pub fn new(rows: Vec<SparseVec<T>>, labels: Vec<T>, dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidData(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidData("dimension must be positive".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.indices.len() != row.values.len() {
                return Err(Error::InvalidData(format!("row {r}: ragged storage")));
            }
            for w in row.indices.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidData(format!(
                        "row {r}: indices not strictly increasing (duplicate or unsorted {})",
                        w[1]
                    )));
                }
            }
            if let Some(&last) = row.indices.last() {
                if last >= dim {
                    return Err(Error::InvalidData(format!(
                        "row {r}: index {last} >= dimension {dim}"
                    )));
                }
            }
        }
        Ok(DatasetMatrix { rows, labels, dim })
    }

    /// Dense constructor, mostly for tests and tiny examples. Exact zeros
    /// are not stored.
    pub fn from_dense(rows: &[Vec<T>], labels: Vec<T>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let sparse = rows
            .iter()
            .map(|r| {
                if r.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: r.len(),
                    });
                }
                let pairs = r
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(i, &v)| (i, v))
                    .collect();
                SparseVec::from_pairs(pairs)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sparse, labels, dim)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &SparseVec<T> {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SparseVec<T>] {
        &self.rows
    }

    pub fn label(&self, i: usize) -> T {
        self.labels[i]
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseVec::nnz).sum()
    }

    /// Returns a copy with the dimension raised to `dim`.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::InvalidData(format!(
                "cannot shrink dimension from {} to {dim}",
                self.dim
            )));
        }
        self.dim = dim;
        Ok(self)
    }
}
