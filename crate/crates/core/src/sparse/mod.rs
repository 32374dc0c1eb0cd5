//! Symmetric sparse matrices stored as the lower triangle in compressed-row
//! form, plus the LDLᵀ factorization every solver in the crate runs on.

mod ldlt;
mod mtx;
mod ordering;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use ldlt::{factor_spd, factorization_count, Factorization, Symbolic};
pub use mtx::{read_matrix_market, write_matrix_market};
pub use ordering::minimum_degree;

/// Lower-triangle sparsity structure. Column indices are sorted within each
/// row and never exceed the row index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from `(row, col)` pairs already in the lower triangle.
    /// Duplicates are merged.
    pub fn from_lower_pairs(dim: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _) in &pairs {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx = pairs.into_iter().map(|(_, c)| c).collect();
        Pattern { dim, row_ptr, col_idx }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Position of entry `(row, col)` (with `col <= row`) in the value array.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        self.col_idx[lo..hi].binary_search(&col).ok().map(|off| lo + off)
    }

    /// Iterates `(row, col, position)` over all stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.dim).flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |q| (r, self.col_idx[q], q)))
    }

    fn union(&self, other: &Pattern) -> Pattern {
        let mut pairs: Vec<(usize, usize)> = self.entries().chain(other.entries()).map(|(r, c, _)| (r, c)).collect();
        pairs.sort_unstable();
        Pattern::from_lower_pairs(self.dim, pairs)
    }
}

/// Symmetric matrix over `dim` unknowns; only the lower triangle is stored.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl PartialEq for SparseSymMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern && self.values == other.values
    }
}

impl SparseSymMatrix {
    /// Assembles a matrix from `(row, col, value)` triplets. Either triangle
    /// may be addressed; duplicates accumulate and exact zeros are dropped.
    pub fn assemble(triplets: &[(usize, usize, f64)], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut entries = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::IndexOutOfRange { row: r, col: c, dim });
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: r, col: c });
            }
            entries.push((r.max(c), r.min(c), v));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut pairs = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if (r2, c2) != (r, c) {
                    break;
                }
                v += v2;
                iter.next();
            }
            if v != 0.0 {
                pairs.push((r, c));
                values.push(v);
            }
        }
        Ok(SparseSymMatrix {
            pattern: Arc::new(Pattern::from_lower_pairs(dim, pairs)),
            values,
        })
    }

    /// Wraps values laid out on an existing pattern.
    pub fn from_parts(pattern: Arc<Pattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch {
                expected: pattern.nnz(),
                actual: values.len(),
            });
        }
        if let Some((r, c, _)) = pattern.entries().find(|&(_, _, q)| !values[q].is_finite()) {
            return Err(Error::NonFiniteEntry { row: r, col: c });
        }
        Ok(SparseSymMatrix { pattern, values })
    }

    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let nnz = pattern.nnz();
        SparseSymMatrix {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let pairs = (0..dim).map(|i| (i, i)).collect();
        SparseSymMatrix {
            pattern: Arc::new(Pattern::from_lower_pairs(dim, pairs)),
            values: vec![1.0; dim],
        }
    }

    /// Takes the lower triangle of a dense matrix.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: a.ncols(),
            });
        }
        let mut triplets = Vec::new();
        for r in 0..n {
            for c in 0..=r {
                if a[(r, c)] != 0.0 {
                    triplets.push((r, c, a[(r, c)]));
                }
            }
        }
        Self::assemble(&triplets, n)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for (r, c, q) in self.pattern.entries() {
            a[(r, c)] = self.values[q];
            a[(c, r)] = self.values[q];
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (r, c) = (row.max(col), row.min(col));
        self.pattern.find(r, c).map_or(0.0, |q| self.values[q])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.pattern
            .entries()
            .map(|(r, c, q)| {
                let v = self.values[q] * self.values[q];
                if r == c {
                    v
                } else {
                    2.0 * v
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `y = A·x`, expanding the stored triangle symmetrically.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// Overwrites `y` with `A·x`. Lengths must already match.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.matvec_add(1.0, x, y);
    }

    /// `y += alpha·A·x`.
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for r in 0..p.dim {
            let mut acc = 0.0;
            let xr = x[r];
            for q in p.row_ptr[r]..p.row_ptr[r + 1] {
                let c = p.col_idx[q];
                let v = self.values[q];
                acc += v * x[c];
                if c != r {
                    y[c] += alpha * v * xr;
                }
            }
            y[r] += alpha * acc;
        }
    }

    /// `xᵀ·A·x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.matvec(x)?;
        Ok(dot(x, &ax))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SparseSymMatrix {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `Σ coefficient·matrix`, merged onto the union pattern. Matrices that
    /// share one pattern are combined without re-indexing.
    pub fn linear_combination(terms: &[(f64, &SparseSymMatrix)]) -> Result<Self> {
        let Some(&(_, first)) = terms.first() else {
            return Err(Error::InvalidParameter("linear combination of zero matrices".into()));
        };
        let dim = first.dim();
        for (_, m) in terms {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.dim(),
                });
            }
        }
        let shared = terms
            .iter()
            .all(|(_, m)| Arc::ptr_eq(&m.pattern, &first.pattern) || m.pattern == first.pattern);
        if shared {
            let mut values = vec![0.0; first.nnz()];
            for (a, m) in terms {
                for (v, mv) in values.iter_mut().zip(&m.values) {
                    *v += a * mv;
                }
            }
            return Ok(SparseSymMatrix {
                pattern: Arc::clone(&first.pattern),
                values,
            });
        }
        let pattern = terms
            .iter()
            .skip(1)
            .fold(Pattern::clone(&first.pattern), |acc, (_, m)| acc.union(&m.pattern));
        let mut values = vec![0.0; pattern.nnz()];
        for (a, m) in terms {
            for (r, c, q) in m.pattern.entries() {
                let pos = pattern.find(r, c).expect("union contains every operand entry");
                values[pos] += a * m.values[q];
            }
        }
        Ok(SparseSymMatrix {
            pattern: Arc::new(pattern),
            values,
        })
    }

    /// `self − other` on the union pattern.
    pub fn sub(&self, other: &SparseSymMatrix) -> Result<Self> {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
