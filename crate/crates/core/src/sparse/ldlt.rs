use std::cell::Cell;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{minimum_degree, Pattern, SparseSymMatrix};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Pivots below this fraction of the largest diagonal entry count as
/// non-positive.
const PIVOT_TOLERANCE: f64 = 1e-14;

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of numeric factorizations performed on the calling thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(Cell::get)
}

/// Ordering and elimination tree for one sparsity pattern. Reusable across
/// every matrix sharing that pattern.
#[derive(Debug, Clone)]
pub struct Symbolic {
    pattern: Arc<Pattern>,
    perm: Arc<[usize]>,
    parent: Vec<usize>,
    lp: Arc<[usize]>,
    // upper triangle of P·A·Pᵀ in compressed-column form; `src` points back
    // into the value array of the lower-triangle storage
    ap: Vec<usize>,
    ai: Vec<usize>,
    src: Vec<usize>,
}

impl Symbolic {
    pub fn analyze(a: &SparseSymMatrix) -> Result<Self> {
        Self::with_ordering(a.pattern(), minimum_degree(a.pattern()))
    }

    /// Analysis under a caller-supplied elimination order.
    pub fn with_ordering(pattern: &Arc<Pattern>, perm: Vec<usize>) -> Result<Self> {
        let n = pattern.dim();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: perm.len(),
            });
        }
        let mut pinv = vec![NONE; n];
        for (k, &i) in perm.iter().enumerate() {
            if i >= n || pinv[i] != NONE {
                return Err(Error::InvalidParameter("ordering is not a permutation".into()));
            }
            pinv[i] = k;
        }

        let mut ap = vec![0usize; n + 1];
        for (r, c, _) in pattern.entries() {
            ap[pinv[r].max(pinv[c]) + 1] += 1;
        }
        for k in 0..n {
            ap[k + 1] += ap[k];
        }
        let mut next = ap.clone();
        let mut ai = vec![0usize; pattern.nnz()];
        let mut src = vec![0usize; pattern.nnz()];
        for (r, c, q) in pattern.entries() {
            let (pr, pc) = (pinv[r], pinv[c]);
            let col = pr.max(pc);
            ai[next[col]] = pr.min(pc);
            src[next[col]] = q;
            next[col] += 1;
        }

        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &row in &ai[ap[k]..ap[k + 1]] {
                let mut i = row;
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        Ok(Symbolic {
            pattern: Arc::clone(pattern),
            perm: perm.into(),
            parent,
            lp: lp.into(),
            ap,
            ai,
            src,
        })
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// Strictly-lower nonzeros of the factor `L`.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.dim()]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Numeric up-looking LDLᵀ of a matrix on this pattern.
    pub fn factor(&self, a: &SparseSymMatrix) -> Result<Factorization> {
        if !(Arc::ptr_eq(a.pattern(), &self.pattern) || **a.pattern() == *self.pattern) {
            return Err(Error::PatternMismatch);
        }
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));

        let n = self.dim();
        let values = a.values();
        let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = PIVOT_TOLERANCE * max_diag;

        let lp = &self.lp;
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0f64; lp[n]];
        let mut d = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        let mut stack = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in self.ap[k]..self.ap[k + 1] {
                let mut i = self.ai[p];
                y[i] += values[self.src[p]];
                let mut len = 0;
                while flag[i] != k {
                    stack[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    stack[top] = stack[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = stack[top];
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
                top += 1;
            }
            if !(d[k] > tol) {
                return Err(Error::NonPositivePivot {
                    index: self.perm[k],
                    value: d[k],
                });
            }
        }

        Ok(Factorization {
            perm: Arc::clone(&self.perm),
            lp: Arc::clone(&self.lp),
            li,
            lx,
            d,
        })
    }
}

/// `P·A·Pᵀ = L·D·Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct Factorization {
    perm: Arc<[usize]>,
    lp: Arc<[usize]>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

/// Orders, analyzes and factors an SPD matrix.
pub fn factor_spd(a: &SparseSymMatrix) -> Result<Factorization> {
    Symbolic::analyze(a)?.factor(a)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rhs.len(),
            });
        }
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Solves in place; `x` must have length `dim()`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        let mut w: Vec<f64> = self.perm.iter().map(|&i| x[i]).collect();
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    w[self.li[p]] -= self.lx[p] * wj;
                }
            }
        }
        for (wj, dj) in w.iter_mut().zip(&self.d) {
            *wj /= dj;
        }
        for j in (0..n).rev() {
            let mut acc = w[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p] * w[self.li[p]];
            }
            w[j] = acc;
        }
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = w[k];
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Dense unit lower-triangular factor in permuted ordering.
    pub fn l_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut l = DMatrix::identity(n, n);
        for j in 0..n {
            for p in self.lp[j]..self.lp[j + 1] {
                l[(self.li[p], j)] = self.lx[p];
            }
        }
        l
    }

    /// Rebuilds `A` from `Pᵀ·L·D·Lᵀ·P`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let l = self.l_dense();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.d));
        let pa = &l * d * l.transpose();
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                a[(self.perm[r], self.perm[c])] = pa[(r, c)];
            }
        }
        a
    }
}
