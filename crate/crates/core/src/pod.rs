//! Proper orthogonal decomposition of displacement snapshots and the
//! equivalent static loads built from the retained modes.

use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::newmark::SnapshotMatrix;
use crate::sparse::SparseSymMatrix;

/// Singular values below this fraction of the largest are treated as zero.
const NEGLIGIBLE: f64 = 1e-12;

/// Thin SVD `U = Φ·diag(S)·Aᵀ` with non-increasing `S`.
#[derive(Debug, Clone)]
pub struct PodDecomposition {
    /// `h × r` left singular vectors.
    pub modes: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `l × r` right singular vectors.
    pub right: DMatrix<f64>,
}

impl PodDecomposition {
    /// `‖U − Φ·diag(S)·Aᵀ‖_F`.
    pub fn reconstruction_error(&self, u: &DMatrix<f64>) -> f64 {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.singular_values));
        (u - &self.modes * s * self.right.transpose()).norm()
    }
}

/// Thin SVD of the snapshot matrix. Tall matrices are first reduced by a QR
/// factorization so only an `l × l` SVD is needed. Each mode's
/// largest-magnitude component is made positive.
pub fn pod_decompose(u: &SnapshotMatrix) -> Result<PodDecomposition> {
    decompose_matrix(u.matrix())
}

pub fn decompose_matrix(u: &DMatrix<f64>) -> Result<PodDecomposition> {
    if u.is_empty() || u.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroSnapshots);
    }
    let (h, l) = u.shape();
    let (left, s, vt) = if h > l {
        let qr = u.clone().qr();
        let q = qr.q();
        let svd = qr.r().svd(true, true);
        (
            q * svd.u.expect("requested"),
            svd.singular_values,
            svd.v_t.expect("requested"),
        )
    } else {
        let svd = u.clone().svd(true, true);
        (
            svd.u.expect("requested"),
            svd.singular_values,
            svd.v_t.expect("requested"),
        )
    };

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let r = order.len();
    let mut modes = DMatrix::zeros(h, r);
    let mut right = DMatrix::zeros(l, r);
    let mut singular_values = Vec::with_capacity(r);
    for (j, &src) in order.iter().enumerate() {
        let col = left.column(src);
        let pivot = col.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        modes.column_mut(j).copy_from(&(col * sign));
        right.column_mut(j).copy_from(&(vt.row(src).transpose() * sign));
        singular_values.push(s[src]);
    }
    Ok(PodDecomposition {
        modes,
        singular_values,
        right,
    })
}

/// Smallest `m` whose cumulative singular-value ratio reaches `eps`. With
/// `squared` the ratio uses `S_j²`. Values below `1e-12·S₁` are excluded.
pub fn select_mode_count(s: &[f64], eps: f64, squared: bool) -> usize {
    let Some(&s1) = s.first() else {
        return 0;
    };
    let w = |x: f64| if squared { x * x } else { x };
    let kept: Vec<f64> = s.iter().copied().filter(|&x| x >= NEGLIGIBLE * s1 && x > 0.0).collect();
    let total: f64 = kept.iter().map(|&x| w(x)).sum();
    if total == 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (j, &x) in kept.iter().enumerate() {
        acc += w(x);
        // a relative slack keeps ε = 1 reachable despite rounding
        if acc >= eps * total * (1.0 - 1e-14) {
            return j + 1;
        }
    }
    kept.len()
}

/// Retained modes `Φ = {φ₁ … φ_m}`.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub modes: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub m: usize,
    pub eps: f64,
}

impl PodBasis {
    pub fn from_snapshots(u: &SnapshotMatrix, eps: f64, squared: bool) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("energy ratio {eps} outside (0, 1]")));
        }
        let dec = pod_decompose(u)?;
        let m = select_mode_count(&dec.singular_values, eps, squared).max(1);
        Ok(PodBasis {
            modes: dec.modes.columns(0, m).into_owned(),
            singular_values: dec.singular_values,
            m,
            eps,
        })
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        let h = self.modes.nrows();
        &self.modes.as_slice()[j * h..(j + 1) * h]
    }
}

/// Static load cases standing in for the dynamic response.
#[derive(Debug, Clone, PartialEq)]
pub struct EslSet {
    pub loads: Vec<Vec<f64>>,
    /// Outer iteration whose stiffness produced the loads.
    pub iteration: usize,
}

impl EslSet {
    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    /// One column per load.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let h = self.loads.first().map_or(0, Vec::len);
        let header: Vec<String> = (1..=self.loads.len()).map(|j| format!("f{j}")).collect();
        writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        for r in 0..h {
            let row: Vec<String> = self.loads.iter().map(|f| format!("{:e}", f[r])).collect();
            writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn columns_times_k(k: &SparseSymMatrix, cols: &DMatrix<f64>, iteration: usize) -> Result<EslSet> {
    if cols.nrows() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            actual: cols.nrows(),
        });
    }
    let h = cols.nrows();
    let loads = (0..cols.ncols())
        .map(|j| k.matvec(&cols.as_slice()[j * h..(j + 1) * h]))
        .collect::<Result<Vec<_>>>()?;
    Ok(EslSet { loads, iteration })
}

/// `f_j = K·φ_j` for every retained mode.
pub fn build_esl(k: &SparseSymMatrix, modes: &DMatrix<f64>, iteration: usize) -> Result<EslSet> {
    columns_times_k(k, modes, iteration)
}

/// `f_i = K·d_i` for every snapshot.
pub fn exact_esl(k: &SparseSymMatrix, u: &SnapshotMatrix, iteration: usize) -> Result<EslSet> {
    columns_times_k(k, u.matrix(), iteration)
}
