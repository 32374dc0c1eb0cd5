//! Matrix Market (`coordinate real symmetric`) import and export.

use std::fmt::Write as _;
use std::path::Path;

use super::SparseSymMatrix;
use crate::error::{Error, Result};

pub fn write_matrix_market(a: &SparseSymMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{} {} {}", a.dim(), a.dim(), a.nnz());
    for (r, c, q) in a.pattern().entries() {
        let _ = writeln!(out, "{} {} {:.17e}", r + 1, c + 1, a.values()[q]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_market(path: &Path) -> Result<SparseSymMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Parse {
        what: path.display().to_string(),
        msg: msg.to_string(),
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?.to_ascii_lowercase();
    if !header.starts_with("%%matrixmarket") || !header.contains("coordinate") || !header.contains("symmetric") {
        return Err(bad("expected a coordinate symmetric matrix"));
    }
    let mut body = lines.filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let dims: Vec<usize> = body
        .next()
        .ok_or_else(|| bad("missing size line"))?
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| bad("bad size line")))
        .collect::<Result<_>>()?;
    if dims.len() != 3 || dims[0] != dims[1] {
        return Err(bad("size line must be `n n nnz`"));
    }
    let mut triplets = Vec::with_capacity(dims[2]);
    for line in body {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad("entry line must have three fields"));
        }
        let r: usize = f[0].parse().map_err(|_| bad("bad row index"))?;
        let c: usize = f[1].parse().map_err(|_| bad("bad column index"))?;
        let v: f64 = f[2].parse().map_err(|_| bad("bad value"))?;
        if r == 0 || c == 0 {
            return Err(bad("indices are 1-based"));
        }
        triplets.push((r - 1, c - 1, v));
    }
    SparseSymMatrix::assemble(&triplets, dims[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = SparseSymMatrix::assemble(&[(0, 0, 4.0), (1, 0, -1.25), (2, 2, 3.0e-7), (2, 1, 1.0 / 3.0)], 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        write_matrix_market(&a, &path).unwrap();
        assert_eq!(read_matrix_market(&path).unwrap(), a);
    }
}
