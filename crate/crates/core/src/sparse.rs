//! Minimal sparse matrix support for assembly: coordinate accumulation,
//! compressed-row storage, and Matrix Market export.

use std::io::Write;
use std::path::Path;

/// Coordinate-format accumulator. Duplicate entries are summed when
/// converting to CSR, in insertion (cell) order, so assembly is
/// deterministic.
#[derive(Debug, Clone)]
pub struct CooMat {
    nrows: usize,
    ncols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl CooMat {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            triplets: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.triplets.push((row, col, value));
    }

    pub fn to_csr(&self) -> CsrMat {
        // Stable sort keeps duplicates in insertion order, so the running
        // sums below are reproducible.
        let mut sorted = self.triplets.clone();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut iter = sorted.into_iter().peekable();
        while let Some((r, c, v)) = iter.next() {
            let mut sum = v;
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    sum += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(sum);
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMat {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMat {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMat {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `y += alpha * A x`
    pub fn matvec_add(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            *out += alpha * acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_add(x, 1.0, &mut y);
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute difference against the transpose of `other`
    /// (for symmetry checks `A` vs `A^T`).
    pub fn max_abs_diff_transposed(&self, other: &CsrMat) -> f64 {
        assert_eq!(self.nrows, other.ncols);
        assert_eq!(self.ncols, other.nrows);
        // Accumulate other^T entries into a dense-free map keyed by (r, c).
        let mut diff: std::collections::BTreeMap<(usize, usize), f64> =
            std::collections::BTreeMap::new();
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                *diff.entry((r, c)).or_insert(0.0) += v;
            }
        }
        for r in 0..other.nrows {
            for (c, v) in other.row(r) {
                *diff.entry((c, r)).or_insert(0.0) -= v;
            }
        }
        diff.values().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Write in Matrix Market coordinate format (1-based indices).
    pub fn write_matrix_market(&self, path: &Path, comment: &str) -> std::io::Result<()> {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        if !comment.is_empty() {
            out.push_str(&format!("% {comment}\n"));
        }
        out.push_str(&format!("{} {} {}\n", self.nrows, self.ncols, self.nnz()));
        for (r, c, v) in self.iter_entries() {
            out.push_str(&format!("{} {} {:.16e}\n", r + 1, c + 1, v));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_to_csr_sums_duplicates() {
        let mut coo = CooMat::new(2, 3);
        coo.push(0, 1, 1.0);
        coo.push(1, 2, 2.0);
        coo.push(0, 1, 0.5);
        coo.push(0, 0, -1.0);
        let csr = coo.to_csr();
        assert_eq!(csr.nnz(), 3);
        let entries: Vec<_> = csr.iter_entries().collect();
        assert_eq!(entries, vec![(0, 0, -1.0), (0, 1, 1.5), (1, 2, 2.0)]);
    }

    #[test]
    fn matvec_matches_dense() {
        let mut coo = CooMat::new(3, 3);
        coo.push(0, 0, 2.0);
        coo.push(0, 2, 1.0);
        coo.push(1, 1, -1.0);
        coo.push(2, 0, 3.0);
        coo.push(2, 2, 4.0);
        let csr = coo.to_csr();
        let y = csr.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![5.0, -2.0, 15.0]);
        assert!((csr.frobenius_norm() - (4.0f64 + 1.0 + 1.0 + 9.0 + 16.0).sqrt()).abs() < 1e-15);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csr_matvec_matches_dense_accumulation(
                triplets in proptest::collection::vec(
                    (0usize..6, 0usize..5, -10.0f64..10.0),
                    0..40,
                ),
                x in proptest::collection::vec(-5.0f64..5.0, 5),
            ) {
                let mut coo = CooMat::new(6, 5);
                let mut dense = vec![[0.0f64; 5]; 6];
                for &(r, c, v) in &triplets {
                    coo.push(r, c, v);
                    dense[r][c] += v;
                }
                let y = coo.to_csr().matvec(&x);
                for r in 0..6 {
                    let expected: f64 = (0..5).map(|c| dense[r][c] * x[c]).sum();
                    prop_assert!((y[r] - expected).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn matrix_market_roundtrip_text() {
        let mut coo = CooMat::new(2, 2);
        coo.push(0, 0, 1.5);
        coo.push(1, 0, -2.0);
        let csr = coo.to_csr();
        let dir = std::env::temp_dir().join("smfem_mm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("block.mtx");
        csr.write_matrix_market(&path, "test block").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "%%MatrixMarket matrix coordinate real general"
        );
        assert_eq!(lines.next().unwrap(), "% test block");
        assert_eq!(lines.next().unwrap(), "2 2 2");
        assert!(lines.next().unwrap().starts_with("1 1 1.5"));
        assert!(lines.next().unwrap().starts_with("2 1 -2.0"));
    }
}
