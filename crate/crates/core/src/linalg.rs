//! Small dense linear algebra: square matrices up to a handful of rows,
//! a cyclic Jacobi eigensolver for symmetric matrices, and a pivoted LU
//! solve for the tiny local systems that appear during assembly.
//!
//! The transport matrices this crate manipulates are `n x n` with
//! `n <= 8` species, evaluated pointwise at quadrature nodes. Dense
//! storage and direct methods are the right tool at that size.

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    n: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &DenseMat, s: f64) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric_exact(&self) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self[(i, j)] != self[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    /// Largest absolute row sum, `max_i |sum_j a_ij|`.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
///
/// Converges quadratically; for the `n <= 8` matrices used here a few sweeps
/// reach machine precision. Panics if the matrix is not symmetric to within
/// `1e-12` of its largest entry.
pub fn symmetric_eigenvalues(m: &DenseMat) -> Vec<f64> {
    let n = m.dim();
    let scale = m.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            assert!(
                (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale,
                "symmetric_eigenvalues requires a symmetric matrix"
            );
        }
    }

    let mut a = m.clone();
    // Cyclic Jacobi: annihilate every off-diagonal pair per sweep.
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= 1e-300 || off <= 1e-16 * a.max_abs() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Apply the rotation G(p,q) on both sides.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Solve `A x = b` for a small dense system by LU with partial pivoting.
///
/// Returns `None` when a pivot underflows (singular to working precision).
pub fn solve_dense(a: &DenseMat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let mut lu = a.clone();
    let mut x: Vec<f64> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        if piv_val <= f64::MIN_POSITIVE {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            perm.swap(col, piv);
            x.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = lu[(r, col)] / lu[(col, col)];
            lu[(r, col)] = f;
            for j in (col + 1)..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= f * v;
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= lu[(col, col)];
        for r in 0..col {
            let f = lu[(r, col)];
            x[r] -= f * x[col];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_diagonal_matrix() {
        let m = DenseMat::from_rows(&[&[3.0, 0.0], &[0.0, -1.0]]);
        let e = symmetric_eigenvalues(&m);
        assert_eq!(e, vec![-1.0, 3.0]);
    }

    #[test]
    fn jacobi_two_by_two_analytic() {
        // [[0.5, -0.5], [-0.5, 0.5]] has eigenvalues {0, 1}.
        let m = DenseMat::from_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        let e = symmetric_eigenvalues(&m);
        assert!(e[0].abs() < 1e-15);
        assert!((e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_four_by_four_trace_and_product() {
        let m = DenseMat::from_rows(&[
            &[4.0, 1.0, 0.5, 0.2],
            &[1.0, 3.0, 0.3, 0.1],
            &[0.5, 0.3, 2.0, 0.4],
            &[0.2, 0.1, 0.4, 1.0],
        ]);
        let e = symmetric_eigenvalues(&m);
        let trace: f64 = e.iter().sum();
        assert!((trace - 10.0).abs() < 1e-12);
        // Eigenvalues ascending.
        for w in e.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn dense_solve_roundtrip() {
        let a = DenseMat::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = solve_dense(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-13);
        }
    }

    #[test]
    fn dense_solve_singular_returns_none() {
        let a = DenseMat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(solve_dense(&a, &[1.0, 2.0]).is_none());
    }
}
