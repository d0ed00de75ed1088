//! Dense symmetric positive-definite solves via Cholesky factorization.
//!
//! The solver refactors a J x J matrix once per coefficient update and
//! back-substitutes for each output, so the factorization is the hot path.
//! The dot products are unrolled into independent accumulators to keep the
//! FPU pipeline full at these sizes (J of a few hundred).

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of an SPD matrix.
pub struct CholeskyFactor {
    l: Vec<f64>,
    n: usize,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 4];
    let chunks = len / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..len {
        tail += a[i] * b[i];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Factors `a = L L^T`. Fails on non-SPD input (non-positive pivot).
pub fn cholesky(a: &Array2<f64>) -> Result<CholeskyFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l: Vec<f64> = a
        .as_standard_layout()
        .as_slice()
        .expect("standard layout")
        .to_vec();
    for i in 0..n {
        let (head, tail) = l.split_at_mut(i * n);
        let row_i = &mut tail[..n];
        for j in 0..i {
            let row_j = &head[j * n..j * n + n];
            let s = (row_i[j] - dot(&row_i[..j], &row_j[..j])) / row_j[j];
            row_i[j] = s;
        }
        let diag = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::Solver(format!(
                "matrix is not positive definite (pivot {diag} at row {i}); \
                 the system is rank deficient"
            )));
        }
        row_i[i] = diag.sqrt();
        for k in i + 1..n {
            row_i[k] = 0.0;
        }
    }
    Ok(CholeskyFactor { l, n })
}

impl CholeskyFactor {
    /// Solves `A x = b` by forward then backward substitution.
    pub fn solve(&self, b: ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "rhs has length {}, expected {}",
                b.len(),
                n
            )));
        }
        let mut x: Vec<f64> = b.to_vec();
        // L y = b
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            x[i] = (x[i] - dot(row, &x[..i])) / self.l[i * n + i];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        Ok(Array1::from_vec(x))
    }

    /// Solves one system per column of `rhs`.
    pub fn solve_columns(&self, rhs: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.n, rhs.ncols()));
        for (k, col) in rhs.columns().into_iter().enumerate() {
            out.column_mut(k).assign(&self.solve(col)?);
        }
        Ok(out)
    }
}
