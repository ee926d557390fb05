//! Normal-equation solves for the small least-squares problems in
//! spectral fitting and BDSD.

use nalgebra::{DMatrix, DVector};

/// Relative pivot floor below which a Gram matrix is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Accumulates `A^T A` and `A^T b` row by row.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    rows: usize,
}

impl NormalEquations {
    pub fn new(unknowns: usize) -> Self {
        Self {
            gram: DMatrix::zeros(unknowns, unknowns),
            rhs: DVector::zeros(unknowns),
            rows: 0,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.rhs.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn add_row(&mut self, row: &[f64], target: f64) {
        let n = self.unknowns();
        debug_assert_eq!(row.len(), n);
        for i in 0..n {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            self.rhs[i] += ri * target;
            for j in i..n {
                self.gram[(i, j)] += ri * row[j];
            }
        }
        self.rows += 1;
    }

    /// Replaces the accumulated `A^T b`, keeping the Gram matrix.
    pub fn set_rhs(&mut self, rhs: &[f64]) {
        debug_assert_eq!(rhs.len(), self.unknowns());
        self.rhs = DVector::from_column_slice(rhs);
    }

    /// Solves `(A^T A + ridge I) x = A^T b`, returning `None` if the system
    /// is numerically singular.
    pub fn solve(&self, ridge: f64) -> Option<Vec<f64>> {
        let n = self.unknowns();
        let mut gram = self.gram.clone();
        for i in 0..n {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
            gram[(i, i)] += ridge;
        }
        solve_spd(gram, self.rhs.clone())
    }

    /// Like [`solve`](Self::solve) but only requires the regularized
    /// factorization to exist, for callers that regularize on purpose.
    pub fn solve_regularized(&self, ridge: f64) -> Option<Vec<f64>> {
        let n = self.unknowns();
        let mut gram = self.gram.clone();
        for i in 0..n {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
            gram[(i, i)] += ridge;
        }
        let x = gram.cholesky()?.solve(&self.rhs);
        x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
    }

    /// Mean diagonal entry of `A^T A`, a scale for relative ridges.
    pub fn mean_diagonal(&self) -> f64 {
        let n = self.unknowns();
        if n == 0 {
            return 0.0;
        }
        self.gram.diagonal().iter().sum::<f64>() / n as f64
    }
}

/// Cholesky solve of a symmetric positive definite system.
pub fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Option<Vec<f64>> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_diag == 0.0 {
        return None;
    }
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_TOLERANCE * max_diag) {
        return None;
    }
    let x = chol.solve(&b);
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}
