//! Sparse symmetric positive definite solves, backed by faer's sparse
//! Cholesky factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Accumulates the lower triangle of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymmetricBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are ignored so that
    /// full element matrices can be scattered directly.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i >= j {
            self.entries.push((i, j, v));
        }
    }

    /// `y = A x` using the stored lower triangle.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    fn merged(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_unstable_by_key(|&(i, j, _)| (j, i));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (i, j, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out
    }

    /// Solves `A x = b` by sparse Cholesky.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(&[b])?.pop().unwrap())
    }

    pub fn solve_many(&self, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        if n == 0 {
            return Ok(rhs.iter().map(|_| Vec::new()).collect());
        }
        for b in rhs {
            if b.len() != n {
                return Err(Error::Linear(format!("right-hand side has length {}, expected {n}", b.len())));
            }
        }
        let trips: Vec<Triplet<usize, usize, f64>> = self
            .merged()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Linear(format!("{e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Linear(format!("Cholesky factorization failed: {e:?}")))?;
        let mut out = Vec::with_capacity(rhs.len());
        for b in rhs {
            let bm = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
            let x = llt.solve(&bm);
            let xv: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
            if xv.iter().any(|v| !v.is_finite()) {
                return Err(Error::Linear("non-finite solution".into()));
            }
            out.push(xv);
        }
        Ok(out)
    }
}
