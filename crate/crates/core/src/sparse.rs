//! Thin wrapper over faer's sparse LU with symbolic-factorization reuse.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::MatMut;

use crate::{Error, Result};

/// Square sparse matrix assembled from triplets; duplicates are summed.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self { n, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))
    }
}

/// LU factorization of a sparse matrix.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(a: &Triplets) -> Result<Self> {
        let mut s = Symbolic::default();
        s.factor(a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        let m = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place(m);
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Caches the symbolic analysis for matrices sharing one sparsity pattern
/// (assembled in the same triplet order).
#[derive(Default)]
pub struct Symbolic {
    sym: Option<(usize, usize, SymbolicLu<usize>)>,
}

impl Symbolic {
    pub fn factor(&mut self, a: &Triplets) -> Result<SparseLu> {
        let m = a.to_faer()?;
        let key = (a.n, a.entries.len());
        let sym = match &self.sym {
            Some((n, nnz, s)) if (*n, *nnz) == key => s.clone(),
            _ => {
                let s = SymbolicLu::try_new(m.symbolic())
                    .map_err(|e| Error::Numerical(format!("symbolic LU failed: {e:?}")))?;
                self.sym = Some((key.0, key.1, s.clone()));
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(sym, m.as_ref())
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { n: a.n, lu })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let mut t = Triplets::new(n);
        for i in 0..n {
            t.push(i, i, 2.5);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.push(i, i + 1, -1.2);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut sym = Symbolic::default();
        for _ in 0..2 {
            let x = sym.factor(&t).unwrap().solve(&b);
            let mut r = vec![0.0; n];
            t.apply(&x, &mut r);
            let err = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }
}
