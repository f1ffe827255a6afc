//! Compressed sparse column storage and the direct solver used for every
//! linear system (mass matrices and Newton corrections).

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::prelude::*;
use faer::MatMut;

use crate::error::{Error, Result};

/// Target relative residual of [`Factorization::solve_refined`].
pub const REFINEMENT_TOL: f64 = 1e-12;
const MAX_REFINEMENT_STEPS: usize = 5;

/// Square CSC matrix with sorted, duplicate-free row indices per column.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    /// Pattern from `(row, col)` pairs; values start at zero.
    pub fn from_pattern(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c) in entries {
            assert!(r < n && c < n, "entry ({r}, {c}) outside {n}x{n}");
            cols[c].push(r);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let nnz = row_idx.len();
        CscMatrix {
            n,
            col_ptr,
            row_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Sums duplicate triplets.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut m = Self::from_pattern(n, triplets.iter().map(|&(r, c, _)| (r, c)));
        for &(r, c, v) in triplets {
            let slot = m.find(r, c).expect("entry is in the pattern");
            m.values[slot] += v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage slot of entry `(r, c)`, if it is structurally present.
    #[inline]
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let (lo, hi) = (self.col_ptr[c], self.col_ptr[c + 1]);
        self.row_idx[lo..hi].binary_search(&r).ok().map(|i| lo + i)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.find(r, c).map_or(0.0, |s| self.values[s])
    }

    pub fn clear_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Iterates over `(row, col, value)` of stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |s| (self.row_idx[s], c, self.values[s]))
        })
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for s in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[s]] += self.values[s] * xc;
            }
        }
        y
    }

    /// Replaces row and column `i` by the unit vector (value 1 on the diagonal).
    /// The diagonal must be in the pattern.
    pub fn eliminate(&mut self, dofs: &[usize]) {
        let mut mark = vec![false; self.n];
        for &i in dofs {
            mark[i] = true;
        }
        for c in 0..self.n {
            for s in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[s];
                if mark[r] || mark[c] {
                    self.values[s] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        let symbolic =
            SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        SparseColMatRef::new(symbolic, &self.values)
    }

    /// Fill-reducing symbolic analysis, reusable for every matrix with this pattern.
    pub fn analyze(&self) -> Result<SymbolicAnalysis> {
        let symbolic = SymbolicLu::try_new(self.as_faer().symbolic())
            .map_err(|e| Error::Linear(format!("symbolic analysis failed: {e:?}")))?;
        Ok(SymbolicAnalysis {
            symbolic,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
        })
    }
}

/// Symbolic LU of a fixed sparsity pattern.
#[derive(Clone, Debug)]
pub struct SymbolicAnalysis {
    symbolic: SymbolicLu<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SymbolicAnalysis {
    /// Numeric LU with partial pivoting.
    pub fn factor<'a>(&self, a: &'a CscMatrix) -> Result<Factorization<'a>> {
        if a.col_ptr != self.col_ptr || a.row_idx != self.row_idx {
            return Err(Error::Linear("matrix pattern differs from the analyzed one".into()));
        }
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), a.as_faer())
            .map_err(|e| Error::Linear(format!("numeric factorization failed: {e:?}")))?;
        Ok(Factorization { matrix: a, lu })
    }
}

/// Numeric factorization bound to the matrix it came from.
pub struct Factorization<'a> {
    matrix: &'a CscMatrix,
    lu: Lu<usize, f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Factorization<'_> {
    fn solve_raw(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mat = MatMut::from_column_major_slice_mut(rhs, n, 1);
        self.lu.solve_in_place(mat);
    }

    /// Direct solve followed by iterative refinement until
    /// `|b - A x| <= REFINEMENT_TOL |b|` (or the step budget runs out).
    pub fn solve_refined(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        let mut x = b.to_vec();
        self.solve_raw(&mut x);
        if bn == 0.0 {
            return Ok(x);
        }
        for _ in 0..MAX_REFINEMENT_STEPS {
            let ax = self.matrix.matvec(&x);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let rn = norm(&r);
            if !rn.is_finite() {
                return Err(Error::Linear("non-finite residual (singular matrix?)".into()));
            }
            if rn <= REFINEMENT_TOL * bn {
                return Ok(x);
            }
            self.solve_raw(&mut r);
            x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
        }
        let ax = self.matrix.matvec(&x);
        let rn = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
        if !rn.is_finite() {
            return Err(Error::Linear("non-finite residual (singular matrix?)".into()));
        }
        log::debug!(
            "iterative refinement stopped at relative residual {:.3e}",
            rn / bn
        );
        Ok(x)
    }
}

/// One-shot solve of `A x = b`.
pub fn solve(a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.analyze()?.factor(a)?.solve_refined(b)
}
