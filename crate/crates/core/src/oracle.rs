//! Dense reference computations: direct BIFs, log-determinants, extreme
//! eigenvalues and exhaustive (k-)DPP distributions.
//!
//! These are the ground truth for the test suites and the "original algorithm"
//! baselines of the benchmark harness. They share nothing with the quadrature
//! path except the sparse matrix container they read from.

use crate::error::{Error, Result};
use crate::matrix::{IndexSet, SymmetricSparseMatrix};
use nalgebra::{DMatrix, DVector};

/// Largest dimension the dense routines accept.
pub const DENSE_CAP: usize = 4096;

/// Largest ground set for exhaustive subset enumeration.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    /// Row-major data; must be symmetric to 1e-12 relative and finite.
    pub fn new(dim: usize, row_major: Vec<f64>) -> Result<Self> {
        if dim > DENSE_CAP {
            return Err(Error::TooLarge { dim, limit: DENSE_CAP });
        }
        if row_major.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: row_major.len() });
        }
        for i in 0..dim {
            for j in 0..dim {
                let a = row_major[i * dim + j];
                if !a.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                let b = row_major[j * dim + i];
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(DenseMatrix { inner: DMatrix::from_row_slice(dim, dim, &row_major) })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn from_sparse(a: &SymmetricSparseMatrix) -> Result<Self> {
        let n = crate::matrix::LinearOperator::dim(a);
        if n > DENSE_CAP {
            return Err(Error::TooLarge { dim: n, limit: DENSE_CAP });
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in a.triplets() {
            m[(i, j)] = v;
        }
        Ok(DenseMatrix { inner: m })
    }

    /// Dense principal submatrix `A[Y, Y]`.
    pub fn submatrix(a: &SymmetricSparseMatrix, rows: &IndexSet) -> Result<Self> {
        let k = rows.len();
        if k > DENSE_CAP {
            return Err(Error::TooLarge { dim: k, limit: DENSE_CAP });
        }
        rows.check_range(crate::matrix::LinearOperator::dim(a))?;
        let idx = rows.as_slice();
        let mut m = DMatrix::zeros(k, k);
        for (li, &gi) in idx.iter().enumerate() {
            let (cols, vals) = a.row(gi);
            for (&c, &v) in cols.iter().zip(vals) {
                if let Ok(lj) = idx.binary_search(&c) {
                    m[(li, lj)] = v;
                }
            }
        }
        Ok(DenseMatrix { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (&self.inner * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// Solves `A x = b` by Cholesky.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: b.len() });
        }
        let chol = self.cholesky()?;
        Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
    }

    /// `u^T A^{-1} u` for each `u`, sharing one factorization.
    pub fn bif_many(&self, us: &[&[f64]]) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(vec![0.0; us.len()]);
        }
        let chol = self.cholesky()?;
        us.iter()
            .map(|u| {
                if u.len() != self.dim() {
                    return Err(Error::DimensionMismatch { expected: self.dim(), actual: u.len() });
                }
                let x = chol.solve(&DVector::from_column_slice(u));
                Ok(u.iter().zip(x.iter()).map(|(p, q)| p * q).sum())
            })
            .collect()
    }

    /// Dense inverse, row-major.
    pub fn inverse(&self) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        let inv = self.cholesky()?.inverse();
        // symmetric, so column-major storage reads equally well as row-major
        Ok(inv.as_slice().to_vec())
    }

    fn cholesky(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.inner
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { iter: 0, pivot: f64::NAN })
    }

    /// `log det A` from the Cholesky factor.
    pub fn logdet(&self) -> Result<f64> {
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let chol = self.cholesky()?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// Determinant by LU; used for PSD enumeration where Cholesky may fail.
    pub fn determinant(&self) -> f64 {
        if self.dim() == 0 {
            return 1.0;
        }
        self.inner.clone().determinant()
    }
}

/// `u^T A^{-1} u` by a direct Cholesky solve.
pub fn bif_dense(a: &DenseMatrix, u: &[f64]) -> Result<f64> {
    if a.dim() == 0 && u.is_empty() {
        return Ok(0.0);
    }
    let x = a.solve(u)?;
    Ok(u.iter().zip(&x).map(|(p, q)| p * q).sum())
}

/// `L[i, Y] L[Y, Y]^{-1} L[Y, i]` by materializing the submatrix. Zero for empty `Y`.
pub fn cross_bif_dense(l: &SymmetricSparseMatrix, rows: &IndexSet, i: usize) -> Result<f64> {
    if rows.is_empty() {
        return Ok(0.0);
    }
    let u = l.gather(rows, i)?;
    if u.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    bif_dense(&DenseMatrix::submatrix(l, rows)?, &u)
}

/// A Cholesky factor grown one row at a time, for Schur complements against a
/// growing index set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IncrementalCholesky {
    // row r holds the r + 1 leading entries of row r of the lower factor
    rows: Vec<Vec<f64>>,
}

impl IncrementalCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Solves `R w = b` for the current lower factor `R`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(b.len());
        for (r, row) in self.rows.iter().enumerate() {
            let acc: f64 = row[..r].iter().zip(&w).map(|(a, x)| a * x).sum();
            w.push((b[r] - acc) / row[r]);
        }
        w
    }

    /// Schur complement `d - b^T A^{-1} b` of appending a row `(b, d)`, and the
    /// forward-solved `b` that [`push`](Self::push) needs.
    pub fn schur(&self, b: &[f64], d: f64) -> (Vec<f64>, f64) {
        let w = self.forward(b);
        let s = d - w.iter().map(|x| x * x).sum::<f64>();
        (w, s)
    }

    pub fn push(&mut self, mut w: Vec<f64>, schur: f64) -> Result<()> {
        if !(schur > 0.0) {
            return Err(Error::NonPositiveSchur { value: schur });
        }
        w.push(schur.sqrt());
        self.rows.push(w);
        Ok(())
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self.rows.iter().enumerate().map(|(r, row)| row[r].ln()).sum::<f64>()
    }
}

/// `(lambda_1, lambda_N)` from a dense symmetric eigensolver.
pub fn eig_extremes_dense(a: &DenseMatrix) -> (f64, f64) {
    let ev = a.inner.clone().symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Normalized probabilities `P(Y) ∝ det(L_Y)` over all subsets, or all
/// `k`-subsets when `k` is given.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDistribution {
    pub entries: Vec<(IndexSet, f64)>,
}

impl SubsetDistribution {
    pub fn prob(&self, y: &IndexSet) -> f64 {
        self.entries.iter().find(|(s, _)| s == y).map_or(0.0, |(_, p)| *p)
    }

    /// Total variation distance to empirical visit counts.
    pub fn tv_distance(&self, counts: &std::collections::HashMap<IndexSet, u64>) -> f64 {
        let total: u64 = counts.values().sum();
        let total = total.max(1) as f64;
        let mut tv = 0.0;
        for (s, p) in &self.entries {
            let q = counts.get(s).copied().unwrap_or(0) as f64 / total;
            tv += (p - q).abs();
        }
        // mass on states the distribution does not list
        for (s, &c) in counts {
            if !self.entries.iter().any(|(t, _)| t == s) {
                tv += c as f64 / total;
            }
        }
        0.5 * tv
    }
}

pub fn dpp_exact_distribution(l: &DenseMatrix, k: Option<usize>) -> Result<SubsetDistribution> {
    let n = l.dim();
    if n > ENUMERATION_CAP {
        return Err(Error::TooLarge { dim: n, limit: ENUMERATION_CAP });
    }
    if let Some(k) = k {
        if k > n {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds ground set size {n}")));
        }
    }
    let mut entries = Vec::new();
    for mask in 0u32..(1u32 << n) {
        if let Some(k) = k {
            if mask.count_ones() as usize != k {
                continue;
            }
        }
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = members.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in &members {
            for &j in &members {
                data.push(l.get(i, j));
            }
        }
        let det = DenseMatrix { inner: DMatrix::from_row_slice(m, m, &data) }.determinant().max(0.0);
        entries.push((IndexSet::new(members)?, det));
    }
    let z: f64 = entries.iter().map(|(_, d)| d).sum();
    if !(z > 0.0) {
        return Err(Error::InvalidArgument("all subset determinants vanish".into()));
    }
    for e in &mut entries {
        e.1 /= z;
    }
    Ok(SubsetDistribution { entries })
}
