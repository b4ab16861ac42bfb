//! Sparse symmetric storage and the operators the quadrature runs against.
//!
//! [`SymmetricSparseMatrix`] keeps both triangles in CSR so that a matvec is a
//! plain row-major sweep. [`SubmatrixOperator`] exposes a principal submatrix
//! `A[Y, Y]` through the same [`LinearOperator`] trait without copying it.
//!
//! Every matvec sums each row left to right in column order, so the result of a
//! product is bitwise reproducible and does not depend on whether rows were
//! distributed over threads.

use crate::error::{Error, Result};

/// Relative tolerance used when checking `A[i][j] == A[j][i]`.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Below this many stored entries a parallel matvec costs more than it saves.
#[cfg(feature = "parallel")]
pub const PARALLEL_MIN_NNZ: usize = 1 << 15;

/// A symmetric linear map given only through its action on vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`. Both slices must have length [`dim`](Self::dim).
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// Checked matvec.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// Upper bound on the largest eigenvalue: `max_i A_ii + sum_{j != i} |A_ij|`.
    fn gershgorin_upper(&self) -> f64;
}

/// Trusted outer bounds on the spectrum, used as the prescribed quadrature nodes.
///
/// The bound guarantees of the quadrature hold only if `lambda_min <= lambda_1(A)`
/// and `lambda_max >= lambda_N(A)`; that part of the contract cannot be checked here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBounds {
    lambda_min: f64,
    lambda_max: f64,
}

impl SpectrumBounds {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min.is_finite() && lambda_max.is_finite()) {
            return Err(Error::InvalidBounds(format!("non-finite bounds ({lambda_min}, {lambda_max})")));
        }
        if lambda_min <= 0.0 {
            return Err(Error::InvalidBounds(format!("lambda_min = {lambda_min} must be positive")));
        }
        if lambda_min > lambda_max {
            return Err(Error::InvalidBounds(format!(
                "lambda_min = {lambda_min} exceeds lambda_max = {lambda_max}"
            )));
        }
        Ok(SpectrumBounds { lambda_min, lambda_max })
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Bounds for `op` from a known spectral floor and the Gershgorin upper bound.
    ///
    /// Both nodes are moved outward by a relative [`NODE_MARGIN`] so they stay
    /// strictly outside the spectrum even when the floor or the Gershgorin edge
    /// is attained (a ridge-shifted Laplacian, a diagonal block). A node that
    /// touches an eigenvalue makes the Radau pivots vanish.
    pub fn with_floor<Op: LinearOperator + ?Sized>(op: &Op, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::InvalidBounds(format!("spectral floor {floor} must be positive")));
        }
        if op.dim() == 0 {
            // vacuous: nothing runs against an empty operator
            return SpectrumBounds::new(floor * (1.0 - NODE_MARGIN), floor * (1.0 + NODE_MARGIN));
        }
        let upper = op.gershgorin_upper();
        if upper < floor {
            return Err(Error::InvalidBounds(format!(
                "spectral floor {floor} exceeds the Gershgorin upper bound {upper}"
            )));
        }
        SpectrumBounds::new(floor * (1.0 - NODE_MARGIN), upper * (1.0 + NODE_MARGIN))
    }
}

/// Relative outward shift applied by [`SpectrumBounds::with_floor`].
pub const NODE_MARGIN: f64 = 1e-9;

/// Sorted, duplicate-free subset of a ground set `{0, .., N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    /// Sorts `indices`; rejects duplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::IndexInSet(w[0]));
        }
        Ok(IndexSet { indices })
    }

    pub fn empty() -> Self {
        IndexSet { indices: Vec::new() }
    }

    pub fn full(n: usize) -> Self {
        IndexSet { indices: (0..n).collect() }
    }

    /// Members of `{0, .., n-1}` that are not in `self`.
    pub fn complement(&self, n: usize) -> IndexSet {
        let mut out = Vec::with_capacity(n.saturating_sub(self.len()));
        let mut it = self.indices.iter().peekable();
        for i in 0..n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        IndexSet { indices: out }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Returns false if `i` was already present.
    pub fn insert(&mut self, i: usize) -> bool {
        match self.indices.binary_search(&i) {
            Ok(_) => false,
            Err(pos) => {
                self.indices.insert(pos, i);
                true
            }
        }
    }

    /// Returns false if `i` was absent.
    pub fn remove(&mut self, i: usize) -> bool {
        match self.indices.binary_search(&i) {
            Ok(pos) => {
                self.indices.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn without(&self, i: usize) -> IndexSet {
        let mut s = self.clone();
        s.remove(i);
        s
    }

    pub fn with(&self, i: usize) -> IndexSet {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    /// True if every member of `self` is in `other`.
    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn check_range(&self, dim: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= dim => Err(Error::IndexOutOfRange { index: last, dim }),
            _ => Ok(()),
        }
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.indices
    }
}

/// Symmetric matrix in CSR form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricSparseMatrix {
    /// Validates raw CSR arrays: offsets monotone, columns sorted and unique per
    /// row, values finite, symmetric pattern and values.
    pub fn from_csr(dim: usize, row_offsets: Vec<usize>, col_indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::MalformedCsr("dimension must be positive".into()));
        }
        if row_offsets.len() != dim + 1 || row_offsets[0] != 0 {
            return Err(Error::MalformedCsr("row_offsets must have dim + 1 entries starting at 0".into()));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::MalformedCsr("row_offsets, col_indices and values disagree in length".into()));
        }
        for r in 0..dim {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::MalformedCsr(format!("row_offsets decrease at row {r}")));
            }
            let cols = &col_indices[lo..hi];
            for (k, &c) in cols.iter().enumerate() {
                if c >= dim {
                    return Err(Error::IndexOutOfRange { index: c, dim });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::MalformedCsr(format!("columns of row {r} not strictly increasing")));
                }
                if !values[lo + k].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        let m = SymmetricSparseMatrix { dim, row_offsets, col_indices, values };
        m.check_symmetric()?;
        Ok(m)
    }

    /// Builds from `(row, col, value)` entries covering the full pattern.
    /// Repeated coordinates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::IndexOutOfRange { index: i.max(j), dim });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_offsets = vec![0usize; dim + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for r in 0..dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self::from_csr(dim, row_offsets, col_indices, values)
    }

    /// Builds from a row-major dense array, storing only nonzeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dim, &t)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let t: Vec<_> = diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
        Self::from_triplets(diag.len(), &t)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n]).expect("identity is valid")
    }

    fn check_symmetric(&self) -> Result<()> {
        for r in 0..self.dim {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= r {
                    continue;
                }
                match self.get_stored(c, r) {
                    Some(w) if (v - w).abs() <= SYMMETRY_RTOL * v.abs().max(w.abs()) => {}
                    _ => return Err(Error::NotSymmetric { row: r, col: c }),
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    fn get_stored(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// Entry `(i, j)`; zero if not stored. Panics on out-of-range indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim, "index ({i}, {j}) out of range");
        self.get_stored(i, j).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Returns `A + shift * I`, inserting diagonal entries where missing.
    pub fn shifted(&self, shift: f64) -> SymmetricSparseMatrix {
        let mut t = self.triplets();
        t.extend((0..self.dim).map(|i| (i, i, shift)));
        Self::from_triplets(self.dim, &t).expect("shifting preserves symmetry")
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            let (cols, vals) = self.row(r);
            t.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        t
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(r);
        let mut acc = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            acc += v * x[c];
        }
        acc
    }

    /// Row-by-row matvec on the calling thread.
    pub fn spmv_sequential(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row_dot(r, x);
        }
    }

    /// Matvec with rows distributed over the rayon pool. Bitwise identical to
    /// [`spmv_sequential`](Self::spmv_sequential).
    #[cfg(feature = "parallel")]
    pub fn spmv_parallel(&self, x: &[f64], y: &mut [f64]) {
        use rayon::prelude::*;
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(r, out)| *out = self.row_dot(r, x));
    }

    /// Principal submatrix operator `A[Y, Y]`.
    pub fn restrict(&self, rows: &IndexSet) -> Result<SubmatrixOperator<'_>> {
        rows.check_range(self.dim)?;
        let mut position = vec![usize::MAX; self.dim];
        for (local, g) in rows.iter().enumerate() {
            position[g] = local;
        }
        let nnz = rows.iter().map(|g| self.row_offsets[g + 1] - self.row_offsets[g]).sum();
        Ok(SubmatrixOperator { base: self, rows: rows.clone(), position, nnz })
    }

    /// Cross vector `(A[y, i])_{y in Y}` in the sorted order of `Y`.
    pub fn gather(&self, rows: &IndexSet, i: usize) -> Result<Vec<f64>> {
        if i >= self.dim {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim });
        }
        rows.check_range(self.dim)?;
        if rows.contains(i) {
            return Err(Error::IndexInSet(i));
        }
        // A[y, i] = A[i, y]: merge row i against the sorted members.
        let (cols, vals) = self.row(i);
        let mut out = vec![0.0; rows.len()];
        let members = rows.as_slice();
        let (mut a, mut b) = (0, 0);
        while a < cols.len() && b < members.len() {
            match cols[a].cmp(&members[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    out[b] = vals[a];
                    a += 1;
                    b += 1;
                }
            }
        }
        Ok(out)
    }

    /// Largest Gershgorin disc edge, a guaranteed upper bound on `lambda_N`.
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| if c == r { v } else { v.abs() }).sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest Gershgorin disc edge, a guaranteed lower bound on `lambda_1`.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| if c == r { v } else { -v.abs() }).sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl LinearOperator for SymmetricSparseMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        #[cfg(feature = "parallel")]
        if self.nnz() >= PARALLEL_MIN_NNZ {
            return self.spmv_parallel(x, y);
        }
        self.spmv_sequential(x, y)
    }

    fn gershgorin_upper(&self) -> f64 {
        SymmetricSparseMatrix::gershgorin_upper(self)
    }
}

/// Free-function matvec with dimension checking.
pub fn spmv<Op: LinearOperator + ?Sized>(op: &Op, x: &[f64]) -> Result<Vec<f64>> {
    op.apply(x)
}

/// The principal submatrix `A[rows, rows]`, applied through the parent's CSR.
#[derive(Debug, Clone)]
pub struct SubmatrixOperator<'a> {
    base: &'a SymmetricSparseMatrix,
    rows: IndexSet,
    // global index -> local position, usize::MAX if not a member
    position: Vec<usize>,
    nnz: usize,
}

impl<'a> SubmatrixOperator<'a> {
    pub fn rows(&self) -> &IndexSet {
        &self.rows
    }

    pub fn base(&self) -> &'a SymmetricSparseMatrix {
        self.base
    }

    /// Stored entries of the parent rows; an upper bound on the submatrix's own.
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    #[inline]
    fn row_dot(&self, local: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.base.row(self.rows.as_slice()[local]);
        let mut acc = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            let p = self.position[c];
            if p != usize::MAX {
                acc += v * x[p];
            }
        }
        acc
    }

    pub fn spmv_sequential(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row_dot(r, x);
        }
    }

    #[cfg(feature = "parallel")]
    pub fn spmv_parallel(&self, x: &[f64], y: &mut [f64]) {
        use rayon::prelude::*;
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(r, out)| *out = self.row_dot(r, x));
    }

    /// Dense copy of the submatrix, row-major. Test and oracle use only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let idx = self.rows.as_slice();
        idx.iter().map(|&i| idx.iter().map(|&j| self.base.get(i, j)).collect()).collect()
    }
}

impl LinearOperator for SubmatrixOperator<'_> {
    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows.len());
        debug_assert_eq!(y.len(), self.rows.len());
        #[cfg(feature = "parallel")]
        if self.nnz >= PARALLEL_MIN_NNZ {
            return self.spmv_parallel(x, y);
        }
        self.spmv_sequential(x, y)
    }

    fn gershgorin_upper(&self) -> f64 {
        self.rows
            .iter()
            .map(|g| {
                let (cols, vals) = self.base.row(g);
                cols.iter()
                    .zip(vals)
                    .filter(|(&c, _)| self.position[c] != usize::MAX)
                    .map(|(&c, &v)| if c == g { v } else { v.abs() })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Symmetric Jacobi scaling `C A C`, `C u` with `C = diag(A)^{-1/2}`.
///
/// `u' (A')^{-1} u' = u A^{-1} u` holds exactly in exact arithmetic; the
/// returned matrix has the same pattern as `A` and a unit diagonal.
pub fn jacobi_precondition(a: &SymmetricSparseMatrix, u: &[f64]) -> Result<(SymmetricSparseMatrix, Vec<f64>)> {
    if u.len() != a.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, actual: u.len() });
    }
    let diag = a.diagonal();
    if let Some((row, &value)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(Error::NonPositiveDiagonal { row, value });
    }
    let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut values = a.values.clone();
    #[allow(clippy::needless_range_loop)]
    for r in 0..a.dim {
        for k in a.row_offsets[r]..a.row_offsets[r + 1] {
            let c = a.col_indices[k];
            values[k] = if c == r { 1.0 } else { values[k] * scale[r] * scale[c] };
        }
    }
    let scaled = SymmetricSparseMatrix {
        dim: a.dim,
        row_offsets: a.row_offsets.clone(),
        col_indices: a.col_indices.clone(),
        values,
    };
    let u_scaled = u.iter().zip(&scale).map(|(x, s)| x * s).collect();
    Ok((scaled, u_scaled))
}
