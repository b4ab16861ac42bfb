//! Kernel constructors: RBF kernels on point clouds, graph Laplacians and the
//! seeded random sparse SPD family used by the convergence experiments.

use crate::error::{Error, Result};
use crate::matrix::SymmetricSparseMatrix;
use crate::oracle::{eig_extremes_dense, DenseMatrix, DENSE_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;

/// `K_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))` for pairs within `cutoff`,
/// structurally zero otherwise. Exact all-pairs search.
pub fn build_rbf_kernel(points: &[Vec<f64>], sigma: f64, cutoff: f64) -> Result<SymmetricSparseMatrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be positive")));
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff = {cutoff} must be positive")));
    }
    let m = points.len();
    let d = points.first().map_or(0, Vec::len);
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: p.len() });
        }
        if let Some(c) = p.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: i, col: c });
        }
    }
    let cut2 = cutoff * cutoff;
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut t = Vec::new();
    for i in 0..m {
        t.push((i, i, 1.0));
        for j in i + 1..m {
            let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 <= cut2 {
                let k = (-d2 * scale).exp();
                t.push((i, j, k));
                t.push((j, i, k));
            }
        }
    }
    SymmetricSparseMatrix::from_triplets(m, &t)
}

/// A graph Laplacian together with the number of self-loops that were ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub matrix: SymmetricSparseMatrix,
    pub dropped_self_loops: usize,
}

/// `D - A` for an undirected graph on `0..n`, where `n` defaults to one past
/// the largest vertex. Duplicate edges count once.
pub fn build_laplacian(edges: &[(usize, usize)], n: Option<usize>) -> Result<Laplacian> {
    let max_v = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let n = n.unwrap_or(max_v);
    if max_v > n {
        return Err(Error::IndexOutOfRange { index: max_v - 1, dim: n });
    }
    let mut dropped = 0;
    let mut set = BTreeSet::new();
    for &(a, b) in edges {
        if a == b {
            dropped += 1;
            continue;
        }
        set.insert((a.min(b), a.max(b)));
    }
    let mut degree = vec![0.0; n];
    let mut t = Vec::with_capacity(2 * set.len() + n);
    for &(a, b) in &set {
        degree[a] += 1.0;
        degree[b] += 1.0;
        t.push((a, b, -1.0));
        t.push((b, a, -1.0));
    }
    t.extend(degree.iter().enumerate().map(|(i, &d)| (i, i, d)));
    Ok(Laplacian { matrix: SymmetricSparseMatrix::from_triplets(n, &t)?, dropped_self_loops: dropped })
}

/// Parameters of the random sparse SPD family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub density: f64,
    pub lam1: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Parses `"n=100 density=0.1 lam1=1e-2 seed=3"`; keys may also be
    /// separated by commas. Missing keys take `density=0.1 lam1=1e-2 seed=0`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut spec = SyntheticSpec { n: 0, density: 0.1, lam1: 1e-2, seed: 0 };
        let mut have_n = false;
        for tok in s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got `{tok}`")))?;
            let bad = |_| Error::InvalidArgument(format!("bad value for {k}: `{v}`"));
            match k {
                "n" => {
                    spec.n = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                    have_n = true;
                }
                "density" => spec.density = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                "lam1" => spec.lam1 = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                "seed" => spec.seed = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                _ => return Err(Error::InvalidArgument(format!("unknown synthetic key `{k}`"))),
            }
        }
        if !have_n || spec.n == 0 {
            return Err(Error::InvalidArgument("synthetic description needs n >= 1".into()));
        }
        if !(spec.density > 0.0 && spec.density <= 1.0) {
            return Err(Error::InvalidArgument(format!("density {} must lie in (0, 1]", spec.density)));
        }
        if !(spec.lam1 > 0.0 && spec.lam1.is_finite()) {
            return Err(Error::InvalidArgument(format!("lam1 {} must be positive", spec.lam1)));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub matrix: SymmetricSparseMatrix,
    /// Smallest eigenvalue after the shift: the target when the dense
    /// eigensolver was used, otherwise a guaranteed lower bound.
    pub lambda_1: f64,
    /// Largest eigenvalue when computed densely.
    pub lambda_n: Option<f64>,
}

/// Symmetric pattern with each upper-triangular entry (diagonal included)
/// present with probability `density` and standard normal when present, then
/// a diagonal shift that puts the smallest eigenvalue at `lam1`.
///
/// Up to the dense cap the shift is computed from the exact spectrum; above
/// it the Gershgorin lower bound is used, so the true `lambda_1` is at least
/// `lam1`.
pub fn synthetic_spd(spec: &SyntheticSpec) -> Result<Synthetic> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut t = Vec::new();
    for i in 0..n {
        for j in i..n {
            if rng.random_bool(spec.density) {
                let v: f64 = rng.sample(StandardNormal);
                t.push((i, j, v));
                if i != j {
                    t.push((j, i, v));
                }
            }
        }
    }
    let raw = SymmetricSparseMatrix::from_triplets(n, &t)?;
    if n <= DENSE_CAP {
        let (lo, hi) = eig_extremes_dense(&DenseMatrix::from_sparse(&raw)?);
        let shift = spec.lam1 - lo;
        Ok(Synthetic { matrix: raw.shifted(shift), lambda_1: spec.lam1, lambda_n: Some(hi + shift) })
    } else {
        let shift = spec.lam1 - raw.gershgorin_lower();
        Ok(Synthetic { matrix: raw.shifted(shift), lambda_1: spec.lam1, lambda_n: None })
    }
}

/// Seeded standard normal vector.
pub fn standard_normal_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
