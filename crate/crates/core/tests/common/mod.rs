//! Reference computations written independently of the library's own dense
//! module: a hand-rolled Cholesky, partial-pivot determinants and nalgebra's
//! symmetric eigensolver called directly.

#![allow(dead_code, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use gql::matrix::{IndexSet, SymmetricSparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn dense_sub(l: &SymmetricSparseMatrix, rows: &[usize]) -> Dense {
    rows.iter().map(|&i| rows.iter().map(|&j| l.get(i, j)).collect()).collect()
}

/// Lower Cholesky factor, `None` unless positive definite.
pub fn cholesky(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= r[i][k] * r[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                r[i][i] = s.sqrt();
            } else {
                r[i][j] = s / r[j][j];
            }
        }
    }
    Some(r)
}

/// `||R^{-1} b||^2 = b^T A^{-1} b` from the lower factor.
pub fn bif_from_factor(r: &Dense, b: &[f64]) -> f64 {
    let n = r.len();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= r[i][k] * w[k];
        }
        w[i] = s / r[i][i];
    }
    w.iter().map(|x| x * x).sum()
}

pub fn bif(a: &Dense, b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    bif_from_factor(&cholesky(a).expect("positive definite"), b)
}

/// `L[i, Y] L[Y, Y]^{-1} L[Y, i]`.
pub fn cross_bif(l: &SymmetricSparseMatrix, rows: &[usize], i: usize) -> f64 {
    let b: Vec<f64> = rows.iter().map(|&j| l.get(j, i)).collect();
    bif(&dense_sub(l, rows), &b)
}

pub fn logdet(a: &Dense) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let r = cholesky(a).expect("positive definite");
    2.0 * (0..a.len()).map(|i| r[i][i].ln()).sum::<f64>()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &Dense) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

pub fn eig_extremes(a: &Dense) -> (f64, f64) {
    let n = a.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let ev = m.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// `P(Y) ∝ det(L_Y)` over all subsets (or all `k`-subsets), indexed by bitmask.
pub fn enumerate_dpp(l: &SymmetricSparseMatrix, k: Option<usize>) -> Vec<(u32, f64)> {
    let n = l.dim();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if k.is_some_and(|k| mask.count_ones() as usize != k) {
            continue;
        }
        let rows: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        out.push((mask, det(&dense_sub(l, &rows)).max(0.0)));
    }
    let z: f64 = out.iter().map(|e| e.1).sum();
    out.iter_mut().for_each(|e| e.1 /= z);
    out
}

pub fn mask_of(s: &IndexSet) -> u32 {
    s.iter().fold(0, |m, i| m | 1 << i)
}

/// Total variation between an enumerated law and visit counts by bitmask.
pub fn tv(law: &[(u32, f64)], counts: &std::collections::HashMap<u32, u64>) -> f64 {
    let total: u64 = counts.values().sum();
    let mut seen = 0.0;
    let mut d = 0.0;
    for &(m, p) in law {
        let q = *counts.get(&m).unwrap_or(&0) as f64 / total as f64;
        seen += q;
        d += (p - q).abs();
    }
    // mass on states outside the law's support
    0.5 * (d + (1.0 - seen).max(0.0))
}

/// Random PSD kernel `B B^T / m + ridge I` with `B` standard normal `n x m`.
pub fn random_psd(n: usize, m: usize, ridge: f64, seed: u64) -> SymmetricSparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.sample(rand_distr::StandardNormal)).collect()).collect();
    let rows: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let s: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>() / m as f64;
                    if i == j {
                        s + ridge
                    } else {
                        s
                    }
                })
                .collect()
        })
        .collect();
    SymmetricSparseMatrix::from_dense(&rows).unwrap()
}

/// Sparse RBF kernel on `n` uniform points in the unit square plus a ridge.
pub fn rbf_kernel(n: usize, sigma: f64, ridge: f64, seed: u64) -> SymmetricSparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    gql::build::build_rbf_kernel(&pts, sigma, 3.0 * sigma).unwrap().shifted(ridge)
}

/// Whether `|a - b|` exceeds `1e-8` relative to the larger magnitude.
pub fn separated(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-8 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
