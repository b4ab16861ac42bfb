//! Gauss quadrature Lanczos: bounds on `u^T A^{-1} u` that tighten every iteration.
//!
//! One Lanczos step extends the Jacobi matrix `J_i` by `(alpha_i, beta_i)`. The
//! state keeps only scalars of a Cholesky-like factorization of `J_i` and of its
//! shifted variants `J_i - lambda_min I` and `J_i - lambda_max I`:
//!
//! * `delta_i`: pivots of `J_i`; `g_i = [J_i^{-1}]_{11} = sum_j c_j^2 / delta_j`.
//! * `delta_left_i`, `delta_right_i`: pivots of the two shifted matrices. They
//!   fix the extra diagonal entry that gives `J_i` the prescribed eigenvalue
//!   `lambda_min` (left Radau) or `lambda_max` (right Radau), and both together
//!   fix the bordered Lobatto extension.
//!
//! Each modified rule differs from `J_i` by a rank-one border, so its
//! `[J^{-1}]_{11}` is `g_i` plus one Sherman-Morrison correction. Nothing is
//! ever diagonalized.
//!
//! All estimates are carried for the unit start vector `u / |u|` and multiplied
//! by `|u|^2` on the way out.
//!
//! For valid outer bounds and exact arithmetic, at every iteration
//! `gauss <= radau_lower <= u^T A^{-1} u <= radau_upper <= lobatto`.

use crate::error::{Error, Result};
use crate::matrix::{LinearOperator, SpectrumBounds};
use std::io::Write;

/// `beta_{i+1} <= BREAKDOWN_TOL * lambda_max` is treated as an invariant Krylov space.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Above this dimension the default is to skip reorthogonalization.
pub const FULL_REORTH_MAX_DIM: usize = 2048;

/// Left-Radau and Lobatto closures with a denominator below this report `+inf`.
pub const CLOSURE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reorthogonalization {
    None,
    /// Keep the whole Lanczos basis and project each residual against it twice.
    Full,
}

impl Reorthogonalization {
    pub fn default_for(dim: usize) -> Self {
        if dim <= FULL_REORTH_MAX_DIM {
            Reorthogonalization::Full
        } else {
            Reorthogonalization::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// `None` picks [`Reorthogonalization::default_for`] the operator dimension.
    pub reorth: Option<Reorthogonalization>,
    pub breakdown_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { reorth: None, breakdown_tol: BREAKDOWN_TOL }
    }
}

impl QuadratureConfig {
    pub fn with_reorth(reorth: Reorthogonalization) -> Self {
        QuadratureConfig { reorth: Some(reorth), ..Default::default() }
    }
}

/// The four estimates of one iteration, already scaled by `|u|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussEstimates {
    pub iter: usize,
    pub gauss: f64,
    /// Right Gauss-Radau (node at `lambda_max`).
    pub radau_lower: f64,
    /// Left Gauss-Radau (node at `lambda_min`); may be `+inf`.
    pub radau_upper: f64,
    pub lobatto: f64,
}

impl GaussEstimates {
    /// `(radau_upper - radau_lower) / radau_lower`.
    pub fn relative_gap(&self) -> f64 {
        (self.radau_upper - self.radau_lower) / self.radau_lower.max(f64::MIN_POSITIVE)
    }
}

/// Raw recurrence scalars of the current iteration, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recurrence {
    pub iter: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub delta: f64,
    pub delta_left: f64,
    pub delta_right: f64,
    /// Diagonal entry making `lambda_min` an eigenvalue of the bordered `J_i`.
    pub alpha_left: f64,
    pub alpha_right: f64,
}

/// State of one quadrature run: all scalars plus the two live Lanczos vectors.
#[derive(Debug, Clone)]
pub struct QuadratureState<'a, Op: LinearOperator + ?Sized> {
    op: &'a Op,
    bounds: SpectrumBounds,
    breakdown_tol: f64,
    iter: usize,
    norm_u_sq: f64,
    alpha: f64,
    // beta_i: the off-diagonal produced by the residual of the current step
    beta: f64,
    c: f64,
    delta: f64,
    delta_left: f64,
    delta_right: f64,
    g: f64,
    v_curr: Vec<f64>,
    v_prev: Vec<f64>,
    work: Vec<f64>,
    // row-major stored Lanczos vectors, one per row of length dim
    basis: Option<Vec<f64>>,
    terminated: bool,
    estimates: GaussEstimates,
}

impl<'a, Op: LinearOperator + ?Sized> QuadratureState<'a, Op> {
    /// First Lanczos step from `u / |u|`.
    pub fn init(op: &'a Op, u: &[f64], bounds: SpectrumBounds, cfg: &QuadratureConfig) -> Result<Self> {
        let n = op.dim();
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: u.len() });
        }
        if bounds.lambda_min() == bounds.lambda_max() {
            return Err(Error::InvalidBounds("lambda_min == lambda_max leaves the Lobatto rule undefined".into()));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("start vector has non-finite entries".into()));
        }
        let norm_u_sq = dot(u, u);
        if norm_u_sq == 0.0 {
            return Err(Error::ZeroVector);
        }
        let scale = 1.0 / norm_u_sq.sqrt();
        let v0: Vec<f64> = u.iter().map(|x| x * scale).collect();
        let mut work = vec![0.0; n];
        op.apply_into(u, &mut work);
        // Rayleigh quotient on the unnormalized vector, so A = c I gives alpha = c exactly
        let alpha = dot(u, &work) / norm_u_sq;
        for w in work.iter_mut() {
            *w *= scale;
        }
        if !(alpha > 0.0) {
            return Err(Error::NotPositiveDefinite { iter: 1, pivot: alpha });
        }
        let delta_left = alpha - bounds.lambda_min();
        if !(delta_left > 0.0) {
            return Err(Error::InvalidBounds(format!(
                "lambda_min = {} is not below the Rayleigh quotient {alpha}",
                bounds.lambda_min()
            )));
        }
        let delta_right = alpha - bounds.lambda_max();
        if delta_right > 0.0 {
            return Err(Error::InvalidBounds(format!(
                "lambda_max = {} is below the Rayleigh quotient {alpha}",
                bounds.lambda_max()
            )));
        }

        let reorth = cfg.reorth.unwrap_or_else(|| Reorthogonalization::default_for(n));
        let mut basis = match reorth {
            Reorthogonalization::Full => Some(Vec::with_capacity(n * n.min(64))),
            Reorthogonalization::None => None,
        };
        if let Some(b) = basis.as_mut() {
            b.extend_from_slice(&v0);
        }
        for (w, v) in work.iter_mut().zip(&v0) {
            *w -= alpha * v;
        }
        if let Some(b) = basis.as_ref() {
            reorthogonalize(&mut work, b, n);
        }
        let beta = norm(&work);

        let mut state = QuadratureState {
            op,
            bounds,
            breakdown_tol: cfg.breakdown_tol,
            iter: 1,
            norm_u_sq,
            alpha,
            beta,
            c: 1.0,
            delta: alpha,
            delta_left,
            delta_right,
            g: 1.0 / alpha,
            v_curr: v0,
            v_prev: vec![0.0; n],
            work,
            basis,
            terminated: false,
            estimates: GaussEstimates { iter: 1, gauss: 0.0, radau_lower: 0.0, radau_upper: 0.0, lobatto: 0.0 },
        };
        state.advance_vectors();
        state.estimates = state.closures();
        Ok(state)
    }

    // Moves the residual in `work` into `v_curr` once beta is known; flags termination.
    fn advance_vectors(&mut self) {
        let n = self.op.dim();
        if self.beta <= self.breakdown_tol * self.bounds.lambda_max() || self.iter >= n {
            self.terminated = true;
            return;
        }
        std::mem::swap(&mut self.v_prev, &mut self.v_curr);
        let inv = 1.0 / self.beta;
        for (v, w) in self.v_curr.iter_mut().zip(&self.work) {
            *v = w * inv;
        }
        if let Some(b) = self.basis.as_mut() {
            b.extend_from_slice(&self.v_curr);
        }
    }

    /// One more Lanczos step and the updated estimates.
    pub fn step(&mut self) -> Result<GaussEstimates> {
        if self.terminated {
            return Err(Error::InvalidArgument("quadrature already terminated".into()));
        }
        let n = self.op.dim();
        self.op.apply_into(&self.v_curr, &mut self.work);
        let alpha = dot(&self.v_curr, &self.work);
        let beta_prev = self.beta;
        for ((w, v), p) in self.work.iter_mut().zip(&self.v_curr).zip(&self.v_prev) {
            *w -= alpha * v + beta_prev * p;
        }
        if let Some(b) = self.basis.as_ref() {
            reorthogonalize(&mut self.work, b, n);
        }
        let beta = norm(&self.work);
        let iter = self.iter + 1;

        let b2 = beta_prev * beta_prev;
        let delta = alpha - b2 / self.delta;
        if !(delta > 0.0) {
            return Err(Error::NotPositiveDefinite { iter, pivot: delta });
        }
        let c = self.c * beta_prev / self.delta;
        // Sherman-Morrison on the new row: g_i - g_{i-1} = beta^2 c^2 / (delta_{i-1} (alpha_i delta_{i-1} - beta^2))
        self.g += c * c / delta;
        let lmin = self.bounds.lambda_min();
        let lmax = self.bounds.lambda_max();
        let delta_left = alpha - lmin - b2 / self.delta_left;
        let delta_right = alpha - lmax - b2 / self.delta_right;

        self.iter = iter;
        self.alpha = alpha;
        self.beta = beta;
        self.c = c;
        self.delta = delta;
        self.delta_left = delta_left;
        self.delta_right = delta_right;
        self.advance_vectors();
        if !self.terminated {
            if !(delta_left > 0.0) {
                return Err(Error::InvalidBounds(format!(
                    "lambda_min = {lmin} is not below the spectrum (left pivot {delta_left:e} at iteration {iter})"
                )));
            }
            if !(delta_right < 0.0) {
                return Err(Error::InvalidBounds(format!(
                    "lambda_max = {lmax} is not above the spectrum (right pivot {delta_right:e} at iteration {iter})"
                )));
            }
        }
        self.estimates = self.closures();
        Ok(self.estimates)
    }

    fn closures(&self) -> GaussEstimates {
        let lmin = self.bounds.lambda_min();
        let lmax = self.bounds.lambda_max();
        let g = self.g;
        let (dl, dr, d) = (self.delta_left, self.delta_right, self.delta);
        let cc = self.c * self.c;

        let lobatto_term = if !self.terminated && dl > 0.0 && dr < 0.0 {
            let k = dl * dr / (dr - dl);
            let alpha_lo = k * (lmax / dl - lmin / dr);
            let beta_lo_sq = k * (lmax - lmin);
            let den = alpha_lo * d - beta_lo_sq;
            if den < CLOSURE_FLOOR {
                f64::INFINITY
            } else {
                beta_lo_sq * cc / (d * den)
            }
        } else {
            0.0
        };

        let (lower, upper) = if self.terminated {
            (g, g)
        } else {
            let b2 = self.beta * self.beta;
            let alpha_right = lmax + b2 / dr;
            let den_right = alpha_right * d - b2;
            let lower = if den_right > 0.0 { g + b2 * cc / (d * den_right) } else { g };
            let alpha_left = lmin + b2 / dl;
            let den_left = alpha_left * d - b2;
            let upper = if den_left < CLOSURE_FLOOR { f64::INFINITY } else { g + b2 * cc / (d * den_left) };
            (lower, upper)
        };

        let s = self.norm_u_sq;
        GaussEstimates {
            iter: self.iter,
            gauss: g * s,
            radau_lower: lower * s,
            radau_upper: upper * s,
            lobatto: (g + lobatto_term) * s,
        }
    }

    pub fn estimates(&self) -> GaussEstimates {
        self.estimates
    }

    pub fn recurrence(&self) -> Recurrence {
        let b2 = self.beta * self.beta;
        Recurrence {
            iter: self.iter,
            alpha: self.alpha,
            beta: self.beta,
            c: self.c,
            delta: self.delta,
            delta_left: self.delta_left,
            delta_right: self.delta_right,
            alpha_left: self.bounds.lambda_min() + b2 / self.delta_left,
            alpha_right: self.bounds.lambda_max() + b2 / self.delta_right,
        }
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn bounds(&self) -> SpectrumBounds {
        self.bounds
    }

    pub fn norm_u_sq(&self) -> f64 {
        self.norm_u_sq
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Current Lanczos vector `u_{i}` (unit norm unless terminated).
    pub fn lanczos_vector(&self) -> &[f64] {
        &self.v_curr
    }
}

/// Why a [`run`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Invariant Krylov space or `i = N`: all Gauss and Radau values coincide.
    Exact,
    Tolerance,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTrace {
    pub estimates: Vec<GaussEstimates>,
    pub termination: Termination,
    pub bounds: SpectrumBounds,
}

impl BoundsTrace {
    pub fn last(&self) -> &GaussEstimates {
        self.estimates.last().expect("a trace holds at least one iteration")
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub const CSV_HEADER: &'static str = "iter,gauss,radau_lower,radau_upper,lobatto";

    /// Header plus one row per iteration, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for e in &self.estimates {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.iter,
                fmt_f64(e.gauss),
                fmt_f64(e.radau_lower),
                fmt_f64(e.radau_upper),
                fmt_f64(e.lobatto)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Formats with 17 significant digits; infinities as `inf` / `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Iterates until the relative Radau gap is at most `tol`, the run is exact, or
/// `max_iter` iterations have been taken.
pub fn run<Op: LinearOperator + ?Sized>(
    op: &Op,
    u: &[f64],
    bounds: SpectrumBounds,
    tol: f64,
    max_iter: usize,
    cfg: &QuadratureConfig,
) -> Result<BoundsTrace> {
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be non-negative")));
    }
    let mut state = QuadratureState::init(op, u, bounds, cfg)?;
    let mut estimates = vec![state.estimates()];
    loop {
        let last = *estimates.last().unwrap();
        if state.is_terminated() {
            return Ok(BoundsTrace { estimates, termination: Termination::Exact, bounds });
        }
        if last.relative_gap() <= tol {
            return Ok(BoundsTrace { estimates, termination: Termination::Tolerance, bounds });
        }
        if estimates.len() >= max_iter {
            return Ok(BoundsTrace { estimates, termination: Termination::MaxIter, bounds });
        }
        estimates.push(state.step()?);
    }
}

/// Runs independent quadratures for several start vectors over one operator.
/// Results are in input order and identical to calling [`run`] on each.
pub fn run_many<Op: LinearOperator + Sync + ?Sized>(
    op: &Op,
    vectors: &[Vec<f64>],
    bounds: SpectrumBounds,
    tol: f64,
    max_iter: usize,
    cfg: &QuadratureConfig,
) -> Vec<Result<BoundsTrace>> {
    crate::parallel::map(vectors, |u| run(op, u, bounds, tol, max_iter, cfg))
}

/// Observed relative errors against the envelopes
/// `2 rho^i` (lower rules), `2 kappa+ rho^i` (left Radau) and
/// `2 kappa+ rho^{i-1}` (Lobatto), with `rho = (sqrt(kappa) - 1) / (sqrt(kappa) + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kappa: f64,
    pub kappa_plus: f64,
    pub rho: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Iterations where some observed error exceeds its envelope by more than [`ENVELOPE_SLACK`].
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub gauss_err: f64,
    pub radau_lower_err: f64,
    pub radau_upper_err: f64,
    pub lobatto_err: f64,
    pub lower_envelope: f64,
    pub upper_envelope: f64,
    pub lobatto_envelope: f64,
}

pub const ENVELOPE_SLACK: f64 = 1e-9;

/// Compares a trace to the linear-rate envelopes, given the exact value and the
/// true extreme eigenvalues `(lambda_1, lambda_N)`.
pub fn convergence_report(trace: &BoundsTrace, oracle_value: f64, spectrum: (f64, f64)) -> ConvergenceReport {
    let (l1, ln) = spectrum;
    let kappa = ln / l1;
    let kappa_plus = ln / trace.bounds.lambda_min();
    let sk = kappa.sqrt();
    let rho = (sk - 1.0) / (sk + 1.0);
    let mut rows = Vec::with_capacity(trace.len());
    let mut violations = Vec::new();
    for e in &trace.estimates {
        let i = e.iter as i32;
        let row = ConvergenceRow {
            iter: e.iter,
            gauss_err: (oracle_value - e.gauss) / oracle_value,
            radau_lower_err: (oracle_value - e.radau_lower) / oracle_value,
            radau_upper_err: (e.radau_upper - oracle_value) / oracle_value,
            lobatto_err: (e.lobatto - oracle_value) / oracle_value,
            lower_envelope: 2.0 * rho.powi(i),
            upper_envelope: 2.0 * kappa_plus * rho.powi(i),
            lobatto_envelope: 2.0 * kappa_plus * rho.powi(i - 1),
        };
        let bad = row.gauss_err > row.lower_envelope + ENVELOPE_SLACK
            || row.radau_lower_err > row.lower_envelope + ENVELOPE_SLACK
            || row.radau_upper_err > row.upper_envelope + ENVELOPE_SLACK
            || row.lobatto_err > row.lobatto_envelope + ENVELOPE_SLACK;
        if bad {
            violations.push(e.iter);
        }
        rows.push(row);
    }
    ConvergenceReport { kappa, kappa_plus, rho, rows, violations }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// Classical Gram-Schmidt against every stored row of `basis`, applied twice.
fn reorthogonalize(r: &mut [f64], basis: &[f64], n: usize) {
    let k = basis.len() / n;
    let mut coeffs = vec![0.0; k];
    for _ in 0..2 {
        for (h, q) in coeffs.iter_mut().zip(basis.chunks_exact(n)) {
            *h = dot(q, r);
        }
        for (h, q) in coeffs.iter().zip(basis.chunks_exact(n)) {
            for (x, y) in r.iter_mut().zip(q) {
                *x -= h * y;
            }
        }
    }
}
