//! Metropolis chains for DPPs and k-DPPs whose accept/reject tests are
//! decided by the retrospective judges.
//!
//! Randomness is consumed in a fixed order per step: the element draw(s)
//! first, then `p` from the open interval `(0, 1)`. A chain driven by the
//! dense backend with the same seed therefore sees the same proposals.

use crate::error::{Error, Result};
use crate::judge::{judge_ratio, judge_threshold, JudgeConfig};
use crate::matrix::{IndexSet, SpectrumBounds, SymmetricSparseMatrix};
use crate::oracle::DenseMatrix;
use crate::parallel;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Removal rule of the unconstrained chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DppMode {
    /// Insert iff `p <= L_yy - BIF`, remove iff `p > L_yy - BIF`.
    #[default]
    Direct,
    /// Insert as above, remove iff `p <= 1 / (L_yy - BIF)`. This is the
    /// Metropolis kernel whose stationary law is `P(Y) ∝ det(L_Y)`.
    Reciprocal,
}

/// How the BIFs behind each decision are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Quadrature,
    /// Direct dense Cholesky solves on every step. Benchmark baseline.
    Dense,
}

/// Spectrum bounds handed to the judge for every principal submatrix.
///
/// `floor` must be a valid lower bound on the smallest eigenvalue of every
/// submatrix met by the chain (a ridge shift is the usual source). Without a
/// `ceiling` the upper node comes from the submatrix Gershgorin bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsPolicy {
    pub floor: f64,
    pub ceiling: Option<f64>,
}

impl BoundsPolicy {
    pub fn floor(floor: f64) -> Self {
        BoundsPolicy { floor, ceiling: None }
    }

    pub fn resolve<Op: crate::matrix::LinearOperator + ?Sized>(&self, op: &Op) -> Result<SpectrumBounds> {
        match self.ceiling {
            Some(c) if op.dim() > 0 => SpectrumBounds::new(self.floor, c),
            _ => SpectrumBounds::with_floor(op, self.floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub bounds: BoundsPolicy,
    pub judge: JudgeConfig,
    pub mode: DppMode,
    pub backend: Backend,
    /// Size of the random initial subset; `None` includes each element with
    /// probability 1/2. Ignored by k-DPP chains.
    pub init_size: Option<usize>,
}

impl ChainConfig {
    pub fn new(floor: f64) -> Self {
        ChainConfig {
            bounds: BoundsPolicy::floor(floor),
            judge: JudgeConfig::default(),
            mode: DppMode::Direct,
            backend: Backend::Quadrature,
            init_size: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChainStats {
    pub quad_iters: u64,
    pub judge_calls: u64,
    pub accepted: u64,
    /// Judge calls that ran out of iterations and fell back to Gauss estimates.
    pub exhausted: u64,
}

#[derive(Debug, Clone)]
pub struct DppChainState {
    pub y: IndexSet,
    pub step_count: u64,
    pub stats: ChainStats,
    rng: ChaCha8Rng,
}

impl DppChainState {
    /// Starts from an explicit subset.
    pub fn with_set(y: IndexSet, seed: u64) -> Self {
        DppChainState { y, step_count: 0, stats: ChainStats::default(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Random initial subset, drawn from the chain's own stream.
    pub fn random(n: usize, init_size: Option<usize>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = match init_size {
            Some(m) => random_subset(&mut rng, n, m)?,
            None => IndexSet::new((0..n).filter(|_| rng.random_bool(0.5)).collect())?,
        };
        Ok(DppChainState { y, step_count: 0, stats: ChainStats::default(), rng })
    }

    /// Uniform random `k`-subset.
    pub fn random_k(n: usize, k: usize, seed: u64) -> Result<Self> {
        Self::random(n, Some(k), seed)
    }
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Result<IndexSet> {
    if m > n {
        return Err(Error::InvalidArgument(format!("subset size {m} exceeds ground set size {n}")));
    }
    IndexSet::new(rand::seq::index::sample(rng, n, m).into_vec())
}

/// One transition of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    /// Element toggled (DPP) or `(removed, inserted)` pair (k-DPP).
    pub proposal: Proposal,
    pub p: f64,
    pub accepted: bool,
    pub quad_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    Toggle(usize),
    Swap { out: usize, into: usize },
    /// No move exists (k-DPP with k = 0 or k = N).
    Stay,
}

/// A decision together with the quadrature iterations it consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub accept: bool,
    pub quad_iters: usize,
    pub exhausted: bool,
}

/// Decides the DPP move for element `y` and draw `p` from state `set`,
/// without touching any random state.
pub fn dpp_decision(l: &SymmetricSparseMatrix, set: &IndexSet, y: usize, p: f64, cfg: &ChainConfig) -> Result<Decision> {
    let removing = set.contains(y);
    let rest = if removing { set.without(y) } else { set.clone() };
    let lyy = l.get(y, y);
    let t = match (removing, cfg.mode) {
        (true, DppMode::Reciprocal) => lyy - 1.0 / p,
        _ => lyy - p,
    };
    let u = l.gather(&rest, y)?;
    let (less, quad_iters, exhausted) = match cfg.backend {
        Backend::Quadrature => {
            let a = l.restrict(&rest)?;
            let bounds = cfg.bounds.resolve(&a)?;
            let out = judge_threshold(t, &u, &a, bounds, &cfg.judge)?;
            (out.decision, out.iterations(), out.exhausted)
        }
        Backend::Dense => {
            let bif = DenseMatrix::submatrix(l, &rest)?.bif_many(&[&u])?[0];
            (strict_less(t, bif, cfg.judge.tie_rule), 0, false)
        }
    };
    // Removal is accepted when the judge says t < BIF, insertion when it says not.
    let accept = if removing { less } else { !less };
    Ok(Decision { accept, quad_iters, exhausted })
}

/// Decides the k-DPP swap of `out` (in `set`) for `into` (outside `set`).
pub fn kdpp_decision(
    l: &SymmetricSparseMatrix,
    set: &IndexSet,
    out: usize,
    into: usize,
    p: f64,
    cfg: &ChainConfig,
) -> Result<Decision> {
    if !set.contains(out) || set.contains(into) {
        return Err(Error::InvalidArgument(format!("swap ({out} -> {into}) does not match the state")));
    }
    let rest = set.without(out);
    let t = p * l.get(out, out) - l.get(into, into);
    let u = l.gather(&rest, into)?;
    let v = l.gather(&rest, out)?;
    match cfg.backend {
        Backend::Quadrature => {
            let a = l.restrict(&rest)?;
            let bounds = cfg.bounds.resolve(&a)?;
            let res = judge_ratio(t, p, &u, &v, &a, bounds, &cfg.judge)?;
            Ok(Decision { accept: res.decision, quad_iters: res.iterations(), exhausted: res.exhausted })
        }
        Backend::Dense => {
            let b = DenseMatrix::submatrix(l, &rest)?.bif_many(&[&u, &v])?;
            Ok(Decision { accept: strict_less(t, p * b[1] - b[0], cfg.judge.tie_rule), quad_iters: 0, exhausted: false })
        }
    }
}

fn strict_less(t: f64, value: f64, tie: bool) -> bool {
    if t == value {
        tie
    } else {
        t < value
    }
}

fn draw_p(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(Open01)
}

fn record(state: &mut DppChainState, proposal: Proposal, p: f64, d: Decision) -> StepRecord {
    state.step_count += 1;
    state.stats.judge_calls += 1;
    state.stats.quad_iters += d.quad_iters as u64;
    state.stats.accepted += d.accept as u64;
    state.stats.exhausted += d.exhausted as u64;
    StepRecord { step: state.step_count, proposal, p, accepted: d.accept, quad_iters: d.quad_iters }
}

/// One step of the unconstrained chain.
pub fn dpp_mh_step(l: &SymmetricSparseMatrix, state: &mut DppChainState, cfg: &ChainConfig) -> Result<StepRecord> {
    let n = l.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty ground set".into()));
    }
    let y = state.rng.random_range(0..n);
    let p = draw_p(&mut state.rng);
    let d = dpp_decision(l, &state.y, y, p, cfg)?;
    if d.accept {
        if state.y.contains(y) {
            state.y.remove(y);
        } else {
            state.y.insert(y);
        }
    }
    Ok(record(state, Proposal::Toggle(y), p, d))
}

/// One swap step of the fixed-size chain. With `k = 0` or `k = N` no move
/// exists and the step is a no-op that draws nothing.
pub fn kdpp_mh_step(l: &SymmetricSparseMatrix, state: &mut DppChainState, cfg: &ChainConfig) -> Result<StepRecord> {
    let n = l.dim();
    let k = state.y.len();
    if k == 0 || k >= n {
        state.step_count += 1;
        return Ok(StepRecord { step: state.step_count, proposal: Proposal::Stay, p: f64::NAN, accepted: false, quad_iters: 0 });
    }
    let out = state.y.as_slice()[state.rng.random_range(0..k)];
    let outside = state.y.complement(n);
    let into = outside.as_slice()[state.rng.random_range(0..n - k)];
    let p = draw_p(&mut state.rng);
    let d = kdpp_decision(l, &state.y, out, into, p, cfg)?;
    if d.accept {
        state.y.remove(out);
        state.y.insert(into);
    }
    Ok(record(state, Proposal::Swap { out, into }, p, d))
}

/// Final subset, per-step records and totals of one chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub set: IndexSet,
    pub records: Vec<StepRecord>,
    pub stats: ChainStats,
}

impl ChainRun {
    pub const CSV_HEADER: &'static str = "step,quad_iters_cumulative,accepted";

    /// Stats CSV, one row per step.
    pub fn stats_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        let mut cum = 0u64;
        for r in &self.records {
            cum += r.quad_iters as u64;
            s.push_str(&format!("{},{},{}\n", r.step, cum, r.accepted as u8));
        }
        s
    }
}

fn drive(
    l: &SymmetricSparseMatrix,
    mut state: DppChainState,
    steps: usize,
    keep_records: bool,
    cfg: &ChainConfig,
    step: fn(&SymmetricSparseMatrix, &mut DppChainState, &ChainConfig) -> Result<StepRecord>,
) -> Result<ChainRun> {
    let mut records = Vec::with_capacity(if keep_records { steps } else { 0 });
    for _ in 0..steps {
        let r = step(l, &mut state, cfg)?;
        if keep_records {
            records.push(r);
        }
    }
    Ok(ChainRun { set: state.y, records, stats: state.stats })
}

/// Runs `steps` DPP transitions from a seeded random start.
pub fn dpp_sample(l: &SymmetricSparseMatrix, steps: usize, seed: u64, cfg: &ChainConfig) -> Result<IndexSet> {
    Ok(dpp_run(l, steps, seed, cfg, false)?.set)
}

pub fn dpp_run(l: &SymmetricSparseMatrix, steps: usize, seed: u64, cfg: &ChainConfig, keep_records: bool) -> Result<ChainRun> {
    let state = DppChainState::random(l.dim(), cfg.init_size, seed)?;
    drive(l, state, steps, keep_records, cfg, dpp_mh_step)
}

/// Runs `steps` k-DPP swaps from a seeded random `k`-subset.
pub fn kdpp_sample(l: &SymmetricSparseMatrix, k: usize, steps: usize, seed: u64, cfg: &ChainConfig) -> Result<IndexSet> {
    Ok(kdpp_run(l, k, steps, seed, cfg, false)?.set)
}

pub fn kdpp_run(
    l: &SymmetricSparseMatrix,
    k: usize,
    steps: usize,
    seed: u64,
    cfg: &ChainConfig,
    keep_records: bool,
) -> Result<ChainRun> {
    let state = DppChainState::random_k(l.dim(), k, seed)?;
    drive(l, state, steps, keep_records, cfg, kdpp_mh_step)
}

/// Independent DPP chains, one per seed, run concurrently with the
/// `parallel` feature.
pub fn dpp_sample_many(l: &SymmetricSparseMatrix, steps: usize, seeds: &[u64], cfg: &ChainConfig) -> Vec<Result<IndexSet>> {
    parallel::map(seeds, |&s| dpp_sample(l, steps, s, cfg))
}

pub fn kdpp_sample_many(l: &SymmetricSparseMatrix, k: usize, steps: usize, seeds: &[u64], cfg: &ChainConfig) -> Vec<Result<IndexSet>> {
    parallel::map(seeds, |&s| kdpp_sample(l, k, steps, s, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> SymmetricSparseMatrix {
        SymmetricSparseMatrix::from_diagonal(&[v]).unwrap()
    }

    #[test]
    fn scalar_insertion_and_removal() {
        let l = scalar(0.5);
        let cfg = ChainConfig::new(0.1);
        let empty = IndexSet::empty();
        let full = IndexSet::full(1);
        assert!(dpp_decision(&l, &empty, 0, 0.3, &cfg).unwrap().accept);
        assert!(dpp_decision(&l, &empty, 0, 0.5, &cfg).unwrap().accept);
        assert!(!dpp_decision(&l, &empty, 0, 0.7, &cfg).unwrap().accept);
        assert!(dpp_decision(&l, &full, 0, 0.7, &cfg).unwrap().accept);
        assert!(!dpp_decision(&l, &full, 0, 0.3, &cfg).unwrap().accept);
        assert_eq!(dpp_decision(&l, &full, 0, 0.7, &cfg).unwrap().quad_iters, 0);
    }

    #[test]
    fn reciprocal_removal() {
        let l = scalar(0.5);
        let cfg = ChainConfig { mode: DppMode::Reciprocal, ..ChainConfig::new(0.1) };
        // remove iff p <= 1 / 0.5, always for p in (0, 1)
        assert!(dpp_decision(&l, &IndexSet::full(1), 0, 0.99, &cfg).unwrap().accept);
        let l = scalar(4.0);
        assert!(dpp_decision(&l, &IndexSet::full(1), 0, 0.2, &cfg).unwrap().accept);
        assert!(!dpp_decision(&l, &IndexSet::full(1), 0, 0.3, &cfg).unwrap().accept);
    }

    #[test]
    fn zero_steps_returns_initial_subset() {
        let l = SymmetricSparseMatrix::identity(10);
        let cfg = ChainConfig::new(0.5);
        let a = dpp_sample(&l, 0, 7, &cfg).unwrap();
        assert_eq!(a, DppChainState::random(10, None, 7).unwrap().y);
        let b = kdpp_sample(&l, 4, 0, 7, &cfg).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b, DppChainState::random_k(10, 4, 7).unwrap().y);
    }

    #[test]
    fn k_equal_n_is_full_set_without_judging() {
        let l = SymmetricSparseMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let run = kdpp_run(&l, 3, 50, 1, &ChainConfig::new(0.5), true).unwrap();
        assert_eq!(run.set, IndexSet::full(3));
        assert_eq!(run.stats.judge_calls, 0);
    }

    #[test]
    fn k1_diagonal_swap() {
        let l = SymmetricSparseMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let cfg = ChainConfig::new(0.5);
        let s = IndexSet::new(vec![0]).unwrap();
        // swap iff p < L_uu / L_vv = 0.5
        assert!(kdpp_decision(&l, &s, 0, 1, 0.4, &cfg).unwrap().accept);
        assert!(!kdpp_decision(&l, &s, 0, 1, 0.6, &cfg).unwrap().accept);
    }

    #[test]
    fn dense_backend_matches_quadrature_on_small_chain() {
        let l = SymmetricSparseMatrix::from_dense(&[
            vec![2.0, 0.3, 0.0, 0.1],
            vec![0.3, 1.5, 0.2, 0.0],
            vec![0.0, 0.2, 1.0, 0.4],
            vec![0.1, 0.0, 0.4, 1.2],
        ])
        .unwrap();
        let cfg = ChainConfig::new(0.3);
        let dense = ChainConfig { backend: Backend::Dense, ..cfg.clone() };
        let a = dpp_run(&l, 500, 3, &cfg, true).unwrap();
        let b = dpp_run(&l, 500, 3, &dense, true).unwrap();
        let acc = |r: &ChainRun| r.records.iter().map(|x| x.accepted).collect::<Vec<_>>();
        assert_eq!(acc(&a), acc(&b));
        assert_eq!(a.set, b.set);
        let a = kdpp_run(&l, 2, 500, 3, &cfg, true).unwrap();
        let b = kdpp_run(&l, 2, 500, 3, &dense, true).unwrap();
        assert_eq!(acc(&a), acc(&b));
    }

    #[test]
    fn stats_csv_accumulates() {
        let l = SymmetricSparseMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let run = dpp_run(&l, 3, 2, &ChainConfig::new(0.5), true).unwrap();
        let csv = run.stats_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], ChainRun::CSV_HEADER);
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn many_chains_match_single_runs() {
        let l = SymmetricSparseMatrix::from_diagonal(&[1.0, 0.5, 2.0, 0.7]).unwrap();
        let cfg = ChainConfig::new(0.4);
        let seeds = [1, 2, 3];
        let many = dpp_sample_many(&l, 100, &seeds, &cfg);
        for (s, r) in seeds.iter().zip(many) {
            assert_eq!(r.unwrap(), dpp_sample(&l, 100, *s, &cfg).unwrap());
        }
    }
}
