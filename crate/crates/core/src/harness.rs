//! Wall-clock comparison of the quadrature-driven algorithms against their
//! dense-solve baselines on identical seeds.

use crate::dpp::{dpp_run, kdpp_run, Backend, ChainConfig, ChainRun};
use crate::error::{Error, Result};
use crate::greedy::{double_greedy_run, GreedyBackend, GreedyConfig};
use crate::matrix::{IndexSet, SymmetricSparseMatrix};
use crate::oracle::DENSE_CAP;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dpp,
    Kdpp,
    Greedy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dpp => "dpp",
            Algorithm::Kdpp => "kdpp",
            Algorithm::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub chain: ChainConfig,
    pub greedy: GreedyConfig,
    pub steps: usize,
    pub seed: u64,
    /// Required for k-DPP.
    pub k: Option<usize>,
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub variant: String,
    pub seconds: f64,
    /// Baseline seconds over this variant's seconds; `None` without a baseline.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub algorithm: Algorithm,
    pub rows: Vec<BenchRow>,
    /// Whether both variants produced the same output; `None` without a baseline.
    pub identical: Option<bool>,
    pub output: IndexSet,
}

pub const CSV_HEADER: &str = "variant,seconds,speedup";

pub fn to_csv(results: &[BenchResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results.iter().flat_map(|r| &r.rows) {
        let speedup = r.speedup.map(|x| format!("{x:.6}")).unwrap_or_default();
        s.push_str(&format!("{},{:.6},{}\n", r.variant, r.seconds, speedup));
    }
    s
}

// Final set plus the accept pattern, so equal outputs mean equal trajectories.
#[derive(PartialEq)]
struct Fingerprint(IndexSet, Vec<bool>);

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn run_variant(l: &SymmetricSparseMatrix, alg: Algorithm, cfg: &BenchConfig, dense: bool) -> Result<(Fingerprint, f64)> {
    let chain_fp = |r: ChainRun| Fingerprint(r.set, r.records.iter().map(|x| x.accepted).collect());
    match alg {
        Algorithm::Dpp | Algorithm::Kdpp => {
            let mut chain = cfg.chain.clone();
            chain.backend = if dense { Backend::Dense } else { Backend::Quadrature };
            let (run, secs) = timed(|| match alg {
                Algorithm::Dpp => dpp_run(l, cfg.steps, cfg.seed, &chain, true),
                _ => {
                    let k = cfg.k.ok_or_else(|| Error::InvalidArgument("k-DPP needs k".into()))?;
                    kdpp_run(l, k, cfg.steps, cfg.seed, &chain, true)
                }
            })?;
            Ok((chain_fp(run), secs))
        }
        Algorithm::Greedy => {
            let mut g = cfg.greedy.clone();
            g.backend = if dense { GreedyBackend::Dense } else { GreedyBackend::Quadrature };
            let (run, secs) = timed(|| double_greedy_run(l, cfg.seed, &g))?;
            let decisions = run.trace.iter().map(|s| s.added).collect();
            Ok((Fingerprint(run.set, decisions), secs))
        }
    }
}

/// Times the quadrature variant, then the dense baseline, one after the other.
pub fn bench(l: &SymmetricSparseMatrix, alg: Algorithm, cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.baseline && l.dim() > DENSE_CAP {
        return Err(Error::TooLarge { dim: l.dim(), limit: DENSE_CAP });
    }
    let (fast, t_fast) = run_variant(l, alg, cfg, false)?;
    let name = alg.name();
    if !cfg.baseline {
        return Ok(BenchResult {
            algorithm: alg,
            rows: vec![BenchRow { variant: format!("{name}_quadrature"), seconds: t_fast, speedup: None }],
            identical: None,
            output: fast.0,
        });
    }
    let (slow, t_slow) = run_variant(l, alg, cfg, true)?;
    Ok(BenchResult {
        algorithm: alg,
        rows: vec![
            BenchRow { variant: format!("{name}_quadrature"), seconds: t_fast, speedup: Some(t_slow / t_fast) },
            BenchRow { variant: format!("{name}_dense"), seconds: t_slow, speedup: Some(1.0) },
        ],
        identical: Some(fast == slow),
        output: fast.0,
    })
}
