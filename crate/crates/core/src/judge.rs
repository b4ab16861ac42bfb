//! Retrospective comparison judges.
//!
//! Each judge answers one boolean question about one or two bilinear inverse
//! forms. It keeps a Radau interval `[radau_lower, radau_upper]` per BIF, returns
//! as soon as the interval settles the comparison, and otherwise runs one more
//! quadrature iteration on whichever BIF matters most. Given valid spectrum
//! bounds the answer equals the exact-arithmetic comparison.
//!
//! A zero vector or an empty operator makes the BIF exactly `0` without any
//! quadrature.

use crate::error::{Error, Result};
use crate::matrix::{LinearOperator, SpectrumBounds};
use crate::quadrature::{QuadratureConfig, QuadratureState};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JudgeConfig {
    /// Iteration cap per BIF; `None` means the operator dimension.
    pub max_iter: Option<usize>,
    pub quadrature: QuadratureConfig,
    /// Returned by the strict comparisons when the BIFs are exact and the two
    /// sides are equal.
    pub tie_rule: bool,
}

/// Final state of one BIF inside a judge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifInterval {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeOutcome {
    pub decision: bool,
    /// One entry per BIF, in argument order.
    pub intervals: Vec<BifInterval>,
    /// The iteration cap was hit before the interval settled the comparison;
    /// the decision then falls back to the Gauss estimates.
    pub exhausted: bool,
}

impl JudgeOutcome {
    pub fn iterations(&self) -> usize {
        self.intervals.iter().map(|b| b.iterations).sum()
    }
}

#[allow(clippy::large_enum_variant)]
enum Tracker<'a, Op: LinearOperator + ?Sized> {
    Exact(f64),
    Running { state: QuadratureState<'a, Op>, iterations: usize, max_iter: usize },
}

impl<'a, Op: LinearOperator + ?Sized> Tracker<'a, Op> {
    fn new(op: &'a Op, u: &[f64], bounds: SpectrumBounds, cfg: &JudgeConfig) -> Result<Self> {
        if u.len() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), actual: u.len() });
        }
        if u.iter().all(|&x| x == 0.0) {
            return Ok(Tracker::Exact(0.0));
        }
        let state = QuadratureState::init(op, u, bounds, &cfg.quadrature)?;
        let max_iter = cfg.max_iter.unwrap_or(op.dim()).max(1);
        Ok(Tracker::Running { state, iterations: 1, max_iter })
    }

    fn interval(&self) -> (f64, f64) {
        match self {
            Tracker::Exact(v) => (*v, *v),
            Tracker::Running { state, .. } => {
                let e = state.estimates();
                (e.radau_lower, e.radau_upper)
            }
        }
    }

    fn exact_value(&self) -> Option<f64> {
        match self {
            Tracker::Exact(v) => Some(*v),
            Tracker::Running { state, .. } if state.is_terminated() => Some(state.estimates().gauss),
            Tracker::Running { .. } => None,
        }
    }

    fn gauss(&self) -> f64 {
        match self {
            Tracker::Exact(v) => *v,
            Tracker::Running { state, .. } => state.estimates().gauss,
        }
    }

    fn can_refine(&self) -> bool {
        match self {
            Tracker::Exact(_) => false,
            Tracker::Running { state, iterations, max_iter } => !state.is_terminated() && iterations < max_iter,
        }
    }

    fn refine(&mut self) -> Result<()> {
        if let Tracker::Running { state, iterations, .. } = self {
            state.step()?;
            *iterations += 1;
        }
        Ok(())
    }

    fn summary(&self) -> BifInterval {
        let (lower, upper) = self.interval();
        let iterations = match self {
            Tracker::Exact(_) => 0,
            Tracker::Running { iterations, .. } => *iterations,
        };
        BifInterval { lower, upper, iterations, exact: self.exact_value().is_some() }
    }
}

fn strict_less(t: f64, value: f64, tie_rule: bool) -> bool {
    if t == value {
        tie_rule
    } else {
        t < value
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p = {p} must lie in (0, 1)")))
    }
}

/// Decides `t < u^T A^{-1} u`.
pub fn judge_threshold<Op: LinearOperator + ?Sized>(
    t: f64,
    u: &[f64],
    a: &Op,
    bounds: SpectrumBounds,
    cfg: &JudgeConfig,
) -> Result<JudgeOutcome> {
    let mut bif = Tracker::new(a, u, bounds, cfg)?;
    loop {
        let finish = |decision: bool, exhausted: bool, bif: &Tracker<'_, Op>| JudgeOutcome {
            decision,
            intervals: vec![bif.summary()],
            exhausted,
        };
        if let Some(v) = bif.exact_value() {
            return Ok(finish(strict_less(t, v, cfg.tie_rule), false, &bif));
        }
        let (lo, hi) = bif.interval();
        if t < lo {
            return Ok(finish(true, false, &bif));
        }
        if t >= hi {
            return Ok(finish(false, false, &bif));
        }
        if !bif.can_refine() {
            return Ok(finish(t < bif.gauss(), true, &bif));
        }
        bif.refine()?;
    }
}

/// Decides `t < p v^T A^{-1} v - u^T A^{-1} u` for `p` in `(0, 1)`.
///
/// The BIF refined next is `u`'s when its gap exceeds `p` times `v`'s gap,
/// since `v` enters the comparison scaled by `p`.
pub fn judge_ratio<Op: LinearOperator + ?Sized>(
    t: f64,
    p: f64,
    u: &[f64],
    v: &[f64],
    a: &Op,
    bounds: SpectrumBounds,
    cfg: &JudgeConfig,
) -> Result<JudgeOutcome> {
    check_p(p)?;
    let mut bu = Tracker::new(a, u, bounds, cfg)?;
    let mut bv = Tracker::new(a, v, bounds, cfg)?;
    loop {
        let finish = |decision: bool, exhausted: bool, bu: &Tracker<'_, Op>, bv: &Tracker<'_, Op>| JudgeOutcome {
            decision,
            intervals: vec![bu.summary(), bv.summary()],
            exhausted,
        };
        if let (Some(xu), Some(xv)) = (bu.exact_value(), bv.exact_value()) {
            return Ok(finish(strict_less(t, p * xv - xu, cfg.tie_rule), false, &bu, &bv));
        }
        let (su, tu) = bu.interval();
        let (sv, tv) = bv.interval();
        if t < p * sv - tu {
            return Ok(finish(true, false, &bu, &bv));
        }
        if t >= p * tv - su {
            return Ok(finish(false, false, &bu, &bv));
        }
        let prefer_u = (tu - su) > p * (tv - sv);
        let target = match (prefer_u, bu.can_refine(), bv.can_refine()) {
            (true, true, _) | (false, true, false) => &mut bu,
            (false, _, true) | (true, false, true) => &mut bv,
            (_, false, false) => {
                let decision = t < p * bv.gauss() - bu.gauss();
                return Ok(finish(decision, true, &bu, &bv));
            }
        };
        target.refine()?;
    }
}

/// `[x]_+`.
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

// Clamped interval of log(t - b) for b in [lo, hi].
fn log_gap_interval(t: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(t - lo > 0.0) {
        return Err(Error::NonPositiveSchur { value: t - lo });
    }
    let upper = (t - lo).ln();
    let lower = if t - hi > 0.0 { (t - hi).ln() } else { f64::NEG_INFINITY };
    Ok((pos(lower), pos(upper)))
}

// Clamped interval of -log(t - b) for b in [lo, hi].
fn neg_log_gap_interval(t: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(t - lo > 0.0) {
        return Err(Error::NonPositiveSchur { value: t - lo });
    }
    let lower = -(t - lo).ln();
    let upper = if t - hi > 0.0 { -(t - hi).ln() } else { f64::INFINITY };
    Ok((pos(lower), pos(upper)))
}

/// The double-greedy test `p [log(t - u^T A^{-1} u)]_+ <= (1-p) [-log(t - v^T B^{-1} v)]_+`.
///
/// `a`/`u` describe the grow set, `b`/`v` the shrink set without the current
/// element, and `t` its diagonal entry. `true` means "add the element".
#[allow(clippy::too_many_arguments)]
pub fn judge_gain<OpA: LinearOperator + ?Sized, OpB: LinearOperator + ?Sized>(
    a: &OpA,
    b: &OpB,
    u: &[f64],
    v: &[f64],
    t: f64,
    p: f64,
    bounds_a: SpectrumBounds,
    bounds_b: SpectrumBounds,
    cfg: &JudgeConfig,
) -> Result<JudgeOutcome> {
    check_p(p)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("diagonal entry t = {t} must be positive")));
    }
    let mut bu = Tracker::new(a, u, bounds_a, cfg)?;
    let mut bv = Tracker::new(b, v, bounds_b, cfg)?;
    loop {
        let finish = |decision: bool, exhausted: bool, bu: &Tracker<'_, OpA>, bv: &Tracker<'_, OpB>| JudgeOutcome {
            decision,
            intervals: vec![bu.summary(), bv.summary()],
            exhausted,
        };
        let (su, tu) = bu.interval();
        let (sv, tv) = bv.interval();
        let (minus_lo, minus_hi) = log_gap_interval(t, su, tu)?;
        let (plus_lo, plus_hi) = neg_log_gap_interval(t, sv, tv)?;
        if p * minus_hi <= (1.0 - p) * plus_lo {
            return Ok(finish(true, false, &bu, &bv));
        }
        if p * minus_lo > (1.0 - p) * plus_hi {
            return Ok(finish(false, false, &bu, &bv));
        }
        let prefer_plus = p * (minus_hi - minus_lo) <= (1.0 - p) * (plus_hi - plus_lo);
        match (prefer_plus, bv.can_refine(), bu.can_refine()) {
            (true, true, _) | (false, true, false) => bv.refine()?,
            (false, _, true) | (true, false, true) => bu.refine()?,
            (_, false, false) => {
                let minus = pos((t - bu.gauss()).ln());
                let gap = t - bv.gauss();
                let plus = if gap > 0.0 { pos(-gap.ln()) } else { f64::INFINITY };
                return Ok(finish(p * minus <= (1.0 - p) * plus, true, &bu, &bv));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymmetricSparseMatrix;

    fn diag12() -> (SymmetricSparseMatrix, SpectrumBounds) {
        (SymmetricSparseMatrix::from_diagonal(&[1.0, 2.0]).unwrap(), SpectrumBounds::new(0.9, 2.1).unwrap())
    }

    #[test]
    fn threshold_negative_t_is_immediate() {
        let (a, b) = diag12();
        let out = judge_threshold(-1.0, &[1.0, 1.0], &a, b, &JudgeConfig::default()).unwrap();
        assert!(out.decision);
        assert_eq!(out.intervals[0].iterations, 1);
    }

    #[test]
    fn threshold_examples() {
        let (a, b) = diag12();
        let cfg = JudgeConfig::default();
        assert!(judge_threshold(1.4, &[1.0, 1.0], &a, b, &cfg).unwrap().decision);
        assert!(!judge_threshold(1.6, &[1.0, 1.0], &a, b, &cfg).unwrap().decision);
    }

    #[test]
    fn threshold_ties_follow_rule() {
        let a = SymmetricSparseMatrix::from_diagonal(&[2.0]).unwrap();
        let b = SpectrumBounds::new(1.0, 3.0).unwrap();
        let out = judge_threshold(0.5, &[1.0], &a, b, &JudgeConfig::default()).unwrap();
        assert!(!out.decision);
        let cfg = JudgeConfig { tie_rule: true, ..Default::default() };
        assert!(judge_threshold(0.5, &[1.0], &a, b, &cfg).unwrap().decision);
    }

    #[test]
    fn threshold_zero_vector_is_exact_zero() {
        let (a, b) = diag12();
        let out = judge_threshold(0.0, &[0.0, 0.0], &a, b, &JudgeConfig::default()).unwrap();
        assert!(!out.decision);
        assert_eq!(out.iterations(), 0);
        assert!(judge_threshold(-1e-300, &[0.0, 0.0], &a, b, &JudgeConfig::default()).unwrap().decision);
    }

    #[test]
    fn threshold_exhaustion_falls_back_to_gauss() {
        let (a, _) = diag12();
        let cfg = JudgeConfig { max_iter: Some(1), ..Default::default() };
        // bounds this loose leave t = 1.45 undecided after one iteration
        let loose = SpectrumBounds::new(0.01, 100.0).unwrap();
        let out = judge_threshold(1.45, &[1.0, 1.0], &a, loose, &cfg).unwrap();
        assert!(out.exhausted);
        assert_eq!(out.intervals[0].iterations, 1);
        // Gauss estimate after one iteration is 4/3
        assert!(!out.decision);
        assert!(judge_threshold(1.3, &[1.0, 1.0], &a, loose, &cfg).unwrap().decision);
    }

    #[test]
    fn ratio_example() {
        let (a, b) = diag12();
        let out = judge_ratio(0.0, 0.5, &[1.0, 0.0], &[0.0, 1.0], &a, b, &JudgeConfig::default()).unwrap();
        assert!(!out.decision);
    }

    #[test]
    fn ratio_degenerate_u_reduces_to_threshold() {
        let (a, b) = diag12();
        let v = [1.0, 1.0];
        let cfg = JudgeConfig::default();
        for t in [0.5, 0.7, 0.74, 0.76, 1.0] {
            let r = judge_ratio(t, 0.5, &[0.0, 0.0], &v, &a, b, &cfg).unwrap();
            let th = judge_threshold(t / 0.5, &v, &a, b, &cfg).unwrap();
            assert_eq!(r.decision, th.decision, "t = {t}");
            assert_eq!(r.intervals[0].iterations, 0);
        }
    }

    #[test]
    fn ratio_rejects_bad_p() {
        let (a, b) = diag12();
        let cfg = JudgeConfig::default();
        assert!(judge_ratio(0.0, 1.0, &[1.0, 0.0], &[0.0, 1.0], &a, b, &cfg).is_err());
        assert!(judge_ratio(0.0, 0.0, &[1.0, 0.0], &[0.0, 1.0], &a, b, &cfg).is_err());
    }

    #[test]
    fn gain_empty_sets() {
        let e = SymmetricSparseMatrix::identity(1);
        let sub = e.restrict(&crate::matrix::IndexSet::empty()).unwrap();
        let b = SpectrumBounds::new(0.5, 2.0).unwrap();
        let cfg = JudgeConfig::default();
        // t = 1: both gains vanish; 0 <= 0 adds
        assert!(judge_gain(&sub, &sub, &[], &[], 1.0, 0.3, b, b, &cfg).unwrap().decision);
        // t = e^2: Delta- = 2, Delta+ = -2 -> add iff 2p <= 0, never
        let t = 2f64.exp();
        assert!(!judge_gain(&sub, &sub, &[], &[], t, 0.01, b, b, &cfg).unwrap().decision);
        // t = e^-2: Delta- = -2 clamps to 0 -> always add
        assert!(judge_gain(&sub, &sub, &[], &[], (-2f64).exp(), 0.99, b, b, &cfg).unwrap().decision);
    }

    #[test]
    fn gain_zero_left_side_always_adds() {
        // BIF_X = 3 exactly with t = 4, so log(t - BIF_X) = 0
        let a = SymmetricSparseMatrix::from_diagonal(&[1.0 / 3.0]).unwrap();
        let ba = SpectrumBounds::new(0.1, 1.0).unwrap();
        let e = SymmetricSparseMatrix::identity(1);
        let sub = e.restrict(&crate::matrix::IndexSet::empty()).unwrap();
        let cfg = JudgeConfig::default();
        for p in [0.01, 0.5, 0.99] {
            assert!(judge_gain(&a, &sub, &[1.0], &[], 4.0, p, ba, ba, &cfg).unwrap().decision);
        }
    }

    #[test]
    fn gain_rejects_non_pd_schur() {
        let a = SymmetricSparseMatrix::from_diagonal(&[0.1]).unwrap();
        let ba = SpectrumBounds::new(0.05, 1.0).unwrap();
        let cfg = JudgeConfig::default();
        // BIF = 10 > t
        let err = judge_gain(&a, &a, &[1.0], &[0.0], 1.0, 0.5, ba, ba, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonPositiveSchur { .. }));
    }
}
