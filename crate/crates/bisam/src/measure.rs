//! Similarity measures and their sampling functions.
//!
//! A measure assigns a pair of items a similarity s(i,j) computed from the
//! supports c(i), c(j), the co-occurrence count c(i,j), and the transaction
//! count m. Each measure comes with a *sampling function* f(c(i), c(j), s),
//! non-increasing in all three arguments, tied to the similarity by the
//! defining equation
//!
//! ```text
//! c(i,j) · f(c(i), c(j), s(i,j)) = 1
//! ```
//!
//! Evaluated at the run threshold s = Δ, `f·μ` is the expected number of
//! samples a pair at similarity exactly Δ receives, which is what lets the
//! sampler bias its draws toward pairs that can still clear the threshold.
//!
//! The six base measures:
//!
//! | name             | s(i,j)                      | f(ci, cj, s)          |
//! |------------------|-----------------------------|-----------------------|
//! | `lift`           | c(i,j)·m / (ci·cj)          | m / (s·ci·cj)         |
//! | `cosine`         | c(i,j) / √(ci·cj)           | 1 / (s·√(ci·cj))      |
//! | `jaccard`        | c(i,j) / (ci+cj−c(i,j))     | (1+s) / (s·(ci+cj))   |
//! | `all_confidence` | c(i,j) / max(ci, cj)        | 1 / (s·max(ci, cj))   |
//! | `dice`           | c(i,j) / (ci+cj)            | 1 / (s·(ci+cj))       |
//! | `overlap_coef`   | c(i,j) / min(ci, cj)        | 1 / (s·min(ci, cj))   |
//!
//! Note that `dice` here is c(i,j)/(ci+cj), without the conventional factor
//! 2 — halve Δ to get the usual normalization. Finding pairs above Δ under
//! `overlap_coef` finds all association rules with confidence ≥ Δ.
//!
//! Positive linear combinations and pointwise minima of sampling functions
//! are again valid sampling functions, so measures compose: a
//! [`Measure::compose`]d minimum searches for pairs that are similar under
//! *both* components at once, with the coefficients absorbing per-component
//! thresholds.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// How a composite measure combines its two components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combinator {
    /// α·f₁ + β·f₂
    Linear,
    /// min(α·f₁, β·f₂)
    Min,
}

/// A similarity measure: one of the six base kinds, or a composite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Lift,
    Cosine,
    Jaccard,
    AllConfidence,
    Dice,
    OverlapCoef,
    Composite(Box<CompositeMeasure>),
}

/// A weighted combination of two measures' sampling functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeMeasure {
    pub combinator: Combinator,
    pub alpha: f64,
    pub left: Measure,
    pub beta: f64,
    pub right: Measure,
}

/// Result of inverting `f(ci, cj, s)·μ = r` for s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSolution {
    /// The unique s with `f(ci, cj, s)·μ = r`.
    Value(f64),
    /// No solution within the measure's similarity range: the weight stays
    /// above the target throughout, i.e. the pair would be sampled at every
    /// admissible threshold.
    AboveRange,
}

impl ThresholdSolution {
    /// The solved threshold, or `None` for [`ThresholdSolution::AboveRange`].
    pub fn value(self) -> Option<f64> {
        match self {
            ThresholdSolution::Value(s) => Some(s),
            ThresholdSolution::AboveRange => None,
        }
    }
}

/// Bisection iteration cap for composite linear inversion.
const BISECT_MAX_ITERS: u32 = 200;

impl Measure {
    /// Build a composite measure `α·left ⊕ β·right` (⊕ = sum or min).
    ///
    /// Coefficients must be strictly positive: non-increasingness of the
    /// combined sampling function is only guaranteed for positive weights.
    /// A per-component threshold can be folded into its coefficient, e.g.
    /// `compose(Min, 1/0.7, Cosine, 1/2.0, Lift)` evaluated at s = 1 weighs
    /// pairs by `min(f_cosine(·,·,0.7), f_lift(·,·,2))` — similar under
    /// cosine at 0.7 *and* lift at 2.
    pub fn compose(
        combinator: Combinator,
        alpha: f64,
        left: Measure,
        beta: f64,
        right: Measure,
    ) -> Result<Measure> {
        for (name, c) in [("alpha", alpha), ("beta", beta)] {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Domain(format!(
                    "composite coefficient {name} must be positive and finite, got {c}"
                )));
            }
        }
        Ok(Measure::Composite(Box::new(CompositeMeasure {
            combinator,
            alpha,
            left,
            beta,
            right,
        })))
    }

    /// Canonical lowercase name, as accepted by [`Measure::from_str`].
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Lift => "lift",
            Measure::Cosine => "cosine",
            Measure::Jaccard => "jaccard",
            Measure::AllConfidence => "all_confidence",
            Measure::Dice => "dice",
            Measure::OverlapCoef => "overlap_coef",
            Measure::Composite(_) => "composite",
        }
    }

    /// Largest similarity the measure can attain: m for lift, 1 for the
    /// bounded measures, the smaller component bound for composites.
    pub fn upper_bound(&self, m: u64) -> f64 {
        match self {
            Measure::Lift => m as f64,
            Measure::Composite(c) => c.left.upper_bound(m).min(c.right.upper_bound(m)),
            _ => 1.0,
        }
    }

    /// Whether similarities are confined to [0, 1] regardless of the
    /// database (every measure except lift; a composite is bounded as soon
    /// as one component is, since its range is the smaller of the two).
    pub fn similarity_bounded(&self) -> bool {
        match self {
            Measure::Lift => false,
            Measure::Composite(c) => {
                c.left.similarity_bounded() || c.right.similarity_bounded()
            }
            _ => true,
        }
    }

    /// Similarity from exact counts.
    ///
    /// Requires `ci, cj ≥ 1`, `cij ≤ min(ci, cj)`, `m ≥ 1`. The result lies
    /// in [0, 1] for every measure except lift, which lies in [0, m].
    pub fn similarity(&self, ci: u64, cj: u64, cij: u64, m: u64) -> Result<f64> {
        if ci == 0 || cj == 0 {
            return Err(Error::Domain(format!(
                "similarity undefined for zero support (ci={ci}, cj={cj})"
            )));
        }
        if cij > ci.min(cj) {
            return Err(Error::Domain(format!(
                "co-occurrence count {cij} exceeds min support {}",
                ci.min(cj)
            )));
        }
        if m == 0 {
            return Err(Error::Domain("transaction count m must be ≥ 1".into()));
        }
        Ok(self.similarity_real(ci as f64, cj as f64, cij as f64, m as f64))
    }

    /// Similarity with a real-valued co-occurrence count (used for the
    /// plug-in estimates derived from sample counts). No range checks.
    pub(crate) fn similarity_real(&self, ci: f64, cj: f64, cij: f64, m: f64) -> f64 {
        if cij <= 0.0 {
            return 0.0;
        }
        match self {
            Measure::Lift => cij * m / (ci * cj),
            Measure::Cosine => cij / (ci * cj).sqrt(),
            Measure::Jaccard => cij / (ci + cj - cij),
            Measure::AllConfidence => cij / ci.max(cj),
            Measure::Dice => cij / (ci + cj),
            Measure::OverlapCoef => cij / ci.min(cj),
            // For a composite the defining equation cij·f(s) = 1 still pins
            // down a unique s because f is strictly decreasing; invert it.
            Measure::Composite(_) => match self.solve_for_weight(ci, cj, 1.0 / cij, m) {
                ThresholdSolution::Value(s) => s,
                ThresholdSolution::AboveRange => self.upper_bound(m.max(1.0) as u64),
            },
        }
    }

    /// The sampling function f(ci, cj, s), non-increasing in all arguments.
    ///
    /// Requires `s > 0` (jaccard's f is singular at 0 and every base f
    /// diverges there) and `ci, cj ≥ 1`.
    pub fn weight(&self, ci: u64, cj: u64, s: f64, m: u64) -> Result<f64> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!(
                "sampling function requires s > 0, got {s}"
            )));
        }
        if ci == 0 || cj == 0 {
            return Err(Error::Domain(format!(
                "sampling function undefined for zero support (ci={ci}, cj={cj})"
            )));
        }
        Ok(self.weight_real(ci as f64, cj as f64, s, m as f64))
    }

    #[inline]
    pub(crate) fn weight_real(&self, ci: f64, cj: f64, s: f64, m: f64) -> f64 {
        match self {
            Measure::Lift => m / (s * ci * cj),
            Measure::Cosine => 1.0 / (s * (ci * cj).sqrt()),
            Measure::Jaccard => (1.0 + s) / (s * (ci + cj)),
            Measure::AllConfidence => 1.0 / (s * ci.max(cj)),
            Measure::Dice => 1.0 / (s * (ci + cj)),
            Measure::OverlapCoef => 1.0 / (s * ci.min(cj)),
            Measure::Composite(c) => {
                let l = c.alpha * c.left.weight_real(ci, cj, s, m);
                let r = c.beta * c.right.weight_real(ci, cj, s, m);
                match c.combinator {
                    Combinator::Linear => l + r,
                    Combinator::Min => l.min(r),
                }
            }
        }
    }

    /// Invert the sampling function: find s with `f(ci, cj, s)·μ = r`.
    ///
    /// Closed-form for the base measures; for composites the minimum
    /// combinator combines the component solutions and linear combinations
    /// fall back to bisection. Jaccard (and composites over it) report
    /// [`ThresholdSolution::AboveRange`] when no solution exists in (0, 1].
    pub fn solve_threshold(
        &self,
        ci: u64,
        cj: u64,
        r: f64,
        mu: u64,
        m: u64,
    ) -> Result<ThresholdSolution> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!(
                "threshold inversion requires r > 0 (r = 0 has an unbounded solution), got {r}"
            )));
        }
        if ci == 0 || cj == 0 {
            return Err(Error::Domain(format!(
                "threshold inversion undefined for zero support (ci={ci}, cj={cj})"
            )));
        }
        if mu == 0 {
            return Err(Error::Config("mu must be ≥ 1".into()));
        }
        Ok(self.solve_for_weight(ci as f64, cj as f64, r / mu as f64, m as f64))
    }

    /// Solve `f(ci, cj, s) = w` for s, with w > 0.
    fn solve_for_weight(&self, ci: f64, cj: f64, w: f64, m: f64) -> ThresholdSolution {
        use ThresholdSolution::{AboveRange, Value};
        match self {
            Measure::Lift => Value(m / (w * ci * cj)),
            Measure::Cosine => Value(1.0 / (w * (ci * cj).sqrt())),
            Measure::AllConfidence => Value(1.0 / (w * ci.max(cj))),
            Measure::Dice => Value(1.0 / (w * (ci + cj))),
            Measure::OverlapCoef => Value(1.0 / (w * ci.min(cj))),
            Measure::Jaccard => {
                // (1+s)/(s(ci+cj)) = w  ⟺  1/s = w(ci+cj) − 1
                let denom = w * (ci + cj) - 1.0;
                if denom <= 0.0 {
                    return AboveRange;
                }
                let s = 1.0 / denom;
                if s > 1.0 {
                    AboveRange
                } else {
                    Value(s)
                }
            }
            Measure::Composite(c) => match c.combinator {
                Combinator::Min => {
                    // min(αf₁, βf₂)(s) = w has the *smaller* of the two
                    // component solutions: beyond it one branch has already
                    // dropped below w.
                    let l = c.left.solve_for_weight(ci, cj, w / c.alpha, m);
                    let r = c.right.solve_for_weight(ci, cj, w / c.beta, m);
                    match (l, r) {
                        (Value(a), Value(b)) => Value(a.min(b)),
                        // One branch stays above target across its whole
                        // range; the other branch's solution decides, if it
                        // falls inside that range.
                        (AboveRange, Value(b)) => {
                            if b > c.left.upper_bound(m.max(1.0) as u64) {
                                AboveRange
                            } else {
                                Value(b)
                            }
                        }
                        (Value(a), AboveRange) => {
                            if a > c.right.upper_bound(m.max(1.0) as u64) {
                                AboveRange
                            } else {
                                Value(a)
                            }
                        }
                        (AboveRange, AboveRange) => AboveRange,
                    }
                }
                Combinator::Linear => self.bisect_for_weight(ci, cj, w, m),
            },
        }
    }

    /// Monotone bisection for composite linear sampling functions.
    fn bisect_for_weight(&self, ci: f64, cj: f64, w: f64, m: f64) -> ThresholdSolution {
        // If the target is at or below the s→∞ asymptote there is no
        // solution: the weight stays above w everywhere.
        if w <= self.weight_at_infinity(ci, cj, m) {
            return ThresholdSolution::AboveRange;
        }
        let g = |s: f64| self.weight_real(ci, cj, s, m);
        let (mut lo, mut hi);
        if g(1.0) > w {
            lo = 1.0;
            hi = 2.0;
            while g(hi) > w {
                hi *= 2.0;
                if hi > 1e60 {
                    return ThresholdSolution::AboveRange;
                }
            }
        } else {
            hi = 1.0;
            lo = 0.5;
            while g(lo) <= w {
                lo *= 0.5;
                if lo < 1e-60 {
                    return ThresholdSolution::Value(lo);
                }
            }
        }
        for _ in 0..BISECT_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if g(mid) > w {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-14 * lo {
                break;
            }
        }
        ThresholdSolution::Value(0.5 * (lo + hi))
    }

    /// Limit of f(ci, cj, s) as s → ∞ (0 for the reciprocal forms, the
    /// jaccard plateau 1/(ci+cj) otherwise).
    fn weight_at_infinity(&self, ci: f64, cj: f64, m: f64) -> f64 {
        match self {
            Measure::Jaccard => 1.0 / (ci + cj),
            Measure::Composite(c) => {
                let l = c.alpha * c.left.weight_at_infinity(ci, cj, m);
                let r = c.beta * c.right.weight_at_infinity(ci, cj, m);
                match c.combinator {
                    Combinator::Linear => l + r,
                    Combinator::Min => l.min(r),
                }
            }
            _ => 0.0,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lift" => Ok(Measure::Lift),
            "cosine" => Ok(Measure::Cosine),
            "jaccard" => Ok(Measure::Jaccard),
            "all_confidence" => Ok(Measure::AllConfidence),
            "dice" => Ok(Measure::Dice),
            "overlap_coef" => Ok(Measure::OverlapCoef),
            other => Err(Error::Unsupported(format!(
                "unknown measure `{other}` (expected one of lift, cosine, jaccard, \
                 all_confidence, dice, overlap_coef)"
            ))),
        }
    }
}

/// The six base measures, for tests and table-driven CLI output.
pub const BASE_MEASURES: [Measure; 6] = [
    Measure::Lift,
    Measure::Cosine,
    Measure::Jaccard,
    Measure::AllConfidence,
    Measure::Dice,
    Measure::OverlapCoef,
];
