//! Error-probability calculators for the sampling procedure.
//!
//! A pair exactly at the threshold collects Binomial(c_ij, μ/c_ij) samples
//! — for c_ij in the hundreds this is essentially Poisson(μ). The report
//! cut `M > μ/2` then misses such a pair with probability
//! ε = P(X ≤ ⌊μ/2⌋) for X ~ Poisson(μ), and the variant that returns the
//! whole multiset misses it only when it was never sampled at all:
//! ε′ = e^(−μ). A dissimilar pair at similarity ratio·Δ is spuriously
//! reported (by the count condition) with probability P(X > μ/2) for
//! X ~ Poisson(μ·ratio).
//!
//! The Chernoff-style choice μ ≥ 8·ln(1/ε) guarantees error at most ε but
//! is pessimistic; the Poisson numbers here are the sharp ones, e.g. μ=15
//! already gives ε ≈ 1.8% where the conservative bound asks for μ=33.
//!
//! Tails are computed by direct summation in log space — no special
//! functions, stable for every λ used in practice.

use crate::error::{Error, Result};
use serde::Serialize;

/// Strict-threshold cutoff: a pair is missed when M ≤ μ/2, i.e. when
/// M ≤ ⌊μ/2⌋ (for even μ the count M = μ/2 itself fails the strict test).
#[inline]
fn report_cutoff(mu: u64) -> u64 {
    mu / 2
}

/// P(X ≤ k) for X ~ Poisson(lambda), by stable log-space summation.
pub fn poisson_lower_tail(k: u64, lambda: f64) -> f64 {
    assert!(lambda >= 0.0, "Poisson rate must be nonnegative");
    if lambda == 0.0 {
        return 1.0;
    }
    let ln_lambda = lambda.ln();
    let mut ln_fact = 0.0;
    let mut sum = 0.0;
    for i in 0..=k {
        if i > 0 {
            ln_fact += (i as f64).ln();
        }
        sum += (-lambda + i as f64 * ln_lambda - ln_fact).exp();
    }
    sum.min(1.0)
}

/// P(X ≥ k_min) for X ~ Binomial(c, w).
///
/// Summed from whichever side is smaller: the complement when k_min sits
/// at or below the mean, directly otherwise — a tiny upper tail computed
/// as 1 − (1 − tiny) would lose most of its digits to cancellation.
pub fn binomial_upper_tail(c: u64, w: f64, k_min: u64) -> f64 {
    if k_min == 0 {
        return 1.0;
    }
    if k_min > c || w <= 0.0 {
        return 0.0;
    }
    if w >= 1.0 {
        return 1.0; // k_min ≤ c and every trial succeeds
    }
    if (k_min as f64) <= c as f64 * w {
        return (1.0 - binomial_lower_tail(c, w, k_min - 1)).clamp(0.0, 1.0);
    }
    // direct log-space summation; above the mean the terms only shrink,
    // so stop once they are negligible against the partial sum
    let (ln_w, ln_1w) = (w.ln(), (1.0 - w).ln());
    let mut ln_choose = 0.0; // ln C(c, k_min), built incrementally
    for i in 1..=k_min {
        ln_choose += ((c - i + 1) as f64).ln() - (i as f64).ln();
    }
    let mut ln_term = ln_choose + k_min as f64 * ln_w + (c - k_min) as f64 * ln_1w;
    let mut sum = ln_term.exp();
    for k in (k_min + 1)..=c {
        ln_term += ((c - k + 1) as f64 / k as f64).ln() + ln_w - ln_1w;
        let term = ln_term.exp();
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum.min(1.0)
}

/// P(X ≤ k) for X ~ Binomial(c, w), summed in log space.
pub fn binomial_lower_tail(c: u64, w: f64, k: u64) -> f64 {
    if w <= 0.0 {
        return 1.0;
    }
    if w >= 1.0 {
        return if k >= c { 1.0 } else { 0.0 };
    }
    let k = k.min(c);
    let (ln_w, ln_1w) = (w.ln(), (1.0 - w).ln());
    let mut ln_choose = 0.0; // ln C(c, 0)
    let mut sum = 0.0;
    for i in 0..=k {
        if i > 0 {
            // C(c, i) = C(c, i−1)·(c−i+1)/i
            ln_choose += ((c - i + 1) as f64).ln() - (i as f64).ln();
        }
        sum += (ln_choose + i as f64 * ln_w + (c - i) as f64 * ln_1w).exp();
    }
    sum.min(1.0)
}

/// Smallest integer μ with the conservative guarantee: ⌈8·ln(1/ε)⌉.
///
/// Values within 10⁻⁹ of an integer are rounded rather than bumped up, so
/// exact cases like ε = e⁻¹ ↦ 8 are not inflated by floating-point noise.
pub fn required_mu(epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "error probability must lie in (0, 1), got {epsilon}"
        )));
    }
    let x = 8.0 * (1.0 / epsilon).ln();
    let nearest = x.round();
    let bounded = if (x - nearest).abs() < 1e-9 {
        nearest
    } else {
        x.ceil()
    };
    Ok(bounded as u64)
}

/// ε: probability that a pair exactly at the threshold fails the strict
/// `M > μ/2` report cut, under the Poisson(μ) approximation.
pub fn false_negative_poisson(mu: u64) -> f64 {
    poisson_lower_tail(report_cutoff(mu), mu as f64)
}

/// ε′: probability that a threshold pair is absent from the multiset
/// entirely (the whole-multiset variant's only failure mode): e^(−μ).
pub fn false_negative_any_sample(mu: u64) -> f64 {
    (-(mu as f64)).exp()
}

/// Probability that a pair at similarity ratio·Δ (ratio = s/Δ ≤ 1 for a
/// true negative) clears the count condition: P(X > μ/2), X ~ Poisson(μ·ratio).
pub fn false_positive_poisson(mu: u64, ratio: f64) -> f64 {
    assert!(ratio >= 0.0, "similarity ratio must be nonnegative");
    1.0 - poisson_lower_tail(report_cutoff(mu), mu as f64 * ratio)
}

/// One row of the error table: μ with its associated error probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorProfile {
    pub mu: u64,
    /// ε, the false-negative probability of the standard report rule.
    pub false_negative: f64,
    /// ε′, the false-negative probability when the whole multiset is kept.
    pub false_negative_any_sample: f64,
    /// (ratio, probability) pairs for requested similarity ratios s/Δ.
    pub false_positive_at_ratio: Vec<(f64, f64)>,
}

/// Assemble the error profile for one μ and a list of similarity ratios.
pub fn error_profile(mu: u64, ratios: &[f64]) -> ErrorProfile {
    ErrorProfile {
        mu,
        false_negative: false_negative_poisson(mu),
        false_negative_any_sample: false_negative_any_sample(mu),
        false_positive_at_ratio: ratios
            .iter()
            .map(|&r| (r, false_positive_poisson(mu, r)))
            .collect(),
    }
}
