//! Cost accounting shared by the sampler and the exact oracle.
//!
//! Both methods are measured in the same units: *time* is the number of
//! associative-counter operations (one per input item occurrence plus one
//! per counter update), *space* is the number of counters held (one per
//! item plus one per distinct pair tracked). These are machine-independent
//! quantities, so observed runs are exactly reproducible and directly
//! comparable to closed-form expectations.

use serde::Serialize;

/// Observed cost of a sampling run.
///
/// `time = N + N′` where N is the total item occurrences and N′ the total
/// samples drawn; `space = n + d` where d is the number of distinct pairs
/// in the multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleCost {
    pub time: u64,
    pub space: u64,
    /// N′ = Σ M(i,j), the multiset size.
    pub total_samples: u64,
    /// Distinct pairs in the multiset.
    pub distinct_pairs: u64,
}

/// Observed cost of the exact-counting baseline.
///
/// `time = N + Σ_t C(b_t, 2)` (every pair in every transaction touches a
/// counter); `space = n + d` where d counts distinct co-occurring pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExactCost {
    pub time: u64,
    pub space: u64,
    /// Σ_t C(b_t, 2), the co-occurrence total over all transactions.
    pub pair_occurrences: u64,
    /// Distinct co-occurring pairs.
    pub distinct_pairs: u64,
}

/// Closed-form expectations of a sampling run's cost on a fixed database.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedCost {
    /// E[N′] = Σ_pairs c_ij · min(1, f·μ).
    pub expected_samples: f64,
    /// E[#distinct pairs] = Σ_pairs (1 − (1 − min(1, f·μ))^{c_ij}).
    pub expected_distinct_pairs: f64,
}
