//! The biased pair sampler.
//!
//! One pass over the database: count item supports, then scan each
//! transaction in support order with a single random threshold r per
//! transaction. A pair (i, j) of the transaction is sampled when
//! `f(c(i), c(j), Δ)·μ > r`; because f is non-increasing in both supports,
//! the inner scan can stop at the first partner that fails — every later
//! partner has equal or higher support and fails too. Sampled pairs
//! accumulate in a multiset M, and a pair is reported when
//!
//! * `M(i,j) > report_threshold` (default μ/2), or
//! * `M(i,j) · f(c(i), c(j), Δ) ≥ 1`.
//!
//! The second condition catches the deterministic regime: when
//! `f·μ ≥ 1` every co-occurrence is sampled, so M(i,j) is the exact
//! co-occurrence count. Otherwise M(i,j) is Binomial(c_ij, f·μ) and the
//! μ/2 cut keeps the false-negative probability controlled.
//!
//! Time is N + |M| counter operations and space n + distinct(M) counters —
//! proportional to the similar pairs, not to all co-occurring pairs.

use crate::cost::SampleCost;
use crate::dataset::{SupportCounts, TransactionDatabase};
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::rng;
use crate::{Count, ItemId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Per-item supports plus the database-level counts the measures need.
#[derive(Debug, Clone)]
pub struct SupportIndex {
    counts: SupportCounts,
    num_transactions: u64,
    num_items: u64,
    total_occurrences: u64,
}

impl SupportIndex {
    pub fn from_database(db: &TransactionDatabase) -> Self {
        SupportIndex {
            counts: SupportCounts::count(db),
            num_transactions: db.num_transactions(),
            num_items: db.num_items(),
            total_occurrences: db.total_occurrences(),
        }
    }

    /// c(i): transactions containing item i (0 for absent items).
    #[inline]
    pub fn support(&self, item: ItemId) -> Count {
        self.counts.get(item)
    }

    /// m, the transaction count.
    pub fn num_transactions(&self) -> u64 {
        self.num_transactions
    }

    /// n, the distinct-item count.
    pub fn num_items(&self) -> u64 {
        self.num_items
    }

    /// N = Σ_i c(i), total item occurrences.
    pub fn total_occurrences(&self) -> u64 {
        self.total_occurrences
    }

    /// Copy of a transaction sorted by ascending support, ties by
    /// ascending id — the canonical scan order.
    pub fn sort_by_support(&self, txn: &[ItemId]) -> Vec<ItemId> {
        let mut sorted = txn.to_vec();
        sorted.sort_unstable_by_key(|&i| (self.support(i), i));
        sorted
    }
}

/// Parameters of a sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub measure: Measure,
    /// Similarity threshold Δ.
    pub delta: f64,
    /// Expected samples for a pair exactly at the threshold.
    pub mu: u64,
    pub seed: u64,
    /// Minimum sample count (exclusive) for the first report condition;
    /// defaults to μ/2.
    pub report_threshold: f64,
}

impl SamplingConfig {
    pub fn new(measure: Measure, delta: f64, mu: u64, seed: u64) -> Self {
        SamplingConfig {
            measure,
            delta,
            mu,
            seed,
            report_threshold: mu as f64 / 2.0,
        }
    }

    /// Override the μ/2 report cut (lower values trade false positives for
    /// fewer false negatives, and vice versa).
    pub fn with_report_threshold(mut self, report_threshold: f64) -> Self {
        self.report_threshold = report_threshold;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!(
                "threshold delta must be positive, got {}",
                self.delta
            )));
        }
        if self.measure.similarity_bounded() && self.delta > 1.0 {
            return Err(Error::Config(format!(
                "threshold delta = {} exceeds the {} similarity range [0, 1]",
                self.delta,
                self.measure.name()
            )));
        }
        if self.mu == 0 {
            return Err(Error::Config("mu must be ≥ 1".into()));
        }
        if !self.report_threshold.is_finite() || self.report_threshold < 0.0 {
            return Err(Error::Config(format!(
                "report threshold must be a nonnegative real, got {}",
                self.report_threshold
            )));
        }
        Ok(())
    }
}

/// Canonical item pair: `first` is the lower-support item, ties broken by
/// lower id. Matching the scan order of a support-sorted transaction means
/// pairs are constructed canonical and never need swapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub first: ItemId,
    pub second: ItemId,
}

impl PairKey {
    /// Order two items canonically under a support index.
    pub fn canonical(a: ItemId, b: ItemId, supports: &SupportIndex) -> PairKey {
        let ka = (supports.support(a), a);
        let kb = (supports.support(b), b);
        if ka <= kb {
            PairKey { first: a, second: b }
        } else {
            PairKey { first: b, second: a }
        }
    }
}

/// The multiset M of sampled pair occurrences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleMultiset {
    counts: HashMap<PairKey, Count>,
    total_samples: u64,
}

impl SampleMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one sampled occurrence of `pair`.
    #[inline]
    pub fn insert(&mut self, pair: PairKey) {
        *self.counts.entry(pair).or_insert(0) += 1;
        self.total_samples += 1;
    }

    /// M(i,j), zero when the pair was never sampled.
    pub fn count(&self, pair: &PairKey) -> Count {
        self.counts.get(pair).copied().unwrap_or(0)
    }

    /// N′ = Σ M(i,j).
    pub fn total_samples(&self) -> u64 {
        self.total_samples
    }

    /// Number of distinct sampled pairs.
    pub fn distinct_pairs(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &Count)> {
        self.counts.iter()
    }

    /// Entries sorted by pair key, for deterministic output.
    pub fn sorted_entries(&self) -> Vec<(PairKey, Count)> {
        let mut v: Vec<_> = self.counts.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_unstable();
        v
    }

    /// Fold another multiset in by summation (order-independent, so
    /// parallel partials merge to exactly the sequential result).
    pub fn merge(&mut self, other: SampleMultiset) {
        self.total_samples += other.total_samples;
        for (pair, c) in other.counts {
            *self.counts.entry(pair).or_insert(0) += c;
        }
    }
}

/// A pair that passed the report filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedPair {
    pub pair: PairKey,
    /// M(i,j), the sample count.
    pub samples: Count,
    /// True iff `f(c(i), c(j), Δ)·μ ≥ 1`, in which case `samples` equals
    /// the exact co-occurrence count.
    pub exact: bool,
    /// Similarity computed from `samples`: exact when `exact`, otherwise a
    /// plug-in estimate from E[M] = c_ij·f·μ.
    pub estimated_similarity: f64,
}

/// Everything a sampling run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningRun {
    pub multiset: SampleMultiset,
    /// Pairs passing the report filter, sorted by pair key.
    pub report: Vec<ReportedPair>,
    pub cost: SampleCost,
}

/// Scan one support-sorted transaction with threshold r, returning the
/// sampled pairs in scan order.
///
/// For each anchor position i the partner scan advances while
/// `f(c(txn[i]), c(txn[j]), Δ)·μ > r` and stops at the first failure:
/// supports only grow along the sorted transaction and f is non-increasing,
/// so no later partner can succeed.
pub fn sample_transaction(
    sorted_txn: &[ItemId],
    supports: &SupportIndex,
    config: &SamplingConfig,
    r: f64,
) -> Vec<PairKey> {
    let mut out = Vec::new();
    scan_transaction(sorted_txn, supports, config, r, |pair| out.push(pair));
    out
}

/// The early-exit double loop, feeding sampled pairs to a sink.
#[inline]
fn scan_transaction<F: FnMut(PairKey)>(
    sorted_txn: &[ItemId],
    supports: &SupportIndex,
    config: &SamplingConfig,
    r: f64,
    mut sink: F,
) {
    let m = supports.num_transactions() as f64;
    let mu = config.mu as f64;
    for i in 0..sorted_txn.len() {
        let ci = supports.support(sorted_txn[i]) as f64;
        for j in (i + 1)..sorted_txn.len() {
            let cj = supports.support(sorted_txn[j]) as f64;
            let w = config.measure.weight_real(ci, cj, config.delta, m) * mu;
            if w > r {
                sink(PairKey {
                    first: sorted_txn[i],
                    second: sorted_txn[j],
                });
            } else {
                break;
            }
        }
    }
}

/// Run the full sampling procedure: support count, per-transaction biased
/// sampling with r derived from `(seed, transaction index)`, report filter,
/// and cost accounting.
pub fn run_bisam(db: &TransactionDatabase, config: &SamplingConfig) -> Result<MiningRun> {
    config.validate()?;
    if db.num_transactions() == 0 {
        return Err(Error::Config("empty database: nothing to sample".into()));
    }
    let supports = SupportIndex::from_database(db);
    let multiset = db
        .transactions()
        .par_iter()
        .enumerate()
        .fold(SampleMultiset::new, |mut acc, (t, txn)| {
            let sorted = supports.sort_by_support(txn);
            let r = rng::transaction_draw(config.seed, t as u64);
            scan_transaction(&sorted, &supports, config, r, |pair| acc.insert(pair));
            acc
        })
        .reduce(SampleMultiset::new, |mut a, b| {
            a.merge(b);
            a
        });
    let report = filter_report(&multiset, &supports, config);
    let cost = SampleCost {
        time: supports.total_occurrences() + multiset.total_samples(),
        space: supports.num_items() + multiset.distinct_pairs(),
        total_samples: multiset.total_samples(),
        distinct_pairs: multiset.distinct_pairs(),
    };
    Ok(MiningRun {
        multiset,
        report,
        cost,
    })
}

/// Apply the two-condition report filter to a multiset, producing pairs
/// sorted by key. Strictness follows the procedure exactly: the count cut
/// is strict (`M > threshold`), the weight condition non-strict
/// (`M·f ≥ 1`).
pub fn filter_report(
    multiset: &SampleMultiset,
    supports: &SupportIndex,
    config: &SamplingConfig,
) -> Vec<ReportedPair> {
    let m = supports.num_transactions();
    let mut report = Vec::new();
    for (pair, &samples) in multiset.iter() {
        let ci = supports.support(pair.first);
        let cj = supports.support(pair.second);
        if let Some(entry) = report_entry(*pair, samples, ci, cj, m, config) {
            report.push(entry);
        }
    }
    report.sort_unstable_by_key(|p| p.pair);
    report
}

/// Filter decision and similarity estimate for one aggregated pair count.
/// Shared by the in-memory filter above and the external pipeline's final
/// stage so the two produce identical reports.
pub(crate) fn report_entry(
    pair: PairKey,
    samples: Count,
    ci: Count,
    cj: Count,
    m: u64,
    config: &SamplingConfig,
) -> Option<ReportedPair> {
    let mu = config.mu as f64;
    let f = config
        .measure
        .weight_real(ci as f64, cj as f64, config.delta, m as f64);
    if !(samples as f64 > config.report_threshold || samples as f64 * f >= 1.0) {
        return None;
    }
    let exact = f * mu >= 1.0;
    let estimated_similarity = if exact {
        config
            .measure
            .similarity_real(ci as f64, cj as f64, samples as f64, m as f64)
    } else {
        // invert E[M] = c_ij·f·μ and cap at the feasible count
        let c_hat = (samples as f64 / (f * mu)).min(ci.min(cj) as f64);
        config
            .measure
            .similarity_real(ci as f64, cj as f64, c_hat, m as f64)
    };
    Some(ReportedPair {
        pair,
        samples,
        exact,
        estimated_similarity,
    })
}
