//! Exact pair counting: the ground-truth oracle and cost baseline.
//!
//! Counting every co-occurring pair is what the sampler avoids — time
//! grows with Σ_t C(b_t, 2), which for large dense data is exactly the
//! infeasible part. This module does it anyway, for three purposes: ground
//! truth in recall tests ([`exact_similar_pairs`]), the comparison
//! baseline's cost numbers ([`count_all_pairs`]), and closed-form
//! expectations of the sampler's own cost and output size on a concrete
//! database ([`expected_cost`], [`expected_output_count`]).
//!
//! The pair table is guarded by an entry budget (default 10⁸) with a
//! resource error rather than an OOM kill, since blowing up here is the
//! expected behavior on data the sampler is built for.

use crate::cost::{ExactCost, ExpectedCost};
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::sampler::{PairKey, SamplingConfig, SupportIndex};
use crate::stats;
use crate::Count;
use crate::dataset::TransactionDatabase;
use rayon::prelude::*;
use std::collections::HashMap;

/// Default cap on distinct pairs the oracle will hold.
pub const DEFAULT_ENTRY_BUDGET: u64 = 100_000_000;

/// Exact co-occurrence counts c_ij for every co-occurring pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCountTable {
    counts: HashMap<PairKey, Count>,
    total_pair_occurrences: u64,
}

impl PairCountTable {
    /// c_ij = |S_i ∩ S_j|; zero for pairs that never co-occur.
    pub fn count(&self, pair: &PairKey) -> Count {
        self.counts.get(pair).copied().unwrap_or(0)
    }

    pub fn distinct_pairs(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Σ_t C(b_t, 2), the total pair occurrences over all transactions.
    pub fn total_pair_occurrences(&self) -> u64 {
        self.total_pair_occurrences
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
}

/// Count all co-occurring pairs under the default entry budget.
pub fn count_all_pairs(db: &TransactionDatabase) -> Result<(PairCountTable, ExactCost)> {
    count_all_pairs_with_budget(db, DEFAULT_ENTRY_BUDGET)
}

/// Count all co-occurring pairs, refusing to grow past `max_entries`
/// distinct pairs.
///
/// Pairs are keyed canonically (lower support first, ties by id). The
/// reported cost is the §-style baseline: `time = N + Σ_t C(b_t, 2)`,
/// `space = n + distinct pairs`.
pub fn count_all_pairs_with_budget(
    db: &TransactionDatabase,
    max_entries: u64,
) -> Result<(PairCountTable, ExactCost)> {
    let supports = SupportIndex::from_database(db);
    let table = db
        .transactions()
        .par_iter()
        .try_fold(PairCountTable::default, |mut acc, txn| {
            let sorted = supports.sort_by_support(txn);
            for i in 0..sorted.len() {
                for j in (i + 1)..sorted.len() {
                    let pair = PairKey {
                        first: sorted[i],
                        second: sorted[j],
                    };
                    *acc.counts.entry(pair).or_insert(0) += 1;
                    acc.total_pair_occurrences += 1;
                }
            }
            if acc.counts.len() as u64 > max_entries {
                return Err(Error::Resource(format!(
                    "exact pair table exceeds the {max_entries}-entry budget"
                )));
            }
            Ok(acc)
        })
        .try_reduce(PairCountTable::default, |mut a, b| {
            a.total_pair_occurrences += b.total_pair_occurrences;
            for (pair, c) in b.counts {
                *a.counts.entry(pair).or_insert(0) += c;
            }
            if a.counts.len() as u64 > max_entries {
                return Err(Error::Resource(format!(
                    "exact pair table exceeds the {max_entries}-entry budget"
                )));
            }
            Ok(a)
        })?;
    let cost = ExactCost {
        time: db.total_occurrences() + table.total_pair_occurrences,
        space: db.num_items() + table.counts.len() as u64,
        pair_occurrences: table.total_pair_occurrences,
        distinct_pairs: table.counts.len() as u64,
    };
    Ok((table, cost))
}

/// Ground truth: every pair with s(i,j) ≥ delta, with its exact
/// similarity, sorted by pair key.
pub fn exact_similar_pairs(
    db: &TransactionDatabase,
    measure: &Measure,
    delta: f64,
) -> Result<Vec<(PairKey, f64)>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "threshold delta must be positive, got {delta}"
        )));
    }
    let (table, _) = count_all_pairs(db)?;
    let supports = SupportIndex::from_database(db);
    let m = db.num_transactions();
    let mut out = Vec::new();
    for (pair, &cij) in table.iter() {
        let s = measure
            .similarity(supports.support(pair.first), supports.support(pair.second), cij, m)
            .expect("table counts are within the similarity domain");
        if s >= delta {
            out.push((*pair, s));
        }
    }
    out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Closed-form expectations of a sampling run's cost on this database:
///
/// * `expected_samples` = Σ_pairs c_ij · min(1, f·μ) — each of a pair's
///   c_ij co-occurrences is sampled independently with probability
///   min(1, f·μ);
/// * `expected_distinct_pairs` = Σ_pairs (1 − (1 − min(1, f·μ))^c_ij) —
///   a pair appears in the multiset unless all its co-occurrences miss,
///   and the per-transaction thresholds are independent across
///   transactions.
pub fn expected_cost(db: &TransactionDatabase, config: &SamplingConfig) -> Result<ExpectedCost> {
    config.validate()?;
    let (table, _) = count_all_pairs(db)?;
    let supports = SupportIndex::from_database(db);
    let m = db.num_transactions() as f64;
    let mu = config.mu as f64;
    let mut expected_samples = 0.0;
    let mut expected_distinct = 0.0;
    for (pair, &cij) in table.iter() {
        let ci = supports.support(pair.first) as f64;
        let cj = supports.support(pair.second) as f64;
        let w = (config.measure.weight_real(ci, cj, config.delta, m) * mu).min(1.0);
        expected_samples += cij as f64 * w;
        expected_distinct += 1.0 - (1.0 - w).powf(cij as f64);
    }
    Ok(ExpectedCost {
        expected_samples,
        expected_distinct_pairs: expected_distinct,
    })
}

/// Expected number of reported pairs under the two-condition filter.
///
/// A pair reports iff M ≥ m* where m* = min(⌊threshold⌋+1, ⌈1/f⌉): the
/// count condition `M > threshold` needs the next integer above the
/// threshold, the weight condition `M·f ≥ 1` needs ⌈1/f⌉ samples, and
/// either suffices. M ~ Binomial(c_ij, min(1, f·μ)), so the expectation is
/// the sum of upper tails.
pub fn expected_output_count(
    db: &TransactionDatabase,
    config: &SamplingConfig,
) -> Result<f64> {
    config.validate()?;
    let (table, _) = count_all_pairs(db)?;
    let supports = SupportIndex::from_database(db);
    let m = db.num_transactions() as f64;
    let mu = config.mu as f64;
    let mut expected = 0.0;
    for (pair, &cij) in table.iter() {
        let ci = supports.support(pair.first) as f64;
        let cj = supports.support(pair.second) as f64;
        let f = config.measure.weight_real(ci, cj, config.delta, m);
        let w = (f * mu).min(1.0);
        expected += stats::binomial_upper_tail(cij, w, report_count_needed(config, f));
    }
    Ok(expected)
}

/// Smallest sample count that passes the report filter for a pair with
/// per-sample weight f.
fn report_count_needed(config: &SamplingConfig, f: f64) -> u64 {
    let t = config.report_threshold;
    // strict M > t: the next integer strictly above t
    let by_count = if t.fract() == 0.0 { t + 1.0 } else { t.ceil() };
    // non-strict M·f ≥ 1
    let by_weight = (1.0 / f).ceil();
    let needed = by_count.min(by_weight).max(1.0);
    if needed >= u64::MAX as f64 {
        u64::MAX
    } else {
        needed as u64
    }
}
