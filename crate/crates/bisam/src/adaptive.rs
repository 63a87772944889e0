//! Threshold-free mining: stream sampled pairs in decreasing order of the
//! similarity threshold that would admit them, so the stopping point — a
//! sample budget or a similarity floor — can be chosen while results arrive
//! instead of up front.
//!
//! For a fixed threshold Δ the sampler draws the pair at positions (i, j) of
//! a support-sorted transaction t exactly when f(cᵢ, cⱼ, Δ)·μ > rₜ. Since f
//! is strictly decreasing in the similarity argument, that condition is
//! equivalent to Δ < s*, where s* solves f(cᵢ, cⱼ, s)·μ = rₜ. We call s* the
//! pair occurrence's *trigger* and emit occurrences by descending trigger
//! from a priority queue holding one frontier entry per (transaction,
//! anchor) row. Within a row the trigger can only shrink as the partner
//! moves to higher support, which is the same fact that justifies the fixed-Δ
//! scan's early exit, so a row needs just one live entry at a time and the
//! queue never holds more entries than there are item occurrences.
//!
//! Occurrences that would be sampled at *every* admissible threshold — the
//! transaction drew rₜ = 0, or the solver reports the target weight
//! unreachable, or the solution lies beyond the measure's similarity range —
//! carry no finite trigger. They are emitted ahead of everything else with
//! the range maximum as their trigger and `always` set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::measure::{Measure, ThresholdSolution};
use crate::rng;
use crate::sampler::{
    filter_report, PairKey, ReportedPair, SampleMultiset, SamplingConfig, SupportIndex,
};
use crate::{Error, ItemId, Result, TransactionDatabase};

/// When to stop drawing from the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once this many pair occurrences have been drawn.
    MaxSamples(u64),
    /// Drain exactly the occurrences a fixed-threshold run at this Δ would
    /// sample, i.e. everything with trigger > Δ plus the `always` entries.
    MinDelta(f64),
}

/// One drawn pair occurrence together with the threshold that admits it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AdaptiveSample {
    pub pair: PairKey,
    /// The occurrence is sampled at any threshold strictly below this.
    pub trigger: f64,
    /// Sampled at every threshold in the measure's range; `trigger` holds
    /// the range maximum.
    pub always: bool,
}

/// Result of running the stream to a stop rule and filtering the multiset
/// at the resulting threshold.
#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    /// Every drawn occurrence, in emission order.
    pub drawn: Vec<AdaptiveSample>,
    /// The threshold the drawn multiset corresponds to: the requested floor
    /// for `MinDelta`, the last trigger for `MaxSamples` (range maximum if
    /// nothing was drawn).
    pub stop_delta: f64,
    pub multiset: SampleMultiset,
    pub report: Vec<ReportedPair>,
}

/// One queue entry: the next candidate partner `j` for anchor `i` of
/// transaction `t`.
struct FrontierEntry {
    trigger: f64,
    always: bool,
    t: usize,
    i: usize,
    j: usize,
}

impl FrontierEntry {
    fn position(&self) -> (usize, usize, usize) {
        (self.t, self.i, self.j)
    }
}

// Max-heap priority: trigger first, `always` wins trigger ties (those
// occurrences are admitted even at a threshold equal to the range maximum,
// where a finite trigger of the same value is not), and remaining ties go to
// the lexicographically smallest (t, i, j) for determinism.
impl Ord for FrontierEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.trigger
            .total_cmp(&other.trigger)
            .then_with(|| self.always.cmp(&other.always))
            .then_with(|| other.position().cmp(&self.position()))
    }
}

impl PartialOrd for FrontierEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for FrontierEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for FrontierEntry {}

/// Iterator over pair occurrences in non-increasing trigger order.
///
/// Yields `Result` items because threshold inversion is fallible in
/// general; for the built-in measures every draw succeeds.
pub struct AdaptivePairStream<'a> {
    measure: &'a Measure,
    mu: u64,
    /// Number of transactions, the `m` of the measure formulas.
    m: u64,
    supports: SupportIndex,
    sorted: Vec<Vec<ItemId>>,
    draws: Vec<f64>,
    heap: BinaryHeap<FrontierEntry>,
}

impl<'a> AdaptivePairStream<'a> {
    pub fn new(
        db: &TransactionDatabase,
        measure: &'a Measure,
        mu: u64,
        seed: u64,
    ) -> Result<Self> {
        if mu == 0 {
            return Err(Error::Config("mu must be ≥ 1".into()));
        }
        let supports = SupportIndex::from_database(db);
        let m = supports.num_transactions();
        let sorted: Vec<Vec<ItemId>> = db
            .transactions()
            .iter()
            .map(|txn| supports.sort_by_support(txn))
            .collect();
        let draws: Vec<f64> = (0..sorted.len())
            .map(|t| rng::transaction_draw(seed, t as u64))
            .collect();
        let mut stream = AdaptivePairStream {
            measure,
            mu,
            m,
            supports,
            sorted,
            draws,
            heap: BinaryHeap::new(),
        };
        for t in 0..stream.sorted.len() {
            for i in 0..stream.sorted[t].len().saturating_sub(1) {
                if let Some(head) = stream.entry(t, i, i + 1)? {
                    stream.heap.push(head);
                }
            }
        }
        Ok(stream)
    }

    pub fn supports(&self) -> &SupportIndex {
        &self.supports
    }

    /// Live frontier entries; never exceeds the total number of item
    /// occurrences in the database.
    pub fn queue_len(&self) -> usize {
        self.heap.len()
    }

    fn entry(&self, t: usize, i: usize, j: usize) -> Result<Option<FrontierEntry>> {
        let txn = &self.sorted[t];
        if j >= txn.len() {
            return Ok(None);
        }
        let ci = self.supports.support(txn[i]);
        let cj = self.supports.support(txn[j]);
        let top = self.measure.upper_bound(self.m);
        let r = self.draws[t];
        let (trigger, always) = if r == 0.0 {
            // f·μ > 0 holds at any threshold.
            (top, true)
        } else {
            match self.measure.solve_threshold(ci, cj, r, self.mu, self.m)? {
                ThresholdSolution::AboveRange => (top, true),
                ThresholdSolution::Value(s) if s > top => (top, true),
                ThresholdSolution::Value(s) => (s, false),
            }
        };
        Ok(Some(FrontierEntry {
            trigger,
            always,
            t,
            i,
            j,
        }))
    }
}

impl Iterator for AdaptivePairStream<'_> {
    type Item = Result<AdaptiveSample>;

    fn next(&mut self) -> Option<Self::Item> {
        let head = self.heap.pop()?;
        match self.entry(head.t, head.i, head.j + 1) {
            Ok(Some(successor)) => self.heap.push(successor),
            Ok(None) => {}
            Err(e) => return Some(Err(e)),
        }
        let txn = &self.sorted[head.t];
        // Scan order of a support-sorted transaction is already canonical
        // (lower support first, ties by id).
        Some(Ok(AdaptiveSample {
            pair: PairKey {
                first: txn[head.i],
                second: txn[head.j],
            },
            trigger: head.trigger,
            always: head.always,
        }))
    }
}

/// Drive the stream to the stop rule, then apply the standard report filter
/// to the accumulated multiset at the stop threshold.
pub fn run_adaptive(
    db: &TransactionDatabase,
    measure: &Measure,
    mu: u64,
    seed: u64,
    stop: StopRule,
) -> Result<AdaptiveRun> {
    if let StopRule::MinDelta(delta) = stop {
        // Same admissibility rules as a fixed-threshold run.
        SamplingConfig::new(measure.clone(), delta, mu, seed).validate()?;
    }
    let mut stream = AdaptivePairStream::new(db, measure, mu, seed)?;
    let mut drawn = Vec::new();
    let mut multiset = SampleMultiset::new();
    match stop {
        StopRule::MaxSamples(k) => {
            while (drawn.len() as u64) < k {
                match stream.next() {
                    Some(sample) => {
                        let sample = sample?;
                        multiset.insert(sample.pair);
                        drawn.push(sample);
                    }
                    None => break,
                }
            }
        }
        StopRule::MinDelta(delta) => {
            // The stream is non-increasing with all `always` entries up
            // front, so the first occurrence that fails the admission test
            // ends the drain.
            while let Some(sample) = stream.next() {
                let sample = sample?;
                if !(sample.always || sample.trigger > delta) {
                    break;
                }
                multiset.insert(sample.pair);
                drawn.push(sample);
            }
        }
    }
    let stop_delta = match stop {
        StopRule::MinDelta(delta) => delta,
        StopRule::MaxSamples(_) => drawn
            .last()
            .map(|sample| sample.trigger)
            .unwrap_or_else(|| measure.upper_bound(stream.m)),
    };
    let config = SamplingConfig::new(measure.clone(), stop_delta, mu, seed);
    let report = filter_report(&multiset, stream.supports(), &config);
    Ok(AdaptiveRun {
        drawn,
        stop_delta,
        multiset,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::IndependentModel;
    use crate::sampler::run_bisam;

    fn drain(db: &TransactionDatabase, measure: &Measure, mu: u64, seed: u64) -> Vec<AdaptiveSample> {
        AdaptivePairStream::new(db, measure, mu, seed)
            .unwrap()
            .map(|s| s.unwrap())
            .collect()
    }

    fn random_db(case: u64) -> TransactionDatabase {
        IndependentModel::uniform_random(8, 30, 0.05, 0.8, 9000 + case)
            .unwrap()
            .generate()
    }

    #[test]
    fn min_delta_matches_fixed_threshold_run() {
        let measures = [Measure::Cosine, Measure::Lift, Measure::AllConfidence];
        for case in 0..15u64 {
            let db = random_db(case);
            for (k, measure) in measures.iter().enumerate() {
                let mu = 1 + (case + k as u64) % 20;
                let seed = 5_000 + 31 * case + k as u64;
                let delta = 0.15 + 0.04 * case as f64;
                let run = run_adaptive(&db, measure, mu, seed, StopRule::MinDelta(delta)).unwrap();
                let fixed = run_bisam(
                    &db,
                    &SamplingConfig::new(measure.clone(), delta, mu, seed),
                )
                .unwrap();
                assert_eq!(
                    run.multiset.sorted_entries(),
                    fixed.multiset.sorted_entries(),
                    "multiset mismatch: case {case}, {}, mu {mu}, delta {delta}",
                    measure.name()
                );
                assert_eq!(run.report, fixed.report);
                assert_eq!(run.stop_delta, delta);
            }
        }
    }

    #[test]
    fn lift_equivalence_beyond_unit_threshold() {
        let db = random_db(77);
        for seed in 0..10u64 {
            let run = run_adaptive(&db, &Measure::Lift, 5, seed, StopRule::MinDelta(1.8)).unwrap();
            let fixed = run_bisam(&db, &SamplingConfig::new(Measure::Lift, 1.8, 5, seed)).unwrap();
            assert_eq!(run.multiset.sorted_entries(), fixed.multiset.sorted_entries());
        }
    }

    #[test]
    fn empty_database_yields_empty_stream() {
        let db = TransactionDatabase::from_transactions(vec![]);
        let mut stream = AdaptivePairStream::new(&db, &Measure::Cosine, 10, 3).unwrap();
        assert!(stream.next().is_none());
        let run =
            run_adaptive(&db, &Measure::Cosine, 10, 3, StopRule::MaxSamples(5)).unwrap();
        assert!(run.drawn.is_empty());
        assert!(run.multiset.is_empty());
        assert!(run.report.is_empty());
        assert_eq!(run.stop_delta, 1.0);
    }

    #[test]
    fn zero_budget_reports_nothing() {
        let db = random_db(1);
        let run =
            run_adaptive(&db, &Measure::Cosine, 10, 42, StopRule::MaxSamples(0)).unwrap();
        assert!(run.drawn.is_empty());
        assert!(run.report.is_empty());
    }

    #[test]
    fn first_drawn_occurrence_has_the_global_max_trigger() {
        for seed in 0..20u64 {
            let db = random_db(seed % 7);
            let measure = Measure::Cosine;
            let mu = 8;
            let supports = SupportIndex::from_database(&db);
            let m = supports.num_transactions();
            // Brute force over every (t, i, j), replicating the stream's
            // priority: trigger, then always, then smallest (t, i, j).
            let mut best: Option<(f64, bool, (usize, usize, usize))> = None;
            for (t, txn) in db.transactions().iter().enumerate() {
                let sorted = supports.sort_by_support(txn);
                let r = rng::transaction_draw(seed, t as u64);
                for i in 0..sorted.len() {
                    for j in (i + 1)..sorted.len() {
                        let ci = supports.support(sorted[i]);
                        let cj = supports.support(sorted[j]);
                        let (trigger, always) = if r == 0.0 {
                            (1.0, true)
                        } else {
                            match measure.solve_threshold(ci, cj, r, mu, m).unwrap() {
                                ThresholdSolution::AboveRange => (1.0, true),
                                ThresholdSolution::Value(s) if s > 1.0 => (1.0, true),
                                ThresholdSolution::Value(s) => (s, false),
                            }
                        };
                        let candidate = (trigger, always, (t, i, j));
                        let better = match &best {
                            None => true,
                            Some((bt, ba, bp)) => trigger
                                .total_cmp(bt)
                                .then_with(|| always.cmp(ba))
                                .then_with(|| bp.cmp(&(t, i, j)))
                                .is_gt(),
                        };
                        if better {
                            best = Some(candidate);
                        }
                    }
                }
            }
            let (want_trigger, want_always, _) = best.expect("db has pairs");
            let run =
                run_adaptive(&db, &measure, mu, seed, StopRule::MaxSamples(1)).unwrap();
            assert_eq!(run.drawn.len(), 1);
            assert_eq!(run.drawn[0].trigger, want_trigger, "seed {seed}");
            assert_eq!(run.drawn[0].always, want_always);
        }
    }

    #[test]
    fn triggers_non_increasing_with_always_prefix() {
        for seed in 0..10u64 {
            let db = random_db(3 + seed % 4);
            let drained = drain(&db, &Measure::Jaccard, 6, seed);
            assert!(!drained.is_empty());
            let mut seen_finite = false;
            for pair in drained.windows(2) {
                assert!(
                    pair[0].trigger >= pair[1].trigger,
                    "trigger order violated at seed {seed}"
                );
            }
            for sample in &drained {
                if sample.always {
                    assert!(!seen_finite, "always entry after a finite trigger");
                    assert_eq!(sample.trigger, 1.0);
                } else {
                    seen_finite = true;
                }
            }
        }
    }

    #[test]
    fn budget_run_is_a_prefix_of_the_full_drain() {
        let db = random_db(11);
        let full = drain(&db, &Measure::Cosine, 9, 17);
        let run =
            run_adaptive(&db, &Measure::Cosine, 9, 17, StopRule::MaxSamples(7)).unwrap();
        assert_eq!(run.drawn.len(), 7.min(full.len()));
        assert_eq!(run.drawn[..], full[..run.drawn.len()]);
        assert_eq!(run.stop_delta, run.drawn.last().unwrap().trigger);
    }

    #[test]
    fn queue_never_exceeds_total_occurrences() {
        let db = random_db(5);
        let n = db.total_occurrences() as usize;
        let mut stream = AdaptivePairStream::new(&db, &Measure::Cosine, 12, 99).unwrap();
        assert!(stream.queue_len() <= n);
        let mut emitted = 0u64;
        while let Some(sample) = stream.next() {
            sample.unwrap();
            emitted += 1;
            assert!(stream.queue_len() <= n);
        }
        assert!(emitted > 0);
        assert_eq!(stream.queue_len(), 0);
    }

    #[test]
    fn unreachable_weight_is_emitted_up_front_at_range_max() {
        // Sole transaction {1, 2} with unit supports: the pair's weight under
        // the overlap form (1+s)/(s·(c₁+c₂)) stays above r/μ for every s in
        // range no matter the draw, so the occurrence must surface as an
        // `always` entry — via the AboveRange branch when r ≤ 1/2, via the
        // out-of-range solution branch otherwise.
        let db = TransactionDatabase::from_transactions(vec![vec![1, 2]]);
        for seed in 0..40u64 {
            let drained = drain(&db, &Measure::Jaccard, 1, seed);
            assert_eq!(drained.len(), 1);
            assert!(drained[0].always, "seed {seed}");
            assert_eq!(drained[0].trigger, 1.0);
            // And the fixed-threshold run at the range maximum agrees.
            let run =
                run_adaptive(&db, &Measure::Jaccard, 1, seed, StopRule::MinDelta(1.0)).unwrap();
            let fixed =
                run_bisam(&db, &SamplingConfig::new(Measure::Jaccard, 1.0, 1, seed)).unwrap();
            assert_eq!(run.multiset.sorted_entries(), fixed.multiset.sorted_entries());
        }
    }

    #[test]
    fn min_delta_validation_mirrors_the_sampler() {
        let db = random_db(0);
        assert!(matches!(
            run_adaptive(&db, &Measure::Cosine, 5, 1, StopRule::MinDelta(0.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_adaptive(&db, &Measure::Cosine, 5, 1, StopRule::MinDelta(1.5)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_adaptive(&db, &Measure::Cosine, 0, 1, StopRule::MaxSamples(3)),
            Err(Error::Config(_))
        ));
        // Lift has no unit cap.
        assert!(run_adaptive(&db, &Measure::Lift, 5, 1, StopRule::MinDelta(1.5)).is_ok());
    }
}
