//! Transaction databases: FIMI parsing, statistics, synthetic generation.
//!
//! The input model is a sequence of m transactions T_1, …, T_m over a set of
//! n distinct items, stored in the plain FIMI text layout: one transaction
//! per line, items as whitespace-separated nonnegative integers. Parsing
//! deduplicates and sorts each line, so in memory every transaction is a
//! strictly ascending id list.
//!
//! Synthetic databases come from an independent-items model in which item i
//! appears in each transaction with probability p_i, independently of
//! everything else. Generation is keyed by `(seed, transaction, item)`
//! through the counter RNG, so the same model always yields the same
//! database, on any platform and at any thread count.

use crate::error::{Error, Result};
use crate::rng;
use crate::{Count, ItemId};
use flate2::read::GzDecoder;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Open a FIMI text file as a byte stream, decompressing `.gz`
/// transparently. Shared by the in-memory parser and the streaming
/// external-memory ingest.
pub(crate) fn open_fimi_text(path: &Path) -> Result<Box<dyn Read>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

/// An in-memory transaction database.
///
/// Invariants: each transaction is strictly ascending (distinct items),
/// `distinct_items` counts the ids that actually occur, and
/// `total_occurrences` is N = Σ_t |T_t|.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionDatabase {
    transactions: Vec<Vec<ItemId>>,
    distinct_items: u64,
    total_occurrences: u64,
    max_item: Option<ItemId>,
}

impl TransactionDatabase {
    /// Build from raw transactions, sorting and deduplicating each.
    pub fn from_transactions(mut transactions: Vec<Vec<ItemId>>) -> Self {
        for t in &mut transactions {
            t.sort_unstable();
            t.dedup();
        }
        Self::from_normalized(transactions)
    }

    /// Build from transactions already known to be strictly ascending.
    fn from_normalized(transactions: Vec<Vec<ItemId>>) -> Self {
        let mut seen: HashSet<ItemId> = HashSet::new();
        let mut total = 0u64;
        let mut max_item = None;
        for t in &transactions {
            debug_assert!(t.windows(2).all(|w| w[0] < w[1]));
            total += t.len() as u64;
            for &i in t {
                seen.insert(i);
            }
            if let Some(&last) = t.last() {
                max_item = Some(max_item.map_or(last, |m: ItemId| m.max(last)));
            }
        }
        TransactionDatabase {
            transactions,
            distinct_items: seen.len() as u64,
            total_occurrences: total,
            max_item,
        }
    }

    /// Parse FIMI text: one transaction per line, whitespace-separated
    /// nonnegative integers. Blank lines are skipped, duplicate items
    /// within a line removed.
    pub fn parse_fimi<R: Read>(source: R) -> Result<Self> {
        let reader = BufReader::new(source);
        let mut transactions = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut txn = Vec::new();
            for token in line.split_whitespace() {
                let item: ItemId = token.parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("invalid item `{token}`"),
                })?;
                txn.push(item);
            }
            txn.sort_unstable();
            txn.dedup();
            transactions.push(txn);
        }
        Ok(Self::from_normalized(transactions))
    }

    /// Parse a FIMI file from disk; a `.gz` suffix selects transparent
    /// gzip decompression.
    pub fn parse_fimi_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse_fimi(open_fimi_text(path.as_ref())?)
    }

    /// Serialize to FIMI text. Empty transactions become blank lines, which
    /// a reparse drops — the text format cannot represent them.
    pub fn write_fimi<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut buf = String::new();
        for t in &self.transactions {
            buf.clear();
            for (k, item) in t.iter().enumerate() {
                if k > 0 {
                    buf.push(' ');
                }
                buf.push_str(&item.to_string());
            }
            buf.push('\n');
            out.write_all(buf.as_bytes())?;
        }
        Ok(())
    }

    /// FIMI text as a string.
    pub fn to_fimi_string(&self) -> String {
        let mut out = Vec::new();
        self.write_fimi(&mut out).expect("write to Vec cannot fail");
        String::from_utf8(out).expect("FIMI text is ASCII")
    }

    pub fn transactions(&self) -> &[Vec<ItemId>] {
        &self.transactions
    }

    /// Number of transactions m.
    pub fn num_transactions(&self) -> u64 {
        self.transactions.len() as u64
    }

    /// Number of distinct items n.
    pub fn num_items(&self) -> u64 {
        self.distinct_items
    }

    /// Total item occurrences N = Σ_t |T_t|.
    pub fn total_occurrences(&self) -> u64 {
        self.total_occurrences
    }

    /// Largest item id present, if any.
    pub fn max_item(&self) -> Option<ItemId> {
        self.max_item
    }

    /// Descriptive statistics. Errors on an empty database.
    pub fn stats(&self) -> Result<DatasetStats> {
        let m = self.num_transactions();
        if m == 0 {
            return Err(Error::Domain(
                "statistics undefined for an empty database".into(),
            ));
        }
        let n = self.distinct_items;
        let big_n = self.total_occurrences;
        Ok(DatasetStats {
            distinct_items: n,
            num_transactions: m,
            avg_transaction_size: big_n as f64 / m as f64,
            max_transaction_size: self
                .transactions
                .iter()
                .map(|t| t.len() as u64)
                .max()
                .unwrap_or(0),
            avg_item_support: if n == 0 { 0.0 } else { big_n as f64 / n as f64 },
        })
    }

    /// Remap item ids to the dense range [0, n), preserving id order.
    /// Returns the remapped database and the mapping `dense → original`.
    pub fn densify(&self) -> (TransactionDatabase, Vec<ItemId>) {
        let mut ids: Vec<ItemId> = self
            .transactions
            .iter()
            .flatten()
            .copied()
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        ids.sort_unstable();
        let rank: std::collections::HashMap<ItemId, ItemId> = ids
            .iter()
            .enumerate()
            .map(|(k, &id)| (id, k as ItemId))
            .collect();
        let transactions = self
            .transactions
            .iter()
            .map(|t| t.iter().map(|i| rank[i]).collect())
            .collect();
        (TransactionDatabase::from_normalized(transactions), ids)
    }
}

/// Descriptive figures for a database.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub distinct_items: u64,
    pub num_transactions: u64,
    pub avg_transaction_size: f64,
    pub max_transaction_size: u64,
    /// σ = N/n, the mean support over occurring items.
    pub avg_item_support: f64,
}

/// Independent-items model: item i is in each transaction with
/// probability `probabilities[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentModel {
    pub n: u64,
    pub m: u64,
    pub probabilities: Vec<f64>,
    pub seed: u64,
}

impl IndependentModel {
    /// Model with explicit per-item probabilities.
    pub fn new(m: u64, probabilities: Vec<f64>, seed: u64) -> Result<Self> {
        for (i, &p) in probabilities.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!(
                    "item probability p[{i}] = {p} outside [0, 1]"
                )));
            }
        }
        Ok(IndependentModel {
            n: probabilities.len() as u64,
            m,
            probabilities,
            seed,
        })
    }

    /// Model with the same probability for every item.
    pub fn uniform(n: u64, m: u64, p: f64, seed: u64) -> Result<Self> {
        Self::new(m, vec![p; n as usize], seed)
    }

    /// Model with probabilities drawn uniformly from [lo, hi], keyed by
    /// the seed so the same arguments always build the same model.
    pub fn uniform_random(n: u64, m: u64, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!(
                "probability range [{lo}, {hi}] invalid"
            )));
        }
        let probabilities = (0..n)
            .map(|i| lo + (hi - lo) * rng::probability_draw(seed, i))
            .collect();
        Self::new(m, probabilities, seed)
    }

    /// Generate the database. Transaction t contains item i iff the
    /// Bernoulli draw keyed by `(seed, t, i)` succeeds; empty transactions
    /// are retained (they contribute no pairs but count toward m).
    pub fn generate(&self) -> TransactionDatabase {
        let transactions: Vec<Vec<ItemId>> = (0..self.m)
            .into_par_iter()
            .map(|t| {
                let mut txn = Vec::new();
                for (i, &p) in self.probabilities.iter().enumerate() {
                    if rng::generator_draw(self.seed, t, i as u64) < p {
                        txn.push(i as ItemId);
                    }
                }
                txn
            })
            .collect();
        TransactionDatabase::from_normalized(transactions)
    }

    /// Expected support of item i: `m · p_i`.
    pub fn expected_support(&self, i: ItemId) -> f64 {
        self.m as f64 * self.probabilities[i as usize]
    }

    /// Expected co-occurrence count of a pair: `m · p_i · p_j`.
    pub fn expected_cooccurrence(&self, i: ItemId, j: ItemId) -> f64 {
        self.m as f64 * self.probabilities[i as usize] * self.probabilities[j as usize]
    }
}

/// Per-item supports c(i), indexable by id.
///
/// Uses a dense array when ids are reasonably packed (the common FIMI
/// case), falling back to a hash map for sparse universes.
#[derive(Debug, Clone)]
pub(crate) enum SupportCounts {
    Dense(Vec<Count>),
    Sparse(std::collections::HashMap<ItemId, Count>),
}

impl SupportCounts {
    pub fn count(db: &TransactionDatabase) -> Self {
        let dense_ok = match db.max_item() {
            None => true,
            Some(max) => max < 1024.max(db.num_items().saturating_mul(64)),
        };
        if dense_ok {
            let len = db.max_item().map_or(0, |m| m as usize + 1);
            let mut v = vec![0u64; len];
            for t in db.transactions() {
                for &i in t {
                    v[i as usize] += 1;
                }
            }
            SupportCounts::Dense(v)
        } else {
            let mut map = std::collections::HashMap::new();
            for t in db.transactions() {
                for &i in t {
                    *map.entry(i).or_insert(0u64) += 1;
                }
            }
            SupportCounts::Sparse(map)
        }
    }

    #[inline]
    pub fn get(&self, item: ItemId) -> Count {
        match self {
            SupportCounts::Dense(v) => v.get(item as usize).copied().unwrap_or(0),
            SupportCounts::Sparse(m) => m.get(&item).copied().unwrap_or(0),
        }
    }
}
