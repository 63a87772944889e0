//! Biased pair sampling for similarity mining over transaction databases.
//!
//! Given a database of transactions (sets of items) and a similarity
//! threshold Δ, the sampler reports every item pair whose similarity under a
//! chosen measure (cosine, jaccard, lift, ...) is at least Δ, with a
//! controllable false-negative probability — without counting all pairs.
//! Each co-occurrence of a pair is sampled with probability proportional to
//! the pair's best-case similarity contribution, so time and space scale
//! with the number of *similar* pairs rather than the number of co-occurring
//! pairs.
//!
//! The crate also ships the exact-counting oracle used for ground truth and
//! cost comparisons ([`exact`]), closed-form error-probability calculators
//! ([`stats`]), an adaptive variant that streams pairs in decreasing order
//! of the threshold that would sample them ([`adaptive`]), and an
//! external-memory pipeline that runs the same computation under an explicit
//! memory budget with counted page I/O ([`extsort`]).
//!
//! ```
//! use bisam::{Measure, SamplingConfig, TransactionDatabase, run_bisam};
//!
//! let db = TransactionDatabase::parse_fimi("1 2 3\n1 2\n2 3\n".as_bytes())?;
//! let config = SamplingConfig::new(Measure::Cosine, 0.5, 10, 42);
//! let run = run_bisam(&db, &config)?;
//! for pair in &run.report {
//!     println!("{} {} samples={}", pair.pair.first, pair.pair.second, pair.samples);
//! }
//! # Ok::<(), bisam::Error>(())
//! ```
//!
//! All randomness is derived from counter-based hashing of `(seed,
//! transaction index)`, so every run is bit-reproducible for a fixed seed,
//! across platforms and regardless of thread count.

pub mod adaptive;
pub mod cost;
pub mod dataset;
mod error;
pub mod exact;
pub mod measure;
pub mod rng;
pub mod sampler;
pub mod stats;

pub mod extsort;

pub use adaptive::{run_adaptive, AdaptiveRun, AdaptiveSample, StopRule};
pub use dataset::{DatasetStats, IndependentModel, TransactionDatabase};
pub use error::{Error, Result};
pub use extsort::{run_io_bisam, IoConfig, IoCostReport};
pub use measure::{Combinator, Measure, ThresholdSolution};
pub use sampler::{
    run_bisam, MiningRun, PairKey, ReportedPair, SampleMultiset, SamplingConfig, SupportIndex,
};

/// Item identifier. FIMI files use arbitrary nonnegative integers.
pub type ItemId = u64;

/// Occurrence count (supports, co-occurrence counts, sample counts).
pub type Count = u64;
