//! External-memory mining under an explicit budget: M records of working
//! memory, pages of B records, every logical page transfer counted.
//!
//! The pipeline runs the same sampling procedure as [`crate::run_bisam`]
//! but never materializes the database, so it works at input sizes where
//! only a bounded number of records fits in memory:
//!
//! 1. stream the text input into ⟨item, tid⟩ records, sorted by item;
//! 2. scan that file once to derive the ⟨item, support⟩ side table
//!    (which must fit in the budget);
//! 3. re-scan, annotating each record with its item's support, and sort
//!    the ⟨tid, support, item⟩ records by transaction — putting every
//!    transaction's items in support order, the order the sampler scans;
//! 4. walk the transactions, draw r_t from `(seed, tid)`, and run the
//!    early-exit sampling loop, spilling ⟨first, second, c_first,
//!    c_second⟩ pair records;
//! 5. sort the pair records, aggregate equal pairs into sample counts,
//!    and apply the standard report filter.
//!
//! Sorting is run formation (fill the budget, sort, spill a run) followed
//! by k-way merging with fan-in ⌊M/B⌋ − 1. Page counts are logical: a file
//! of r records costs ⌈r/B⌉ page transfers per full scan, and a partial
//! trailing page counts as one. Total transfers stay within
//! [`IO_BOUND_CONSTANT`]·((⌈N/B⌉ + ⌈N′/B⌉ + 1)·(1 + merge passes)), the
//! shape of the classical external-sorting bound.
//!
//! Scratch files are fixed-width binary, little-endian 64-bit fields,
//! named by stage; they are deleted on success and left behind on failure
//! to aid debugging.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::dataset::open_fimi_text;
use crate::rng;
use crate::sampler::{report_entry, PairKey, ReportedPair, SamplingConfig};
use crate::{Error, Result};

/// Multiplier in the asserted page-transfer bound.
pub const IO_BOUND_CONSTANT: u64 = 8;

/// A record that can live in a scratch file: fixed width, ordered by its
/// field sequence (fields are declared in sort-key order).
pub trait SortRecord: Copy + Ord {
    /// Encoded size in bytes.
    const WIDTH: usize;
    /// Write the record into `buf`, which has length `WIDTH`.
    fn encode(&self, buf: &mut [u8]);
    /// Read a record back from `buf`.
    fn decode(buf: &[u8]) -> Self;
}

fn put(buf: &mut [u8], at: usize, v: u64) {
    buf[at..at + 8].copy_from_slice(&v.to_le_bytes());
}

fn get(buf: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(buf[at..at + 8].try_into().unwrap())
}

/// Stage 1 record: one item occurrence, keyed by (item, tid).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ItemTid {
    pub item: u64,
    pub tid: u64,
}

impl SortRecord for ItemTid {
    const WIDTH: usize = 16;
    fn encode(&self, buf: &mut [u8]) {
        put(buf, 0, self.item);
        put(buf, 8, self.tid);
    }
    fn decode(buf: &[u8]) -> Self {
        ItemTid {
            item: get(buf, 0),
            tid: get(buf, 8),
        }
    }
}

/// Stage 2 record: the support side table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ItemSupport {
    pub item: u64,
    pub support: u64,
}

impl SortRecord for ItemSupport {
    const WIDTH: usize = 16;
    fn encode(&self, buf: &mut [u8]) {
        put(buf, 0, self.item);
        put(buf, 8, self.support);
    }
    fn decode(buf: &[u8]) -> Self {
        ItemSupport {
            item: get(buf, 0),
            support: get(buf, 8),
        }
    }
}

/// Stage 3 record: an annotated occurrence, keyed by (tid, support, item)
/// so a transaction's items stream out in the sampler's scan order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SupportedItem {
    pub tid: u64,
    pub support: u64,
    pub item: u64,
}

impl SortRecord for SupportedItem {
    const WIDTH: usize = 24;
    fn encode(&self, buf: &mut [u8]) {
        put(buf, 0, self.tid);
        put(buf, 8, self.support);
        put(buf, 16, self.item);
    }
    fn decode(buf: &[u8]) -> Self {
        SupportedItem {
            tid: get(buf, 0),
            support: get(buf, 8),
            item: get(buf, 16),
        }
    }
}

/// Stage 4 record: one sampled pair occurrence with the supports needed by
/// the final filter, keyed by the canonical pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairSample {
    pub first: u64,
    pub second: u64,
    pub support_first: u64,
    pub support_second: u64,
}

impl SortRecord for PairSample {
    const WIDTH: usize = 32;
    fn encode(&self, buf: &mut [u8]) {
        put(buf, 0, self.first);
        put(buf, 8, self.second);
        put(buf, 16, self.support_first);
        put(buf, 24, self.support_second);
    }
    fn decode(buf: &[u8]) -> Self {
        PairSample {
            first: get(buf, 0),
            second: get(buf, 8),
            support_first: get(buf, 16),
            support_second: get(buf, 24),
        }
    }
}

/// Budget and scratch parameters for external execution.
#[derive(Debug, Clone)]
pub struct IoConfig {
    /// M: records of working memory.
    pub memory_budget: u64,
    /// B: records per page.
    pub page_size: u64,
    pub scratch_dir: PathBuf,
    pub sampling: SamplingConfig,
}

impl IoConfig {
    pub fn new<P: Into<PathBuf>>(
        memory_budget: u64,
        page_size: u64,
        scratch_dir: P,
        sampling: SamplingConfig,
    ) -> Self {
        IoConfig {
            memory_budget,
            page_size,
            scratch_dir: scratch_dir.into(),
            sampling,
        }
    }

    /// Check only the budget shape (enough for run formation plus a
    /// two-way merge with an output page).
    pub fn validate_budget(&self) -> Result<()> {
        if self.page_size == 0 {
            return Err(Error::Config("page size B must be ≥ 1 record".into()));
        }
        if self.memory_budget < 3 * self.page_size {
            return Err(Error::Config(format!(
                "memory budget M = {} records is below 3B = {} (need an output page plus two merge inputs)",
                self.memory_budget,
                3 * self.page_size
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_budget()?;
        self.sampling.validate()
    }

    /// Merge fan-in: one page per input run plus one output page within M.
    fn fan_in(&self) -> usize {
        ((self.memory_budget / self.page_size).saturating_sub(1)).max(2) as usize
    }
}

/// Per-sort breakdown inside an [`IoCostReport`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct SortStats {
    pub stage: String,
    pub records: u64,
    pub initial_runs: u64,
    pub merge_passes: u64,
}

/// Logical I/O accounting for one external operation.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct IoCostReport {
    pub pages_read: u64,
    pub pages_written: u64,
    /// N: item-occurrence records (each flows through the item sort and
    /// the transaction sort).
    pub input_records: u64,
    /// N′: sampled pair records.
    pub pair_records: u64,
    pub sorts: Vec<SortStats>,
}

#[derive(Debug, Default)]
struct IoCounter {
    pages_read: u64,
    pages_written: u64,
}

type Counter = Rc<RefCell<IoCounter>>;

/// Scratch-file namer and janitor. Everything it creates is tracked;
/// `cleanup` removes whatever is still live (called only on success, so
/// failures leave their files for inspection).
struct Scratch {
    dir: PathBuf,
    prefix: String,
    seq: u64,
    live: Vec<PathBuf>,
}

static RUN_NONCE: AtomicU64 = AtomicU64::new(0);

impl Scratch {
    fn new(dir: &Path) -> Self {
        let nonce = RUN_NONCE.fetch_add(1, Ordering::Relaxed);
        Scratch {
            dir: dir.to_path_buf(),
            prefix: format!("iobisam-{}-{}", std::process::id(), nonce),
            seq: 0,
            live: Vec::new(),
        }
    }

    fn path(&mut self, tag: &str) -> PathBuf {
        let p = self.dir.join(format!("{}-{}-{:04}.bin", self.prefix, tag, self.seq));
        self.seq += 1;
        self.live.push(p.clone());
        p
    }

    fn remove(&mut self, path: &Path) -> Result<()> {
        std::fs::remove_file(path).map_err(|e| Error::io(path, e))?;
        self.live.retain(|p| p != path);
        Ok(())
    }

    fn forget(&mut self, path: &Path) {
        self.live.retain(|p| p != path);
    }

    fn cleanup(self) -> Result<()> {
        for p in self.live {
            match std::fs::remove_file(&p) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(Error::io(&p, e)),
            }
        }
        Ok(())
    }
}

struct RecordWriter<R: SortRecord> {
    out: BufWriter<File>,
    path: PathBuf,
    records: u64,
    buf: Vec<u8>,
    _record: PhantomData<R>,
}

impl<R: SortRecord> RecordWriter<R> {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(RecordWriter {
            out: BufWriter::new(file),
            path,
            records: 0,
            buf: vec![0u8; R::WIDTH],
            _record: PhantomData,
        })
    }

    fn push(&mut self, rec: &R) -> Result<()> {
        rec.encode(&mut self.buf);
        self.out
            .write_all(&self.buf)
            .map_err(|e| Error::io(&self.path, e))?;
        self.records += 1;
        Ok(())
    }

    /// Flush and account ⌈records/B⌉ written pages.
    fn finish(mut self, page: u64, counter: &Counter) -> Result<PathBuf> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        counter.borrow_mut().pages_written += self.records.div_ceil(page);
        Ok(self.path)
    }
}

struct RecordReader<R: SortRecord> {
    input: BufReader<File>,
    path: PathBuf,
    page: u64,
    counter: Counter,
    records_read: u64,
    accounted: bool,
    buf: Vec<u8>,
    _record: PhantomData<R>,
}

impl<R: SortRecord> RecordReader<R> {
    fn open(path: &Path, page: u64, counter: Counter) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(RecordReader {
            input: BufReader::new(file),
            path: path.to_path_buf(),
            page,
            counter,
            records_read: 0,
            accounted: false,
            buf: vec![0u8; R::WIDTH],
            _record: PhantomData,
        })
    }

    /// Next record, or `None` at a clean end of file (at which point the
    /// scan's ⌈records/B⌉ read pages are charged).
    fn next(&mut self) -> Result<Option<R>> {
        let mut filled = 0;
        while filled < R::WIDTH {
            let n = self
                .input
                .read(&mut self.buf[filled..])
                .map_err(|e| Error::io(&self.path, e))?;
            if n == 0 {
                break;
            }
            filled += n;
        }
        if filled == 0 {
            if !self.accounted {
                self.counter.borrow_mut().pages_read += self.records_read.div_ceil(self.page);
                self.accounted = true;
            }
            return Ok(None);
        }
        if filled < R::WIDTH {
            return Err(Error::io(
                &self.path,
                std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated record"),
            ));
        }
        self.records_read += 1;
        Ok(Some(R::decode(&self.buf)))
    }
}

/// Run formation: buffer up to M records, sort, spill as a sorted run.
struct RunFormer<R: SortRecord> {
    tag: String,
    budget: usize,
    page: u64,
    counter: Counter,
    buf: Vec<R>,
    runs: Vec<PathBuf>,
}

impl<R: SortRecord> RunFormer<R> {
    fn new(tag: &str, io: &IoConfig, counter: Counter) -> Self {
        RunFormer {
            tag: tag.to_string(),
            budget: io.memory_budget as usize,
            page: io.page_size,
            counter,
            buf: Vec::new(),
            runs: Vec::new(),
        }
    }

    fn push(&mut self, rec: R, scratch: &mut Scratch) -> Result<()> {
        self.buf.push(rec);
        if self.buf.len() >= self.budget {
            self.spill(scratch)?;
        }
        Ok(())
    }

    fn spill(&mut self, scratch: &mut Scratch) -> Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        self.buf.sort_unstable();
        let mut w = RecordWriter::create(scratch.path(&format!("{}-run", self.tag)))?;
        for rec in &self.buf {
            w.push(rec)?;
        }
        self.runs.push(w.finish(self.page, &self.counter)?);
        self.buf.clear();
        Ok(())
    }

    fn finish(mut self, scratch: &mut Scratch) -> Result<Vec<PathBuf>> {
        self.spill(scratch)?;
        Ok(self.runs)
    }
}

/// Merge sorted runs down to one file; returns it with the number of
/// merge passes taken. Equal records are drained from earlier runs first,
/// so the overall sort is stable in run-formation order.
fn merge_runs<R: SortRecord>(
    mut runs: Vec<PathBuf>,
    tag: &str,
    io: &IoConfig,
    scratch: &mut Scratch,
    counter: &Counter,
) -> Result<(PathBuf, u64)> {
    if runs.is_empty() {
        let w = RecordWriter::<R>::create(scratch.path(&format!("{tag}-empty")))?;
        return Ok((w.finish(io.page_size, counter)?, 0));
    }
    let fan = io.fan_in();
    let mut passes = 0u64;
    while runs.len() > 1 {
        passes += 1;
        let generation = std::mem::take(&mut runs);
        for group in generation.chunks(fan) {
            runs.push(merge_group::<R>(group, tag, io, scratch, counter)?);
        }
    }
    Ok((runs.pop().unwrap(), passes))
}

fn merge_group<R: SortRecord>(
    group: &[PathBuf],
    tag: &str,
    io: &IoConfig,
    scratch: &mut Scratch,
    counter: &Counter,
) -> Result<PathBuf> {
    if group.len() == 1 {
        // Odd tail of a pass: carried forward untouched, no transfer.
        return Ok(group[0].clone());
    }
    let mut readers: Vec<RecordReader<R>> = group
        .iter()
        .map(|r| RecordReader::open(r, io.page_size, counter.clone()))
        .collect::<Result<_>>()?;
    let mut heap: BinaryHeap<Reverse<(R, usize)>> = BinaryHeap::new();
    for (k, reader) in readers.iter_mut().enumerate() {
        if let Some(rec) = reader.next()? {
            heap.push(Reverse((rec, k)));
        }
    }
    let mut out = RecordWriter::create(scratch.path(&format!("{tag}-merge")))?;
    while let Some(Reverse((rec, k))) = heap.pop() {
        out.push(&rec)?;
        if let Some(next) = readers[k].next()? {
            heap.push(Reverse((next, k)));
        }
    }
    let merged = out.finish(io.page_size, counter)?;
    for consumed in group {
        scratch.remove(consumed)?;
    }
    Ok(merged)
}

fn move_file(src: &Path, dst: &Path) -> Result<()> {
    if std::fs::rename(src, dst).is_ok() {
        return Ok(());
    }
    std::fs::copy(src, dst).map_err(|e| Error::io(dst, e))?;
    std::fs::remove_file(src).map_err(|e| Error::io(src, e))?;
    Ok(())
}

/// Externally sort a record file under the budget, counting page
/// transfers. The input is read once for run formation; each merge pass
/// reads and writes every record, and the pass count is at most
/// 1 + ⌈log_fan(runs)⌉ with fan = ⌊M/B⌋ − 1.
pub fn external_sort<R: SortRecord>(
    input: &Path,
    output: &Path,
    io: &IoConfig,
    stage: &str,
) -> Result<IoCostReport> {
    io.validate_budget()?;
    std::fs::create_dir_all(&io.scratch_dir).map_err(|e| Error::io(&io.scratch_dir, e))?;
    let counter: Counter = Counter::default();
    let mut scratch = Scratch::new(&io.scratch_dir);
    let mut reader = RecordReader::<R>::open(input, io.page_size, counter.clone())?;
    let mut former = RunFormer::new(stage, io, counter.clone());
    let mut records = 0u64;
    while let Some(rec) = reader.next()? {
        former.push(rec, &mut scratch)?;
        records += 1;
    }
    let runs = former.finish(&mut scratch)?;
    let initial_runs = runs.len() as u64;
    let (sorted, merge_passes) = merge_runs::<R>(runs, stage, io, &mut scratch, &counter)?;
    scratch.forget(&sorted);
    move_file(&sorted, output)?;
    scratch.cleanup()?;
    let c = counter.borrow();
    Ok(IoCostReport {
        pages_read: c.pages_read,
        pages_written: c.pages_written,
        input_records: records,
        pair_records: 0,
        sorts: vec![SortStats {
            stage: stage.to_string(),
            records,
            initial_runs,
            merge_passes,
        }],
    })
}

/// The asserted page-transfer ceiling for a pipeline over N input records
/// and N′ pair records.
pub fn io_bound(input_records: u64, pair_records: u64, io: &IoConfig) -> u64 {
    let x = input_records.div_ceil(io.page_size);
    let y = pair_records.div_ceil(io.page_size);
    let fan = io.fan_in() as u64;
    let capacity_runs = (input_records + pair_records).div_ceil(io.memory_budget).max(1);
    let mut passes = 0u64;
    let mut reach = 1u64;
    while reach < capacity_runs {
        reach = reach.saturating_mul(fan);
        passes += 1;
    }
    IO_BOUND_CONSTANT * (x + y + 1) * (1 + passes)
}

/// Mine a FIMI file under the budget. The reported pairs are identical to
/// an in-memory [`crate::run_bisam`] over the same data with the same
/// `SamplingConfig`, ordered by canonical pair key.
pub fn run_io_bisam(input: &Path, io: &IoConfig) -> Result<(Vec<ReportedPair>, IoCostReport)> {
    io.validate()?;
    std::fs::create_dir_all(&io.scratch_dir).map_err(|e| Error::io(&io.scratch_dir, e))?;
    let counter: Counter = Counter::default();
    let mut scratch = Scratch::new(&io.scratch_dir);
    let (report, cost) = pipeline(input, io, &counter, &mut scratch)?;
    // Success: scratch files go away. A failure above has already
    // returned, leaving them in place.
    scratch.cleanup()?;
    debug_assert!(
        cost.pages_read + cost.pages_written <= io_bound(cost.input_records, cost.pair_records, io),
        "page transfers exceed the sorting-shaped bound"
    );
    Ok((report, cost))
}

fn pipeline(
    input: &Path,
    io: &IoConfig,
    counter: &Counter,
    scratch: &mut Scratch,
) -> Result<(Vec<ReportedPair>, IoCostReport)> {
    // Stage 1: stream the text into ⟨item, tid⟩ records sorted by item.
    // Transaction ids count non-blank lines, matching the in-memory
    // parser's transaction indices; lines are deduplicated the same way.
    let text = BufReader::new(open_fimi_text(input)?);
    let mut former = RunFormer::<ItemTid>::new("items", io, counter.clone());
    let mut tid = 0u64;
    let mut input_records = 0u64;
    for (idx, line) in text.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut items: Vec<u64> = Vec::new();
        for token in line.split_whitespace() {
            let item = token.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("invalid item `{token}`"),
            })?;
            items.push(item);
        }
        items.sort_unstable();
        items.dedup();
        for &item in &items {
            former.push(ItemTid { item, tid }, scratch)?;
            input_records += 1;
        }
        tid += 1;
    }
    let m = tid;
    let runs = former.finish(scratch)?;
    let item_runs = runs.len() as u64;
    let (by_item, item_passes) = merge_runs::<ItemTid>(runs, "items", io, scratch, counter)?;

    // Stage 2: one scan of the item-sorted file yields each item's
    // support. The side table must fit in the budget.
    let mut side = RecordWriter::<ItemSupport>::create(scratch.path("supports"))?;
    {
        let mut reader = RecordReader::<ItemTid>::open(&by_item, io.page_size, counter.clone())?;
        let mut current: Option<(u64, u64)> = None;
        let mut distinct = 0u64;
        loop {
            let rec = reader.next()?;
            match (&mut current, rec) {
                (Some((item, count)), Some(r)) if *item == r.item => *count += 1,
                (slot, r) => {
                    if let Some((item, count)) = slot.take() {
                        distinct += 1;
                        if distinct > io.memory_budget {
                            return Err(Error::Resource(format!(
                                "support table needs more than {} records, exceeding the memory budget of {} records",
                                distinct - 1,
                                io.memory_budget
                            )));
                        }
                        side.push(&ItemSupport { item, support: count })?;
                    }
                    match r {
                        Some(r) => *slot = Some((r.item, 1)),
                        None => break,
                    }
                }
            }
        }
    }
    let side = side.finish(io.page_size, counter)?;

    // Stage 3: load the side table, re-scan the item-sorted file
    // annotating supports during run formation, and sort by
    // (tid, support, item).
    let mut supports: HashMap<u64, u64> = HashMap::new();
    {
        let mut reader =
            RecordReader::<ItemSupport>::open(&side, io.page_size, counter.clone())?;
        while let Some(rec) = reader.next()? {
            supports.insert(rec.item, rec.support);
        }
    }
    let mut former = RunFormer::<SupportedItem>::new("transactions", io, counter.clone());
    {
        let mut reader = RecordReader::<ItemTid>::open(&by_item, io.page_size, counter.clone())?;
        while let Some(rec) = reader.next()? {
            let support = supports[&rec.item];
            former.push(
                SupportedItem {
                    tid: rec.tid,
                    support,
                    item: rec.item,
                },
                scratch,
            )?;
        }
    }
    drop(supports);
    let runs = former.finish(scratch)?;
    let txn_runs = runs.len() as u64;
    let (by_tid, txn_passes) = merge_runs::<SupportedItem>(runs, "transactions", io, scratch, counter)?;
    scratch.remove(&by_item)?;
    scratch.remove(&side)?;

    // Stage 4: walk transactions (already in scan order) and sample.
    let mut former = RunFormer::<PairSample>::new("pairs", io, counter.clone());
    let mut pair_records = 0u64;
    {
        let mut reader =
            RecordReader::<SupportedItem>::open(&by_tid, io.page_size, counter.clone())?;
        let mut group: Vec<SupportedItem> = Vec::new();
        loop {
            let rec = reader.next()?;
            let boundary = match (&rec, group.last()) {
                (Some(r), Some(last)) => r.tid != last.tid,
                _ => true,
            };
            if boundary && !group.is_empty() {
                pair_records +=
                    sample_group(&group, m, io, &mut former, scratch)?;
                group.clear();
            }
            match rec {
                Some(r) => {
                    group.push(r);
                    if group.len() as u64 > io.memory_budget {
                        return Err(Error::Resource(format!(
                            "transaction {} holds more than {} items, exceeding the memory budget; the pipeline assumes any single transaction fits in memory",
                            r.tid, io.memory_budget
                        )));
                    }
                }
                None => break,
            }
        }
    }
    let runs = former.finish(scratch)?;
    let pair_runs = runs.len() as u64;
    let (by_pair, pair_passes) = merge_runs::<PairSample>(runs, "pairs", io, scratch, counter)?;
    scratch.remove(&by_tid)?;

    // Stage 5: aggregate equal pairs and filter.
    let mut report = Vec::new();
    {
        let mut reader =
            RecordReader::<PairSample>::open(&by_pair, io.page_size, counter.clone())?;
        let mut current: Option<(PairSample, u64)> = None;
        loop {
            let rec = reader.next()?;
            match (&mut current, rec) {
                (Some((head, count)), Some(r))
                    if head.first == r.first && head.second == r.second =>
                {
                    *count += 1
                }
                (slot, r) => {
                    if let Some((head, count)) = slot.take() {
                        let key = PairKey {
                            first: head.first,
                            second: head.second,
                        };
                        if let Some(entry) = report_entry(
                            key,
                            count,
                            head.support_first,
                            head.support_second,
                            m,
                            &io.sampling,
                        ) {
                            report.push(entry);
                        }
                    }
                    match r {
                        Some(r) => *slot = Some((r, 1)),
                        None => break,
                    }
                }
            }
        }
    }

    let c = counter.borrow();
    let cost = IoCostReport {
        pages_read: c.pages_read,
        pages_written: c.pages_written,
        input_records,
        pair_records,
        sorts: vec![
            SortStats {
                stage: "item_sort".into(),
                records: input_records,
                initial_runs: item_runs,
                merge_passes: item_passes,
            },
            SortStats {
                stage: "transaction_sort".into(),
                records: input_records,
                initial_runs: txn_runs,
                merge_passes: txn_passes,
            },
            SortStats {
                stage: "pair_sort".into(),
                records: pair_records,
                initial_runs: pair_runs,
                merge_passes: pair_passes,
            },
        ],
    };
    Ok((report, cost))
}

/// The early-exit sampling loop over one support-ordered transaction.
fn sample_group(
    group: &[SupportedItem],
    m: u64,
    io: &IoConfig,
    former: &mut RunFormer<PairSample>,
    scratch: &mut Scratch,
) -> Result<u64> {
    let config = &io.sampling;
    let r = rng::transaction_draw(config.seed, group[0].tid);
    let mu = config.mu as f64;
    let mut emitted = 0u64;
    for i in 0..group.len() {
        let ci = group[i].support;
        for j in (i + 1)..group.len() {
            let cj = group[j].support;
            let w = config
                .measure
                .weight_real(ci as f64, cj as f64, config.delta, m as f64)
                * mu;
            if w > r {
                former.push(
                    PairSample {
                        first: group[i].item,
                        second: group[j].item,
                        support_first: ci,
                        support_second: cj,
                    },
                    scratch,
                )?;
                emitted += 1;
            } else {
                break;
            }
        }
    }
    Ok(emitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::IndependentModel;
    use crate::measure::Measure;
    use crate::sampler::run_bisam;
    use crate::TransactionDatabase;
    use tempfile::TempDir;

    fn write_records<R: SortRecord>(path: &Path, records: &[R]) {
        let mut w = RecordWriter::<R>::create(path.to_path_buf()).unwrap();
        for r in records {
            w.push(r).unwrap();
        }
        // Account against a dummy counter; tests measure the sort itself.
        w.finish(1, &Counter::default()).unwrap();
    }

    fn read_records<R: SortRecord>(path: &Path) -> Vec<R> {
        let mut reader = RecordReader::<R>::open(path, 1, Counter::default()).unwrap();
        let mut out = Vec::new();
        while let Some(r) = reader.next().unwrap() {
            out.push(r);
        }
        out
    }

    fn sampling() -> SamplingConfig {
        SamplingConfig::new(Measure::Cosine, 0.5, 10, 42)
    }

    #[test]
    fn record_codecs_roundtrip() {
        let mut buf = [0u8; 32];
        for v in [0u64, 1, 257, u64::MAX] {
            let rec = PairSample {
                first: v,
                second: v.wrapping_add(1),
                support_first: v ^ 0xFF,
                support_second: 3,
            };
            rec.encode(&mut buf);
            assert_eq!(PairSample::decode(&buf), rec);
            let it = ItemTid { item: v, tid: 9 };
            it.encode(&mut buf[..16]);
            assert_eq!(ItemTid::decode(&buf[..16]), it);
            let si = SupportedItem {
                tid: v,
                support: 2,
                item: 7,
            };
            si.encode(&mut buf[..24]);
            assert_eq!(SupportedItem::decode(&buf[..24]), si);
        }
    }

    #[test]
    fn in_budget_sort_is_one_pass() {
        let dir = TempDir::new().unwrap();
        let input = dir.path().join("in.bin");
        let output = dir.path().join("out.bin");
        let records: Vec<ItemTid> = (0..50u64)
            .map(|k| ItemTid {
                item: 49 - k,
                tid: k,
            })
            .collect();
        write_records(&input, &records);
        let io = IoConfig::new(100, 10, dir.path(), sampling());
        let cost = external_sort::<ItemTid>(&input, &output, &io, "test").unwrap();
        assert_eq!(cost.pages_read, 5);
        assert_eq!(cost.pages_written, 5);
        assert_eq!(cost.sorts[0].initial_runs, 1);
        assert_eq!(cost.sorts[0].merge_passes, 0);
        let mut expected = records.clone();
        expected.sort_unstable();
        assert_eq!(read_records::<ItemTid>(&output), expected);
    }

    #[test]
    fn thousand_record_sort_takes_one_merge_pass() {
        // N = 1000, B = 100, M = 400: run formation spills runs of
        // 400/400/200 (10 pages read and written), and fan-in 3 finishes
        // in a single merge pass (10 more read, 10 more written).
        let dir = TempDir::new().unwrap();
        let input = dir.path().join("in.bin");
        let output = dir.path().join("out.bin");
        let records: Vec<ItemTid> = (0..1000u64)
            .map(|k| ItemTid {
                item: 999 - k,
                tid: k,
            })
            .collect();
        write_records(&input, &records);
        let io = IoConfig::new(400, 100, dir.path(), sampling());
        let cost = external_sort::<ItemTid>(&input, &output, &io, "test").unwrap();
        assert_eq!(cost.sorts[0].initial_runs, 3);
        assert_eq!(cost.sorts[0].merge_passes, 1);
        assert_eq!(cost.pages_read, 20);
        assert_eq!(cost.pages_written, 20);
        let mut expected = records.clone();
        expected.sort_unstable();
        assert_eq!(read_records::<ItemTid>(&output), expected);
    }

    #[test]
    fn sort_is_oblivious_to_presortedness() {
        let dir = TempDir::new().unwrap();
        let sorted_in = dir.path().join("sorted.bin");
        let reversed_in = dir.path().join("reversed.bin");
        let out_a = dir.path().join("a.bin");
        let out_b = dir.path().join("b.bin");
        let forward: Vec<ItemTid> = (0..1000u64).map(|k| ItemTid { item: k, tid: 0 }).collect();
        let backward: Vec<ItemTid> = forward.iter().rev().copied().collect();
        write_records(&sorted_in, &forward);
        write_records(&reversed_in, &backward);
        let io = IoConfig::new(400, 100, dir.path(), sampling());
        let cost_a = external_sort::<ItemTid>(&sorted_in, &out_a, &io, "a").unwrap();
        let cost_b = external_sort::<ItemTid>(&reversed_in, &out_b, &io, "b").unwrap();
        assert_eq!(cost_a.pages_read, cost_b.pages_read);
        assert_eq!(cost_a.pages_written, cost_b.pages_written);
        assert_eq!(read_records::<ItemTid>(&out_a), read_records::<ItemTid>(&out_b));
    }

    /// Page counts the merge schedule should produce, walking the same
    /// chunked pass structure over run sizes only. Odd-tail runs are
    /// carried to the next pass without transfer.
    fn simulate_merge(mut runs: Vec<u64>, fan: usize, b: u64) -> (u64, u64, u64) {
        let (mut reads, mut writes, mut passes) = (0u64, 0u64, 0u64);
        while runs.len() > 1 {
            passes += 1;
            let generation = std::mem::take(&mut runs);
            for group in generation.chunks(fan) {
                if group.len() == 1 {
                    runs.push(group[0]);
                    continue;
                }
                reads += group.iter().map(|s| s.div_ceil(b)).sum::<u64>();
                let total: u64 = group.iter().sum();
                writes += total.div_ceil(b);
                runs.push(total);
            }
        }
        (reads, writes, passes)
    }

    #[test]
    fn tight_budget_forces_many_passes() {
        // B = 4, M = 12 gives fan-in 2: ⌈1000/12⌉ = 84 runs need
        // ⌈log₂ 84⌉ = 7 passes.
        let dir = TempDir::new().unwrap();
        let input = dir.path().join("in.bin");
        let output = dir.path().join("out.bin");
        let records: Vec<ItemTid> = (0..1000u64)
            .map(|k| ItemTid {
                item: (k * 7919) % 1000,
                tid: k,
            })
            .collect();
        write_records(&input, &records);
        let io = IoConfig::new(12, 4, dir.path(), sampling());
        let cost = external_sort::<ItemTid>(&input, &output, &io, "tight").unwrap();
        assert_eq!(cost.sorts[0].initial_runs, 84);
        assert_eq!(cost.sorts[0].merge_passes, 7);
        let mut run_sizes = vec![12u64; 83];
        run_sizes.push(4);
        let (reads, writes, passes) = simulate_merge(run_sizes, 2, 4);
        assert_eq!(passes, 7);
        // Formation reads the input and writes the runs, 250 pages each.
        assert_eq!(cost.pages_read, 250 + reads);
        assert_eq!(cost.pages_written, 250 + writes);
        let mut expected = records.clone();
        expected.sort_unstable();
        assert_eq!(read_records::<ItemTid>(&output), expected);
    }

    #[test]
    fn budget_shape_is_validated() {
        let dir = TempDir::new().unwrap();
        let io = IoConfig::new(5, 2, dir.path(), sampling());
        assert!(matches!(io.validate_budget(), Err(Error::Config(_))));
        let io = IoConfig::new(30, 0, dir.path(), sampling());
        assert!(matches!(io.validate_budget(), Err(Error::Config(_))));
        let io = IoConfig::new(6, 2, dir.path(), sampling());
        assert!(io.validate_budget().is_ok());
    }

    fn fimi_file(dir: &TempDir, name: &str, db: &TransactionDatabase) -> PathBuf {
        let path = dir.path().join(name);
        let mut out = Vec::new();
        db.write_fimi(&mut out).unwrap();
        std::fs::write(&path, out).unwrap();
        path
    }

    #[test]
    fn pipeline_matches_in_memory_mining() {
        let dir = TempDir::new().unwrap();
        for case in 0..12u64 {
            let db = IndependentModel::uniform_random(10, 40, 0.1, 0.7, 600 + case)
                .unwrap()
                .generate();
            let path = fimi_file(&dir, &format!("db{case}.dat"), &db);
            // Reference point: mining the file as parsed, since the text
            // format drops any empty transactions the generator produced.
            let parsed = TransactionDatabase::parse_fimi_path(&path).unwrap();
            let config = SamplingConfig::new(Measure::Cosine, 0.4, 1 + case % 12, 100 + case);
            let io = IoConfig::new(64, 16, dir.path(), config.clone());
            let (report, cost) = run_io_bisam(&path, &io).unwrap();
            let reference = run_bisam(&parsed, &config).unwrap();
            assert_eq!(report, reference.report, "case {case}");
            assert_eq!(cost.input_records, parsed.total_occurrences());
            assert_eq!(cost.pair_records, reference.multiset.total_samples());
            assert!(cost.pages_read + cost.pages_written
                <= io_bound(cost.input_records, cost.pair_records, &io));
        }
    }

    #[test]
    fn pipeline_under_stressed_budget_still_matches() {
        let dir = TempDir::new().unwrap();
        let db = IndependentModel::uniform(8, 60, 0.5, 31).unwrap().generate();
        let path = fimi_file(&dir, "stress.dat", &db);
        let parsed = TransactionDatabase::parse_fimi_path(&path).unwrap();
        let config = SamplingConfig::new(Measure::Jaccard, 0.25, 9, 7);
        let io = IoConfig::new(12, 4, dir.path(), config.clone());
        let (report, cost) = run_io_bisam(&path, &io).unwrap();
        let reference = run_bisam(&parsed, &config).unwrap();
        assert_eq!(report, reference.report);
        assert!(
            cost.sorts.iter().any(|s| s.merge_passes >= 2),
            "budget was meant to force multi-pass merging: {:?}",
            cost.sorts
        );
    }

    #[test]
    fn empty_input_is_free() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("empty.dat");
        std::fs::write(&path, "").unwrap();
        let io = IoConfig::new(64, 16, dir.path(), sampling());
        let (report, cost) = run_io_bisam(&path, &io).unwrap();
        assert!(report.is_empty());
        assert_eq!(cost.pages_read, 0);
        assert_eq!(cost.pages_written, 0);
        assert_eq!(cost.input_records, 0);
        assert_eq!(cost.pair_records, 0);
    }

    #[test]
    fn gzipped_input_parses_transparently() {
        let dir = TempDir::new().unwrap();
        let db = IndependentModel::uniform(6, 30, 0.4, 5).unwrap().generate();
        let plain = fimi_file(&dir, "plain.dat", &db);
        let gz_path = dir.path().join("data.dat.gz");
        let mut enc = flate2::write::GzEncoder::new(
            std::fs::File::create(&gz_path).unwrap(),
            flate2::Compression::default(),
        );
        let mut text = Vec::new();
        db.write_fimi(&mut text).unwrap();
        std::io::Write::write_all(&mut enc, &text).unwrap();
        enc.finish().unwrap();
        let io = IoConfig::new(64, 16, dir.path(), sampling());
        let (from_plain, _) = run_io_bisam(&plain, &io).unwrap();
        let (from_gz, _) = run_io_bisam(&gz_path, &io).unwrap();
        assert_eq!(from_plain, from_gz);
    }

    #[test]
    fn oversized_support_table_is_a_resource_error() {
        // 30 distinct items but a budget of only 24 records: the side
        // table cannot fit.
        let dir = TempDir::new().unwrap();
        let line: Vec<String> = (0..30).map(|k| k.to_string()).collect();
        let path = dir.path().join("wide.dat");
        std::fs::write(&path, line.join(" ")).unwrap();
        let io = IoConfig::new(24, 8, dir.path(), sampling());
        match run_io_bisam(&path, &io) {
            Err(Error::Resource(msg)) => assert!(msg.contains("budget"), "{msg}"),
            other => panic!("expected a resource error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.dat");
        std::fs::write(&path, "1 2 3\n4 oops 6\n").unwrap();
        let io = IoConfig::new(64, 16, dir.path(), sampling());
        match run_io_bisam(&path, &io) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("oops"));
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn scratch_files_survive_failures() {
        // Enough records to spill a run before the malformed line is hit.
        let dir = TempDir::new().unwrap();
        let scratch = TempDir::new().unwrap();
        let mut text = String::new();
        for t in 0..5 {
            let base = t * 4;
            text.push_str(&format!(
                "{} {} {} {}\n",
                base,
                base + 1,
                base + 2,
                base + 3
            ));
        }
        text.push_str("not-a-number\n");
        let path = dir.path().join("broken.dat");
        std::fs::write(&path, text).unwrap();
        let io = IoConfig::new(12, 4, scratch.path(), sampling());
        assert!(run_io_bisam(&path, &io).is_err());
        let leftovers = std::fs::read_dir(scratch.path()).unwrap().count();
        assert!(leftovers > 0, "failed runs should leave scratch files behind");
        // And a successful run cleans up after itself.
        let good = dir.path().join("good.dat");
        std::fs::write(&good, "1 2\n2 3\n").unwrap();
        run_io_bisam(&good, &io).unwrap();
        let after: Vec<_> = std::fs::read_dir(scratch.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(after.len(), leftovers, "success left extra files: {after:?}");
    }
}
