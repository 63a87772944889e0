//! Command-line front end for the similarity miner: mining runs, the exact
//! baseline, cost comparison, error-probability tables, dataset statistics,
//! synthetic generation, threshold-free top-pairs streaming, and the
//! external-memory pipeline.
//!
//! Every command is deterministic: seeds default to a fixed constant, and
//! `--threads` only changes how work is divided, never the output.
//!
//! Exit codes: 0 success; 2 usage error (bad flags, invalid configuration,
//! empty dataset where one is required); 3 data error (unreadable or
//! malformed input); 4 resource error (a budget was exceeded).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bisam::adaptive::{run_adaptive, StopRule};
use bisam::cost::SampleCost;
use bisam::exact;
use bisam::extsort::{run_io_bisam, IoConfig, IoCostReport};
use bisam::stats::{error_profile, ErrorProfile};
use bisam::{
    run_bisam, Error, IndependentModel, Measure, ReportedPair, Result, SamplingConfig,
    TransactionDatabase,
};

/// Default RNG seed (spells "bisa" in hex), so repeated invocations agree
/// without a `--seed` flag.
const DEFAULT_SEED: u64 = 0xB15A;

#[derive(Parser)]
#[command(
    name = "bisam",
    version,
    about = "Find all item pairs with similarity above a threshold by biased sampling"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Worker threads for parallel phases; any value gives identical output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    /// Run the sampler and count what actually happened.
    Observed,
    /// Closed-form expectations instead of a run.
    Expectation,
}

#[derive(Subcommand)]
enum Command {
    /// Sample-mine all pairs with similarity at least delta
    Mine(MineArgs),
    /// Exactly count all pairs with similarity at least delta
    Exact(ExactArgs),
    /// One-row cost comparison: sampling vs exact counting
    Compare(CompareArgs),
    /// Dataset statistics
    Stats(StatsArgs),
    /// Error-probability tables for a range of mu values
    Errors(ErrorsArgs),
    /// Generate a synthetic independent-items database
    Gen(GenArgs),
    /// Stream top pairs without fixing the threshold in advance
    Adaptive(AdaptiveArgs),
    /// Mine under an explicit memory budget with counted page transfers
    Iomine(IoMineArgs),
}

#[derive(Args)]
struct MineArgs {
    /// FIMI text file (`.gz` accepted): one transaction per line.
    dataset: PathBuf,
    #[arg(long, default_value = "cosine")]
    measure: String,
    /// Similarity threshold.
    #[arg(long)]
    delta: f64,
    /// Expected samples for a pair exactly at the threshold.
    #[arg(long, default_value_t = 15)]
    mu: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Override the default mu/2 report cut.
    #[arg(long)]
    report_threshold: Option<f64>,
}

#[derive(Args)]
struct ExactArgs {
    dataset: PathBuf,
    #[arg(long, default_value = "cosine")]
    measure: String,
    #[arg(long)]
    delta: f64,
}

#[derive(Args)]
struct CompareArgs {
    dataset: PathBuf,
    #[arg(long, default_value = "cosine")]
    measure: String,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 15)]
    mu: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Observed)]
    mode: Mode,
}

#[derive(Args)]
struct StatsArgs {
    dataset: PathBuf,
}

#[derive(Args)]
struct ErrorsArgs {
    /// Comma-separated mu values.
    #[arg(long, value_delimiter = ',', default_value = "3,5,10,15,20,30")]
    mu: Vec<u64>,
    /// Ratios s(i,j)/Delta at which to tabulate false-positive probability.
    #[arg(long, value_delimiter = ',')]
    ratio: Vec<f64>,
}

#[derive(Args)]
struct GenArgs {
    /// Independent-items model: item i appears in each transaction with
    /// probability p_i. (The only model available; the flag is explicit.)
    #[arg(long)]
    independent: bool,
    #[arg(long)]
    items: u64,
    #[arg(long)]
    transactions: u64,
    /// Uniform inclusion probability for every item.
    #[arg(long)]
    prob: Option<f64>,
    /// Draw each item's probability uniformly from [min, max] (seeded).
    #[arg(long)]
    prob_min: Option<f64>,
    #[arg(long)]
    prob_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = ArgGroup::new("stop").required(true).args(["top_k", "min_delta"]))]
struct AdaptiveArgs {
    dataset: PathBuf,
    #[arg(long, default_value = "cosine")]
    measure: String,
    #[arg(long, default_value_t = 15)]
    mu: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Stop after this many drawn pair occurrences.
    #[arg(long)]
    top_k: Option<u64>,
    /// Drain everything a fixed-threshold run at this delta would sample.
    #[arg(long)]
    min_delta: Option<f64>,
}

#[derive(Args)]
struct IoMineArgs {
    dataset: PathBuf,
    #[arg(long, default_value = "cosine")]
    measure: String,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 15)]
    mu: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// M: records of working memory.
    #[arg(long, default_value_t = 1_000_000)]
    memory_budget: u64,
    /// B: records per page.
    #[arg(long, default_value_t = 4096)]
    page_size: u64,
    /// Directory for scratch files; the system temp dir if omitted.
    #[arg(long)]
    scratch_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Unsupported(_) => 2,
        Error::Parse { .. } | Error::Io { .. } => 3,
        Error::Resource(_) => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {threads} threads: {e}")))?;
    }
    let format = cli.format;
    match cli.command {
        Command::Mine(args) => cmd_mine(args, format),
        Command::Exact(args) => cmd_exact(args, format),
        Command::Compare(args) => cmd_compare(args, format),
        Command::Stats(args) => cmd_stats(args, format),
        Command::Errors(args) => cmd_errors(args, format),
        Command::Gen(args) => cmd_gen(args),
        Command::Adaptive(args) => cmd_adaptive(args, format),
        Command::Iomine(args) => cmd_iomine(args, format),
    }
}

// ---------------------------------------------------------------- output

/// Format a number to four significant digits, the precision used for
/// thresholds and similarities in human-readable output.
fn sig4(x: f64) -> String {
    format_sig(x, 4)
}

fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..=6).contains(&exp) {
        format!("{:.*e}", digits.saturating_sub(1), x)
    } else {
        let places = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", places, x)
    }
}

fn print_table(headers: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (k, cell) in row.iter().enumerate() {
            widths[k] = widths[k].max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut out = String::new();
        for (k, cell) in cells.iter().enumerate() {
            if k > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{:>width$}", cell, width = widths[k]));
        }
        println!("{out}");
    };
    line(headers.to_vec());
    for row in rows {
        line(row.iter().map(|s| s.as_str()).collect());
    }
}

fn print_csv(headers: &[&str], rows: &[Vec<String>]) {
    println!("{}", headers.join(","));
    for row in rows {
        println!("{}", row.join(","));
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}

fn report_rows(report: &[ReportedPair]) -> Vec<Vec<String>> {
    report
        .iter()
        .map(|p| {
            vec![
                p.pair.first.to_string(),
                p.pair.second.to_string(),
                p.samples.to_string(),
                p.exact.to_string(),
                sig4(p.estimated_similarity),
            ]
        })
        .collect()
}

const REPORT_HEADERS: [&str; 5] = ["first", "second", "samples", "exact", "similarity"];

// -------------------------------------------------------------- commands

fn parse_measure(name: &str) -> Result<Measure> {
    name.parse()
}

fn cmd_mine(args: MineArgs, format: Format) -> Result<()> {
    let measure = parse_measure(&args.measure)?;
    let db = TransactionDatabase::parse_fimi_path(&args.dataset)?;
    let mut config = SamplingConfig::new(measure, args.delta, args.mu, args.seed);
    if let Some(cut) = args.report_threshold {
        config = config.with_report_threshold(cut);
    }
    let run = run_bisam(&db, &config)?;

    #[derive(Serialize)]
    struct MineOut<'a> {
        measure: &'a str,
        delta: f64,
        mu: u64,
        seed: u64,
        report_threshold: f64,
        cost: SampleCost,
        output_count: usize,
        report: &'a [ReportedPair],
    }
    match format {
        Format::Json => print_json(&MineOut {
            measure: &args.measure,
            delta: args.delta,
            mu: args.mu,
            seed: args.seed,
            report_threshold: config.report_threshold,
            cost: run.cost,
            output_count: run.report.len(),
            report: &run.report,
        })?,
        Format::Table => {
            print_table(&REPORT_HEADERS, &report_rows(&run.report));
            println!(
                "# {} pairs reported; time={} space={} samples={} distinct_pairs={}",
                run.report.len(),
                run.cost.time,
                run.cost.space,
                run.cost.total_samples,
                run.cost.distinct_pairs
            );
        }
        Format::Csv => print_csv(&REPORT_HEADERS, &report_rows(&run.report)),
    }
    Ok(())
}

fn cmd_exact(args: ExactArgs, format: Format) -> Result<()> {
    let measure = parse_measure(&args.measure)?;
    let db = TransactionDatabase::parse_fimi_path(&args.dataset)?;
    let pairs = exact::exact_similar_pairs(&db, &measure, args.delta)?;
    let (_, cost) = exact::count_all_pairs(&db)?;

    let headers = ["first", "second", "similarity"];
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|(pair, s)| vec![pair.first.to_string(), pair.second.to_string(), sig4(*s)])
        .collect();

    #[derive(Serialize)]
    struct ExactOut<'a> {
        measure: &'a str,
        delta: f64,
        cost: bisam::cost::ExactCost,
        output_count: usize,
        pairs: Vec<PairRow>,
    }
    #[derive(Serialize)]
    struct PairRow {
        first: u64,
        second: u64,
        similarity: f64,
    }
    match format {
        Format::Json => print_json(&ExactOut {
            measure: &args.measure,
            delta: args.delta,
            cost,
            output_count: pairs.len(),
            pairs: pairs
                .iter()
                .map(|(p, s)| PairRow {
                    first: p.first,
                    second: p.second,
                    similarity: *s,
                })
                .collect(),
        })?,
        Format::Table => {
            print_table(&headers, &rows);
            println!(
                "# {} pairs at or above {}; time={} space={}",
                pairs.len(),
                sig4(args.delta),
                cost.time,
                cost.space
            );
        }
        Format::Csv => print_csv(&headers, &rows),
    }
    Ok(())
}

/// The one-row comparison record. `bisam_*` fields are observed counters or
/// closed-form expectations depending on the mode; `exact_*` fields are
/// absent when the oracle exceeded its entry budget. `lsh_comparisons` is
/// the n(n-1)/2 signature-comparison count a MinHash/LSH baseline would
/// evaluate, printed as a derived reference only.
#[derive(Serialize)]
struct CostReport {
    mode: &'static str,
    measure: String,
    delta: f64,
    mu: u64,
    seed: u64,
    bisam_time: f64,
    bisam_space: f64,
    exact_time: Option<u64>,
    exact_space: Option<u64>,
    time_ratio: Option<f64>,
    space_ratio: Option<f64>,
    output_count: f64,
    lsh_comparisons: u64,
}

fn cmd_compare(args: CompareArgs, format: Format) -> Result<()> {
    let measure = parse_measure(&args.measure)?;
    let db = TransactionDatabase::parse_fimi_path(&args.dataset)?;
    if db.num_transactions() == 0 {
        return Err(Error::Config("empty dataset: nothing to compare".into()));
    }
    let config = SamplingConfig::new(measure, args.delta, args.mu, args.seed);

    // The exact baseline; over-budget counting degrades to a sampler-only
    // row in observed mode (expectation mode needs the oracle itself and
    // surfaces the resource error).
    let exact_cost = match exact::count_all_pairs(&db) {
        Ok((_, cost)) => Some(cost),
        Err(Error::Resource(_)) => None,
        Err(e) => return Err(e),
    };

    let (bisam_time, bisam_space, output_count, mode) = match args.mode {
        Mode::Observed => {
            let run = run_bisam(&db, &config)?;
            (
                run.cost.time as f64,
                run.cost.space as f64,
                run.report.len() as f64,
                "observed",
            )
        }
        Mode::Expectation => {
            let expected = exact::expected_cost(&db, &config)?;
            let z = exact::expected_output_count(&db, &config)?;
            (
                db.total_occurrences() as f64 + expected.expected_samples,
                db.num_items() as f64 + expected.expected_distinct_pairs,
                z,
                "expectation",
            )
        }
    };

    let n = db.num_items();
    let report = CostReport {
        mode,
        measure: args.measure.clone(),
        delta: args.delta,
        mu: args.mu,
        seed: args.seed,
        bisam_time,
        bisam_space,
        exact_time: exact_cost.map(|c| c.time),
        exact_space: exact_cost.map(|c| c.space),
        time_ratio: exact_cost.map(|c| c.time as f64 / bisam_time),
        space_ratio: exact_cost.map(|c| c.space as f64 / bisam_space),
        output_count,
        lsh_comparisons: n * n.saturating_sub(1) / 2,
    };

    let headers = [
        "mode",
        "delta",
        "bisam_time",
        "exact_time",
        "time_ratio",
        "bisam_space",
        "exact_space",
        "space_ratio",
        "output",
        "lsh_comparisons",
    ];
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let row = vec![
        report.mode.to_string(),
        sig4(report.delta),
        sig4(report.bisam_time),
        opt(report.exact_time.map(|v| v.to_string())),
        opt(report.time_ratio.map(sig4)),
        sig4(report.bisam_space),
        opt(report.exact_space.map(|v| v.to_string())),
        opt(report.space_ratio.map(sig4)),
        sig4(report.output_count),
        report.lsh_comparisons.to_string(),
    ];
    match format {
        Format::Json => print_json(&report)?,
        Format::Table => print_table(&headers, &[row]),
        Format::Csv => print_csv(&headers, &[row]),
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs, format: Format) -> Result<()> {
    let db = TransactionDatabase::parse_fimi_path(&args.dataset)?;
    let stats = db.stats()?;
    match format {
        Format::Json => print_json(&stats)?,
        Format::Table => {
            let rows = vec![
                vec!["distinct_items".into(), stats.distinct_items.to_string()],
                vec!["transactions".into(), stats.num_transactions.to_string()],
                vec![
                    "avg_transaction_size".into(),
                    sig4(stats.avg_transaction_size),
                ],
                vec![
                    "max_transaction_size".into(),
                    stats.max_transaction_size.to_string(),
                ],
                vec!["avg_item_support".into(), sig4(stats.avg_item_support)],
            ];
            print_table(&["statistic", "value"], &rows);
        }
        Format::Csv => {
            let headers = [
                "distinct_items",
                "transactions",
                "avg_transaction_size",
                "max_transaction_size",
                "avg_item_support",
            ];
            let row = vec![
                stats.distinct_items.to_string(),
                stats.num_transactions.to_string(),
                sig4(stats.avg_transaction_size),
                stats.max_transaction_size.to_string(),
                sig4(stats.avg_item_support),
            ];
            print_csv(&headers, &[row]);
        }
    }
    Ok(())
}

fn cmd_errors(args: ErrorsArgs, format: Format) -> Result<()> {
    if args.mu.is_empty() {
        return Err(Error::Config("at least one mu value is required".into()));
    }
    let profiles: Vec<ErrorProfile> = args
        .mu
        .iter()
        .map(|&mu| error_profile(mu, &args.ratio))
        .collect();
    match format {
        Format::Json => print_json(&profiles)?,
        Format::Table | Format::Csv => {
            let mut headers: Vec<String> =
                vec!["mu".into(), "false_negative".into(), "any_sample_missing".into()];
            for r in &args.ratio {
                headers.push(format!("fp@{}", sig4(*r)));
            }
            let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<String>> = profiles
                .iter()
                .map(|p| {
                    let mut row = vec![
                        p.mu.to_string(),
                        sig4(p.false_negative),
                        sig4(p.false_negative_any_sample),
                    ];
                    for (_, fp) in &p.false_positive_at_ratio {
                        row.push(sig4(*fp));
                    }
                    row
                })
                .collect();
            if format == Format::Csv {
                print_csv(&header_refs, &rows);
            } else {
                print_table(&header_refs, &rows);
            }
        }
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    if !args.independent {
        return Err(Error::Config(
            "choose a generator: --independent is the only model".into(),
        ));
    }
    let model = match (args.prob, args.prob_min, args.prob_max) {
        (Some(p), None, None) => {
            IndependentModel::uniform(args.items, args.transactions, p, args.seed)?
        }
        (None, Some(lo), Some(hi)) => {
            IndependentModel::uniform_random(args.items, args.transactions, lo, hi, args.seed)?
        }
        _ => {
            return Err(Error::Config(
                "pass either --prob or both --prob-min and --prob-max".into(),
            ))
        }
    };
    let db = model.generate();
    match &args.output {
        Some(path) => {
            let io_err = |e: std::io::Error| Error::Io {
                path: path.clone(),
                source: e,
            };
            let file = std::fs::File::create(path).map_err(io_err)?;
            let mut out = std::io::BufWriter::new(file);
            db.write_fimi(&mut out).map_err(io_err)?;
            out.flush().map_err(io_err)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            db.write_fimi(&mut lock).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })?;
        }
    }
    Ok(())
}

fn cmd_adaptive(args: AdaptiveArgs, format: Format) -> Result<()> {
    let measure = parse_measure(&args.measure)?;
    let db = TransactionDatabase::parse_fimi_path(&args.dataset)?;
    let stop = match (args.top_k, args.min_delta) {
        (Some(k), None) => StopRule::MaxSamples(k),
        (None, Some(d)) => StopRule::MinDelta(d),
        _ => unreachable!("clap enforces exactly one stop rule"),
    };
    let run = run_adaptive(&db, &measure, args.mu, args.seed, stop)?;

    #[derive(Serialize)]
    struct AdaptiveOut<'a> {
        measure: &'a str,
        mu: u64,
        seed: u64,
        samples_drawn: usize,
        stop_delta: f64,
        output_count: usize,
        report: &'a [ReportedPair],
    }
    match format {
        Format::Json => print_json(&AdaptiveOut {
            measure: &args.measure,
            mu: args.mu,
            seed: args.seed,
            samples_drawn: run.drawn.len(),
            stop_delta: run.stop_delta,
            output_count: run.report.len(),
            report: &run.report,
        })?,
        Format::Table => {
            print_table(&REPORT_HEADERS, &report_rows(&run.report));
            println!(
                "# drew {} samples down to delta={}; {} pairs reported",
                run.drawn.len(),
                sig4(run.stop_delta),
                run.report.len()
            );
        }
        Format::Csv => print_csv(&REPORT_HEADERS, &report_rows(&run.report)),
    }
    Ok(())
}

fn cmd_iomine(args: IoMineArgs, format: Format) -> Result<()> {
    let measure = parse_measure(&args.measure)?;
    let sampling = SamplingConfig::new(measure, args.delta, args.mu, args.seed);
    let scratch = args
        .scratch_dir
        .clone()
        .unwrap_or_else(std::env::temp_dir);
    let io = IoConfig::new(args.memory_budget, args.page_size, scratch, sampling);
    let (report, cost) = run_io_bisam(&args.dataset, &io)?;

    #[derive(Serialize)]
    struct IoMineOut<'a> {
        measure: &'a str,
        delta: f64,
        mu: u64,
        seed: u64,
        memory_budget: u64,
        page_size: u64,
        cost: &'a IoCostReport,
        output_count: usize,
        report: &'a [ReportedPair],
    }
    match format {
        Format::Json => print_json(&IoMineOut {
            measure: &args.measure,
            delta: args.delta,
            mu: args.mu,
            seed: args.seed,
            memory_budget: args.memory_budget,
            page_size: args.page_size,
            cost: &cost,
            output_count: report.len(),
            report: &report,
        })?,
        Format::Table => {
            print_table(&REPORT_HEADERS, &report_rows(&report));
            println!(
                "# {} pairs reported; pages: {} read, {} written; records: N={} N'={}",
                report.len(),
                cost.pages_read,
                cost.pages_written,
                cost.input_records,
                cost.pair_records
            );
            for sort in &cost.sorts {
                println!(
                    "#   {}: {} records, {} runs, {} merge passes",
                    sort.stage, sort.records, sort.initial_runs, sort.merge_passes
                );
            }
        }
        Format::Csv => print_csv(&REPORT_HEADERS, &report_rows(&report)),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(0.0), "0");
        assert_eq!(sig4(0.7), "0.7000");
        assert_eq!(sig4(0.199148), "0.1991");
        assert_eq!(sig4(0.04978707), "0.04979");
        assert_eq!(sig4(4.5399929e-5), "4.540e-5");
        assert_eq!(sig4(9.357623e-14), "9.358e-14");
        assert_eq!(sig4(1039.0), "1039");
        assert_eq!(sig4(16.21), "16.21");
        assert_eq!(sig4(-0.125), "-0.1250");
        assert_eq!(sig4(2500000.0), "2500000");
    }

    #[test]
    fn error_kinds_map_to_documented_exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Domain("x".into())), 2);
        assert_eq!(exit_code(&Error::Unsupported("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Parse {
                line: 1,
                message: "x".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::Resource("x".into())), 4);
    }
}
