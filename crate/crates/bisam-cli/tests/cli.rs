//! End-to-end runs of the compiled binary: output contents, formats,
//! determinism, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bisam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bisam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn write_dataset(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("write dataset");
    path.to_str().expect("utf-8 path").to_string()
}

#[test]
fn error_table_prints_the_reference_probabilities() {
    let out = bisam(&["errors", "--ratio", "0.3333333333333333"]);
    assert!(out.status.success());
    let text = stdout(&out);
    // One row per default mu; false-negative columns to four significant
    // digits, plus the false-positive column at ratio 1/3.
    for needle in [
        "0.1991", "0.04979", // mu = 3
        "0.1247", "0.006738", // mu = 5
        "0.06709", "4.540e-5", // mu = 10
        "0.01800", "3.059e-7", "0.1334", // mu = 15
        "0.01081", "2.061e-9", // mu = 20
        "0.001947", "9.358e-14", // mu = 30
    ] {
        assert!(text.contains(needle), "missing {needle} in:\n{text}");
    }
}

#[test]
fn errors_json_round_trips() {
    let out = bisam(&["errors", "--mu", "15", "--ratio", "0.5", "--format", "json"]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    let row = &rows.as_array().expect("array")[0];
    assert_eq!(row["mu"], 15);
    let fn15 = row["false_negative"].as_f64().expect("number");
    assert!((fn15 - 0.018002193147830758).abs() < 1e-15);
    let (ratio, fp) = (
        row["false_positive_at_ratio"][0][0].as_f64().unwrap(),
        row["false_positive_at_ratio"][0][1].as_f64().unwrap(),
    );
    assert_eq!(ratio, 0.5);
    assert!(fp > 0.0 && fp < 1.0);
}

#[test]
fn compare_expectation_matches_the_hand_example() {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = write_dataset(dir.path(), "hand.dat", "1 2\n1 2\n1 3\n");
    let out = bisam(&[
        "compare",
        &data,
        "--measure",
        "cosine",
        "--delta",
        "0.8",
        "--mu",
        "10",
        "--mode",
        "expectation",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    // Three transactions over items {1,2,3}: six occurrences plus three
    // expected samples on the counting side; the exact baseline touches
    // all nine occurrences-with-pairs and stores n + 2 counters.
    assert_eq!(v["mode"], "expectation");
    assert_eq!(v["bisam_time"].as_f64().unwrap(), 9.0);
    assert_eq!(v["exact_time"], 9);
    assert_eq!(v["bisam_space"].as_f64().unwrap(), 5.0);
    assert_eq!(v["exact_space"], 5);
    assert_eq!(v["time_ratio"].as_f64().unwrap(), 1.0);
    assert_eq!(v["output_count"].as_f64().unwrap(), 1.0);
    assert_eq!(v["lsh_comparisons"], 3);
}

#[test]
fn mine_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().expect("tempdir");
    let gen = dir.path().join("gen.dat");
    let gen_path = gen.to_str().unwrap();
    let out = bisam(&[
        "gen",
        "--independent",
        "--items",
        "25",
        "--transactions",
        "200",
        "--prob",
        "0.25",
        "--output",
        gen_path,
    ]);
    assert!(out.status.success());

    let mine = |seed: &str| {
        let out = bisam(&[
            "mine", gen_path, "--delta", "0.4", "--mu", "12", "--seed", seed,
        ]);
        assert!(out.status.success());
        stdout(&out)
    };
    let first = mine("7");
    assert_eq!(first, mine("7"), "same seed must reproduce the run");
    assert_ne!(first, mine("8"), "a different seed should change the run");
}

#[test]
fn generated_dataset_has_the_configured_density() {
    let dir = tempfile::tempdir().expect("tempdir");
    let gen = dir.path().join("gen.dat");
    let gen_path = gen.to_str().unwrap();
    let out = bisam(&[
        "gen",
        "--independent",
        "--items",
        "20",
        "--transactions",
        "300",
        "--prob",
        "0.3",
        "--output",
        gen_path,
    ]);
    assert!(out.status.success());

    let out = bisam(&["stats", gen_path, "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    // E[row size] = 20 * 0.3 = 6; 300 rows keep the mean within ±0.6.
    let avg = v["avg_transaction_size"].as_f64().expect("number");
    assert!((avg - 6.0).abs() < 0.6, "avg_transaction_size = {avg}");
    assert_eq!(v["distinct_items"], 20);
    assert_eq!(v["num_transactions"], 300);
}

#[test]
fn mine_and_iomine_print_identical_reports() {
    let dir = tempfile::tempdir().expect("tempdir");
    let gen = dir.path().join("gen.dat");
    let gen_path = gen.to_str().unwrap();
    assert!(bisam(&[
        "gen",
        "--independent",
        "--items",
        "15",
        "--transactions",
        "150",
        "--prob",
        "0.3",
        "--output",
        gen_path,
    ])
    .status
    .success());

    let scratch = dir.path().join("scratch");
    let common = ["--delta", "0.45", "--mu", "10", "--format", "csv"];
    let mut a_args = vec!["mine", gen_path];
    a_args.extend(common);
    let a = bisam(&a_args);
    let mut b_args = vec!["iomine", gen_path];
    b_args.extend(common);
    b_args.extend([
        "--memory-budget",
        "64",
        "--page-size",
        "8",
        "--scratch-dir",
        scratch.to_str().unwrap(),
    ]);
    let b = bisam(&b_args);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    // Scratch files are removed once the run succeeds.
    let leftovers = std::fs::read_dir(&scratch)
        .map(|it| it.count())
        .unwrap_or(0);
    assert_eq!(leftovers, 0);
}

#[test]
fn csv_outputs_carry_headers() {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = write_dataset(dir.path(), "tiny.dat", "1 2 3\n1 2\n2 3\n");
    let out = bisam(&["mine", &data, "--delta", "0.5", "--format", "csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("first,second,samples,exact,similarity\n"));

    let out = bisam(&["exact", &data, "--delta", "0.5", "--format", "csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("first,second,similarity\n"));

    let out = bisam(&["stats", &data, "--format", "csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("distinct_items,transactions,"));
}

#[test]
fn adaptive_run_reports_its_stopping_threshold() {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = write_dataset(dir.path(), "clique.dat", &"1 2 3\n".repeat(30));
    let out = bisam(&[
        "adaptive", &data, "--mu", "5", "--min-delta", "0.9", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    assert_eq!(v["stop_delta"].as_f64().unwrap(), 0.9);
    // Every pair of the 3-clique has similarity 1.0 and must be reported.
    assert_eq!(v["output_count"], 3);
    assert!(v["samples_drawn"].as_u64().unwrap() > 0);
}

#[test]
fn exit_codes_separate_usage_data_and_resource_failures() {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = write_dataset(dir.path(), "tiny.dat", "1 2\n2 3\n");

    let code = |out: &Output| out.status.code().expect("exit code");

    let out = bisam(&["mine", "/definitely/not/here.dat", "--delta", "0.5"]);
    assert_eq!(code(&out), 3, "unreadable input");

    let bad = write_dataset(dir.path(), "bad.dat", "1 2\noops\n");
    let out = bisam(&["mine", &bad, "--delta", "0.5"]);
    assert_eq!(code(&out), 3, "malformed input");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "line number in: {err}");

    let out = bisam(&["mine", &data, "--delta", "0"]);
    assert_eq!(code(&out), 2, "non-positive threshold");

    let out = bisam(&["mine", &data, "--delta", "0.5", "--measure", "bogus"]);
    assert_eq!(code(&out), 2, "unknown measure");

    let out = bisam(&["adaptive", &data]);
    assert_eq!(code(&out), 2, "missing stop rule");

    let out = bisam(&["adaptive", &data, "--top-k", "5", "--min-delta", "0.5"]);
    assert_eq!(code(&out), 2, "conflicting stop rules");

    let wide = write_dataset(dir.path(), "wide.dat", "1 2 3 4 5\n1 2\n4 5\n");
    let out = bisam(&[
        "iomine",
        &wide,
        "--delta",
        "0.5",
        "--memory-budget",
        "3",
        "--page-size",
        "1",
    ]);
    assert_eq!(code(&out), 4, "support table over the memory budget");
}
