use std::process::{Command, Output};

use tabsketch::{ExactOracle, SketchParams};
use tabsketch_cli::format::{read_sketch, read_stream};
use tabsketch_cli::report::BenchReport;
use tempfile::TempDir;

fn tabsketch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabsketch"))
        .args(args)
        .env_remove("TABSKETCH_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tabsketch(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    tabsketch(args).status.code().unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn gen(dir: &TempDir, name: &str, extra: &[&str]) -> String {
    let path = p(dir, name);
    let mut args = vec!["gen", "--out", &path];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

#[test]
fn header_only_stream() {
    let dir = TempDir::new().unwrap();
    let path = gen(&dir, "empty.bin", &["--dist", "uniform", "--n", "16", "--count", "0"]);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 16);
    assert_eq!(&bytes[..8], b"CMSTRM01");
}

#[test]
fn generation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = ["--dist", "zipf", "--alpha", "1.1", "--n", "65536", "--count", "100000", "--seed", "7"];
    let a = gen(&dir, "a.bin", &args);
    let b = gen(&dir, "b.bin", &args);
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a.len(), 16 + 4 * 100_000);
    assert_eq!(a, b);
    let c = gen(&dir, "c.bin", &["--dist", "zipf", "--n", "65536", "--count", "100000", "--seed", "8"]);
    assert_ne!(a, std::fs::read(c).unwrap());
}

#[test]
fn every_exact_mode_matches_sequential_file() {
    let dir = TempDir::new().unwrap();
    let stream = gen(&dir, "s.bin", &["--dist", "zipf", "--n", "4096", "--count", "50000", "--seed", "3"]);
    let seq = p(&dir, "seq.cms");
    ok(&["build", "--in", &stream, "--out", &seq, "--mode", "seq", "--rows", "8", "--seed", "11"]);
    let expected = std::fs::read(&seq).unwrap();
    for (mode, slowdown) in [("buffered", "1"), ("naive-sync", "1"), ("multi", "1"), ("buffered-hetero", "4")] {
        let out = p(&dir, &format!("{mode}.cms"));
        ok(&[
            "build", "--in", &stream, "--out", &out, "--mode", mode, "--rows", "8", "--seed", "11", "--threads",
            "4", "--slowdown", slowdown,
        ]);
        assert_eq!(std::fs::read(&out).unwrap(), expected, "{mode}");
    }
}

#[test]
fn build_report_fields() {
    let dir = TempDir::new().unwrap();
    let stream = gen(&dir, "s.bin", &["--dist", "uniform", "--n", "1000", "--count", "20480"]);
    let json = ok(&["build", "--in", &stream, "--threads", "2", "--rows", "8"]);
    let r: BenchReport = serde_json::from_str(&json).unwrap();
    assert_eq!((r.strategy.as_str(), r.tau, r.batch), ("buffered", 2, 1024));
    assert_eq!((r.depth, r.width, r.items), (8, 2003, 20480));
    assert!(r.seconds > 0.0);
    assert!((r.throughput_mips - r.items as f64 / r.seconds / 1e6).abs() < 1e-9);
    assert!(r.f2s.is_none());

    let json = ok(&[
        "build", "--in", &stream, "--threads", "2", "--rows", "2", "--mode", "buffered-hetero", "--slowdown", "4",
    ]);
    let r: BenchReport = serde_json::from_str(&json).unwrap();
    let trace = r.f2s.unwrap();
    assert_eq!(trace.hashing.len(), 20);
    assert_eq!(r.slowdown, Some(4.0));

    let csv = ok(&["build", "--in", &stream, "--threads", "1", "--csv"]);
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("strategy,tau,batch"));
}

#[test]
fn threads_from_environment() {
    let dir = TempDir::new().unwrap();
    let stream = gen(&dir, "s.bin", &["--dist", "uniform", "--n", "10", "--count", "100"]);
    let out = Command::new(env!("CARGO_BIN_EXE_tabsketch"))
        .args(["build", "--in", &stream])
        .env("TABSKETCH_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    let r: BenchReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.tau, 3);
}

#[test]
fn query_and_eval() {
    let dir = TempDir::new().unwrap();
    let stream = gen(&dir, "s.bin", &["--dist", "zipf", "--n", "4096", "--count", "100000", "--seed", "5"]);
    let sketch = p(&dir, "s.cms");
    ok(&["build", "--in", &stream, "--out", &sketch, "--threads", "2"]);

    let items = read_stream(&mut std::fs::read(&stream).unwrap().as_slice()).unwrap();
    let oracle = ExactOracle::from_items(&items);
    let lines = ok(&["query", "--sketch", &sketch, "--items-file", &stream]);
    assert_eq!(lines.lines().count(), items.len());
    for line in lines.lines() {
        let (x, est) = line.split_once(' ').unwrap();
        let (x, est): (u32, u64) = (x.parse().unwrap(), est.parse().unwrap());
        assert!(est >= oracle.frequency(x));
    }

    let text = p(&dir, "items.txt");
    std::fs::write(&text, "1 2\n3\n").unwrap();
    assert_eq!(ok(&["query", "--sketch", &sketch, "--items-file", &text, "--item", "9"]).lines().count(), 4);

    let report: serde_json::Value = serde_json::from_str(&ok(&["eval", "--sketch", &sketch, "--stream", &stream])).unwrap();
    assert_eq!(report["items"], 100_000);
    assert_eq!(report["epsilon"], 1e-3);
    assert_eq!(report["one_sided"], true);
}

#[test]
fn single_item_stream_is_exact() {
    let dir = TempDir::new().unwrap();
    let stream = gen(&dir, "one.bin", &["--dist", "uniform", "--n", "1", "--count", "37"]);
    let sketch = p(&dir, "one.cms");
    ok(&["build", "--in", &stream, "--out", &sketch, "--threads", "1"]);
    assert_eq!(ok(&["query", "--sketch", &sketch, "--item", "0", "--item", "1"]), "0 37\n1 0\n");
    let report: serde_json::Value = serde_json::from_str(&ok(&["eval", "--sketch", &sketch, "--stream", &stream])).unwrap();
    assert_eq!(report["max_overestimate"], 0);
}

#[test]
fn empty_sketch_answers_zero() {
    let dir = TempDir::new().unwrap();
    let stream = gen(&dir, "empty.bin", &["--dist", "uniform", "--n", "16", "--count", "0"]);
    let sketch = p(&dir, "empty.cms");
    ok(&["build", "--in", &stream, "--out", &sketch, "--mode", "seq"]);
    assert_eq!(ok(&["query", "--sketch", &sketch, "--item", "5"]), "5 0\n");
}

#[test]
fn counter_widths_interoperate() {
    let dir = TempDir::new().unwrap();
    let stream = gen(&dir, "s.bin", &["--dist", "uniform", "--n", "100", "--count", "5000"]);
    let (s32, s64) = (p(&dir, "a.cms"), p(&dir, "b.cms"));
    ok(&["build", "--in", &stream, "--out", &s32, "--mode", "seq"]);
    ok(&["build", "--in", &stream, "--out", &s64, "--mode", "seq", "--counter-bits", "64"]);
    let a = read_sketch(&mut std::fs::read(&s32).unwrap().as_slice()).unwrap();
    let b = read_sketch(&mut std::fs::read(&s64).unwrap().as_slice()).unwrap();
    assert_eq!((a.counter_bits(), b.counter_bits()), (32, 64));
    assert_eq!(a.clone().into_u64(), b.clone().into_u64());
    assert!(b.into_u32().is_err());
    assert_eq!(
        ok(&["query", "--sketch", &s32, "--items-file", &stream]),
        ok(&["query", "--sketch", &s64, "--items-file", &stream])
    );
}

#[test]
fn bench_writes_one_row_per_configuration() {
    let dir = TempDir::new().unwrap();
    let csv = ok(&[
        "bench", "--eps", "1e-3,1e-4", "--dist", "uniform,zipf:1.5", "--mode", "seq,buffered", "--tau", "2",
        "--repeats", "1", "--count", "20000", "--n", "4096", "--accuracy",
    ]);
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for row in &rows {
        assert_eq!(&row[col("repeats")], "1");
        assert_eq!(&row[col("underestimates")], "0");
    }

    let out = p(&dir, "bench.csv");
    ok(&["bench", "--eps", "1e-3", "--dist", "uniform", "--mode", "buffered", "--tau", "1", "--repeats", "2", "--count", "5000", "--out", &out]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    let stream = gen(&dir, "s.bin", &["--dist", "uniform", "--n", "100", "--count", "100"]);
    assert_eq!(code(&["build", "--in", &stream, "--mode", "quantum"]), 2);

    // Validation: bad dimensions, mismatched stream.
    assert_eq!(code(&["build", "--in", &stream, "--eps", "0"]), 4);
    assert_eq!(code(&["gen", "--dist", "zipf", "--alpha=-1", "--n", "10", "--count", "5", "--out", &p(&dir, "x")]), 4);
    let sketch = p(&dir, "s.cms");
    ok(&["build", "--in", &stream, "--out", &sketch, "--mode", "seq"]);
    let other = gen(&dir, "o.bin", &["--dist", "uniform", "--n", "100", "--count", "99"]);
    assert_eq!(code(&["eval", "--sketch", &sketch, "--stream", &other]), 4);

    // Format: corrupt or mistyped files.
    let mut bytes = std::fs::read(&sketch).unwrap();
    bytes.truncate(bytes.len() - 1);
    let broken = p(&dir, "broken.cms");
    std::fs::write(&broken, &bytes).unwrap();
    assert_eq!(code(&["query", "--sketch", &broken, "--item", "1"]), 3);
    assert_eq!(code(&["query", "--sketch", &stream, "--item", "1"]), 3);
    assert_eq!(code(&["build", "--in", &sketch]), 3);
    let junk = p(&dir, "junk.txt");
    std::fs::write(&junk, "1 two 3").unwrap();
    assert_eq!(code(&["query", "--sketch", &sketch, "--items-file", &junk]), 3);

    // I/O: missing input.
    assert_eq!(code(&["build", "--in", &p(&dir, "missing.bin")]), 1);
}

#[test]
fn memory_bits_for_reference_configuration() {
    let params = SketchParams::from_error(
        1e-3,
        0.003,
        tabsketch::WidthMode::PrimeAfterTwoOverEps,
        tabsketch::DepthMode::Explicit(8),
    )
    .unwrap();
    assert_eq!(
        tabsketch_cli::report::memory_bits(params.depth, params.width, 8, 1024, 1 << 30),
        (3_845_760, 570_832)
    );
}
