use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use range_majority::oracle::naive_majority;
use range_majority::Rational;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn rmaj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmaj"))
        .args(args)
        .env("RANGE_MAJ_LOG", "off")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn build(dir: &TempDir, input: &Path, extra: &[&str]) -> (PathBuf, Output) {
    let snap = dir.path().join("index.snapshot");
    let mut args = vec!["build", "--input", path(input), "--snapshot", path(&snap)];
    args.extend_from_slice(extra);
    (snap.clone(), rmaj(&args))
}

/// Every line is a `{colour, count, fraction, m}` object whose fraction
/// matches its counts and exceeds `alpha`.
fn check_rows(text: &str, alpha: f64) {
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["colour", "count", "fraction", "m"], "{line}");
        assert!(obj["colour"].is_string());
        let (count, m) = (obj["count"].as_u64().unwrap(), obj["m"].as_u64().unwrap());
        let fraction = obj["fraction"].as_f64().unwrap();
        assert_eq!(fraction, count as f64 / m as f64);
        assert!(fraction > alpha, "{line}");
    }
}

#[test]
fn build_and_query_golden() {
    let dir = TempDir::new().unwrap();
    let (snap, out) = build(&dir, &data("events.csv"), &["--header", "--alpha", "1/3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), golden("build.out"));
    for ((lo, hi), file) in [(("10", "100"), "query_all.out"), (("15", "75"), "query_middle.out"), (("65", "100"), "query_tail.out")] {
        let out = rmaj(&["query", "--snapshot", path(&snap), lo, hi]);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        assert_eq!(text, golden(file), "query {lo} {hi}");
        check_rows(&text, 1.0 / 3.0);
    }
}

#[test]
fn empty_window_and_bad_ranges() {
    let dir = TempDir::new().unwrap();
    let (snap, _) = build(&dir, &data("events.csv"), &["--header"]);
    let empty = rmaj(&["query", "--snapshot", path(&snap), "200", "300"]);
    assert_eq!((empty.status.code(), stdout(&empty).as_str()), (Some(0), ""));
    let below = rmaj(&["query", "--snapshot", path(&snap), "-50", "-1"]);
    assert_eq!((below.status.code(), stdout(&below).as_str()), (Some(0), ""));
    for (lo, hi) in [("100", "10"), ("x", "10"), ("1.5", "3")] {
        let out = rmaj(&["query", "--snapshot", path(&snap), lo, hi]);
        assert_eq!(out.status.code(), Some(2), "{lo} {hi}: {}", stderr(&out));
    }
    let missing = rmaj(&["query", "--snapshot", path(&dir.path().join("absent")), "1", "2"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn jsonl_input_matches_csv() {
    let dir = TempDir::new().unwrap();
    let csv_snap = dir.path().join("csv.snapshot");
    let json_snap = dir.path().join("json.snapshot");
    let a = rmaj(&["build", "--input", path(&data("events.csv")), "--snapshot", path(&csv_snap), "--header"]);
    let b = rmaj(&["build", "--input", path(&data("events.jsonl")), "--snapshot", path(&json_snap)]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(std::fs::read_to_string(csv_snap).unwrap(), std::fs::read_to_string(json_snap).unwrap());
}

#[test]
fn input_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    let (_, out) = build(&dir, &data("malformed.csv"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 17"), "{}", stderr(&out));
    let (_, out) = build(&dir, &data("events.csv"), &[]);
    assert_eq!(out.status.code(), Some(2), "header line read as data");
    assert!(stderr(&out).contains("line 1"));
    let (_, out) = build(&dir, &data("duplicate.csv"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    let (_, out) = build(&dir, &data("events.csv"), &["--header", "--alpha", "3/2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plane_mode() {
    let dir = TempDir::new().unwrap();
    let (snap, out) = build(&dir, &data("plane.csv"), &["--mode", "2d", "--alpha", "1/2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = rmaj(&["query", "--snapshot", path(&snap), "1", "4", "1", "3"]);
    assert_eq!(stdout(&out), golden("query_plane.out"));
    let missing_y = rmaj(&["query", "--snapshot", path(&snap), "1", "4"]);
    assert_eq!(missing_y.status.code(), Some(2));
    let (_, out) = build(&dir, &data("plane.csv"), &["--mode", "int"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn array_mode_orders_by_timestamp() {
    let dir = TempDir::new().unwrap();
    let (snap, out) = build(&dir, &data("array.csv"), &["--mode", "array", "--alpha", "1/2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let q = |i: &str, j: &str| stdout(&rmaj(&["query", "--snapshot", path(&snap), i, j]));
    assert_eq!(q("1", "3"), "{\"colour\":\"a\",\"count\":2,\"fraction\":0.6666666666666666,\"m\":3}\n");
    assert_eq!(q("3", "5"), "");
    assert_eq!(q("2", "4"), "{\"colour\":\"a\",\"count\":2,\"fraction\":0.6666666666666666,\"m\":3}\n");
    let out = rmaj(&["query", "--snapshot", path(&snap), "0", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replay_golden_and_expectations() {
    let dir = TempDir::new().unwrap();
    let save = dir.path().join("after.snapshot");
    let out = rmaj(&["replay", "--alpha", "1/2", "--input", path(&data("stream.jsonl")), "--save", path(&save)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), golden("replay.out"));
    let saved = std::fs::read_to_string(&save).unwrap();
    assert_eq!(saved.lines().count(), 5);

    let wrong = dir.path().join("wrong.jsonl");
    std::fs::write(&wrong, "{\"op\":\"insert\",\"timestamp\":1,\"category\":\"x\"}\n{\"op\":\"query\",\"lo\":0,\"hi\":9,\"expect\":[\"y\"]}\n").unwrap();
    assert_eq!(rmaj(&["replay", "--input", path(&wrong)]).status.code(), Some(1));

    let missing = dir.path().join("missing.jsonl");
    std::fs::write(&missing, "{\"op\":\"delete\",\"timestamp\":4}\n").unwrap();
    assert_eq!(rmaj(&["replay", "--input", path(&missing)]).status.code(), Some(3));

    let garbled = dir.path().join("garbled.jsonl");
    std::fs::write(&garbled, "{\"op\":\"insert\",\"timestamp\":1,\"category\":\"x\"}\n{\"op\":\"teleport\"}\n").unwrap();
    let out = rmaj(&["replay", "--input", path(&garbled)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"));
}

#[test]
fn replay_matches_oracle_on_generated_stream() {
    let dir = TempDir::new().unwrap();
    let alpha = Rational::new(1, 5);
    let mut records: Vec<(i64, String)> = Vec::new();
    let mut stream = String::new();
    let mut queries = 0;
    for i in 0..600i64 {
        let x = (i * 7_919) % 1_009;
        if i % 4 == 3 {
            let (lo, hi) = ((i * 31) % 1_009, (i * 31) % 1_009 + (i * 13) % 500);
            let want = naive_majority(&records, &lo, &hi, alpha);
            stream += &format!("{{\"op\":\"query\",\"lo\":{lo},\"hi\":{hi},\"expect\":{}}}\n", serde_json::to_string(&want).unwrap());
            queries += 1;
        } else if records.iter().any(|r| r.0 == x) {
            records.retain(|r| r.0 != x);
            stream += &format!("{{\"op\":\"delete\",\"timestamp\":{x}}}\n");
        } else {
            let colour = format!("c{}", (i * i) % 11 % 4);
            stream += &format!("{{\"op\":\"insert\",\"timestamp\":{x},\"category\":\"{colour}\"}}\n");
            records.push((x, colour));
            records.sort();
        }
    }
    let file = dir.path().join("generated.jsonl");
    std::fs::write(&file, stream).unwrap();
    let out = rmaj(&["replay", "--alpha", "1/5", "--input", path(&file)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), queries);
}

#[test]
fn snapshot_reload_answers_like_live_index() {
    let dir = TempDir::new().unwrap();
    let (snap, _) = build(&dir, &data("events.csv"), &["--header", "--alpha", "1/4"]);
    let mut stream = String::new();
    for line in std::fs::read_to_string(data("events.csv")).unwrap().lines().skip(1) {
        let (t, c) = line.split_once(',').unwrap();
        stream += &format!("{{\"op\":\"insert\",\"timestamp\":{t},\"category\":\"{c}\"}}\n");
    }
    let windows = [(0, 200), (10, 40), (35, 95), (55, 56), (60, 100)];
    for (lo, hi) in windows {
        stream += &format!("{{\"op\":\"query\",\"lo\":{lo},\"hi\":{hi}}}\n");
    }
    let file = dir.path().join("live.jsonl");
    std::fs::write(&file, stream).unwrap();
    let live = stdout(&rmaj(&["replay", "--alpha", "1/4", "--input", path(&file)]));
    let live: Vec<Value> = live.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(live.len(), windows.len());
    for ((lo, hi), answer) in windows.iter().zip(&live) {
        let reloaded = stdout(&rmaj(&["query", "--snapshot", path(&snap), &lo.to_string(), &hi.to_string()]));
        check_rows(&reloaded, 0.25);
        let rows: Vec<Value> = reloaded.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(&Value::Array(rows), &answer["colours"], "window {lo} {hi}");
    }
}

#[test]
fn selftest_is_deterministic() {
    let a = rmaj(&["selftest", "--seed", "5", "--iters", "600"]);
    let b = rmaj(&["selftest", "--seed", "5", "--iters", "600"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let lines: Vec<Value> = stdout(&a).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 16);
    assert!(lines.iter().all(|l| l["ok"] == Value::Bool(true) && l["mismatches"] == 0));
}

#[test]
fn bench_has_one_row_per_cell() {
    let out = rmaj(&["bench", "--sizes", "200,800", "--alphas", "1/2,1/10,1/3", "--iters", "50"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,alpha,op,p50_ns,p99_ns,rebuild_work"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 3 * 3);
    let mut cells: Vec<(&str, &str, &str)> = rows.iter().map(|r| (r[0], r[1], r[2])).collect();
    cells.sort_unstable();
    cells.dedup();
    assert_eq!(cells.len(), rows.len());
    assert!(rows.iter().all(|r| r.len() == 6 && r[3].parse::<u64>().is_ok() && r[5].parse::<f64>().is_ok()));
}
