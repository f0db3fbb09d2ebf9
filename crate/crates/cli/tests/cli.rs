//! End-to-end runs of the `ihpe` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FIXTURES: [&str; 4] = ["affine_ppm", "bilinear_tseng", "l1_fb", "box_tseng"];

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.toml"))
}

fn ihpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ihpe")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `text` as `name` in `dir` and returns its path.
fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn solve(config: &Path, out: &Path) -> Output {
    ihpe(&["solve", "--config", path_str(config), "--out", path_str(out)])
}

#[test]
fn every_fixture_solves_and_certifies() {
    let dir = TempDir::new().unwrap();
    for name in FIXTURES {
        let cfg = fixture(name);
        let out = solve(&cfg, dir.path());
        assert_eq!(code(&out), 0, "{name}: {}{}", stdout(&out), stderr(&out));
        for ext in ["jsonl", "csv", "summary.json", "bounds.json"] {
            assert!(dir.path().join(format!("{name}.{ext}")).is_file(), "{name}.{ext}");
        }
        let trace = dir.path().join(format!("{name}.jsonl"));
        let cert = ihpe(&["certify", "--trace", path_str(&trace), "--config", path_str(&cfg)]);
        assert_eq!(code(&cert), 0, "{name}: {}", stdout(&cert));
        assert!(stdout(&cert).ends_with("certified\n"));
        assert!(!stdout(&cert).contains("FAIL"));
        // Without the config the header alone is enough.
        let cert = ihpe(&["certify", "--trace", path_str(&trace)]);
        assert_eq!(code(&cert), 0, "{name}");
    }
}

#[test]
fn affine_fixture_summary_records_convergence() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&solve(&fixture("affine_ppm"), dir.path())), 0);
    let text = fs::read_to_string(dir.path().join("affine_ppm.summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["verdict"]["status"], "converged");
    assert!(v["final_norm_v"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["bound_violations"], 0);
    assert!(v["worst_bound_utilization"].as_f64().unwrap() <= 1.0);
    assert!(v["label"].as_str().unwrap().contains("n=50"));
}

#[test]
fn repeated_solves_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for name in ["l1_fb", "bilinear_tseng"] {
        assert_eq!(code(&solve(&fixture(name), a.path())), 0);
        assert_eq!(code(&solve(&fixture(name), b.path())), 0);
        for ext in ["jsonl", "csv", "bounds.json"] {
            let file = format!("{name}.{ext}");
            assert_eq!(fs::read(a.path().join(&file)).unwrap(), fs::read(b.path().join(&file)).unwrap(), "{file}");
        }
    }
}

#[test]
fn seed_flag_changes_the_problem() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = fixture("l1_fb");
    assert_eq!(code(&solve(&cfg, a.path())), 0);
    let out = ihpe(&["solve", "--config", path_str(&cfg), "--out", path_str(b.path()), "--seed", "12"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("seed=12"));
    let read = |d: &TempDir| fs::read(d.path().join("l1_fb.jsonl")).unwrap();
    assert_ne!(read(&a), read(&b));
    // The seed recorded in the label lets certify rebuild the same problem.
    let trace = b.path().join("l1_fb.jsonl");
    let cert = ihpe(&["certify", "--trace", path_str(&trace), "--config", path_str(&cfg)]);
    assert_eq!(code(&cert), 0, "{}", stdout(&cert));
}

#[test]
fn corrupted_eps_fails_certification_at_that_step() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("l1_fb");
    assert_eq!(code(&solve(&cfg, dir.path())), 0);
    let trace = dir.path().join("l1_fb.jsonl");
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    // Line 0 is the header; line k holds step k.
    let k = 5;
    let mut rec: serde_json::Value = serde_json::from_str(&lines[k]).unwrap();
    let eps = rec["eps"].as_f64().unwrap();
    let gap_sq = rec["gap_sq"].as_f64().unwrap();
    let lambda = rec["lambda"].as_f64().unwrap();
    // Push ε past what the criterion leaves room for.
    rec["eps"] = serde_json::json!(eps + gap_sq / lambda);
    lines[k] = rec.to_string();
    let bad = write(dir.path(), "bad.jsonl", &(lines.join("\n") + "\n"));
    let cert = ihpe(&["certify", "--trace", path_str(&bad), "--config", path_str(&cfg)]);
    assert_eq!(code(&cert), 2, "{}", stdout(&cert));
    assert!(stdout(&cert).contains(&format!("FAIL error criterion (first failure at k = {k})")), "{}", stdout(&cert));
    assert!(stdout(&cert).contains("NOT certified"));
}

#[test]
fn mismatched_config_is_reported() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&solve(&fixture("l1_fb"), dir.path())), 0);
    let other = fs::read_to_string(fixture("l1_fb")).unwrap().replace("alpha = 0.15", "alpha = 0.1");
    let other = write(dir.path(), "other.toml", &other);
    let trace = dir.path().join("l1_fb.jsonl");
    let cert = ihpe(&["certify", "--trace", path_str(&trace), "--config", path_str(&other)]);
    assert_eq!(code(&cert), 2);
    assert!(stdout(&cert).contains("MISMATCH α"), "{}", stdout(&cert));
}

#[test]
fn empty_trace_is_a_vacuous_pass_with_a_warning() {
    let dir = TempDir::new().unwrap();
    let empty = write(dir.path(), "empty.jsonl", "");
    let out = ihpe(&["certify", "--trace", path_str(&empty)]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning: trace is empty"));
}

#[test]
fn malformed_trace_reports_the_line() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&solve(&fixture("l1_fb"), dir.path())), 0);
    let text = fs::read_to_string(dir.path().join("l1_fb.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "{\"type\":\"step\",\"k\":";
    let bad = write(dir.path(), "bad.jsonl", &lines.join("\n"));
    let out = ihpe(&["certify", "--trace", path_str(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn alpha_not_below_beta_is_a_parameter_error() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("affine_ppm")).unwrap().replace("alpha = 0.3", "alpha = 0.4");
    let cfg = write(dir.path(), "bad.toml", &text);
    let out = solve(&cfg, dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("q(α) ≤ 0 or α ≥ β"), "{}", stderr(&out));
    assert!(!dir.path().join("affine_ppm.jsonl").exists());
}

#[test]
fn tseng_step_above_cap_names_the_cap() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("bilinear_tseng"))
        .unwrap()
        .replace("lambda = { rule = \"at_cap\" }", "lambda = { rule = \"constant\", value = 100.0 }");
    let cfg = write(dir.path(), "bad.toml", &text);
    let out = solve(&cfg, dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("σ/L"), "{}", stderr(&out));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("affine_ppm")).unwrap().replace("[stopping]", "[stopping]\ntolerance = 1");
    let cfg = write(dir.path(), "bad.toml", &text);
    let out = solve(&cfg, dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("tolerance"), "{}", stderr(&out));
}

#[test]
fn iteration_cap_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("bilinear_tseng")).unwrap().replace("max_iter = 200000", "max_iter = 10");
    let cfg = write(dir.path(), "capped.toml", &text);
    let out = solve(&cfg, dir.path());
    assert_eq!(code(&out), 3, "{}", stdout(&out));
    assert!(stdout(&out).contains("CapReached"));
    // A capped run is still a valid trace.
    let trace = dir.path().join("bilinear_tseng.jsonl");
    assert_eq!(code(&ihpe(&["certify", "--trace", path_str(&trace)])), 0);
}

#[test]
fn params_reports_known_step_sizes() {
    let out = ihpe(&["params", "--sigma", "0", "--sigma", "0.99", "--beta", "0.3333333333333333"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    let tau_col = headers.iter().position(|h| h == "tau").unwrap();
    let taus: Vec<f64> = rdr.records().map(|r| r.unwrap()[tau_col].parse().unwrap()).collect();
    assert_eq!(taus.len(), 2);
    assert_eq!(taus[0], 1.0);
    assert!((taus[1] - 1.0 / 1.99).abs() <= 1e-12, "{}", taus[1]);
}

#[test]
fn params_rejects_alpha_at_beta() {
    let out = ihpe(&["params", "--sigma", "0.5", "--beta", "0.3", "--alpha", "0.3"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("q(α) ≤ 0 or α ≥ β"));
}

#[test]
fn tau_curve_covers_every_sigma() {
    let dir = TempDir::new().unwrap();
    let out = ihpe(&["params", "--curve", "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.path().join("tau_curve.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<(f64, f64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5 * 99);
    for (sigma, _, tau) in &rows {
        assert!(*tau > 0.0 && *tau <= 1.0 && (1.0 + sigma) * tau < 2.0);
    }
}

#[test]
fn bench_is_sorted_and_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = fixture("sweep");
    for d in [&a, &b] {
        let out = ihpe(&["bench", "--config", path_str(&cfg), "--out", path_str(d.path())]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let ta = fs::read_to_string(a.path().join("bench.csv")).unwrap();
    assert_eq!(ta, fs::read_to_string(b.path().join("bench.csv")).unwrap());
    let mut rdr = csv::Reader::from_reader(ta.as_bytes());
    let keys: Vec<(f64, f64, u64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            assert_eq!(&r[5], "converged", "{r:?}");
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[4].parse().unwrap())
        })
        .collect();
    assert_eq!(keys.len(), 3 * 2 * 2);
    assert!(keys.windows(2).all(|w| w[0].partial_cmp(&w[1]) == Some(std::cmp::Ordering::Less)));
}

#[test]
fn bench_records_failed_cells_and_continues() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("sweep"))
        .unwrap()
        .replace("alpha = [0.0, 0.1, 0.3]", "alpha = [0.1, 0.45]")
        .replace("sigma = [0.5, 0.9]", "sigma = [0.5]")
        .replace("seed = [1, 2]", "seed = [1]");
    let cfg = write(dir.path(), "sweep.toml", &text);
    let out = ihpe(&["bench", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][5], "converged");
    assert_eq!(&rows[1][5], "error");
    assert!(rows[1][10].contains("α ≥ β"), "{:?}", rows[1]);
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("sweep")).unwrap().replace("sigma = [0.5, 0.9]", "sigma = []");
    let cfg = write(dir.path(), "sweep.toml", &text);
    let out = ihpe(&["bench", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`sigma` is empty"));
    let out = ihpe(&["bench", "--config", path_str(&fixture("affine_ppm"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("[sweep]"));
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(code(&ihpe(&["solve"])), 1);
    assert_eq!(code(&ihpe(&["frobnicate"])), 1);
    assert_eq!(code(&ihpe(&["params"])), 1);
    assert_eq!(code(&ihpe(&["--help"])), 0);
}
