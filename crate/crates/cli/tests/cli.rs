use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_passive-ph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{key}` line in:\n{text}"));
    line[key.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

fn catalog(dir: &Path, name: &str) -> String {
    let path = dir.join(format!("{name}.json"));
    let out = run(&["gen", "catalog", "--system", name, "--output", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn nearest_on_the_standard_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = catalog(dir.path(), "boyd-standard");
    let output = dir.path().join("out.json");
    let trace = dir.path().join("trace.csv");
    let out = run(&[
        "nearest", "--input", &input, "--mode", "standard", "--init", "standard",
        "--output", output.to_str().unwrap(), "--trace", trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let obj = value_after(&text, "objective");
    assert!(obj <= 0.45 && obj > 0.4, "objective {obj}");
    assert!(text.contains("relative_error_pct"));
    assert!(output.exists());
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("iteration,seconds,objective,step,restart"));
}

#[test]
fn weighted_objective() {
    let dir = tempfile::tempdir().unwrap();
    let input = catalog(dir.path(), "boyd-standard");
    let out = run(&["nearest", "--input", &input, "--mode", "standard", "--weights", "1.75,1.75,0.25,0.25"]);
    assert!(out.status.success());
    let obj = value_after(&stdout(&out), "objective");
    assert!(obj <= 0.14, "weighted objective {obj}");
}

#[test]
fn strict_bounds_give_a_certified_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = catalog(dir.path(), "boyd-standard");
    let output = dir.path().join("strict.json");
    let out = run(&[
        "nearest", "--input", &input, "--mode", "descriptor", "--deltaK", "1e-6", "--nuZ", "1e-6",
        "--max-seconds", "10", "--output", output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report.json");
    let out = run(&["check", "--input", output.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("PR certificate: KYP LMIs satisfied with X=Q"), "{text}");
    assert!(text.contains("strict certificate"), "{text}");
    assert!(text.contains("admissible true"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["admissible"], serde_json::Value::Bool(true));
}

#[test]
fn check_reports_the_index_two_pencil() {
    let dir = tempfile::tempdir().unwrap();
    let input = catalog(dir.path(), "index-two-descriptor");
    let out = run(&["check", "--input", &input]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("index_le_one false"), "{text}");
    assert!(text.contains("infinite_eigenvalues 2"), "{text}");
    let finite: Vec<&str> = text.lines().filter(|l| l.starts_with("finite_eigenvalue")).collect();
    assert_eq!(finite.len(), 2);
    for line in finite {
        assert!(line.contains("-0.500000"), "{line}");
        assert!(line.contains("1.414214j"), "{line}");
    }
}

#[test]
fn check_flags_the_standard_example_as_not_passive() {
    let dir = tempfile::tempdir().unwrap();
    let input = catalog(dir.path(), "boyd-standard");
    let out = run(&["check", "--input", &input]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("grid evidence against PR"));
}

#[test]
fn gen_msd_writes_a_certified_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen", "msd", "--p", "10", "--m", "4", "--eps", "0.1", "--seed", "7", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = dir.path().join("msd_p10_m4_s7_true.json");
    let perturbed = dir.path().join("msd_p10_m4_s7_perturbed.json");
    assert!(truth.exists() && perturbed.exists());
    let out = run(&["check", "--input", truth.to_str().unwrap()]);
    assert!(stdout(&out).contains("PR certificate: KYP LMIs satisfied with X=Q"), "{}", stdout(&out));
    let out = run(&["nearest", "--input", perturbed.to_str().unwrap(), "--init", "true", "--max-iters", "200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_random_hits_the_requested_distance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen", "random", "--n", "8", "--m", "2", "--eps-rel", "0.1", "--seed", "1", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dist = value_after(&stdout(&out), "relative_distance");
    assert!((dist - 0.1).abs() <= 1e-4 * 0.1 + 1e-12, "distance {dist}");
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sys_path = catalog(dir.path(), "boyd-standard");
    let config = serde_json::json!({
        "instances": [
            { "name": "ex61", "mode": "standard", "source": { "kind": "catalog", "system": "boyd-standard" } },
            { "name": "ex61-file", "mode": "descriptor", "source": { "kind": "file", "path": sys_path } },
            { "name": "msd", "mode": "descriptor", "source": { "kind": "msd", "p": 3, "m": 2, "eps": 0.1, "seed": 0 } }
        ],
        "inits": ["standard", "lmi-solve", "random"],
        "random_seeds": [0, 1],
        "max_seconds": 2.0,
        "max_iters": 500
    });
    let cfg_path = dir.path().join("bench.json");
    std::fs::write(&cfg_path, config.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["bench", "--config", cfg_path.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cells = std::fs::read_to_string(out_dir.join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 3 * 4);
    assert!(out_dir.join("table.csv").exists());
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("traces").read_dir().unwrap().count() >= 12);
}

#[test]
fn exit_codes() {
    let out = run(&["nearest", "--input", "/nonexistent/system.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/system.json"));

    let dir = tempfile::tempdir().unwrap();
    let input = catalog(dir.path(), "index-two-descriptor");
    let out = run(&["nearest", "--input", &input, "--mode", "standard"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E = I"));

    let out = run(&["nearest", "--input", &input, "--weights", "1,2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn matrix_market_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, rows: usize, cols: usize, vals: &[f64]| {
        let mut text = format!("%%MatrixMarket matrix array real general\n{rows} {cols}\n");
        for v in vals {
            text.push_str(&format!("{v}\n"));
        }
        std::fs::write(dir.path().join(name), text).unwrap();
    };
    write("A.mtx", 2, 2, &[-1.0, 0.0, 0.5, -2.0]);
    write("B.mtx", 2, 1, &[1.0, 1.0]);
    write("C.mtx", 1, 2, &[1.0, 0.5]);
    write("D.mtx", 1, 1, &[1.0]);
    let manifest = serde_json::json!({
        "mode": "standard",
        "matrices": { "A": "A.mtx", "B": "B.mtx", "C": "C.mtx", "D": "D.mtx" }
    });
    let path = dir.path().join("sys.manifest.json");
    std::fs::write(&path, manifest.to_string()).unwrap();
    let out = run(&["check", "--input", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("asymptotically_stable true"));
}
