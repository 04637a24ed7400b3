use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fibercrypt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Files under `dir`, relative path → bytes, sorted.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// A small bit-alphabet dataset and a model trained on it, shared by tests.
struct Fixture {
    _dir: tempfile::TempDir,
    dataset: PathBuf,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let dataset = dir.path().join("bits");
        let train = dir.path().join("train");
        ok(&["dataset-gen", "--kind", "bits", "--step-mm", "2.5", "--out", s(&dataset)]);
        ok(&["train", "--dataset", s(&dataset), "--hidden", "16", "--out", s(&train)]);
        Fixture {
            model: train.join("model.json"),
            _dir: dir,
            dataset,
        }
    })
}

#[test]
fn fiber_modes_table() {
    let out = ok(&["fiber-modes"]);
    assert!(out.contains("V = 4.9630, 6 guided modes"), "{out}");
    // V = 2: NA = 2λ/(2πa)
    let na = (2.0 * 633e-9 / (2.0 * std::f64::consts::PI * 5e-6)).to_string();
    let out = ok(&["fiber-modes", "--na", &na]);
    assert!(out.contains("1 guided modes"), "{out}");
    let dir = tempfile::tempdir().unwrap();
    ok(&["fiber-modes", "--out", s(dir.path())]);
    let report = read_json(&dir.path().join("modes.json"));
    assert_eq!(report["modes"].as_array().unwrap().len(), 6);
    let out = run(&["fiber-modes", "--na=0"]);
    assert!(!out.status.success());
    let out = run(&["fiber-modes", "--na=2"]);
    assert!(!out.status.success());
}

#[test]
fn dataset_generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["dataset-gen", "--kind", "digits", "--step-mm", "10", "--seed", "3", "--out", s(d)]);
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.len(), 10 * 5 + 1);
    assert_eq!(sa, sb);
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["classes"].as_array().unwrap().len(), 10);
    assert_eq!(manifest["samples"].as_array().unwrap().len(), 50);
}

#[test]
fn dataset_generation_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = run(&["dataset-gen", "--step-mm", "10", "--out", s(&file.join("sub"))]);
    assert!(!out.status.success());
    let out = run(&["dataset-gen", "--step-mm", "3", "--out", s(&dir.path().join("d"))]);
    assert!(!out.status.success());
}

#[test]
fn training_is_reproducible_and_reported() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&["train", "--dataset", s(&f.dataset), "--hidden", "16", "--out", s(dir.path())]);
    assert_eq!(fs::read(dir.path().join("model.json")).unwrap(), fs::read(&f.model).unwrap());
    let report = read_json(&dir.path().join("report.json"));
    let acc = report["test_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let csv = fs::read_to_string(dir.path().join("confusion.csv")).unwrap();
    assert!(csv.starts_with("class,l=+1,"));
    let log = read_json(&dir.path().join("training_log.json"));
    assert!(!log.as_array().unwrap().is_empty());
}

#[test]
fn training_refuses_unbalanced_data() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("bits");
    for (rel, bytes) in snapshot(&f.dataset) {
        let p = copy.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, bytes).unwrap();
    }
    let mut manifest = read_json(&copy.join("manifest.json"));
    manifest["samples"].as_array_mut().unwrap().pop();
    fs::write(copy.join("manifest.json"), manifest.to_string()).unwrap();
    let out = run(&["train", "--dataset", s(&copy), "--out", s(&dir.path().join("m"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unbalanced"));
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn crosstalk_matrices() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&["crosstalk", "--mode", "raw", "--step-mm", "10", "--heatmap", "--out", s(dir.path())]);
    let rows = csv_rows(&dir.path().join("crosstalk_raw.csv"));
    assert_eq!(rows.len(), 21);
    for r in &rows {
        assert_eq!(r.len(), 21);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let report = read_json(&dir.path().join("crosstalk_raw.json"));
    assert!(report["mean_diagonal"].as_f64().unwrap() <= 0.3);
    let heat = fs::read(dir.path().join("crosstalk_raw.pgm")).unwrap();
    assert!(heat.starts_with(b"P5\n336 336\n255\n"));

    ok(&["crosstalk", "--mode", "nn", "--dataset", s(&f.dataset), "--model", s(&f.model), "--out", s(dir.path())]);
    for r in csv_rows(&dir.path().join("crosstalk_nn.csv")) {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let out = run(&["crosstalk", "--mode", "nn", "--out", s(dir.path())]);
    assert!(!out.status.success());
}

fn mse(a: &[u64], b: &[u64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>() / a.len() as f64
}

fn bytes(v: &Value) -> Vec<u64> {
    v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect()
}

#[test]
fn send_text_reports_consistent_mse() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["send-text", "--model", s(&f.model), "--message", "Hi!", "--strain", "ramp", "--out", s(d)]);
    }
    assert_eq!(snapshot(&a), snapshot(&b));
    let r = read_json(&a.join("report.json"));
    assert_eq!(r["sent_text"], "Hi!");
    let recomputed = mse(&bytes(&r["decoded"]), &bytes(&r["sent"]));
    assert_eq!(r["mse"].as_f64().unwrap(), recomputed);

    ok(&["send-text", "--model", s(&f.model), "--message", "", "--out", s(dir.path())]);
    let r = read_json(&dir.path().join("report.json"));
    assert!(r["mse"].is_null());
    assert!(r["symbols"].as_array().unwrap().is_empty());
}

#[test]
fn corrupted_model_still_exits_zero() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut model = read_json(&f.model);
    for w in model["params"].as_array_mut().unwrap() {
        *w = Value::from(0.0);
    }
    let n = model["params"].as_array().unwrap().len();
    // output bias favours class 0 (bit 1) for every frame
    model["params"][n - 8] = Value::from(3.0);
    let path = dir.path().join("bad.json");
    fs::write(&path, model.to_string()).unwrap();
    ok(&["send-text", "--model", s(&path), "--message", "ok", "--out", s(dir.path())]);
    let r = read_json(&dir.path().join("report.json"));
    assert!(r["mse"].as_f64().unwrap() > 0.0);
}

#[test]
fn send_image_needs_matching_classes_and_writes_pgm() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("white.pgm");
    fs::write(&img, [b"P5\n4 2\n255\n".as_slice(), &[255u8; 8]].concat()).unwrap();
    // the bit-alphabet model has no '0'/'1' classes
    let out = run(&["send-image", "--model", s(&f.model), "--image", s(&img), "--out", s(dir.path())]);
    assert!(!out.status.success());

    let digits = dir.path().join("digits");
    let train = dir.path().join("train");
    ok(&["dataset-gen", "--kind", "digits", "--step-mm", "10", "--out", s(&digits)]);
    ok(&["train", "--dataset", s(&digits), "--hidden", "4", "--epochs", "5", "--out", s(&train)]);
    ok(&["send-image", "--model", s(&train.join("model.json")), "--image", s(&img), "--out", s(dir.path())]);
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["symbols"].as_array().unwrap().len(), 8);
    for sym in r["symbols"].as_array().unwrap() {
        assert_eq!(sym["expected"], "1");
    }
    let decoded = fs::read(dir.path().join("decoded.pgm")).unwrap();
    assert!(decoded.starts_with(b"P5\n4 2\n255\n"));
    let recomputed = mse(&bytes(&r["decoded"]), &bytes(&r["sent"]));
    assert_eq!(r["mse"].as_f64().unwrap(), recomputed);
}

#[test]
fn renders() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&["render", "--charges=10", "--out", s(&p("plus.pgm"))]);
    ok(&["render", "--charges=-10", "--out", s(&p("minus.pgm"))]);
    assert_eq!(fs::read(p("plus.pgm")).unwrap(), fs::read(p("minus.pgm")).unwrap());
    ok(&["render", "--charges=3", "--stage", "encrypted", "--d-mm", "5", "--out", s(&p("e5.pgm"))]);
    ok(&["render", "--charges=3", "--stage", "encrypted", "--d-mm", "50", "--out", s(&p("e50.pgm"))]);
    let e5 = fs::read(p("e5.pgm")).unwrap();
    assert_ne!(e5, fs::read(p("e50.pgm")).unwrap());
    assert!(e5.starts_with(b"P5\n189 147\n255\n"));
    assert_eq!(e5.len(), "P5\n189 147\n255\n".len() + 189 * 147);
    ok(&["render", "--symbol", "A", "--out", s(&p("a.pgm"))]);
    assert!(!run(&["render", "--charges=3", "--stage", "sideways", "--out", s(&p("x.pgm"))]).status.success());
    assert!(!run(&["render", "--out", s(&p("x.pgm"))]).status.success());
}

#[test]
fn features_csv_has_63_columns() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("features.csv");
    ok(&["features", "--dataset", s(&f.dataset), "--out", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 8 * 20);
    for l in &lines[1..] {
        let vals: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 63);
        assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
