use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use vidapprox_core::preprocess::{write_features, write_labels};
use vidapprox_core::{Matrix, Rng};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vidapprox"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn schema(name: &str) -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Checks required keys, forbidden extra keys, JSON types, enums and numeric
/// bounds against the schema, following `$ref`s within the document and into
/// sibling schema files. Full validation lives in the Python smoke test.
fn conforms(value: &Value, sch: &Value, root: &Value, path: &str) {
    if let Some(r) = sch.get("$ref").and_then(Value::as_str) {
        return match r.strip_prefix("#/") {
            Some(pointer) => conforms(value, root.pointer(&format!("/{pointer}")).unwrap(), root, path),
            None => {
                let other = schema(r);
                conforms(value, &other, &other, path)
            }
        };
    }
    if let Some(options) = sch.get("oneOf").and_then(Value::as_array) {
        let fits: Vec<&Value> = options.iter().filter(|o| type_ok(value, resolve(o, root))).collect();
        assert_eq!(fits.len(), 1, "{path}: expected exactly one matching alternative");
        return conforms(value, fits[0], root, path);
    }
    assert!(type_ok(value, sch), "{path}: {value} has the wrong type");
    if let Some(allowed) = sch.get("enum").and_then(Value::as_array) {
        assert!(allowed.contains(value), "{path}: {value} not in {allowed:?}");
    }
    if let Some(x) = value.as_f64() {
        if let Some(lo) = sch.get("minimum").and_then(Value::as_f64) {
            assert!(x >= lo, "{path}: {x} < {lo}");
        }
        if let Some(lo) = sch.get("exclusiveMinimum").and_then(Value::as_f64) {
            assert!(x > lo, "{path}: {x} <= {lo}");
        }
        if let Some(hi) = sch.get("maximum").and_then(Value::as_f64) {
            assert!(x <= hi, "{path}: {x} > {hi}");
        }
    }
    if let (Some(obj), Some(props)) = (value.as_object(), sch.get("properties").and_then(Value::as_object)) {
        for key in sch.get("required").and_then(Value::as_array).into_iter().flatten() {
            assert!(obj.contains_key(key.as_str().unwrap()), "{path}: missing {key}");
        }
        if sch.get("additionalProperties") == Some(&Value::Bool(false)) {
            for key in obj.keys() {
                assert!(props.contains_key(key), "{path}: unexpected key {key}");
            }
        }
        for (key, v) in obj {
            if let Some(ps) = props.get(key) {
                conforms(v, ps, root, &format!("{path}.{key}"));
            }
        }
    }
    if let (Some(items), Some(is)) = (value.as_array(), sch.get("items")) {
        for (i, v) in items.iter().enumerate() {
            conforms(v, is, root, &format!("{path}[{i}]"));
        }
    }
}

/// Follows an in-document `$ref`; cross-file references are taken to be objects.
fn resolve<'a>(sch: &'a Value, root: &'a Value) -> &'a Value {
    match sch.get("$ref").and_then(Value::as_str) {
        Some(r) if r.starts_with("#/") => root.pointer(&r[1..]).unwrap(),
        _ => sch,
    }
}

fn type_ok(value: &Value, sch: &Value) -> bool {
    let Some(t) = sch.get("type") else {
        return match sch.get("$ref") {
            Some(_) => value.is_object(),
            None => true,
        };
    };
    let one = |t: &str| match t {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "integer" => value.is_u64() || value.is_i64(),
        "number" => value.is_number(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        _ => false,
    };
    match t {
        Value::String(t) => one(t),
        Value::Array(ts) => ts.iter().any(|t| one(t.as_str().unwrap())),
        _ => false,
    }
}

/// Six frames in three well separated pairs, labeled 0,0,1,1,2,2.
fn six_frames(dir: &Path) -> (PathBuf, PathBuf) {
    let f = dir.join("six.features.txt");
    let l = dir.join("six.labels.txt");
    let m = Matrix::from_rows(&[
        [1.0, 0.1, 0.2],
        [1.1, 0.1, 0.2],
        [0.1, 1.0, 0.3],
        [0.2, 1.1, 0.3],
        [0.3, 0.2, 1.0],
        [0.3, 0.1, 1.2],
    ])
    .unwrap();
    write_features(&f, &m).unwrap();
    write_labels(&l, &[0, 0, 1, 1, 2, 2]).unwrap();
    (f, l)
}

/// A small noisy video with a returning action.
fn small_video(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let f = dir.join(format!("v{seed}.features.txt"));
    let l = dir.join(format!("v{seed}.labels.txt"));
    let centers = [[3.0, 1.0, 0.5], [1.0, 3.0, 0.5], [0.5, 1.0, 3.0]];
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, len) in [(0usize, 8), (1, 10), (2, 10), (0, 6)] {
        for _ in 0..len {
            rows.push(centers[c].map(|x| x + 0.1 * rng.normal()));
            labels.push(c as i64);
        }
    }
    write_features(&f, &Matrix::from_rows(&rows).unwrap()).unwrap();
    write_labels(&l, &labels).unwrap();
    (f, l)
}

#[test]
fn uniform_baseline_splits_six_frames_in_pairs() {
    let d = TempDir::new().unwrap();
    let (f, l) = six_frames(d.path());
    let out = d.path().join("seg.json");
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--baseline", "uniform", "--out", s(&out)]);
    let v = read_json(&out);
    assert_eq!(v["frame_labels"], serde_json::json!([0, 0, 1, 1, 2, 2]));
    assert_eq!(v["report"]["mof"], 1.0);
    assert_eq!(v["report"]["iou"], 1.0);
    assert_eq!(v["report"]["f1"], 1.0);
    assert_eq!(v["report"]["boundary_accuracy"], 1.0);
    assert_eq!(v["settings"]["method"], "uniform");
    assert_eq!(v["kernel"], Value::Null);
}

#[test]
fn no_train_output_equals_zero_epoch_output() {
    let d = TempDir::new().unwrap();
    let (f, l) = small_video(d.path(), 1);
    let a = d.path().join("a.json");
    let b = d.path().join("b.json");
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--no-train", "--out", s(&a)]);
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--epochs", "0", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn eval_recomputes_the_embedded_report() {
    let d = TempDir::new().unwrap();
    let (f, l) = small_video(d.path(), 2);
    let seg = d.path().join("seg.json");
    let rep = d.path().join("rep.json");
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--epochs", "20", "--out", s(&seg)]);
    ok(&["eval", "--pred", s(&seg), "--labels", s(&l), "--out", s(&rep)]);
    let embedded = &read_json(&seg)["report"];
    let fresh = read_json(&rep);
    for key in ["mof", "iou", "f1", "boundary_accuracy"] {
        let (a, b) = (embedded[key].as_f64().unwrap(), fresh[key].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-12, "{key}: {a} vs {b}");
    }
    assert_eq!(embedded["label_map"], fresh["label_map"]);
}

#[test]
fn eval_of_ground_truth_scores_one() {
    let d = TempDir::new().unwrap();
    let (f, l) = six_frames(d.path());
    let seg = d.path().join("seg.json");
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--baseline", "uniform", "--out", s(&seg)]);
    // relabel the stored prediction; the matching absorbs it
    let mut v = read_json(&seg);
    v["frame_labels"] = serde_json::json!([2, 2, 0, 0, 1, 1]);
    fs::write(&seg, serde_json::to_string(&v).unwrap()).unwrap();
    let rep = d.path().join("rep.json");
    ok(&["eval", "--pred", s(&seg), "--labels", s(&l), "--out", s(&rep)]);
    let r = read_json(&rep);
    for key in ["mof", "iou", "f1", "boundary_accuracy"] {
        assert_eq!(r[key], 1.0, "{key}");
    }
}

#[test]
fn excluding_an_absent_background_changes_nothing() {
    let d = TempDir::new().unwrap();
    let (f, l) = small_video(d.path(), 3);
    let a = d.path().join("a.json");
    let b = d.path().join("b.json");
    let common = ["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--epochs", "5"];
    ok(&[&common[..], &["--out", s(&a)]].concat());
    ok(&[&common[..], &["--exclude-bg", "9", "--out", s(&b)]].concat());
    let (ra, rb) = (read_json(&a)["report"].clone(), read_json(&b)["report"].clone());
    for key in ["mof", "iou", "f1", "boundary_accuracy", "n_evaluated"] {
        assert_eq!(ra[key], rb[key], "{key}");
    }
}

#[test]
fn excluding_a_present_background_drops_its_frames() {
    let d = TempDir::new().unwrap();
    let (f, l) = small_video(d.path(), 3);
    let out = d.path().join("a.json");
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--epochs", "5", "--exclude-bg", "0", "--out", s(&out)]);
    let r = &read_json(&out)["report"];
    assert_eq!(r["n_evaluated"], 20);
    assert_eq!(r["excluded_background"], 0);
    assert!(r["per_class"].as_array().unwrap().iter().all(|c| c["class"] != 0));
}

#[test]
fn outputs_follow_the_schemas() {
    let d = TempDir::new().unwrap();
    let (f, l) = small_video(d.path(), 4);
    let with = d.path().join("with.json");
    let without = d.path().join("without.json");
    let km = d.path().join("km.json");
    let rep = d.path().join("rep.json");
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--epochs", "3", "--out", s(&with)]);
    ok(&["segment", "--features", s(&f), "--m", "3", "--epochs", "3", "--out", s(&without)]);
    ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--baseline", "kmeans", "--out", s(&km)]);
    ok(&["eval", "--pred", s(&with), "--labels", s(&l), "--out", s(&rep)]);
    let seg_schema = schema("segmentation.schema.json");
    for p in [&with, &without, &km] {
        conforms(&read_json(p), &seg_schema, &seg_schema, &p.display().to_string());
    }
    let rep_schema = schema("eval_report.schema.json");
    conforms(&read_json(&rep), &rep_schema, &rep_schema, "report");
    assert_eq!(read_json(&without)["report"], Value::Null);
}

#[test]
fn aggregate_writes_the_documented_columns() {
    let d = TempDir::new().unwrap();
    let mut inputs = Vec::new();
    for seed in [5, 6] {
        let (f, l) = small_video(d.path(), seed);
        let out = d.path().join(format!("s{seed}.json"));
        ok(&["segment", "--features", s(&f), "--labels", s(&l), "--m", "3", "--epochs", "3", "--out", s(&out)]);
        inputs.push(out);
    }
    let csv = d.path().join("agg.csv");
    ok(&["eval", "--aggregate", s(&inputs[0]), s(&inputs[1]), "--out", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "video,m_used,mof,iou,f1,boundary_accuracy");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("mean,,"));
}

#[test]
fn gen_writes_every_split_deterministically() {
    let d = TempDir::new().unwrap();
    let a = d.path().join("a");
    let b = d.path().join("b");
    for out in [&a, &b] {
        ok(&["gen", "--out", s(out), "--seed", "3", "--videos", "2"]);
    }
    for split in ["train", "val", "test"] {
        let mut names: Vec<String> = fs::read_dir(a.join(split))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            ["video_000.features.txt", "video_000.labels.txt", "video_001.features.txt", "video_001.labels.txt"]
        );
        for n in &names {
            assert_eq!(fs::read(a.join(split).join(n)).unwrap(), fs::read(b.join(split).join(n)).unwrap());
        }
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn randm_is_independent_of_the_worker_count() {
    let d = TempDir::new().unwrap();
    let vids = d.path().join("vids");
    fs::create_dir(&vids).unwrap();
    for seed in 0..4 {
        small_video(&vids, seed);
    }
    let one = d.path().join("one.csv");
    let four = d.path().join("four.csv");
    let common = ["randm", "--features-dir", s(&vids), "--mbar", "3", "--mode", "real", "--seed", "2"];
    ok(&[&common[..], &["--jobs", "1", "--out", s(&one)]].concat());
    ok(&[&common[..], &["--jobs", "4", "--out", s(&four)]].concat());
    let text = fs::read_to_string(&one).unwrap();
    assert_eq!(text, fs::read_to_string(&four).unwrap());
    assert!(text.starts_with("video,m_drawn,m_used,clamped,mof,iou,f1,boundary_accuracy,distinct_labels\n"));
    assert_eq!(text.lines().count(), 5);
}

fn expect_failure(args: &[&str], code: i32, kind: &str) {
    let out = run(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("error[{kind}]")), "{args:?}: {err}");
}

#[test]
fn failures_map_to_exit_codes() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("o.json");
    let missing = d.path().join("missing.txt");
    expect_failure(&["segment", "--features", s(&missing), "--m", "2", "--out", s(&out)], 2, "io");

    let same = d.path().join("same.features.txt");
    write_features(&same, &Matrix::from_fn(10, 4, |_, j| j as f64 + 1.0)).unwrap();
    expect_failure(&["segment", "--features", s(&same), "--m", "2", "--out", s(&out)], 3, "degenerate-scale");

    let (f, _) = six_frames(d.path());
    expect_failure(&["segment", "--features", s(&f), "--m", "7", "--out", s(&out)], 3, "argument");

    let zero = d.path().join("zero.features.txt");
    write_features(&zero, &Matrix::from_rows(&[[1.0, 2.0], [0.0, 0.0], [2.0, 1.0]]).unwrap()).unwrap();
    expect_failure(&["segment", "--features", s(&zero), "--m", "2", "--normalize", "--out", s(&out)], 3, "degenerate-input");

    let bad = d.path().join("bad.features.txt");
    fs::write(&bad, "1,2\n3,x\n").unwrap();
    expect_failure(&["segment", "--features", s(&bad), "--m", "1", "--out", s(&out)], 2, "parse");

    let clap = run(&["segment", "--bogus"]);
    assert_eq!(clap.status.code(), Some(2));
    assert!(!out.exists());
}
