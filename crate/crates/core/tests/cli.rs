//! End-to-end tests of the command-line surface: exit codes, report
//! artifacts, and determinism of rendered outputs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_handscore"));
    c.env_remove("HANDSCORE_CONFIG");
    c
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("no exit code")
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--version").output().unwrap()), 0);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&bin().arg("no-such-command").output().unwrap()), 64);
    let out = bin()
        .args(["ingest", "--format", "tiff", "--input", "x", "--output", "y"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 64);
    assert_eq!(code(&bin().output().unwrap()), 64);
}

#[test]
fn ingest_canonical_passthrough_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.jsonl");
    let status = bin()
        .args([
            "ingest",
            "--format",
            "canonical",
            "--input",
            fixture("gt.jsonl").to_str().unwrap(),
            "--output",
            out_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    // Same content modulo JSON re-serialization; a second pass must be
    // byte-identical to the first.
    let again = dir.path().join("again.jsonl");
    let status = bin()
        .args([
            "ingest",
            "--format",
            "canonical",
            "--input",
            out_path.to_str().unwrap(),
            "--output",
            again.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(
        std::fs::read(&out_path).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn ingest_iam_with_resize_scales_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("iam.jsonl");
    let out = bin()
        .args([
            "ingest",
            "--format",
            "iam",
            "--input",
            fixture("iam_form.xml").to_str().unwrap(),
            "--output",
            out_path.to_str().unwrap(),
            "--resize",
            "800x800",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let corpus = handscore::docmodel::read_canonical(&out_path).unwrap();
    let page = &corpus.pages[0];
    assert_eq!((page.width, page.height), (800, 800));
    // First word spans x 10..24, y 20..50 on the 300x200 form.
    let b = handscore::geometry::enclosing_axis_box(&page.word("t01-000-00-00").unwrap().quad);
    assert!((b.x_min - 10.0 * 800.0 / 300.0).abs() < 1e-9);
    assert!((b.y_min - 20.0 * 800.0 / 200.0).abs() < 1e-9);
    assert!((b.x_max - 24.0 * 800.0 / 300.0).abs() < 1e-9);
    assert!((b.y_max - 50.0 * 800.0 / 200.0).abs() < 1e-9);
}

#[test]
fn ingest_corrupt_xml_exits_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xml");
    std::fs::write(&bad, "<form><unclosed>").unwrap();
    let out = bin()
        .args([
            "ingest",
            "--format",
            "iam",
            "--input",
            bad.to_str().unwrap(),
            "--output",
            dir.path().join("out.jsonl").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn ingest_imgur5k_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("imgur.jsonl");
    let out = bin()
        .args([
            "ingest",
            "--format",
            "imgur5k",
            "--input",
            fixture("imgur5k.json").to_str().unwrap(),
            "--output",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let corpus = handscore::docmodel::read_canonical(&out_path).unwrap();
    assert_eq!(corpus.pages[0].words.len(), 3);
}

#[test]
fn eval_identity_run_is_perfect_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report");
    let out = bin()
        .args([
            "eval",
            "all",
            "--gt",
            fixture("gt.jsonl").to_str().unwrap(),
            "--pred",
            fixture("gt.jsonl").to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("P=1.000 R=1.000 F=1.000"), "{stdout}");
    for file in [
        "detection.csv",
        "ordering.csv",
        "recognition.csv",
        "histogram.csv",
        "ordered_text.txt",
        "report.json",
    ] {
        assert!(report.join(file).is_file(), "missing {file}");
    }
    let detection = std::fs::read_to_string(report.join("detection.csv")).unwrap();
    assert!(detection.contains("corpus,19,0,0,1.000000,1.000000,1.000000"), "{detection}");
    let recognition = std::fs::read_to_string(report.join("recognition.csv")).unwrap();
    assert!(recognition.contains("corpus,0.0"), "{recognition}");
}

#[test]
fn eval_order_without_gt_order_exits_protocol() {
    let dir = tempfile::tempdir().unwrap();
    // Strip the order fields from the fixture ground truth.
    let text = std::fs::read_to_string(fixture("gt.jsonl")).unwrap();
    let mut corpus = handscore::docmodel::read_canonical_str(&text, "t").unwrap();
    for p in &mut corpus.pages {
        for w in &mut p.words {
            w.order = None;
        }
    }
    let unordered = dir.path().join("unordered.jsonl");
    handscore::docmodel::write_canonical(&corpus, &unordered).unwrap();
    let out = bin()
        .args([
            "eval",
            "order",
            "--gt",
            unordered.to_str().unwrap(),
            "--pred",
            unordered.to_str().unwrap(),
            "--report",
            dir.path().join("r").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocol error"));
}

#[test]
fn eval_missing_prediction_page_warns_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // Prediction file with only the first page of the ground truth.
    let first_line = std::fs::read_to_string(fixture("gt.jsonl"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let partial = dir.path().join("partial.jsonl");
    std::fs::write(&partial, first_line + "\n").unwrap();
    let out = bin()
        .args([
            "eval",
            "detect",
            "--gt",
            fixture("gt.jsonl").to_str().unwrap(),
            "--pred",
            partial.to_str().unwrap(),
            "--report",
            dir.path().join("r").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no predictions for page"));
}

#[test]
fn eval_schema_violation_exits_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        r#"{"page_id":"p","width":0,"height":10,"image":null,"words":[]}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "eval",
            "detect",
            "--gt",
            bad.to_str().unwrap(),
            "--pred",
            bad.to_str().unwrap(),
            "--report",
            dir.path().join("r").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn sample_iou_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_path = dir.path().join(name);
        let status = bin()
            .args([
                "sample-iou",
                "--gt",
                fixture("gt.jsonl").to_str().unwrap(),
                "--page",
                "p1",
                "--word",
                "w0",
                "--targets",
                "0.6,0.9",
                "--samples",
                "20",
                "--seed",
                "11",
                "--output",
                out_path.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        (
            std::fs::read(&out_path).unwrap(),
            std::fs::read(out_path.with_extension("csv")).unwrap(),
        )
    };
    assert_eq!(run("a.svg"), run("b.svg"));
}

#[test]
fn sample_iou_infeasible_target_exits_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "sample-iou",
            "--gt",
            fixture("gt.jsonl").to_str().unwrap(),
            "--page",
            "p1",
            "--word",
            "w0",
            "--targets",
            "0.01",
            "--samples",
            "5",
            "--output",
            dir.path().join("x.svg").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocol error"));
}

#[test]
fn feedback_missing_lexicon_exits_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "feedback",
            "--page",
            fixture("gt.jsonl").to_str().unwrap(),
            "--lexicon",
            dir.path().join("nope.txt").to_str().unwrap(),
            "--output",
            dir.path().join("x.svg").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn feedback_all_correct_page_renders_no_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let svg_path = dir.path().join("fb.0.svg");
    let out = bin()
        .args([
            "feedback",
            "--page",
            fixture("gt.jsonl").to_str().unwrap(),
            "--lexicon",
            fixture("lexicon.txt").to_str().unwrap(),
            "--output",
            dir.path().join("fb.svg").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    // Page p1 of the fixture is fully in-lexicon: no annotation text.
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(!svg.contains("<text"), "unexpected annotations: {svg}");
}

#[test]
fn config_file_with_unknown_key_exits_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg");
    std::fs::write(&cfg, "frobnicate=1\n").unwrap();
    let out = bin()
        .env("HANDSCORE_CONFIG", &cfg)
        .args([
            "eval",
            "detect",
            "--gt",
            fixture("gt.jsonl").to_str().unwrap(),
            "--pred",
            fixture("gt.jsonl").to_str().unwrap(),
            "--report",
            dir.path().join("r").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_threshold_lands_in_report_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg");
    std::fs::write(&cfg, "iou_threshold=0.75\n").unwrap();
    let report = dir.path().join("r");
    let out = bin()
        .env("HANDSCORE_CONFIG", &cfg)
        .args([
            "eval",
            "detect",
            "--gt",
            fixture("gt.jsonl").to_str().unwrap(),
            "--pred",
            fixture("gt.jsonl").to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let detection = std::fs::read_to_string(report.join("detection.csv")).unwrap();
    assert!(detection.contains("# iou_threshold=0.75"), "{detection}");
}
