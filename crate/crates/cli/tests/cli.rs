//! Command-line behavior: exit codes, file outputs, determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pmc_core::{PredictionEntry, ScoreReport, SynthSpec, VideoSpans, Vocabulary};

fn pmc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmc"))
}

fn run(args: &[&str]) -> Output {
    pmc().args(args).output().expect("spawn pmc")
}

fn write_spec(dir: &Path, spec: &SynthSpec) -> PathBuf {
    let path = dir.join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

fn small_spec(seed: u64, sigma: f64) -> SynthSpec {
    SynthSpec {
        k: 4,
        test_videos: 6,
        gestures_min: 1,
        gestures_max: 2,
        noise_sigma: sigma,
        seed,
        ..SynthSpec::default()
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// synth -> train -> classify (manual + auto) -> score, all through the
/// binary, on a small noise-free batch.
#[test]
fn full_pipeline_through_binary() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write_spec(dir.path(), &small_spec(11, 0.0));
    let batch = dir.path().join("batch");
    let out = run(&["synth", "--spec", &path_str(&spec_path), "--out", &path_str(&batch)]);
    assert!(out.status.success(), "synth: {}", String::from_utf8_lossy(&out.stderr));

    let manifest = batch.join("manifest.json");
    let vocab_path = dir.path().join("vocab.json");
    let out = run(&[
        "train",
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&vocab_path),
    ]);
    assert!(out.status.success(), "train: {}", String::from_utf8_lossy(&out.stderr));
    let vocab = Vocabulary::from_json(&fs::read_to_string(&vocab_path).unwrap()).unwrap();
    assert_eq!(vocab.len(), 4);

    // Manual segmentation from the generated ground truth.
    let preds_manual = dir.path().join("pred_manual.json");
    let manual = format!("manual:{}", path_str(&batch.join("truth_spans.json")));
    let out = run(&[
        "classify",
        "--model",
        &path_str(&vocab_path),
        "--manifest",
        &path_str(&manifest),
        "--segmentation",
        &manual,
        "--out",
        &path_str(&preds_manual),
    ]);
    assert!(out.status.success(), "classify: {}", String::from_utf8_lossy(&out.stderr));

    let report_path = dir.path().join("report.json");
    let out = run(&[
        "score",
        "--manifest",
        &path_str(&manifest),
        "--predictions",
        &path_str(&preds_manual),
        "--out",
        &path_str(&report_path),
    ]);
    assert!(out.status.success(), "score: {}", String::from_utf8_lossy(&out.stderr));
    let report: ScoreReport =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.score, 0.0);
    // TSV summary on stdout: score first column.
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("0.000000\t"), "stdout {stdout:?}");

    // Auto segmentation agrees on a noise-free batch.
    let preds_auto = dir.path().join("pred_auto.json");
    let out = run(&[
        "classify",
        "--model",
        &path_str(&vocab_path),
        "--manifest",
        &path_str(&manifest),
        "--segmentation",
        "auto",
        "--out",
        &path_str(&preds_auto),
    ]);
    assert!(out.status.success(), "classify auto: {}", String::from_utf8_lossy(&out.stderr));
    let preds: Vec<PredictionEntry> =
        serde_json::from_str(&fs::read_to_string(&preds_auto).unwrap()).unwrap();
    assert_eq!(preds.len(), 6);

    // segment writes spans for every test video.
    let spans_path = dir.path().join("spans.json");
    let out = run(&[
        "segment",
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&spans_path),
    ]);
    assert!(out.status.success(), "segment: {}", String::from_utf8_lossy(&out.stderr));
    let spans: Vec<VideoSpans> =
        serde_json::from_str(&fs::read_to_string(&spans_path).unwrap()).unwrap();
    assert_eq!(spans.len(), 6);
}

#[test]
fn invalid_manifest_exits_2_and_lists_violation() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    fs::write(
        &manifest,
        r#"{"frame_width": 8, "frame_height": 8,
            "train": [{"path": "a", "label": 1}, {"path": "b", "label": 3}],
            "test": [{"path": "c", "truth": [1]}]}"#,
    )
    .unwrap();
    let out = run(&[
        "train",
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&dir.path().join("v.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("gap"), "stderr: {stderr}");
}

#[test]
fn unknown_flags_and_bad_values_exit_2() {
    let out = run(&["train", "--manifest"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &SynthSpec { k: 13, ..SynthSpec::default() });
    let out = run(&["synth", "--spec", &path_str(&spec), "--out", &path_str(&dir.path().join("b"))]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("trajectory families"), "stderr: {stderr}");
}

#[test]
fn missing_video_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    fs::write(
        &manifest,
        r#"{"frame_width": 8, "frame_height": 8,
            "train": [{"path": "missing", "label": 1}],
            "test": [{"path": "also-missing", "truth": [1]}]}"#,
    )
    .unwrap();
    let out = run(&[
        "train",
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&dir.path().join("v.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write_spec(dir.path(), &small_spec(5, 0.0));
    let batch = dir.path().join("batch");
    assert!(run(&["synth", "--spec", &path_str(&spec_path), "--out", &path_str(&batch)])
        .status
        .success());
    let manifest = batch.join("manifest.json");
    let v1 = dir.path().join("v1.json");
    let v2 = dir.path().join("v2.json");
    for v in [&v1, &v2] {
        assert!(run(&["train", "--manifest", &path_str(&manifest), "--out", &path_str(v)])
            .status
            .success());
    }
    assert_eq!(fs::read(&v1).unwrap(), fs::read(&v2).unwrap());
}

#[test]
fn synth_seed_flag_overrides_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write_spec(dir.path(), &small_spec(5, 0.02));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["synth", "--spec", &path_str(&spec_path), "--out", &path_str(&a)])
        .status
        .success());
    assert!(run(&[
        "synth",
        "--spec",
        &path_str(&spec_path),
        "--out",
        &path_str(&b),
        "--seed",
        "99"
    ])
    .status
    .success());
    let fa = fs::read(a.join("test/v000/frame_00001.pgm")).unwrap();
    let fb = fs::read(b.join("test/v000/frame_00001.pgm")).unwrap();
    assert_ne!(fa, fb);
}

#[test]
fn dump_motion_maps_of_static_pair_is_zero_csv() {
    let dir = tempfile::tempdir().unwrap();
    // Two identical frames.
    let video_dir = dir.path().join("v");
    fs::create_dir_all(&video_dir).unwrap();
    let mut bytes = b"P5\n16 16\n255\n".to_vec();
    bytes.extend([128u8; 256]);
    fs::write(video_dir.join("frame_00001.pgm"), &bytes).unwrap();
    fs::write(video_dir.join("frame_00002.pgm"), &bytes).unwrap();
    let out = run(&["dump", "motion-maps", &path_str(&video_dir), "--tau", "2", "--gamma", "0.25"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].split(',').all(|v| v == "0"), "{stdout}");
}

#[test]
fn dump_components_writes_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write_spec(dir.path(), &small_spec(9, 0.0));
    let batch = dir.path().join("batch");
    assert!(run(&["synth", "--spec", &path_str(&spec_path), "--out", &path_str(&batch)])
        .status
        .success());
    let vocab_path = dir.path().join("vocab.json");
    assert!(run(&[
        "train",
        "--manifest",
        &path_str(&batch.join("manifest.json")),
        "--out",
        &path_str(&vocab_path)
    ])
    .status
    .success());
    let prefix = dir.path().join("comp");
    let out = run(&[
        "dump",
        "components",
        "--model",
        &path_str(&vocab_path),
        "--label",
        "2",
        "--top",
        "2",
        "--out-prefix",
        &path_str(&prefix),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // 64x64 frames at gamma 0.1 pool to a 6x6 grid.
    let csv = fs::read_to_string(dir.path().join("comp_c1.csv")).unwrap();
    let rows: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0].split(',').count(), 6);
}

#[test]
fn classify_reports_per_video_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write_spec(dir.path(), &small_spec(13, 0.0));
    let batch = dir.path().join("batch");
    assert!(run(&["synth", "--spec", &path_str(&spec_path), "--out", &path_str(&batch)])
        .status
        .success());
    let manifest = batch.join("manifest.json");
    let vocab_path = dir.path().join("vocab.json");
    assert!(run(&["train", "--manifest", &path_str(&manifest), "--out", &path_str(&vocab_path)])
        .status
        .success());
    // Remove one test video from disk.
    fs::remove_dir_all(batch.join("test/v002")).unwrap();
    let preds = dir.path().join("pred.json");
    let out = run(&[
        "classify",
        "--model",
        &path_str(&vocab_path),
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&preds),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("test/v002"), "stderr: {stderr}");
    // The other five videos still got predictions.
    let entries: Vec<PredictionEntry> =
        serde_json::from_str(&fs::read_to_string(&preds).unwrap()).unwrap();
    assert_eq!(entries.len(), 5);
}
