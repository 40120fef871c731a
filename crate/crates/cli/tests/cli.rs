//! End-to-end tests of the `placerec` binary: exit codes, determinism,
//! and persisted-model score fidelity.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn placerec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_placerec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("placerec-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn synth_small(dir: &Path) -> Vec<PathBuf> {
    let out = placerec(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--places",
        "6",
        "--scenarios",
        "2",
        "--profile",
        "noise",
        "--width",
        "128",
        "--height",
        "64",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(PathBuf::from)
        .collect()
}

#[test]
fn pipeline_runs_and_is_deterministic() {
    let dir = tempdir("pipeline");
    let manifests = synth_small(&dir);
    assert_eq!(manifests.len(), 2);

    let train_dir = dir.join("train");
    let out = placerec(&[
        "train",
        "--manifest",
        manifests[0].to_str().unwrap(),
        "--manifest",
        manifests[1].to_str().unwrap(),
        "--out",
        train_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = train_dir.join("model.txt");
    assert!(model.exists());

    let run_match = |tag: &str| -> PathBuf {
        let match_dir = dir.join(tag);
        let out = placerec(&[
            "match",
            "--model",
            model.to_str().unwrap(),
            "--templates",
            manifests[0].to_str().unwrap(),
            "--queries",
            manifests[1].to_str().unwrap(),
            "--out",
            match_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        match_dir
    };
    let m1 = run_match("match1");
    let m2 = run_match("match2");
    for file in ["scores.csv", "curve.csv", "curve.svg", "summary.txt", "modality_report.csv"] {
        let b1 = std::fs::read(m1.join(file)).unwrap();
        let b2 = std::fs::read(m2.join(file)).unwrap();
        assert_eq!(b1, b2, "{file} differs across identical runs");
    }

    // eval on persisted artifacts reproduces the same curve
    let eval_dir = dir.join("eval");
    let out = placerec(&[
        "eval",
        "--scores",
        m1.join("scores.csv").to_str().unwrap(),
        "--gt",
        m1.join("gt.csv").to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(m1.join("curve.csv")).unwrap(),
        std::fs::read(eval_dir.join("curve.csv")).unwrap()
    );

    // report prints one share per feature block, summing to ~100
    let out = placerec(&["report", "--model", model.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    let total: f64 = text
        .lines()
        .map(|l| l.split_whitespace().nth(1).unwrap().trim_end_matches('%').parse::<f64>().unwrap())
        .sum();
    assert!((total - 100.0).abs() < 0.01, "shares sum to {total}");

    // ingest --check succeeds on a valid run
    let out = placerec(&["ingest", "--manifest", manifests[0].to_str().unwrap(), "--check"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 pairs"));
}

#[test]
fn saved_model_scores_match_in_memory_bitwise() {
    use placerec_cli::commands::{cmd_match, cmd_train};
    use placerec_cli::config::RunConfig;
    use placerec_cli::model_file::ModelFile;

    let dir = tempdir("roundtrip");
    let manifests = synth_small(&dir);
    let cfg = RunConfig::default();
    let trained = cmd_train(&manifests, &[], None, &cfg, &dir.join("train")).unwrap();

    // reload, re-save, and match with the re-saved copy
    let reloaded = ModelFile::load(&trained.model_path).unwrap();
    assert_eq!(reloaded, trained.model);
    let copy_path = dir.join("model_copy.txt");
    reloaded.save(&copy_path).unwrap();
    assert_eq!(
        std::fs::read(&trained.model_path).unwrap(),
        std::fs::read(&copy_path).unwrap()
    );

    let o1 = cmd_match(&trained.model_path, &manifests[0], &manifests[1], &[], None, 0.85, 50.0, &dir.join("m1")).unwrap();
    let o2 = cmd_match(&copy_path, &manifests[0], &manifests[1], &[], None, 0.85, 50.0, &dir.join("m2")).unwrap();
    for (p1, p2) in o1.weighted.points.iter().zip(&o2.weighted.points) {
        assert_eq!(p1.precision.to_bits(), p2.precision.to_bits());
        assert_eq!(p1.recall.to_bits(), p2.recall.to_bits());
    }
    assert_eq!(
        std::fs::read(dir.join("m1/scores.csv")).unwrap(),
        std::fs::read(dir.join("m2/scores.csv")).unwrap()
    );
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempdir("exitcodes");

    // validation: bad flag value (lambda1 < 0)
    let manifests = synth_small(&dir);
    let out = placerec(&[
        "train",
        "--manifest",
        manifests[0].to_str().unwrap(),
        "--manifest",
        manifests[1].to_str().unwrap(),
        "--lambda1",
        "-1",
        "--out",
        dir.join("t").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // validation: single-scenario training
    let out = placerec(&[
        "train",
        "--manifest",
        manifests[0].to_str().unwrap(),
        "--manifest",
        manifests[0].to_str().unwrap(),
        "--out",
        dir.join("t1").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two distinct scenarios"));

    // ingestion: missing disparity frame
    let broken = dir.join("broken");
    copy_tree(&manifests[0].parent().unwrap(), &broken);
    let frames = broken.join("frames");
    let victim = std::fs::read_dir(&frames)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().contains("disparity"))
        .unwrap();
    std::fs::remove_file(victim).unwrap();
    let out = placerec(&[
        "ingest",
        "--manifest",
        broken.join("manifest.txt").to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disparity"));

    // solver: lambda = 0 on an underdetermined system is refused
    let out = placerec(&[
        "train",
        "--manifest",
        manifests[0].to_str().unwrap(),
        "--manifest",
        manifests[1].to_str().unwrap(),
        "--lambda1",
        "0",
        "--lambda2",
        "0",
        "--out",
        dir.join("t2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    // io: nonexistent manifest path
    let out = placerec(&["ingest", "--manifest", dir.join("nope.txt").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
}

fn copy_tree(src: &Path, dst: &Path) {
    std::fs::create_dir_all(dst).unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let to = dst.join(entry.file_name());
        if entry.path().is_dir() {
            copy_tree(&entry.path(), &to);
        } else {
            std::fs::copy(entry.path(), to).unwrap();
        }
    }
}
