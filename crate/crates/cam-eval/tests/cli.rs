//! CLI surface tests: flags, sources, exit codes.

use cam_core::io::{encode_ppm, encode_tensor, DtypeCode};
use cam_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cam-eval"))
}

fn gen_model(dir: &Path, classes: usize, size: usize) -> std::path::PathBuf {
    let path = dir.join("model.mcn1");
    let out = bin()
        .args([
            "gen-model",
            "--classes",
            &classes.to_string(),
            "--size",
            &size.to_string(),
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

#[test]
fn gen_model_rejects_unknown_arch_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "gen-model",
            "--arch",
            "resnet50",
            "--classes",
            "4",
            "--out",
            dir.path().join("x.mcn1").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn unknown_method_id_exits_2_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 3, 8);
    let out = bin()
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            "synth:1",
            "--methods",
            "grad-cam,super-cam",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown method id"));
}

#[test]
fn unknown_metric_id_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 3, 8);
    let out = bin()
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            "synth:1",
            "--metrics",
            "sharpness",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_model_file_exits_3() {
    let out = bin()
        .args([
            "run",
            "--model",
            "/nonexistent/m.mcn1",
            "--images",
            "synth:1",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("io error"));
}

#[test]
fn corrupt_model_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mcn1");
    fs::write(&path, b"ZZZZ not a model").unwrap();
    let out = bin()
        .args([
            "run",
            "--model",
            path.to_str().unwrap(),
            "--images",
            "synth:1",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn empty_synthetic_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 3, 8);
    let out = bin()
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            "synth:0",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty dataset"));
}

#[test]
fn fake_check_passes_and_fails_by_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 4, 16);
    let common = [
        "fake-check",
        "--model",
        model.to_str().unwrap(),
        "--images",
        "synth:4",
        "--methods",
        "grad-cam,grad-cam++",
        "--metrics",
        "avg-drop,adcc",
        "--jobs",
        "2",
    ];
    let out = bin().args(common).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"));
    assert!(stdout.contains("reference (224x224 scale)"));
    assert!(stdout.contains("adcc 0.01"));

    // An unreachable threshold forces the failure path and exit code 4.
    let out = bin()
        .args(common)
        .args(["--threshold", "0.000001"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn ppm_directory_and_class_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 4, 8);
    let imgs = dir.path().join("imgs");
    fs::create_dir(&imgs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for name in ["one.ppm", "two.ppm"] {
        let px = Tensor::new(
            vec![3, 8, 8],
            (0..192).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap();
        fs::write(imgs.join(name), encode_ppm(&px).unwrap()).unwrap();
    }
    let classes = dir.path().join("classes.txt");
    fs::write(&classes, "one,3\ntwo,0\n").unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    let out = bin()
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            imgs.to_str().unwrap(),
            "--classes",
            &format!("@{}", classes.display()),
            "--methods",
            "grad-cam",
            "--metrics",
            "avg-drop,avg-inc",
            "--csv",
            csv.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let csv_text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("one,grad-cam,"));
    assert!(lines[2].starts_with("two,grad-cam,"));

    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(parsed["provenance"]["seed"], 42);
    assert_eq!(parsed["rows"][0]["class_index"], 3);
    assert_eq!(parsed["rows"][1]["class_index"], 0);
}

#[test]
fn ctf1_list_source_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 3, 8);
    let t = Tensor::full(vec![3, 8, 8], 0.25).unwrap();
    fs::write(dir.path().join("a.ctf"), encode_tensor(&t, DtypeCode::F32)).unwrap();
    let list = dir.path().join("list.txt");
    fs::write(&list, "# tensors\na.ctf\n").unwrap();
    let out = bin()
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            &format!("@{}", list.display()),
            "--methods",
            "fake-cam",
            "--metrics",
            "complexity",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fake-cam"));
}

#[test]
fn jobs_env_var_is_default_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 3, 8);
    let out = bin()
        .env("CAM_EVAL_JOBS", "2")
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            "synth:2",
            "--methods",
            "grad-cam",
            "--metrics",
            "complexity",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);

    let out = bin()
        .env("CAM_EVAL_JOBS", "many")
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            "synth:2",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("CAM_EVAL_JOBS"));
}

#[test]
fn svg_dir_gets_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 3, 8);
    let svg = dir.path().join("curves");
    let out = bin()
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            "synth:2",
            "--methods",
            "grad-cam,fake-cam",
            "--metrics",
            "insertion,deletion",
            "--svg-dir",
            svg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(&svg)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2 * 2 * 2);
    assert!(names.contains(&"synth-0000__grad-cam__insertion.svg".to_string()));
    assert!(names.contains(&"synth-0001__fake-cam__deletion.svg".to_string()));
    let body = fs::read_to_string(svg.join(&names[0])).unwrap();
    assert!(body.contains("<svg"));
    assert!(body.contains("AUC="));
}

#[test]
fn dedupe_equivalent_flag_prints_notice() {
    let dir = tempfile::tempdir().unwrap();
    let model = gen_model(dir.path(), 3, 8);
    let out = bin()
        .args([
            "run",
            "--model",
            model.to_str().unwrap(),
            "--images",
            "synth:1",
            "--methods",
            "grad-cam,xgrad-cam",
            "--metrics",
            "complexity",
            "--dedupe-equivalent",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("xgrad-cam skipped"));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("xgrad-cam"));
}
