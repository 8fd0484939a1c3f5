use std::path::Path;
use std::process::{Command, Output};

use relight::presets::regression_scene;

fn relight(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relight"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TOKENLIGHT_THREADS")
        .output()
        .unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().next().unwrap()).unwrap()
}

#[test]
fn render_scene_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("s.json");
    std::fs::write(&scene, regression_scene("two_spheres", 12, 10).unwrap().to_json().unwrap()).unwrap();
    let out = relight(&["render", "--scene", "s.json", "--out", "o.pfm"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = relight::io::read_pfm(&dir.path().join("o.pfm")).unwrap();
    assert_eq!(img.dims(), (12, 10));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o.pfm.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "render");
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["inputs"][0]["path"], "s.json");
    assert_eq!(manifest["outputs"][0]["bytes"], std::fs::metadata(dir.path().join("o.pfm")).unwrap().len());
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["render", "--preset", "corner", "--shiny"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("--shiny"));
}

#[test]
fn missing_file_is_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["render", "--scene", "nope.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
    assert_eq!(stderr_json(&out)["error"], "io");
    assert!(!dir.path().join("render.pfm").exists());
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["render", "--preset", "corner", "--shadow-samples", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "invalid");
    let out = Command::new(env!("CARGO_BIN_EXE_relight"))
        .args(["render", "--preset", "corner"])
        .current_dir(dir.path())
        .env("TOKENLIGHT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invariance_check_on_a_regression_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(
        &["invariance-check", "--preset", "rotated_box", "--scale", "3", "--rot", "0,1,0,90", "--translate", "5,0,2", "--out", "inv.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_rel_err"].as_f64().unwrap() <= 1e-4);
    assert!(dir.path().join("inv.json.manifest.json").exists());
}

#[test]
fn failed_check_exits_1_after_writing_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["invariance-check", "--preset", "corner", "--resolution", "16", "--tolerance=-1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "check_failed");
    assert!(dir.path().join("invariance.json").exists());
}

#[test]
fn synth_train_sample_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = relight(args, dir.path());
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    run(&["synth-pairs", "--preset", "sphere_on_plane", "--mode", "spatial", "--count", "6", "--resolution", "8", "--out", "pairs"]);
    assert!(dir.path().join("pairs/pair_00005/pair.json").exists());
    assert!(dir.path().join("pairs/manifest.json").exists());
    run(&["train-toy", "--pairs", "pairs", "--steps", "5", "--hidden", "8", "--out", "m.bin"]);
    assert!(dir.path().join("m.loss.json").exists());
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pairs/pair_00000/pair.json")).unwrap()).unwrap();
    std::fs::write(dir.path().join("edit.json"), record["edit"].to_string()).unwrap();
    run(&["sample", "--model", "m.bin", "--input", "pairs/pair_00000/input.pfm", "--edit", "edit.json", "--steps", "3", "--out", "s.png"]);
    assert!(dir.path().join("s.png").exists());
    let out = run(&["eval-precision", "--model", "m.bin", "--preset", "sphere_on_plane", "--steps", "2", "--out", "eval/report.json"]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["copy_a"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("eval/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 32);
    assert!(dir.path().join("eval/report.png").exists());
}

#[test]
fn panogt_reports_flux() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["panogt", "--preset", "sphere_on_plane", "--height", "256", "--out", "env.pfm"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["flux_rel_err"].as_f64().unwrap() < 5e-3);
    let env = relight::io::read_pfm(&dir.path().join("env.pfm")).unwrap();
    assert_eq!(env.dims(), (512, 256));
}

#[test]
fn rerun_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["--seed", "4", "render", "--preset", "box_occluder", "--resolution", "20", "--out", "a.pfm"], dir.path());
    assert!(out.status.success());
    let out = relight(&["rerun", "--manifest", "a.pfm.manifest.json", "--threads", "3", "--out", "b.pfm"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(dir.path().join("a.pfm")).unwrap(), std::fs::read(dir.path().join("b.pfm")).unwrap());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.pfm.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 4);
    assert_eq!(m["threads"], 3);
}
