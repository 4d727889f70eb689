use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn case(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases").join(name).display().to_string()
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dregion-it-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn dregion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dregion"))
        .args(args)
        .env_remove("DREGION_OUT")
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr line");
    serde_json::from_str(line).expect("stderr is one JSON object")
}

#[test]
fn region_artifacts_are_reproducible() {
    let c = case("ieee33.dnet");
    let a = scratch("repro");
    let mut csvs = Vec::new();
    for _ in 0..2 {
        let o = dregion(&["region", "--case", &c, "--model", "la", "--delta", "1e-4", "--out", a.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let facets = std::fs::read(a.join("facets.csv")).unwrap();
        let verts = std::fs::read(a.join("vertices.csv")).unwrap();
        let trace = std::fs::read(a.join("trace.csv")).unwrap();
        csvs.push((facets, verts, trace));
    }
    assert_eq!(csvs[0], csvs[1]);
    let facets = String::from_utf8(csvs[0].0.clone()).unwrap();
    assert!(facets.starts_with('#'));
    assert!(facets.lines().any(|l| l.starts_with("# model")), "config header missing");
    for f in ["report.txt", "region.svg"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let svg = std::fs::read_to_string(a.join("region.svg")).unwrap();
    assert!(svg.contains("<!--") && svg.contains("<svg"));
    let _ = std::fs::remove_dir_all(&a);
}

#[test]
fn out_dir_from_environment() {
    let d = scratch("env");
    let o = Command::new(env!("CARGO_BIN_EXE_dregion"))
        .args(["region", "--case", &case("ieee33.dnet"), "--model", "la"])
        .env("DREGION_OUT", &d)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(d.join("facets.csv").exists());
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn missing_case_is_io_error() {
    let o = dregion(&["region", "--case", "/definitely/not/here.dnet", "--out", scratch("io").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let j = error_json(&o);
    assert_eq!(j["code"], 2);
    assert!(j["message"].as_str().unwrap().contains("/definitely/not/here.dnet"));
}

#[test]
fn bad_depth_is_validation_error() {
    let o = dregion(&["region", "--case", &case("ieee33.dnet"), "--k", "1", "--out", scratch("k1").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "validation");
}

#[test]
fn malformed_config_is_validation_error() {
    let d = scratch("cfg");
    std::fs::create_dir_all(&d).unwrap();
    let p = d.join("bad.toml");
    std::fs::write(&p, "k = \"six\"\n").unwrap();
    let o = dregion(&["region", "--config", p.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn iteration_limit_exits_unconverged() {
    let d = scratch("iter");
    let o = dregion(&["region", "--case", &case("ieee33.dnet"), "--model", "tcr", "--max-iter", "2", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn validate_matpower_case() {
    let d = scratch("val");
    let o = dregion(&["validate", "--case", &case("case33.m"), "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let _ = std::fs::remove_dir_all(&d);
}
