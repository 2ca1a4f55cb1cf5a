use std::path::Path;
use std::process::{Command, Output};

fn parcelfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parcelfit")).args(args).output().unwrap()
}

fn fixture(dir: &Path) -> (String, String) {
    let out = parcelfit(&["gen-fixture", "-o", dir.to_str().unwrap(), "--n_plots", "9", "--noise_m", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = |f: &str| dir.join(f).to_str().unwrap().to_string();
    (p("survey.geojson"), p("farms.geojson"))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (survey, farms) = fixture(dir.path());
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let missing = parcelfit(&["matchfit", &survey, "/nonexistent/farms.geojson", "-o", out]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/farms.geojson"));

    let bad = dir.path().join("bad.geojson");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(parcelfit(&["facefit", bad.to_str().unwrap(), &farms, "-o", out]).status.code(), Some(1));

    assert_eq!(parcelfit(&["matchfit", &survey, &farms, "-o", out, "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(parcelfit(&["matchfit", &survey, &farms, "-o", out, "--area_tol_frac", "0.1"]).status.code(), Some(2));
    assert_eq!(parcelfit(&["matchfit", &survey, &farms, "-o", out, "--stages", "warp"]).status.code(), Some(2));
    assert_eq!(parcelfit(&["matchfit", &survey]).status.code(), Some(2));
    assert_eq!(parcelfit(&["segeval", &survey, &survey, "--overlap_frac", "2"]).status.code(), Some(2));

    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"jitterfit": {"max_translation": 5}}"#).unwrap();
    let r = parcelfit(&["matchfit", &survey, &farms, "-o", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("jitterfit.max_translation"));
}

#[test]
fn empty_stage_list_writes_the_input_back() {
    let dir = tempfile::tempdir().unwrap();
    let (survey, farms) = fixture(dir.path());
    let out = dir.path().join("o");
    let r = parcelfit(&["matchfit", &survey, &farms, "-o", out.to_str().unwrap(), "--stages", ""]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["stages"].as_array().unwrap().len(), 0);
    assert_eq!(report["input"], report["output"]);
    let m2: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("m2.geojson")).unwrap()).unwrap();
    let f = &m2["features"][0]["properties"];
    assert!(f["plot_id"].is_string() && f["dtb_m"].is_number() && f["dtb_bin"].is_string());
}

#[test]
fn segeval_prints_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let (survey, _) = fixture(dir.path());
    let r = parcelfit(&["segeval", &survey, &survey]);
    assert!(r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["gt_instances"], 9);
    assert_eq!(v["report"]["classes"]["default"]["mean_iou"]["value"], 1.0);
    assert_eq!(v["report"]["classes"]["default"]["fnr_percent"]["value"], 0.0);
}
