use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/synth_epex.csv")
}

fn penreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penreg"))
        .args(args)
        .output()
        .expect("spawn penreg")
}

fn run_in(out: &Path, extra: &[&str]) -> Output {
    let data = fixture();
    let mut args = vec!["run", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    penreg(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn farx_lasso_cv_writes_one_row_per_hour() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lasso");
    let o = run_in(
        &out,
        &["--model", "farx", "--penalty", "lasso", "--select", "cv", "--window", "240", "--from", "2019-09-25", "--to", "2019-09-26"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("forecasts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24 * 2);
    for f in ["score.json", "selection_trace.csv", "repairs.jsonl", "manifest.json", "run.conf"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let repairs = std::fs::read_to_string(out.join("repairs.jsonl")).unwrap();
    // the spring clock change, one entry per variable
    assert_eq!(repairs.lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["data_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["records"], 48);
}

#[test]
fn joint_cv_shape_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("en");
    let o = run_in(
        &out,
        &["--model", "arx", "--penalty", "en", "--shape", "cv", "--window", "200", "--from", "2019-09-27", "--to", "2019-09-27"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["shape_mode"], "JointCV");
    assert_eq!(manifest["config"]["penalty"], "en");
}

#[test]
fn lq_lambda_above_cap_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--penalty", "lq", "--shape", "1.5", "--lambda-max", "3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("hint:"));
    let o = run_in(dir.path(), &["--penalty", "ridge", "--lambda-max", "6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    let o = penreg(&["run", "--data", "x.csv", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = penreg(&["run", "--data", "x.csv", "--penalty", "lasso2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = penreg(&["run", "--data", "x.csv", "--penalty", "scad", "--select", "bic"]);
    assert_eq!(o.status.code(), Some(2), "BIC needs an explicit shape");
}

#[test]
fn config_file_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "penalty = lasso\nwindw = 10\n").unwrap();
    let o = penreg(&["run", "--data", "x.csv", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("windw"));
}

#[test]
fn data_problems_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = penreg(&["run", "--data", dir.path().join("missing.csv").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // window longer than the panel
    let o = run_in(&dir.path().join("r"), &["--window", "400"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // an OMIE file has no wind_off column
    let omie = dir.path().join("omie.csv");
    let s = penreg(&["synth", "--market", "omie", "--days", "30", "--out", omie.to_str().unwrap()]);
    assert!(s.status.success());
    let o = penreg(&["run", "--data", omie.to_str().unwrap(), "--market", "epex", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn compare_against_ols() {
    let dir = tempfile::tempdir().unwrap();
    let range = ["--model", "arx", "--window", "200", "--from", "2019-09-20", "--to", "2019-09-21"];
    let ols = dir.path().join("runs/ols");
    let lasso = dir.path().join("runs/lasso");
    let short = dir.path().join("short");
    let mut a = range.to_vec();
    a.extend(["--penalty", "ols"]);
    assert!(run_in(&ols, &a).status.success());
    let mut a = range.to_vec();
    a.extend(["--penalty", "lasso"]);
    assert!(run_in(&lasso, &a).status.success());

    let o = penreg(&["compare", dir.path().join("runs").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "{table}");
    assert!(lines[1].contains(",ols,") && lines[1].ends_with(",-"));
    assert!(lines[2].contains(",lasso,"));
    let cell: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(cell.is_finite());

    let o = penreg(&["compare", "--format", "json", ols.to_str().unwrap(), lasso.to_str().unwrap()]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    // a LASSO run over a different range is refused
    assert!(run_in(&short, &["--model", "arx", "--window", "200", "--from", "2019-09-20", "--to", "2019-09-20"]).status.success());
    let o = penreg(&["compare", ols.to_str().unwrap(), short.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("cover"), "{}", stderr(&o));

    // no OLS run among the inputs
    let o = penreg(&["compare", lasso.to_str().unwrap(), short.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn rerun_from_manifest_config_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let o = run_in(&first, &["--model", "arx", "--penalty", "scad", "--shape", "20", "--select", "bic", "--window", "200", "--from", "2019-09-22", "--to", "2019-09-22", "--jobs", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let second = dir.path().join("b");
    let o = penreg(&["run", "--config", first.join("run.conf").to_str().unwrap(), "--out", second.to_str().unwrap(), "--jobs", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["forecasts.csv", "selection_trace.csv", "score.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn penalty_curves_cover_every_family() {
    let o = penreg(&["penalty-curves", "--points", "11"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    // eight families with a three-point shape grid, plus LASSO and Ridge
    let rows = text.lines().count() - 1;
    let curves = 8 * 3 + 2;
    assert_eq!(rows, curves * 11);
    assert!(text.contains("\nridge,1,,0,0\n"));
}

#[test]
fn synth_is_seeded() {
    let a = penreg(&["synth", "--days", "20", "--seed", "9"]);
    let b = penreg(&["synth", "--days", "20", "--seed", "9"]);
    let c = penreg(&["synth", "--days", "20", "--seed", "10"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}
