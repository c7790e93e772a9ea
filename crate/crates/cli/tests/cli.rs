use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn dualpde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualpde")).args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const FLUID: &str = "q=sin:1:0.1;rho=const:1+cos:1:0.1";

#[test]
fn solve_writes_versioned_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = dualpde(&["solve", "--model", "burgers", "--v0", "sin:1", "--Nx", "16", "--T", "0.1", "--weight", "adapt", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["fields.csv", "entropy.csv", "history.csv"] {
        let body = std::fs::read_to_string(out.join(f)).unwrap();
        assert!(body.starts_with("# dualpde-csv/1 "), "{f}");
    }
    let fields = std::fs::read_to_string(out.join("fields.csv")).unwrap();
    assert_eq!(fields.lines().nth(1), Some("t,x,component,value"));
    let r = report(&out);
    assert_eq!(r["format"], "dualpde-report/1");
    assert_eq!(r["command"], "solve");
    assert_eq!(r["result"]["grid"]["nt"], 16);
    assert_eq!(r["result"]["solver"]["converged"], true);
    assert!(r["result"]["weight"]["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn deterministic_reports_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = dualpde(&[
            "solve", "--model", "qhd", "--data", FLUID, "--Nx", "12", "--T", "0.1", "--weight", "1", "--seed", "11",
            "--deterministic", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.code().is_some_and(|c| c == 0 || c == 4));
        std::fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "command = \"solve\"\n[model]\nname = \"burgers\"\n[data]\nv0 = \"sin:1\"\n[grid]\nnx = 16\nt = 0.1\n[weight]\ngamma = 2.0\n").unwrap();
    let a = tmp.path().join("a");
    let o = dualpde(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&a)["result"]["grid"]["nx"], 16);
    let b = tmp.path().join("b");
    let o = dualpde(&["solve", "--config", cfg.to_str().unwrap(), "--Nx", "10", "--weight", "0.5", "--out", b.to_str().unwrap()]);
    assert!(o.status.success());
    let r = report(&b);
    assert_eq!(r["result"]["grid"]["nx"], 10);
    assert_eq!(r["result"]["weight"]["gamma"], 0.5);
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nnx = 8\nbogus = 1\n").unwrap();
    let o = dualpde(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus"));
    let payload: Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(payload["error"]["kind"], "config");
}

#[test]
fn bad_flag_exits_2() {
    assert_eq!(dualpde(&["solve", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(dualpde(&["solve", "--model", "navier"]).status.code(), Some(2));
}

#[test]
fn horizon_violation_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = dualpde(&["consistency", "--model", "burgers", "--v0", "sin:1", "--Nx", "16", "--T", "0.3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("\"kind\":\"horizon\""));
}

#[test]
fn non_convergence_exits_4_with_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nc");
    let o = dualpde(&["solve", "--model", "burgers", "--v0", "sin:1", "--Nx", "32", "--T", "0.1", "--max-iterations", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(report(&out)["result"]["solver"]["converged"], false);
}

#[test]
fn consistency_certificate_and_recovery() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = dualpde(&["consistency", "--model", "barotropic", "--pressure", "gamma:1.4", "--data", FLUID, "--Nx", "32", "--T", "0.1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert!(r["result"]["certificate"].is_object());
    assert!(r["result"]["recovery"]["levels"].as_u64().unwrap() > 0);
    let fields = std::fs::read_to_string(out.join("fields.csv")).unwrap();
    assert!(fields.contains("sharp_recovered:"));
}

#[test]
fn substitute_report_has_one_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = dualpde(&["burgers-substitute", "--v0", "sin:1", "--Nx", "128", "--T", "0.5", "--snapshots", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let gaps = r["result"]["gaps"].as_array().unwrap();
    assert_eq!(gaps.len(), 1);
    let (a, b) = (gaps[0]["a"].as_f64().unwrap(), gaps[0]["b"].as_f64().unwrap());
    assert!((a + b - 1.0).abs() < 1e-8);
    let res = &r["result"]["residuals"];
    assert!(res["mass_defect"].as_f64().unwrap() < 1e-12);
    assert!(res["rho_min"].as_f64().unwrap() > -1e-12);
    // discretisation error at Nt = Nx/4
    assert!(res["continuity"].as_f64().unwrap() < 1e-2);
    let csv = std::fs::read_to_string(out.join("substitute.csv")).unwrap();
    // 3 snapshots x 128 cells x 4 components, plus the two header lines
    assert_eq!(csv.lines().count(), 2 + 3 * 128 * 4);
    assert!(dualpde(&["burgers-substitute", "--model", "qhd", "--v0", "sin:1", "--Nx", "16", "--T", "0.5"]).status.code() == Some(2));
}

#[test]
fn dafermos_candidates() {
    let tmp = tempfile::tempdir().unwrap();
    for cand in ["strong", "inflated"] {
        let out = tmp.path().join(cand);
        let o = dualpde(&[
            "dafermos", "--model", "burgers", "--v0", "sin:1", "--Nx", "128", "--T", "0.1", "--candidate", cand, "--inflate", "0.05",
            "--residual-tol", "2e-2", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{cand}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(&out)["result"]["comparison"]["verdict"], "no-violation");
        let tl = std::fs::read_to_string(out.join("timelines.csv")).unwrap();
        assert_eq!(tl.lines().nth(1), Some("t,strong,subsolution"));
    }
    // the manufactured strong record carries truncation error well above the default tolerance
    let o = dualpde(&["dafermos", "--model", "burgers", "--v0", "sin:1", "--Nx", "16", "--T", "0.1", "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_model_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = dualpde(&["verify-model", "--model", "korteweg", "--s", "-0.5", "--trials", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8_lossy(&o.stdout);
    for check in ["sharp_round_trip", "lowner_midpoint_convexity", "conservativity_residual", "adjointness"] {
        assert!(table.contains(check), "{check}");
    }
    assert!(report(&out)["result"]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn gap_study_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = dualpde(&["gap-study", "--model", "burgers", "--v0", "sin:1", "--T", "0.1", "--sizes", "8,12", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("gap_study.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "# dualpde-csv/1 gap-study");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("8,8,"));
}
