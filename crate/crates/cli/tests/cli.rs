use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kellerpath")).args(args).env_remove("KELLERPATH_THREADS").output().expect("spawn")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files_under(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out
}

fn assert_manifest_complete(dir: &Path) {
    let m = json(&dir.join("manifest.json"));
    let mut listed: BTreeSet<String> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    listed.insert("manifest.json".into());
    assert_eq!(files_under(dir), listed);
    assert!(m["params"]["constants"]["match_tol"].is_number());
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn eigs_csv_is_exact_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (d1, d2) = (tmp.path().join("1"), tmp.path().join("2"));
    for d in [&d1, &d2] {
        let o = kp(&["eigs", "--dim", "2", "--count", "4", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(d1.join("eigs.csv")).unwrap();
    assert_eq!(a, fs::read(d2.join("eigs.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,lambda,cubic_integral"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[1].parse::<f64>().unwrap(), 1.0);
    // 17 significant digits
    assert_eq!(first[2].split('e').next().unwrap().replace('.', "").trim_start_matches('-').len(), 17);
    assert_eq!(text.lines().count(), 5);
    assert_manifest_complete(&d1);
}

#[test]
fn glue_two_layers_meets_match_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kp(&["glue", "--dim", "3", "--mu", "300", "--k", "2", "--plot", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let l = json(&tmp.path().join("layers.json"));
    assert!(l["match_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(l["converged"], true);
    assert_eq!(l["betas"].as_array().unwrap().len(), 3);
    assert!(fs::read_to_string(tmp.path().join("profile.svg")).unwrap().starts_with("<svg"));
    assert_manifest_complete(tmp.path());
}

#[test]
fn verify_all_passes_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("all");
    let o = kp(&["verify", "--suite", "all", "--plot", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&d.join("report.json"));
    let reports = r.as_array().unwrap();
    assert!(reports.len() >= 10);
    for c in reports {
        assert_eq!(c["pass"], true, "{}", c["name"]);
    }
    assert!(d.join("trends.svg").exists());
    assert_manifest_complete(&d);

    let (g1, g2) = (tmp.path().join("g1"), tmp.path().join("g2"));
    for g in [&g1, &g2] {
        assert_eq!(kp(&["verify", "--suite", "green", "--dim", "2", "--out", g.to_str().unwrap()]).status.code(), Some(0));
    }
    assert_eq!(fs::read(g1.join("report.json")).unwrap(), fs::read(g2.join("report.json")).unwrap());
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(kp(&["eigs", "--bogus"]).status.code(), Some(2));
    assert_eq!(kp(&[]).status.code(), Some(2));
    assert_eq!(kp(&["monotone", "--mu", "0.5", "--out", tmp.path().to_str().unwrap()]).status.code(), Some(2));

    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# run\ndim = 3\nmuu = 200\n").unwrap();
    let o = kp(&["eigs", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("muu") && err.contains("line 3"), "{err}");

    let o = Command::new(env!("CARGO_BIN_EXE_kellerpath")).args(["eigs", "--out", tmp.path().to_str().unwrap()]).env("KELLERPATH_THREADS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_errors_exit_one_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kp(&["monotone", "--dim", "3", "--mu", "5", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(e["error"], "BelowThreshold");
    assert_eq!(e["command"], "monotone");
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "dim=2\na=0.3\nmu=300 # overridden\ndirection=decreasing\n").unwrap();
    let out = tmp.path().join("m");
    let o = kp(&["monotone", "--config", cfg.to_str().unwrap(), "--mu", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = json(&out.join("solution.json"));
    assert_eq!(s["mu"], 100.0);
    assert_eq!(s["N"], 2);
    assert_eq!(s["direction"], "decreasing");
    assert!(s["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn branch_manifest_names_profiles_and_report_checks_them() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = kp(&["branch", "--dim", "3", "--i", "2", "--mu-max", "40", "--max-steps", "10", "--profiles", "--plot", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(d.join("branch.csv")).unwrap();
    assert!(csv.starts_with("mu,u0,sup_norm,c1_norm,zeros,min_eig\n"));
    assert!(files_under(d).iter().any(|f| f.starts_with("profiles/")));
    assert!(d.join("bifurcation.svg").exists());
    assert_manifest_complete(d);

    assert_eq!(kp(&["report", "--out", d.to_str().unwrap()]).status.code(), Some(0));
    fs::remove_file(d.join("branch.csv")).unwrap();
    assert_eq!(kp(&["report", "--out", d.to_str().unwrap()]).status.code(), Some(1));

    // a new run in the same directory replaces the old artifacts
    assert_eq!(kp(&["eigs", "--out", d.to_str().unwrap()]).status.code(), Some(0));
    assert_manifest_complete(d);
    assert!(!d.join("branch.json").exists());
}
