use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eigencycle::fixtures::FixtureSet;
use eigencycle::spectral::fit_scale_sign;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigencycle")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let k = r.headers().unwrap().iter().position(|h| h == name).expect("column present");
    r.records().map(|rec| rec.unwrap()[k].parse().unwrap()).collect()
}

#[test]
fn eigencycles_match_reference_after_fit() {
    let dir = tempfile::tempdir().unwrap();
    let game = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/oneill.json");
    let o = run(&["eigencycles", "--game", game.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 29);
    let f = FixtureSet::embedded().unwrap();
    for tag in [".8i", ".4i_1", ".4i_2"] {
        let computed = csv_column(&text, tag);
        let reference = f.eigen_table.eigencycle_column(tag).unwrap();
        let fit = fit_scale_sign(&computed, reference.values()).unwrap();
        assert!(fit.max_abs_error < 5e-4, "{tag}: {fit:?}");
        // emitted signs follow the tabulated orientation
        assert_eq!(fit.sign, 1.0);
    }
}

#[test]
fn emitted_csv_reparses_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["eigencycles", "--format", "json"], dir.path());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let o = run(&["eigencycles", "--out", "sigma.csv"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("sigma.csv")).unwrap();
    for col in doc["columns"].as_array().unwrap() {
        let want: Vec<f64> = col["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(csv_column(&text, col["tag"].as_str().unwrap()), want);
    }
}

#[test]
fn spectrum_json_has_complex_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum"], dir.path());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let eigs = doc["eigenvalues"].as_array().unwrap();
    assert_eq!(eigs.len(), 8);
    assert!((eigs[0][1].as_f64().unwrap() - 0.8).abs() < 1e-10);
    assert_eq!(doc["eigenvectors"][0].as_array().unwrap().len(), 8);
    assert_eq!(doc["eigenvectors"][0][0].as_array().unwrap().len(), 2);
}

#[test]
fn empty_series_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = run(&["analyze", "--series", "empty.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("insufficient data"), "{}", stderr(&o));
    fs::write(dir.path().join("header.csv"), "session,round,a_choice,b_choice\n").unwrap();
    let o = run(&["analyze", "--series", "header.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&[], dir.path()).status.code(), Some(2));
}

#[test]
fn agents_are_seed_deterministic_and_analyzable() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |seed: &str, out: &str| {
        let o = run(
            &["simulate", "agents", "--policy", "wsls", "--rounds", "3000", "--seed", seed, "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let a = sim("7", "a.csv");
    assert_eq!(a, sim("7", "b.csv"));
    assert_ne!(a, sim("8", "c.csv"));
    assert!(a.starts_with("session,round,a_choice,b_choice"));
    let o = run(&["analyze", "--series", "a.csv", "--out", "l.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let l = fs::read_to_string(dir.path().join("l.csv")).unwrap();
    assert!(l.starts_with("pair,L"));
    assert_eq!(l.lines().count(), 29);
    let o = run(&["net-transit", "--series", "a.csv"], dir.path());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let t = doc["t"].as_array().unwrap();
    for (i, row) in t.iter().enumerate() {
        for (j, v) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(v.as_f64().unwrap(), -t[j][i].as_f64().unwrap());
        }
    }
}

#[test]
fn ode_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "ode", "--t1", "5", "--dt", "0.5", "--out", "traj.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3,x4,x5,x6,x7,x8");
    assert_eq!(lines.count(), 11);
}

#[test]
fn regress_reference_column() {
    let dir = tempfile::tempdir().unwrap();
    let f = FixtureSet::embedded().unwrap();
    let sigma = f.eigen_table.eigencycle_column(".8i").unwrap();
    let l = f.l_table.column("O").unwrap();
    let mut y = String::from("pair,L_O\n");
    let mut x = String::from("pair,sigma\n");
    for (i, p) in f.l_table.pairs.iter().enumerate() {
        y += &format!("{},{}\n", p.code(), l[i]);
        x += &format!("{},{}\n", p.code(), sigma.values()[i]);
    }
    fs::write(dir.path().join("y.csv"), y).unwrap();
    fs::write(dir.path().join("x.csv"), x).unwrap();
    let o = run(&["regress", "--y", "y.csv", "--x", "x.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let slope = &doc["coefficients"][1];
    assert_eq!(slope["name"], "sigma");
    assert!((slope["t"].as_f64().unwrap() - 8.26).abs() < 0.3);
    assert!(stderr(&o).contains("sigma"));
    let o = run(&["regress", "--y", "y.csv", "--x", "x.csv", "--no-intercept"], dir.path());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["coefficients"].as_array().unwrap().len(), 1);
}

#[test]
fn reproduce_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "table5"], dir.path());
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rho = doc["details"]["rho"].as_array().unwrap();
    assert_eq!(rho.len(), 6);
    assert!(rho.iter().all(|r| r.as_array().unwrap().len() == 6));
    assert_eq!(doc["checks"].as_array().unwrap().len(), 15);

    let o = run(&["reproduce", "table6", "--strict"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let first = o.stdout;
    assert_eq!(run(&["reproduce", "table6"], dir.path()).stdout, first);
    assert_eq!(run(&["reproduce", "table9"], dir.path()).status.code(), Some(1));
}

#[test]
fn reproduce_other_game_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mp.json"), r#"{"n_a": 2, "n_b": 2, "a_payoff": [[1, -1], [-1, 1]]}"#).unwrap();
    let o = run(&["reproduce", "table2", "--game", "mp.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("NOT APPLICABLE"));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["status"], "not_applicable");
}

#[test]
fn missing_fixture_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    eigencycle::fixtures::write_embedded(&fx).unwrap();
    let o = run(&["reproduce", "fine_ttest", "--fixtures", "fx"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    fs::remove_file(fx.join("l_table.csv")).unwrap();
    let o = run(&["reproduce", "fine_ttest", "--fixtures", "fx"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn render_lissajous_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["render", "lissajous", "--out", "figs"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let files: Vec<_> = fs::read_dir(dir.path().join("figs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 1, "no temporary files left behind");
    let svg = fs::read_to_string(dir.path().join("figs").join(&files[0])).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("panel")).count(), 28);
    let o = run(&["render", "scatter", "--experiment", "TT"], dir.path());
    assert!(roxmltree::Document::parse(std::str::from_utf8(&o.stdout).unwrap()).is_ok());
}

#[test]
fn verify_manifold_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-manifold", "--periods", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["tag"], ".8i");
}
