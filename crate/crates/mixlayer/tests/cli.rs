use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixlayer::io::{compare_golden, read_csv, read_json, Column, ColumnTolerance};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixlayer"))
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn num<'a>(doc: &'a mixlayer::io::OutputDoc, name: &str) -> &'a [f64] {
    doc.column(name)
        .and_then(Column::as_num)
        .unwrap_or_else(|| panic!("numeric column {name}"))
}

#[test]
fn table_d_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--jobs", "3", "table", "d"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let produced = read_csv(&dir.path().join("table2.csv")).unwrap();
    let report = compare_golden(&produced, &golden("table2.csv"), &[], ColumnTolerance::abs(1e-3)).unwrap();
    assert!(report.pass(), "{:?}", report.failures());
}

#[test]
fn flooded_jet_writes_table1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["flow", "--preset", "flooded-jet", "--x", "0.5:2:4", "--y", "-3:3:7"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "fig1_1_field.csv",
        "fig1_1_profiles.csv",
        "fig1_1_streamlines.csv",
        "table1.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let produced = read_csv(&dir.path().join("table1.csv")).unwrap();
    let report = compare_golden(&produced, &golden("table1.csv"), &[], ColumnTolerance::abs(1e-4)).unwrap();
    assert!(report.pass(), "{:?}", report.failures());
    let field = read_csv(&dir.path().join("fig1_1_field.csv")).unwrap();
    assert_eq!(field.rows(), 4 * 7);
}

#[test]
fn solve_profile_ends_with_pole_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--m", "1/3", "--samples", "11"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("solve_m0.333333333_profile.csv")).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("# termination=pole tau_p=3.6275"), "{last}");
    let doc = read_csv(&dir.path().join("solve_m0.333333333_profile.csv")).unwrap();
    // samples past the pole are not defined
    assert!(num(&doc, "phi").last().unwrap().is_nan());
}

#[test]
fn solve_with_b_in_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--format", "json", "solve", "--m", "1", "--b", "0.5"]);
    assert!(o.status.success());
    let report = read_json(&dir.path().join("solve_m1_report.json")).unwrap();
    let Some(Column::Text(keys)) = report.column("quantity") else {
        panic!("no quantity column")
    };
    let values = num(&report, "value");
    let a = values[keys.iter().position(|k| k == "a").unwrap()];
    assert!((a - 0.61958).abs() < 5e-4, "a = {a}");
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("b = 0.5"));
}

#[test]
fn table_row_failure_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["table", "b", "--m", "0.4,1"]);
    assert!(o.status.success());
    let doc = read_csv(&dir.path().join("table3.csv")).unwrap();
    let b = num(&doc, "b");
    assert!(b[0].is_nan());
    assert!((b[1] - 1.30389).abs() < 1e-4);
    let Some(Column::Text(notes)) = doc.column("note") else {
        panic!("no note column")
    };
    assert!(!notes[0].is_empty() && notes[1].is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["solve", "--m", "0.25"]).status.code(), Some(2));
    assert_eq!(
        run(dir.path(), &["solve", "--m", "1", "--a", "-1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(dir.path(), &["solve", "--m", "1", "--a", "1", "--b", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(dir.path(), &["--t-cut", "0.2", "solve", "--m", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(run(dir.path(), &["bogus"]).status.code(), Some(2));
    let o = run(dir.path(), &["solve", "--m", "0.25"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1/3"));
}

#[test]
fn config_file_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("from_config");
    std::fs::write(
        &cfg,
        format!("# settings\nt_cut = 9\nformat = json\nout = {}\n", out.display()),
    )
    .unwrap();
    let o = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["blowup", "--m", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("blowup_m1.json").exists());

    let env_out = dir.path().join("from_env");
    let o = bin()
        .env("MIXLAYER_OUT", &env_out)
        .args(["blowup", "--m", "0.5"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_out.join("blowup_bernoulli.csv").exists());

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let o = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["blowup", "--m", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn phase_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["phase", "--m", "0.25"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("phase_m0.25_profile.csv")).unwrap();
    assert!(text.trim_end().ends_with(|c: char| c.is_ascii_digit()));
    assert!(text.contains("# termination=branch_point phi_zero="));

    let o = run(dir.path(), &["phase", "--m", "2"]);
    assert!(o.status.success());
    let doc = read_csv(&dir.path().join("phase_m2_report.csv")).unwrap();
    let Some(Column::Text(keys)) = doc.column("quantity") else {
        panic!()
    };
    let v = num(&doc, "value");
    let get = |k: &str| v[keys.iter().position(|x| x == k).unwrap()];
    assert!((get("big_b_fit") - get("big_b_expected")).abs() < 1e-6);
    assert!(get("consistency_max_dev") < 1e-8);
}

#[test]
fn pole_bounded_flow_has_overlays() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["flow", "--m", "0.4", "--x", "0.5:2:4", "--y", "-4:4:9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_csv(&dir.path().join("flow_m0.4_overlays.csv")).unwrap();
    let Some(Column::Text(kind)) = doc.column("line") else {
        panic!()
    };
    assert!(kind.iter().any(|k| k == "pole") && kind.iter().any(|k| k == "stagnation"));
    // the pole line sits below the stagnation line in the mirrored frame
    let y = num(&doc, "y");
    let first_pole = kind.iter().position(|k| k == "pole").unwrap();
    let first_stag = kind.iter().position(|k| k == "stagnation").unwrap();
    assert!(y[first_pole] < y[first_stag]);
}
