use std::process::{Command, Output};

fn poolfund(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poolfund"))
        .args(args)
        .env_remove("POOLFUND_LIFE_TABLE")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_table(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("table.csv");
    let mut text = String::from("age,qx\n");
    for age in 70..80 {
        text.push_str(&format!("{age},0.5\n"));
    }
    text.push_str("80,1\n");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn nu_of_inline_roster() {
    let out = poolfund(&["nu", "--savings", "500@100,500@200"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["implied_number"], 900.0);
}

#[test]
fn approx_from_implied_number() {
    let out = poolfund(&["approx", "--nu", "1000"]);
    assert!(out.status.success());
    let u = json(&out)["u"].as_f64().unwrap();
    assert!((u - 0.820244271843844).abs() < 1e-12);
}

#[test]
fn life_table_from_environment_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(dir.path());
    // u = 0.75 on a constant one-year survival of 0.5 is two years.
    let args = ["approx", "--nu", "1000", "--eps1", "0.5", "--beta", "0.5"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_poolfund"))
        .args(args)
        .env("POOLFUND_LIFE_TABLE", &table)
        .output()
        .unwrap();
    assert!(with_env.status.success());
    assert!(json(&with_env)["years"].is_number());

    let overridden = Command::new(env!("CARGO_BIN_EXE_poolfund"))
        .args(args)
        .args(["--life-table", "/does/not/exist.csv"])
        .env("POOLFUND_LIFE_TABLE", &table)
        .output()
        .unwrap();
    assert_eq!(overridden.status.code(), Some(2));
}

#[test]
fn stability_is_reproducible() {
    let args = ["stability", "--savings", "40@1,10@5", "--reps", "2000", "--seed", "9"];
    let a = poolfund(&args);
    let b = poolfund(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let u = json(&a)["u_star"].as_f64().unwrap();
    assert!(u > 0.0 && u < 1.0);
}

#[test]
fn input_errors_exit_with_two() {
    for args in [
        &["nu", "--savings", "0@1"][..],
        &["nu", "--savings", "3@-1"],
        &["approx", "--nu", "100", "--eps2", "0.1"],
        &["approx", "--nu", "100", "--life-table", "/does/not/exist.csv"],
        &["stability", "--savings", "10@1", "--beta", "1.5"],
        &["sweep", "--method", "guess"],
        &["no-such-command"],
    ] {
        let out = poolfund(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn numerical_domain_errors_exit_with_three() {
    let out = poolfund(&["stability", "--savings", "10@1", "--reps", "5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn artifacts_come_with_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("path.csv");
    let out = poolfund(&["fund-path", "--savings", "5@1,2@3", "--seed", "4", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("time_years,member,alive,wealth,income,credit"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("path.csv.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "fund-path");
    assert_eq!(manifest["seed"], 4);
}

#[test]
fn beneficial_verdicts() {
    let mixed = poolfund(&["beneficial", "--savings", "800@1,200@10"]);
    assert_eq!(json(&mixed)["beneficial"], false);
    let narrow = poolfund(&["beneficial", "--savings", "5@1,5@2"]);
    assert_eq!(json(&narrow)["beneficial"], true);
}
