use std::process::{Command, Output};

use serde_json::Value;

fn hmono(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmono")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn example1_is_monotone() {
    let out = hmono(&["check-monotone", "--op", &config("example1.json"), "--trials", "10000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    assert_eq!(rep["ok"], true);
    assert_eq!(rep["config"]["seed"], 7);
    assert_eq!(rep["result"]["violations"], 0);
}

#[test]
fn negated_operator_reports_a_witness_pair() {
    let out = hmono(&["check-monotone", "--op", &config("negated.json")]);
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&out);
    assert_eq!(rep["result"]["witness"]["kind"], "pair");
    assert_eq!(rep["result"]["witness"]["sample"], 0);
}

#[test]
fn resolve_example() {
    let out = hmono(&["resolve", "--op", &config("example1.json"), "--lambda", "1", "--base", "0,0,0", "--target", "4,2"]);
    assert_eq!(out.status.code(), Some(0));
    let zeta: Vec<f64> = serde_json::from_value(json(&out)["result"]["zeta"].clone()).unwrap();
    for (got, want) in zeta.iter().zip([1.0, 0.8, 0.0]) {
        assert!((got - want).abs() <= 1e-10, "{zeta:?}");
    }
}

#[test]
fn usage_errors_exit_2_and_name_the_field() {
    let cases: [(&[&str], &str); 5] = [
        (&["resolve", "--op", "example1", "--lambda", "-1", "--base", "0,0,0", "--target", "4,2"], "lambda"),
        (&["resolve", "--op", "example1", "--lambda", "1", "--base", "0,0,0,0,0", "--target", "4,2"], "base"),
        (&["check-monotone", "--op", "example1", "--n", "2"], "n"),
        (&["check-monotone", "--op", "/no/such/file.json"], "op"),
        (&["check-monotone", "--op", "example1", "--format", "csv"], "format"),
    ];
    for (args, field) in cases {
        let out = hmono(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("`{field}`")), "{args:?}: {err}");
    }
    let out = hmono(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = std::env::temp_dir().join(format!("hmono-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"kind": "linear", "n": 1, "matrx": [[1, 0], [0, 1]]}"#).unwrap();
    let out = hmono(&["check-monotone", "--op", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("matrx"), "{err}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn gauge_cyclic_search_finds_nothing() {
    let out = hmono(&["search-cyclic", "--op", &config("gauge.json"), "--trials", "2000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["result"].get("witness").is_none());
}

#[test]
fn check_cyclic_validate_and_adjust() {
    // square with zero signed area traversed back and forth
    let open = "0,0,0;1,0,0;1,1,0;0,1,0";
    let out = hmono(&["check-cyclic", "--op", "gauge", "--chain", open]);
    assert_eq!(out.status.code(), Some(2), "an open chain must be rejected in validate mode");
    let out = hmono(&["check-cyclic", "--op", "gauge", "--chain", open, "--mode", "adjust"]);
    assert_eq!(out.status.code(), Some(0));
    let closed = json(&out)["result"]["chain"].clone();
    let text: Vec<String> = closed
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_array().unwrap().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
        .collect();
    let out = hmono(&["check-cyclic", "--op", "gauge", "--chain", &text.join(";")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fiber_csv_has_config_header_and_rows() {
    let out = hmono(&["fiber", "--op", "gauge", "--lambda", "1", "--target", "0,0", "--heights", "-2,0,3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# command: fiber"));
    assert!(lines[1].starts_with("# config: "));
    assert_eq!(lines[3], "height,zeta_x1,zeta_y1,zeta_t,residual,iterations");
    assert_eq!(lines.len(), 4 + 3);
    assert!(lines[6].starts_with("3.0,0.0,0.0,3.0,"));
}

#[test]
fn geometry_subcommands() {
    let out = hmono(&["lemma-seq", "--eta-prime", "1,0,0", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let pt: Vec<f64> = serde_json::from_value(json(&out)["result"]["steps"][1]["point"].clone()).unwrap();
    assert_eq!(pt, vec![1.5, -0.25, 0.5]);

    let out = hmono(&["sector-check", "--n", "1", "--step-div", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let out = hmono(&["sector-check", "--n", "1", "--step-div", "16"]);
    assert_eq!(out.status.code(), Some(2));

    let out = hmono(&["jacobian-check", "--n", "1", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(0));

    let out = hmono(&["polytope", "--xi", "0,0,0", "--r", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out)["result"]["radius_bound"].as_f64().unwrap();
    assert!((r - 2.0 * 2f64.sqrt()).abs() < 1e-12);

    let out = hmono(&["vertical-probe", "--op", "example1", "--x", "1,-2", "--t-range", "-5,5", "--max-diameter", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let out = hmono(&["vertical-probe", "--op", "gauge", "--x", "0.1,0", "--t-range", "-5,5", "--max-diameter", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_goes_to_out_file() {
    let path = std::env::temp_dir().join(format!("hmono-out-{}.json", std::process::id()));
    let out = hmono(&["resolve", "--op", "gauge", "--lambda", "2", "--base", "0,0,1", "--target", "0.5,0", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rep["command"], "resolve");
    std::fs::remove_file(&path).unwrap();
}
