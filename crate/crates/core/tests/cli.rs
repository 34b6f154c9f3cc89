mod common;

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_actuplace"))
}

fn write_example(dir: &Path) -> String {
    let path = dir.join("net.json");
    std::fs::write(&path, common::EXAMPLE1_JSON).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run(args: &[&str]) -> (i32, Value, String) {
    let out = bin().args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), report, String::from_utf8(out.stderr).unwrap())
}

#[test]
fn min_k_reports_two() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_example(dir.path());
    let (code, report, stderr) = run(&["min-k", "--net", &net]);
    assert_eq!(code, 0);
    assert_eq!(report["k_min"], 2);
    assert_eq!(report["input_digest"].as_str().unwrap().len(), 64);
    assert!(stderr.contains("K_min = 2"));
}

#[test]
fn solve_forward_picks_v3_v4() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_example(dir.path());
    let (code, report, _) =
        run(&["solve", "--net", &net, "--k", "2", "--t", "2", "--eps", "1e-9", "--method", "forward"]);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["chosen"], serde_json::json!([3, 4]));
    assert_eq!(report["result"]["chosen_labels"], serde_json::json!(["3", "4"]));
    assert_eq!(report["result"]["trace"]["picks"][0]["node"], 3);
}

#[test]
fn echoed_arguments_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_example(dir.path());
    for method in ["forward", "reverse", "brute", "random"] {
        let (code, first, _) = run(&["solve", "--net", &net, "--k", "3", "--method", method, "--seed", "5"]);
        assert_eq!(code, 0);
        let argv: Vec<String> =
            first["argv"].as_array().unwrap().iter().map(|a| a.as_str().unwrap().to_owned()).collect();
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let (_, second, _) = run(&argv);
        assert_eq!(first["result"]["chosen"], second["result"]["chosen"]);
        assert_eq!(first["result"]["f_eps"], second["result"]["f_eps"]);
        assert_eq!(first["input_digest"], second["input_digest"]);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_example(dir.path());
    let (_, one, _) = run(&["solve", "--net", &net, "--k", "2", "--jobs", "1"]);
    let out = bin().args(["solve", "--net", &net, "--k", "2"]).env("ACTUPLACE_JOBS", "3").output().unwrap();
    let many: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(one["result"]["trace"], many["result"]["trace"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_example(dir.path());
    assert_eq!(run(&["solve", "--net", &net, "--k", "1"]).0, 1);
    assert_eq!(run(&["solve", "--net", &net, "--k", "9"]).0, 2);
    assert_eq!(run(&["solve", "--net", &net, "--k", "2", "--eps", "-1"]).0, 2);
    assert_eq!(run(&["solve", "--net", "/nonexistent/net.json", "--k", "2"]).0, 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n":2,"edges":[{"from":1,"to":2,"w":1}]}"#).unwrap();
    assert_eq!(run(&["min-k", "--net", bad.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
}

#[test]
fn feasibility_checks() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_example(dir.path());
    let (code, report, _) = run(&["check-forward", "--net", &net, "--k", "3", "--set", "1"]);
    assert_eq!(code, 0);
    assert_eq!(report["feasible"], true);
    let (_, report, _) = run(&["check-forward", "--net", &net, "--k", "2", "--set", "1,2"]);
    assert_eq!(report["feasible"], false);
    let (_, report, _) = run(&["check-reverse", "--net", &net, "--k", "2", "--set", "1"]);
    assert_eq!(report["feasible"], true);
    assert_eq!(report["max_flow"], 4);
}

#[test]
fn table1_csv() {
    let out = bin().arg("table1").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["N", "gamma", "alpha", "z_bar", "z_u"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[1][0], "100");
    assert_eq!(&rows[1][3], "7.87576");
}

#[test]
fn epsilon_guarantee_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_example(dir.path());
    let (code, report, _) = run(&["epsilon", "--net", &net, "--k", "2", "--t", "2", "--eps0", "1e-1"]);
    assert_eq!(code, 0);
    assert_eq!(report["guarantee_holds"], true);
    let (code, report, _) = run(&["guarantee", "--net", &net, "--k", "2", "--t", "2"]);
    assert_eq!(code, 0);
    assert_eq!(report["forward"]["holds"], true);
    assert_eq!(report["reverse"]["holds"], true);
    let (code, report, _) = run(&["verify", "--net", &net]);
    assert_eq!(code, 0);
    assert_eq!(report["disagreements"], serde_json::json!([]));
}

#[test]
fn gen_and_swing_produce_loadable_networks() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("stair.json");
    let out = bin()
        .args(["gen", "--profile", "staircase", "--seed", "1", "--out", out_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let net = actuplace::parse_network(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(net.n(), 23);

    let buses = dir.path().join("buses.csv");
    let branches = dir.path().join("branches.csv");
    std::fs::write(&buses, "id,M,D,injectable\n1,0.2,1.0,1\n2,0,0.5,0\n3,0.1,0.8,1\n").unwrap();
    std::fs::write(&branches, "from,to,b\n1,2,3.0\n2,3,2.0\n").unwrap();
    let (code, report, _) =
        run(&["swing", "--buses", buses.to_str().unwrap(), "--branches", branches.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["n"], 5);
}
