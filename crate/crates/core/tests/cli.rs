use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssr-bell")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

const VIOLATE_FIELDS: [&str; 12] = [
    "command", "state", "inequality", "M", "copies", "best_value", "bound", "violated", "margin_percent", "angles",
    "seed", "runtime_ms",
];

#[test]
fn violate_reports_the_full_schema() {
    let out = run(&["violate", "--state", "w", "--parties", "3", "--copies", "2", "--inequality", "mabk", "--restarts", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for field in VIOLATE_FIELDS {
        assert!(v.get(field).is_some(), "missing {field}");
    }
    assert_eq!(v["command"], "violate");
    assert_eq!(v["M"], 3);
    assert!((v["best_value"].as_f64().unwrap() - 4.29929).abs() < 2e-3);
    assert_eq!(v["violated"], true);
    assert_eq!(v["angles"].as_array().unwrap().len(), 3);
}

#[test]
fn vacuum_chsh_is_not_violated() {
    let out = run(&["violate", "--state", "vacuum", "--inequality", "chsh", "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["best_value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["violated"], false);
}

#[test]
fn csv_and_text_formats() {
    let out = run(&["violate", "--state", "bell", "--inequality", "chsh", "--restarts", "4", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "command,state,inequality,M,copies,best_value,bound,violated,margin_percent,angles,seed,runtime_ms"
    );
    assert!(lines.next().unwrap().starts_with("violate,bell,chsh,2,2,2.41421,2,true,20.7107,"));

    let out = run(&["violate", "--state", "bell", "--inequality", "chsh", "--restarts", "4", "--format", "text"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("best value 2.41421"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "state = \"w\"\nparties = 3\ninequality = \"mabk\"\nrestarts = 4\nseed = 11\n").unwrap();
    let out = run(&["violate", "--config", path.to_str().unwrap(), "--parties", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["M"], 2);
    assert_eq!(v["seed"], 11);
    assert_eq!(v["restarts"], 4);
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&["certify", "--state", "w", "--parties", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["holds"], true);
}

#[test]
fn certify_reports() {
    let v = json(&run(&["certify", "--state", "w", "--parties", "4", "--copies", "1"]));
    assert_eq!(v["holds"], true);
    assert_eq!(v["partitions"].as_array().unwrap().len(), 4);
    assert_eq!(run(&["certify", "--state", "dual-rail-bell"]).status.code(), Some(5));
}

#[test]
fn bound_reports() {
    let v = json(&run(&["bound", "--inequality", "chsh"]));
    assert_eq!(v["local_bound"], 2.0);
    let v = json(&run(&["bound", "--inequality", "bancal", "--parties", "3"]));
    assert_eq!(v["hybrid_bound"], 4.0);
    assert_eq!(v["declared_bound"], 4.0);
    let v = json(&run(&["bound", "--inequality", "mabk", "--parties", "4"]));
    assert!((v["local_bound"].as_f64().unwrap() - 8.0).abs() < 1e-9);
    assert_eq!(v["declared_bound"], 8.0);
}

#[test]
fn ssr_check_reports_compliance() {
    let v = json(&run(&["ssr-check", "--state", "dicke", "--parties", "4"]));
    assert_eq!(v["observables_compliant"], true);
    assert!(v["max_expectation_gap"].as_f64().unwrap() < 1e-10);
    assert!(v["idempotence_residual"].as_f64().unwrap() < 1e-12);
    let total: f64 = v["partitions"].as_array().unwrap().iter().map(|p| p["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["violate", "--state", "ghz"]).status.code(), Some(2));
    assert_eq!(run(&["violate", "--inequality", "chsh"]).status.code(), Some(2));
    assert_eq!(run(&["violate", "--state", "w", "--parties", "3", "--inequality", "chsh"]).status.code(), Some(2));
    assert_eq!(run(&["violate", "--state", "w", "--restarts", "0", "--inequality", "mabk"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let big = run(&["violate", "--state", "dicke", "--parties", "12", "--dicke-n", "6", "--inequality", "bancal"]);
    assert_eq!(big.status.code(), Some(3));
    assert_eq!(run(&["violate", "--config", "/nonexistent/run.toml"]).status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("sub");
    let out = run(&["tables", "--out", nested.to_str().unwrap(), "--restarts", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
