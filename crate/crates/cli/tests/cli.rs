use std::process::{Command, Output};

use anonq::ghz::cat_state;
use anonq::qsim::{SparseState, StateDump};
use serde_json::Value;

fn anonq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anonq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn elect_ring_all_branches() {
    let out = anonq(&["elect", "--catalog", "ring", "--n", "4", "--all-branches"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let branches = v["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 4);
    assert!(branches.iter().all(|b| b["leader_count"] == 1));
    assert_eq!(v["cost"]["rounds"], 104);
}

#[test]
fn elect_sample_is_deterministic() {
    let a = anonq(&["elect", "--catalog", "complete", "--n", "2", "--seed", "7"]);
    let b = anonq(&["elect", "--catalog", "complete", "--n", "2", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["branches"].as_array().unwrap().len(), 1);
    assert_eq!(v["mode"], "sample");
}

#[test]
fn elect_with_upper_bound_from_file() {
    let dir = std::env::temp_dir().join(format!("anonq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.txt");
    std::fs::write(&path, "# path on three nodes\nn 3\ne 0 1\ne 1 2\n").unwrap();
    let out = anonq(&[
        "elect",
        "--graph",
        path.to_str().unwrap(),
        "--upper-bound",
        "5",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["exact"], true);
    assert_eq!(v["upper_bound"], 5);
}

#[test]
fn ghz_state_round_trips_through_json() {
    let dir = std::env::temp_dir().join(format!("anonq-ghz-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ghz.json");
    let out = anonq(&[
        "ghz",
        "--catalog",
        "ring",
        "--n",
        "3",
        "--k",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["foreign_gates"].as_array().unwrap().len(), 0);
    let reference = cat_state(3, 0, 3).unwrap();
    for b in v["branches"].as_array().unwrap() {
        let dump: StateDump = serde_json::from_value(b["state"].clone()).unwrap();
        let state = SparseState::from_dump(&dump).unwrap();
        assert!((state.fidelity(&reference).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn compute_parity() {
    let out = anonq(&[
        "compute",
        "--catalog",
        "star",
        "--n",
        "4",
        "--function",
        "parity",
        "--labels",
        "1,0,1,1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["values"], serde_json::json!([1, 1, 1, 1]));
}

#[test]
fn verify_selected_suites() {
    for suite in ["angles", "lemma-a"] {
        let out = anonq(&["verify", "--suite", suite]);
        assert_eq!(out.status.code(), Some(0));
        assert!(json(&out)[0]["passed"].as_bool().unwrap());
    }
    assert_eq!(anonq(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn cost_table_csv() {
    let out = anonq(&["cost-table", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.contains(",true,26,")));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["elect", "--catalog", "ring"][..],
        &["elect", "--catalog", "ring", "--n", "4", "--k", "2"],
        &[
            "elect",
            "--catalog",
            "ring",
            "--n",
            "4",
            "--seed",
            "1",
            "--all-branches",
        ],
        &["elect", "--catalog", "ring", "--n", "1"],
        &[
            "elect",
            "--catalog",
            "ring",
            "--n",
            "4",
            "--upper-bound",
            "3",
        ],
        &[
            "compute",
            "--catalog",
            "ring",
            "--n",
            "3",
            "--function",
            "parity",
            "--labels",
            "1,0",
        ],
    ] {
        assert_eq!(anonq(args).status.code(), Some(2), "{args:?}");
    }
}
