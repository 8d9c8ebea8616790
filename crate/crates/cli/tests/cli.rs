use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ikep_core::allocation::shapley;
use ikep_core::campaign::{run_campaign, CampaignConfig};
use ikep_core::fixtures::three_country;
use ikep_core::game::GameOracle;
use ikep_core::packing::ExchangeBound;
use ikep_core::par::Execution;
use ikep_core::simulator::{Concept, Scenario};
use serde_json::Value;

fn ikep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ikep")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn three_country_file(dir: &Path) -> String {
    let path = dir.join("three_country.json");
    fs::write(&path, three_country().to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_value_of_coalition() {
    let dir = tempfile::tempdir().unwrap();
    let g = three_country_file(dir.path());
    let out = ikep(&["solve", "--graph", &g, "--what", "value", "--coalition", "1,2"]);
    assert_eq!(stdout_json(&out), Value::from(5));
}

#[test]
fn solve_shapley_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let g = three_country_file(dir.path());
    let out = stdout_json(&ikep(&["solve", "--graph", &g, "--what", "shapley"]));
    assert_eq!(out["1"]["exact"], "3/2");
    assert_eq!(out["2"]["exact"], "7/2");
    assert_eq!(out["3"]["exact"], "0");
    let lib = shapley(&GameOracle::new(three_country()).unwrap()).unwrap();
    assert_eq!(out, serde_json::to_value(lib).unwrap());
}

#[test]
fn core_check_rejects_blocked_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let g = three_country_file(dir.path());
    assert_eq!(stdout_json(&ikep(&["solve", "--graph", &g, "--what", "core-check", "--x", "5,0,0"])), Value::Bool(false));
    assert_eq!(stdout_json(&ikep(&["solve", "--graph", &g, "--what", "core-check", "--x", "0,5,0"])), Value::Bool(true));
}

#[test]
fn lexmin_with_shapley_target_exports_models() {
    let dir = tempfile::tempdir().unwrap();
    let g = three_country_file(dir.path());
    let lp = dir.path().join("lp");
    let out = stdout_json(&ikep(&[
        "solve",
        "--graph",
        &g,
        "--what",
        "lexmin",
        "--target",
        "shapley",
        "--export-dir",
        lp.to_str().unwrap(),
    ]));
    assert_eq!(out["transplants"], serde_json::json!([3, 2, 0]));
    assert_eq!(out["profile"]["terminal"], "HalfThreshold");
    assert_eq!(out["solver_calls"], 4);
    for f in ["ilp_d1.lp", "ilp_N1.lp", "ilp_d2.lp", "ilp_N2.lp"] {
        assert!(lp.join(f).exists(), "{f}");
    }
}

#[test]
fn usage_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let g = three_country_file(dir.path());
    assert_eq!(ikep(&["generate", "--pairs", "-1", "--countries", "4", "--seed", "7"]).status.code(), Some(2));
    assert_eq!(ikep(&["solve", "--graph", &g, "--what", "value"]).status.code(), Some(2));
    assert_eq!(ikep(&["solve", "--graph", &g, "--what", "weak", "--x", "1,2"]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(ikep(&["solve", "--graph", missing.to_str().unwrap(), "--what", "packing"]).status.code(), Some(5));
}

#[test]
fn cap_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.json");
    let g = ikep_core::graph::CompatibilityGraph::empty(17);
    fs::write(&path, g.to_json()).unwrap();
    assert_eq!(ikep(&["solve", "--graph", path.to_str().unwrap(), "--what", "shapley"]).status.code(), Some(4));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = ikep(&["generate", "--pairs", "60", "--countries", "4", "--seed", "7", "--out-dir", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let fa = fs::read(a.join("pool_seed7_n4.json")).unwrap();
    assert_eq!(fa, fs::read(b.join("pool_seed7_n4.json")).unwrap());
    assert_eq!(fs::read_dir(&a).unwrap().count(), 1);
}

#[test]
fn simulate_campaign_contract() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        ikep(&[
            "simulate",
            "--seeds",
            "1,2,3,4,5",
            "--pairs",
            "24",
            "--countries",
            "3",
            "--concepts",
            "shapley,banzhaf",
            "--rounds",
            "6",
            "--bounds",
            "two,infinity",
            "--out-dir",
            out.to_str().unwrap(),
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let summary = stdout_json(&run(&a));
    assert_eq!(summary["failures"], 0);
    stdout_json(&run(&b));
    for f in ["metrics.csv", "rounds.csv", "histogram.csv", "paired.csv", "failures.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    // 5 seeds × 2 concepts × 5 scenarios × 2 bounds
    assert_eq!(metrics.lines().count(), 1 + 5 * 2 * 5 * 2);
    let paired = fs::read_to_string(a.join("paired.csv")).unwrap();
    assert_eq!(paired.lines().count(), 1 + 5 * 2 * 5);
    assert!(paired.lines().skip(1).all(|l| l.ends_with(",true")));

    // thin adapter: the library produces the same report
    let cfg = CampaignConfig {
        seeds: vec![1, 2, 3, 4, 5],
        pairs: 24,
        countries: vec![3],
        concepts: vec![Concept::Shapley, Concept::Banzhaf],
        scenarios: Scenario::ALL.to_vec(),
        bounds: vec![ExchangeBound::Two, ExchangeBound::Infinity],
        rounds: 6,
        ..CampaignConfig::default()
    };
    let lib = run_campaign(&cfg, Execution::Sequential).unwrap();
    assert_eq!(lib.metrics_csv(), metrics);
}

#[test]
fn simulate_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("campaign.json");
    fs::write(&cfg, r#"{"seeds":[3],"pairs":20,"countries":[2],"concepts":["nucleolus"],"scenarios":["d1+c"],"rounds":5}"#)
        .unwrap();
    let out = dir.path().join("out");
    let summary = stdout_json(&ikep(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--json",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(summary["runs"], 1);
    let runs: Value = serde_json::from_str(&fs::read_to_string(out.join("runs.json")).unwrap()).unwrap();
    assert_eq!(runs["runs"][0]["run"]["logs"].as_array().unwrap().len(), 5);
    fs::write(&cfg, r#"{"seed":[3]}"#).unwrap();
    assert_eq!(ikep(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}
