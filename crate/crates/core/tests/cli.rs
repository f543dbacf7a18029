use std::path::Path;
use std::process::{Command, Output};

fn shotmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shotmix")).args(args).output().unwrap()
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).to_string_lossy().into_owned()
}

const RAW: &str = "\
player_id,season_id,timestamp,outcome,start_x,start_y,end_x,end_y,end_z,body_part,xg,postxg
7,2019,100,Goal,100,40,118,41,1.0,RightFoot,0.12,0.55
7,2019,200,Saved,102,35,119,39,0.5,LeftFoot,0.08,0.20
7,2019,300,OffTarget,98,45,120,30,3.1,RightFoot,0.05,0.0
8,2019,150,Saved,104,40,117,42,not-a-number,Header,0.10,0.15
8,2019,250,Post,101,38,119,43.5,1.2,RightFoot,0.09,0.0
";

#[test]
fn preprocess_logs_malformed_row_and_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    std::fs::write(&raw, RAW).unwrap();
    let out = shotmix(&["preprocess", "--input", raw.to_str().unwrap(), "--output", &p(dir.path(), "pre")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let shots = std::fs::read_to_string(dir.path().join("pre/shots.jsonl")).unwrap();
    assert_eq!(shots.lines().count(), 4);
    let rejections = std::fs::read_to_string(dir.path().join("pre/rejections.csv")).unwrap();
    assert_eq!(rejections.lines().count(), 2, "header plus one entry:\n{rejections}");
    assert!(rejections.lines().nth(1).unwrap().starts_with("4,"));
    assert!(dir.path().join("pre/manifest.json").exists());
}

#[test]
fn preprocess_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    std::fs::write(&raw, RAW).unwrap();
    for out in ["a", "b"] {
        let o = shotmix(&["preprocess", "--input", raw.to_str().unwrap(), "--output", &p(dir.path(), out)]);
        assert!(o.status.success());
    }
    for f in ["shots.jsonl", "rejections.csv", "anomalies.csv", "manifest.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn simulate_metrics_evaluate_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(shotmix(&["simulate", "--output", &p(d, "sim")]).status.success());
    let o = shotmix(&["metrics", "--input", &p(d, "sim/shots.jsonl"), "--output", &p(d, "metrics")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["model.json", "players.json", "postxg.json", "values.json", "metrics.csv", "manifest.json"] {
        assert!(d.join("metrics").join(f).exists(), "missing {f}");
    }
    let o = shotmix(&["evaluate", "--input", &p(d, "metrics/metrics.csv"), "--output", &p(d, "eval")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 7);
    let sweep = std::fs::read_to_string(d.join("eval/sweep.csv")).unwrap();
    assert!(sweep.starts_with("threshold,metric,correlation,ci_low,ci_high"));
}

#[test]
fn players_file_from_another_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = shotmix(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    ok(&["simulate", "--output", &p(d, "sim"), "--n-players", "40", "--shots", "30"]);
    ok(&["fit-global", "--input", &p(d, "sim/shots.jsonl"), "--output", &p(d, "global")]);
    let sat = p(d, "global/saturated.json");
    let shots = p(d, "sim/shots.jsonl");
    ok(&["prune", "--input", &sat, "--shots", &shots, "--output", &p(d, "a")]);
    ok(&["prune", "--input", &sat, "--shots", &shots, "--threshold", "0.05", "--output", &p(d, "b")]);
    ok(&["fit-players", "--input", &shots, "--model", &p(d, "a/model.json"), "--output", &p(d, "players")]);

    let o = shotmix(&[
        "metrics",
        "--input",
        &shots,
        "--model",
        &p(d, "b/model.json"),
        "--players",
        &p(d, "players/players.json"),
        "--output",
        &p(d, "metrics"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hash"));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "preprocess",
        "fit-global",
        "prune",
        "fit-players",
        "fit-postxg",
        "values",
        "metrics",
        "evaluate",
        "sensitivity",
        "simulate",
    ] {
        let o = shotmix(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("--output"), "{sub}");
    }
    assert_eq!(shotmix(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one_and_run_errors_exit_two() {
    assert_eq!(shotmix(&["evaluate", "--bogus"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = shotmix(&["fit-global", "--input", &p(dir.path(), "missing.jsonl"), "--output", &p(dir.path(), "x")]);
    assert_eq!(o.status.code(), Some(2));
}
