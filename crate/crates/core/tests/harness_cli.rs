use std::path::Path;

use grid_marl::harness::{main_with_args, read_trajectory, RunReport};

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("grid-marl").chain(args.iter().copied()))
}

fn small(out: &Path) -> Vec<String> {
    [
        format!("run.output=\"{}\"", out.display()),
        "run.seeds=[3]".into(),
        "run.budget=20".into(),
        "run.eval_period=10".into(),
        "algo.strategy=dsacd".into(),
        "algo.width=8".into(),
        "algo.update_start=8".into(),
        "algo.batch_size=4".into(),
    ]
    .into_iter()
    .flat_map(|s| ["--set".to_string(), s])
    .collect()
}

fn run_with(out: &Path, extra: &[&str]) -> i32 {
    let sets = small(out);
    let mut args: Vec<&str> = sets.iter().map(String::as_str).collect();
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["train", "--no-such-flag"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["--set", "nokeyvalue", "train"]), 2);
}

#[test]
fn config_and_file_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--config", dir.path().join("absent.toml").to_str().unwrap(), "train"]), 4);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[algo]\nstrategy = \"dsacd\"\nlearning_rate = 3\n").unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "train"]), 3);
    assert_eq!(run(&["--set", "run.eval_period=300", "train"]), 5);
    assert_eq!(run(&["--set", "run.seeds=[]", "train"]), 5);
}

#[test]
fn scoring_needs_a_baseline_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(run_with(&out, &["score", "--trajectories", empty.to_str().unwrap()]), 6);
    assert_eq!(run_with(&out, &["eval", "--checkpoints", empty.to_str().unwrap()]), 6);
    assert_eq!(run_with(&out, &["baseline"]), 0);
    assert!(out.join("baseline-test.json").exists());
    assert_eq!(run_with(&out, &["score", "--trajectories", empty.to_str().unwrap()]), 7);
    assert_eq!(run_with(&out, &["eval", "--checkpoints", empty.to_str().unwrap()]), 4);
}

#[test]
fn gen_chronics_round_trips_through_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let chronics = dir.path().join("chronics");
    assert_eq!(run(&["gen-chronics", "--out", chronics.to_str().unwrap()]), 0);
    let manifest = chronics.join("manifest.toml");
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "[env]\nchronics = \"chronics/manifest.toml\"\n").unwrap();
    let out = dir.path().join("runs");
    let o = format!("run.output=\"{}\"", out.display());
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--set", &o, "baseline"]), 0);
    let from_manifest = std::fs::read_to_string(out.join("baseline-test.json")).unwrap();
    assert!(from_manifest.contains("manifest.toml"));
    assert!(manifest.exists());
}

#[test]
fn train_eval_score_pipeline_is_consistent_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    assert_eq!(run_with(&out, &["train"]), 0);
    let run_dir = out.join("dsacd-capa");
    let report = RunReport::read_json(&run_dir.join("report.json")).unwrap();
    assert_eq!(report.hyper.gamma, 0.998);
    assert_eq!(report.hyper.lr, 2e-4);
    assert_eq!(report.hyper.tau, 0.002);
    assert_eq!(report.aggregate.interactions, vec![10, 20]);
    assert_eq!(report.aggregate.se, vec![0.0, 0.0]);
    assert_eq!(report.checkpoints[0].len(), 3);
    let curve = std::fs::read_to_string(run_dir.join("curve.csv")).unwrap();
    assert!(curve.starts_with("interaction,mean,se,seed_3\n"));

    let seed_dir = run_dir.join("seed_3");
    let scores = std::fs::read(seed_dir.join("scores.csv")).unwrap();
    let ckpt = std::fs::read(seed_dir.join("agent_0.ckpt")).unwrap();
    assert_eq!(run_with(&out, &["train"]), 0);
    assert_eq!(std::fs::read(seed_dir.join("scores.csv")).unwrap(), scores);
    assert_eq!(std::fs::read(seed_dir.join("agent_0.ckpt")).unwrap(), ckpt);

    let eval_dir = dir.path().join("eval");
    assert_eq!(
        run_with(&out, &["eval", "--checkpoints", seed_dir.to_str().unwrap(), "--out", eval_dir.to_str().unwrap()]),
        0
    );
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(eval_dir.join("eval.json")).unwrap()).unwrap();
    let traj = read_trajectory(&eval_dir.join("trajectories/window_0.csv")).unwrap();
    assert_eq!(traj.len(), eval["summaries"][0]["env_steps"].as_u64().unwrap() as usize);
    let last = String::from_utf8(std::fs::read(seed_dir.join("scores.csv")).unwrap()).unwrap();
    let final_mean: f64 = last.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(eval["mean"].as_f64().unwrap(), final_mean);
    assert_eq!(run_with(&out, &["score", "--trajectories", eval_dir.join("trajectories").to_str().unwrap()]), 0);
}
