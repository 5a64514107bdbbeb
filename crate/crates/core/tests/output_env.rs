use grid_marl::harness::{main_with_args, ExperimentConfig, OUTPUT_ENV};

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var(OUTPUT_ENV, dir.path());
    let cfg = ExperimentConfig::default();
    assert_eq!(cfg.output_dir(), dir.path().join("runs"));
    assert_eq!(main_with_args(["grid-marl", "baseline"]), 0);
    assert!(dir.path().join("runs/baseline-test.json").exists());
    let abs = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default().with_overrides(&[format!("run.output=\"{}\"", abs.path().display())]).unwrap();
    assert_eq!(cfg.output_dir(), abs.path());
}
