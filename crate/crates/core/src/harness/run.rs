use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{aggregate_report, csv_err, write_curve_csv, write_score_log, RunReport, SeedCurve, SeedTiming};
use super::{EnvSection, ExperimentConfig, HarnessError};
use crate::agents::MetricsWriter;
use crate::env::io::read_episode_set;
use crate::env::{generate_chronics, EpisodeSet, Split};
use crate::grid::{case5, GridSpec};
use crate::marl::{
    run_marl_training, summarize_trajectory, AgentLayout, EpisodeSummary, Evaluator, Learner, StepRecord, Strategy,
    TrainingOutcome,
};
use crate::nn::Checkpoint;
use crate::rng::{indexed_stream, Stream};

pub fn load_grid(cfg: &ExperimentConfig) -> Result<Arc<GridSpec>, HarnessError> {
    Ok(Arc::new(match &cfg.env.grid {
        Some(p) => GridSpec::load(p)?,
        None => case5(),
    }))
}

pub fn load_chronics(cfg: &ExperimentConfig, spec: &GridSpec) -> Result<EpisodeSet, HarnessError> {
    let e = &cfg.env;
    Ok(match &e.chronics {
        Some(p) => read_episode_set(p)?,
        None => generate_chronics(spec, e.chronic_seed, e.chronic_count, e.chronic_length, &e.profile.profile())?,
    })
}

/// Do-nothing survival and cost per window of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCache {
    pub split: Split,
    pub episode_len: usize,
    /// The environment the baseline was run under.
    pub env: EnvSection,
    pub windows: Vec<EpisodeSummary>,
}

pub fn baseline_path(cfg: &ExperimentConfig, split: Split) -> PathBuf {
    let name = serde_json::to_value(split).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    cfg.output_dir().join(format!("baseline-{name}.json"))
}

pub fn build_baseline(cfg: &ExperimentConfig, split: Split) -> Result<BaselineCache, HarnessError> {
    let spec = load_grid(cfg)?;
    let set = load_chronics(cfg, &spec)?;
    let ev = Evaluator::new(spec, cfg.env.params(), &set, split)?;
    Ok(BaselineCache { split, episode_len: ev.episode_len(), env: cfg.env.clone(), windows: ev.baseline })
}

/// Reads a cached baseline; `expect` rejects a cache built under another environment.
pub fn load_baseline(path: &Path, expect: Option<(&EnvSection, Split)>) -> Result<BaselineCache, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::MissingBaseline(format!("{}: {e}; run the baseline subcommand first", path.display())))?;
    let cache: BaselineCache =
        serde_json::from_str(&text).map_err(|e| HarnessError::MissingBaseline(format!("{}: {e}", path.display())))?;
    if let Some((env, split)) = expect {
        if &cache.env != env || cache.split != split {
            return Err(HarnessError::MissingBaseline(format!("{} was built for another environment or split", path.display())));
        }
    }
    Ok(cache)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// The test-split baseline, read from the cache or computed and cached.
fn test_evaluator(cfg: &ExperimentConfig, spec: &Arc<GridSpec>, set: &EpisodeSet) -> Result<Evaluator, HarnessError> {
    let path = baseline_path(cfg, Split::Test);
    if path.exists() {
        let cache = load_baseline(&path, Some((&cfg.env, Split::Test)))?;
        return Ok(Evaluator::with_baseline(spec.clone(), cfg.env.params(), set, Split::Test, cache.windows)?);
    }
    let ev = Evaluator::new(spec.clone(), cfg.env.params(), set, Split::Test)?;
    create_dir(&cfg.output_dir())?;
    let cache =
        BaselineCache { split: Split::Test, episode_len: ev.episode_len(), env: cfg.env.clone(), windows: ev.baseline.clone() };
    write_json(&path, &cache)?;
    Ok(ev)
}

fn write_updates(path: &Path, out: &TrainingOutcome) -> Result<(), HarnessError> {
    let f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = MetricsWriter::new(
        std::io::BufWriter::new(f),
        &["interaction", "agent", "critic_loss", "actor_loss", "aux_loss", "alpha", "entropy"],
    )
    .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    for u in &out.updates {
        w.row(&[u.interaction as f64, u.agent as f64, u.critic_loss, u.actor_loss, u.aux_loss, u.alpha, u.entropy])
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    w.finish().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    Ok(())
}

/// Trains every configured seed and writes per-seed logs, checkpoints,
/// `report.json` and `curve.csv` under `<output>/<name>/`.
pub fn train(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let spec = load_grid(cfg)?;
    let set = load_chronics(cfg, &spec)?;
    let evaluator = test_evaluator(cfg, &spec, &set)?;
    let hp = cfg.algo.hyper();
    let schedule = cfg.schedule();
    let dir = cfg.output_dir().join(cfg.run_name());
    let mut curves = Vec::new();
    let mut checkpoints = Vec::new();
    let mut timing = Vec::new();
    for &seed in &cfg.run.seeds {
        let t = Instant::now();
        let out = run_marl_training(
            cfg.algo.strategy,
            &cfg.hierarchy,
            &hp,
            seed,
            spec.clone(),
            cfg.env.params(),
            &set,
            &evaluator,
            &schedule,
        )?;
        let seed_dir = dir.join(format!("seed_{seed}"));
        create_dir(&seed_dir)?;
        write_score_log(&seed_dir.join("scores.csv"), &out.score_log)?;
        write_updates(&seed_dir.join("updates.csv"), &out)?;
        let mut paths = Vec::new();
        for k in 0..out.learners.len() {
            let p = seed_dir.join(format!("agent_{k}.ckpt"));
            out.checkpoint(k).save(&p)?;
            paths.push(p);
        }
        curves.push(SeedCurve::from_log(seed, &out.score_log));
        checkpoints.push(paths);
        timing.push(SeedTiming {
            seed,
            seconds: t.elapsed().as_secs_f64(),
            env_steps: out.env_steps,
            episodes: out.episodes,
        });
    }
    let aggregate = aggregate_report(&curves)?;
    write_curve_csv(&dir.join("curve.csv"), &aggregate, &curves)?;
    let report = RunReport {
        name: cfg.run_name(),
        strategy: cfg.algo.strategy,
        hierarchy: cfg.hierarchy.clone(),
        hyper: hp,
        budget: cfg.run.budget,
        eval_period: cfg.run.eval_period,
        curves,
        aggregate,
        checkpoints,
        timing,
    };
    report.write_json(&dir.join("report.json"))?;
    Ok(report)
}

/// Result of scoring a set of checkpoints on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strategy: Strategy,
    pub split: Split,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub summaries: Vec<EpisodeSummary>,
}

fn ordered_checkpoints(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut found = Vec::new();
    for k in 0.. {
        let p = dir.join(format!("agent_{k}.ckpt"));
        if !p.exists() {
            break;
        }
        found.push(p);
    }
    if found.is_empty() {
        return Err(HarnessError::Io(format!("{}: no agent_<k>.ckpt files", dir.display())));
    }
    Ok(found)
}

/// Greedy play of the checkpoints in `ckpt_dir` on every window of `split`,
/// writing one trajectory per window under `out/trajectories/` plus `out/eval.json`.
pub fn evaluate_checkpoints(
    cfg: &ExperimentConfig,
    ckpt_dir: &Path,
    split: Split,
    baseline: &BaselineCache,
    out: &Path,
) -> Result<EvalReport, HarnessError> {
    let spec = load_grid(cfg)?;
    let set = load_chronics(cfg, &spec)?;
    let mut learners = Vec::new();
    let mut strategy = None;
    let mut seed = 0;
    for p in ordered_checkpoints(ckpt_dir)? {
        let ck = Checkpoint::load(&p)?;
        let s: Strategy = ck
            .manifest
            .get("strategy")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| HarnessError::Config(format!("{}: no strategy in manifest", p.display())))?;
        if strategy.is_some_and(|prev| prev != s) {
            return Err(HarnessError::Config(format!("{}: checkpoints mix strategies", ckpt_dir.display())));
        }
        strategy = Some(s);
        seed = ck.manifest.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
        learners.push(Learner::restore(&ck)?);
    }
    let strategy = strategy.expect("at least one checkpoint");
    let layout = AgentLayout::for_strategy(&spec, strategy, cfg.hierarchy.min_substation_size)?;
    if layout.len() != learners.len() {
        return Err(HarnessError::Config(format!("{} agents expected, {} checkpoints found", layout.len(), learners.len())));
    }
    for (k, (slot, l)) in layout.agents.iter().zip(&learners).enumerate() {
        if slot.actions.len() != l.n_actions() {
            return Err(HarnessError::Config(format!("agent {k}: checkpoint has {} actions, grid has {}", l.n_actions(), slot.actions.len())));
        }
    }
    let ev = Evaluator::with_baseline(spec, cfg.env.params(), &set, split, baseline.windows.clone())?;
    let traj_dir = out.join("trajectories");
    create_dir(&traj_dir)?;
    let mut rng = indexed_stream(seed, Stream::Evaluation, u64::MAX);
    let mut scores = Vec::new();
    let mut summaries = Vec::new();
    for k in 0..ev.len() {
        let (s, steps) = ev.play(k, &learners, &layout, &cfg.hierarchy, &mut rng, true)?;
        write_trajectory(&traj_dir.join(format!("window_{k}.csv")), &steps)?;
        scores.push(ev.score_summary(k, &s));
        summaries.push(s);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let report = EvalReport { strategy, split, scores, mean, summaries };
    write_json(&out.join("eval.json"), &report)?;
    Ok(report)
}

/// `step,reward,failed` per env step.
pub fn write_trajectory(path: &Path, steps: &[StepRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["step", "reward", "failed"]).map_err(|e| csv_err(path, e))?;
    for s in steps {
        w.write_record([s.step.to_string(), format!("{:?}", s.reward), u8::from(s.failed).to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<StepRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = || HarnessError::Config(format!("{}: malformed row {}", path.display(), out.len() + 1));
        let step = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let reward = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let failed = match rec.get(2) {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(bad()),
        };
        out.push(StepRecord { step, reward, failed });
    }
    Ok(out)
}

/// Recomputes window scores from `window_<k>.csv` files in `dir`.
pub fn score_trajectories(dir: &Path, baseline: &BaselineCache) -> Result<Vec<(usize, f64)>, HarnessError> {
    let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut found: Vec<(usize, PathBuf)> = entries
        .filter_map(Result::ok)
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let k = name.strip_prefix("window_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((k, e.path()))
        })
        .collect();
    if found.is_empty() {
        return Err(HarnessError::EmptyTrajectories(dir.display().to_string()));
    }
    found.sort();
    found
        .into_iter()
        .map(|(k, p)| {
            let b = baseline.windows.get(k).ok_or_else(|| {
                HarnessError::MissingBaseline(format!("no baseline for window {k} ({} cached)", baseline.windows.len()))
            })?;
            let (survived, cost) = summarize_trajectory(&read_trajectory(&p)?);
            Ok((k, crate::env::l2rpn_score(survived, b.survived, baseline.episode_len, cost, b.cost)))
        })
        .collect()
}
