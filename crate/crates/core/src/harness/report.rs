use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::HyperParams;
use crate::marl::{EvalRow, HierarchyConfig, Strategy};

/// Score curve of one seed: the mean test score at each eval point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedCurve {
    pub seed: u64,
    pub interactions: Vec<usize>,
    pub scores: Vec<f64>,
}

impl SeedCurve {
    pub fn from_log(seed: u64, log: &[EvalRow]) -> Self {
        SeedCurve { seed, interactions: log.iter().map(|r| r.interaction).collect(), scores: log.iter().map(|r| r.mean).collect() }
    }
}

/// Mean and standard error across seeds at each eval point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub interactions: Vec<usize>,
    pub mean: Vec<f64>,
    /// Sample standard deviation over seeds divided by `√n`; zero for one seed.
    pub se: Vec<f64>,
}

pub fn aggregate_report(curves: &[SeedCurve]) -> Result<Aggregate, HarnessError> {
    let first = curves.first().ok_or_else(|| HarnessError::Misaligned("no seed logs".into()))?;
    for c in curves {
        if c.interactions != first.interactions || c.scores.len() != c.interactions.len() {
            return Err(HarnessError::Misaligned(format!("seed {} eval points differ from seed {}", c.seed, first.seed)));
        }
    }
    let n = curves.len() as f64;
    let mut mean = Vec::with_capacity(first.scores.len());
    let mut se = Vec::with_capacity(first.scores.len());
    for k in 0..first.scores.len() {
        let xs: Vec<f64> = curves.iter().map(|c| c.scores[k]).collect();
        let m = xs.iter().sum::<f64>() / n;
        let s = if curves.len() > 1 {
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        mean.push(m);
        se.push(s);
    }
    Ok(Aggregate { interactions: first.interactions.clone(), mean, se })
}

/// Wall-clock time of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTiming {
    pub seed: u64,
    pub seconds: f64,
    pub env_steps: usize,
    pub episodes: usize,
}

/// Everything a train invocation produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub strategy: Strategy,
    pub hierarchy: HierarchyConfig,
    pub hyper: HyperParams,
    pub budget: usize,
    pub eval_period: usize,
    pub curves: Vec<SeedCurve>,
    pub aggregate: Aggregate,
    /// One list of per-agent checkpoint files per seed.
    pub checkpoints: Vec<Vec<PathBuf>>,
    pub timing: Vec<SeedTiming>,
}

impl RunReport {
    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Runtime(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

/// `interaction,mean,se,seed_<s>...`, one row per eval point.
pub fn write_curve_csv(path: &Path, agg: &Aggregate, curves: &[SeedCurve]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["interaction".to_string(), "mean".into(), "se".into()];
    header.extend(curves.iter().map(|c| format!("seed_{}", c.seed)));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, i) in agg.interactions.iter().enumerate() {
        let mut row = vec![i.to_string(), agg.mean[k].to_string(), agg.se[k].to_string()];
        row.extend(curves.iter().map(|c| c.scores[k].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `interaction,mean,window_<k>...` for one seed.
pub fn write_score_log(path: &Path, log: &[EvalRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let n = log.first().map_or(0, |r| r.scores.len());
    let mut header = vec!["interaction".to_string(), "mean".into()];
    header.extend((0..n).map(|k| format!("window_{k}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in log {
        let mut row = vec![r.interaction.to_string(), format!("{:?}", r.mean)];
        row.extend(r.scores.iter().map(|s| format!("{s:?}")));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}
