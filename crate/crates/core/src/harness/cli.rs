use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::run::{baseline_path, build_baseline, evaluate_checkpoints, load_baseline, load_chronics, load_grid, score_trajectories, train};
use super::{ExperimentConfig, HarnessError};
use crate::env::io::write_episode_set;
use crate::env::Split;

#[derive(Debug, Parser)]
#[command(name = "grid-marl", version, about = "Hierarchical multi-agent topology control on a DC grid")]
pub struct Cli {
    /// Experiment config (TOML with [env], [hierarchy], [algo], [run]).
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config field, e.g. `--set algo.lr=1e-3`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub sets: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Test,
    Validation,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Test => Split::Test,
            SplitArg::Validation => Split::Validation,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured chronics as CSV files plus a manifest.
    GenChronics {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every configured seed and write the run report.
    Train,
    /// Score a directory of agent checkpoints and record trajectories.
    Eval {
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Output directory; defaults to the checkpoint directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute scores from stored trajectories.
    Score {
        #[arg(long)]
        trajectories: PathBuf,
        /// Baseline cache; defaults to the configured test-split cache.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Run the do-nothing agent and cache its survival per window.
    Baseline {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = base.with_overrides(&cli.sets)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::GenChronics { out } => {
            let spec = load_grid(&cfg)?;
            let set = load_chronics(&cfg, &spec)?;
            let seed = cfg.env.chronics.is_none().then_some(cfg.env.chronic_seed);
            let path = write_episode_set(&set, &out, seed)?;
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let report = train(&cfg)?;
            for (c, t) in report.curves.iter().zip(&report.timing) {
                println!(
                    "seed {}: final score {:.2}, {} env steps, {:.1}s",
                    c.seed,
                    c.scores.last().copied().unwrap_or(f64::NAN),
                    t.env_steps,
                    t.seconds
                );
            }
            println!("wrote {}", cfg.output_dir().join(cfg.run_name()).display());
        }
        Command::Eval { checkpoints, split, out } => {
            let split = Split::from(split);
            let baseline = load_baseline(&baseline_path(&cfg, split), Some((&cfg.env, split)))?;
            let out = out.unwrap_or_else(|| checkpoints.clone());
            let r = evaluate_checkpoints(&cfg, &checkpoints, split, &baseline, &out)?;
            for (k, s) in r.scores.iter().enumerate() {
                println!("window {k}: {s:.2}");
            }
            println!("mean {:.2}", r.mean);
        }
        Command::Score { trajectories, baseline } => {
            let path = baseline.unwrap_or_else(|| baseline_path(&cfg, Split::Test));
            let cache = load_baseline(&path, None)?;
            let scores = score_trajectories(&trajectories, &cache)?;
            for (k, s) in &scores {
                println!("window {k}: {s:.2}");
            }
            println!("mean {:.2}", scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64);
        }
        Command::Baseline { split } => {
            let split = Split::from(split);
            let cache = build_baseline(&cfg, split)?;
            let path = baseline_path(&cfg, split);
            std::fs::create_dir_all(cfg.output_dir()).map_err(|e| HarnessError::io(&cfg.output_dir(), e))?;
            let text = serde_json::to_string_pretty(&cache).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
            for (k, w) in cache.windows.iter().enumerate() {
                println!("window {k}: survived {} of {}", w.survived, cache.episode_len);
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
