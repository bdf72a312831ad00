//! `leads train`: resolve the effective configuration and execute one run.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use leads_core::config::{ObjectiveMode, RunConfig};
use leads_core::runner::{execute_run, run_dir_for};

#[derive(Args)]
pub struct TrainArgs {
    /// Config file to start from; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment name: easy, u, hard, arm, grid, or four-rooms.
    #[arg(long)]
    pub env: Option<String>,
    /// Seed for every stream of randomness in the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Objective mode: leads or diayn-ablation.
    #[arg(long)]
    pub objective: Option<ObjectiveMode>,
    /// Output root; falls back to $LEADS_LAB_OUT, then ./runs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Coverage grid resolution per axis.
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    /// Hyperparameter override; any field is also addressable as
    /// --hp.<name> <value>.
    #[arg(long = "hp", value_name = "NAME=VALUE")]
    pub hp: Vec<String>,
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(env) = args.env {
        config.env = env;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(mode) = args.objective {
        config.objective = mode;
    }
    if let Some(out) = args.out {
        config.out = Some(out);
    }
    if let Some(res) = args.grid_resolution {
        config.grid_resolution = res;
    }
    for pair in &args.hp {
        let Some((name, value)) = pair.split_once('=') else {
            bail!("hyperparameter override `{pair}` is not NAME=VALUE");
        };
        config.hp.set(name, value)?;
    }
    config.validate()?;

    let dir = run_dir_for(&config);
    let outcome = execute_run(&config, &dir)?;
    println!("run dir: {}", outcome.dir.display());
    println!(
        "env: {}  objective: {}  seed: {}",
        config.env, config.objective, config.seed
    );
    println!("epochs completed: {}", outcome.epochs_completed);
    if let Some(p) = outcome.curve.points().last() {
        println!(
            "coverage: {} cells ({:.1}%) after {} samples",
            p.cells,
            p.fraction * 100.0,
            p.samples
        );
    }
    println!(
        "mean off-diagonal overlap: {:.4}",
        outcome.overlap.mean_off_diagonal()
    );
    Ok(())
}
