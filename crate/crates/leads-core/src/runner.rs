//! Whole-run driver: the epoch loop plus all on-disk artifacts.
//!
//! A run directory holds the effective config snapshot, the seed, one
//! `epoch_XXX/` folder per completed epoch (checkpoints, targets, report
//! row), and the end-of-run coverage tables and heatmaps. Every artifact is
//! a deterministic function of (config, seed), so re-running a config
//! reproduces each file byte for byte. When an epoch aborts, the folders of
//! completed epochs stay behind as the last valid checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use crate::algo::{init_state, train_epoch, EpochReport, LeadsState};
use crate::clearning::save_classifier;
use crate::config::RunConfig;
use crate::env::Env;
use crate::error::{Error, Result};
use crate::metrics::{
    emit_outputs, field_maps, CoverageCurve, CoverageGrid, CurvePoint, SkillOverlapMatrix,
};
use crate::nn::save_policy;
use crate::rng::{derive, Stream};

/// Stream tag for the end-of-run field-map evaluation.
const FIELD_STREAM: u64 = 0xF1E1D;

/// Where a finished (or aborted) run left things.
pub struct RunOutcome {
    pub dir: PathBuf,
    pub epochs_completed: u64,
    pub curve: CoverageCurve,
    pub overlap: SkillOverlapMatrix,
    pub final_state: LeadsState,
}

impl RunOutcome {
    pub fn final_coverage(&self) -> f64 {
        self.curve.last().map_or(0.0, |p| p.fraction)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One skill's target per line, components space-separated.
fn targets_text(targets: &[crate::env::StateVec]) -> String {
    let mut out = String::new();
    for t in targets {
        let parts: Vec<String> = t.as_slice().iter().map(|v| v.to_string()).collect();
        out.push_str(&parts.join(" "));
        out.push('\n');
    }
    out
}

fn report_csv(r: &EpochReport) -> String {
    let mut text = String::from(
        "epoch,steps,samples,objective,entropy,fit_loss,refresh_loss,coverage\n",
    );
    text.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        r.epoch,
        r.steps_collected,
        r.interactions,
        r.objective,
        r.entropy,
        r.fit_loss,
        r.refresh_loss,
        r.coverage.unwrap_or(f64::NAN),
    ));
    text
}

pub fn epoch_dir(run_dir: &Path, epoch: u64) -> PathBuf {
    run_dir.join(format!("epoch_{epoch:03}"))
}

fn write_epoch_artifacts(
    run_dir: &Path,
    state: &LeadsState,
    report: &EpochReport,
) -> Result<()> {
    let dir = epoch_dir(run_dir, report.epoch);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    save_policy(&dir.join("policy.ckpt"), &state.policy)?;
    save_classifier(
        &dir.join("classifier.ckpt"),
        &state.classifier,
        &state.embedding,
    )?;
    if let Some(targets) = &report.targets {
        write_text(&dir.join("targets.txt"), &targets_text(targets))?;
    }
    write_text(&dir.join("report.csv"), &report_csv(report))?;
    Ok(())
}

/// Emit the end-of-run tables and heatmaps from whatever has been covered
/// so far.
fn emit_summary(
    run_dir: &Path,
    config: &RunConfig,
    env: &Env,
    state: &LeadsState,
    curve: &CoverageCurve,
    grid: &CoverageGrid,
) -> Result<()> {
    let mut rng = derive(config.seed, Stream::Custom(FIELD_STREAM));
    let fields = field_maps(
        &state.classifier,
        &state.archive,
        &state.policy,
        &state.embedding,
        env,
        &state.targets.current,
        config.grid_resolution,
        config.hp.action_samples,
        &mut rng,
    );
    emit_outputs(run_dir, curve, grid, fields.as_ref())
}

/// Run a full config inside `run_dir`, writing every artifact. On an epoch
/// error the summary for the completed epochs is still written before the
/// error propagates.
pub fn execute_run(config: &RunConfig, run_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let env = Env::by_name(&config.env)?;
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    write_text(&run_dir.join("config.toml"), &config.to_toml())?;
    write_text(&run_dir.join("seed"), &format!("{}\n", config.seed))?;

    let mut state = init_state(&env, &config.hp, config.seed);
    let mut grid = CoverageGrid::new(&env, config.hp.n_skill, config.grid_resolution)?;
    let mut curve = CoverageCurve::new();

    for _ in 0..config.epochs {
        let mut report = match train_epoch(&mut state, &env, &config.hp, config.objective) {
            Ok(r) => r,
            Err(e) => {
                emit_summary(run_dir, config, &env, &state, &curve, &grid)?;
                return Err(e);
            }
        };
        for z in 0..config.hp.n_skill {
            for ep in state.buffers.episodes_of(z) {
                grid.update_coverage(&env, ep);
            }
        }
        assert!(grid.aggregate_is_union());
        curve.push(CurvePoint {
            samples: report.interactions,
            cells: grid.covered_cells(),
            fraction: grid.fraction(),
        });
        report.coverage = Some(grid.fraction());
        write_epoch_artifacts(run_dir, &state, &report)?;
    }

    emit_summary(run_dir, config, &env, &state, &curve, &grid)?;
    let overlap = SkillOverlapMatrix::from_grid(&grid);
    Ok(RunOutcome {
        dir: run_dir.to_path_buf(),
        epochs_completed: state.epoch,
        curve,
        overlap,
        final_state: state,
    })
}

/// Default output root: explicit config value, else `LEADS_LAB_OUT`, else
/// `./runs`.
pub fn output_root(config: &RunConfig) -> PathBuf {
    if let Some(out) = &config.out {
        return out.clone();
    }
    if let Ok(v) = std::env::var("LEADS_LAB_OUT") {
        if !v.is_empty() {
            return PathBuf::from(v);
        }
    }
    PathBuf::from("runs")
}

/// The run directory for a config under its output root:
/// `<root>/<env>-<objective>-seed<seed>`.
pub fn run_dir_for(config: &RunConfig) -> PathBuf {
    output_root(config).join(format!(
        "{}-{}-seed{}",
        config.env, config.objective, config.seed
    ))
}
