//! `leads report`: summarize a finished run directory and regenerate its
//! per-skill field maps from the latest checkpoints.
//!
//! The summary itself never prints filesystem paths, so its text depends
//! only on the run's contents; paths appear in error messages alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use leads_core::algo::SsmArchive;
use leads_core::clearning::load_classifier;
use leads_core::config::RunConfig;
use leads_core::env::{Env, StateVec};
use leads_core::metrics::{field_maps, write_ppm};
use leads_core::nn::load_policy;
use leads_core::rng::{derive, Stream};

/// Stream tag for the report-time field-map evaluation. Distinct from the
/// runner's end-of-run tag so regenerated maps are reproducible artifacts
/// of the report command, not imitations of the run's own files.
const REPORT_FIELD_STREAM: u64 = 0x9E7;

#[derive(Args)]
pub struct ReportArgs {
    /// Run directory produced by `leads train`.
    #[arg(value_name = "RUN_DIR")]
    pub dir: PathBuf,
}

/// Numerically sorted `epoch_*` subdirectories.
fn epoch_dirs(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut found = Vec::new();
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let entry = entry.with_context(|| format!("reading {}", dir.display()))?;
        let name = entry.file_name();
        let Some(num) = name.to_str().and_then(|s| s.strip_prefix("epoch_")) else {
            continue;
        };
        if let Ok(epoch) = num.parse::<u64>() {
            if entry.path().is_dir() {
                found.push((epoch, entry.path()));
            }
        }
    }
    found.sort_by_key(|(epoch, _)| *epoch);
    Ok(found)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Split one CSV line into the expected number of fields.
fn csv_fields<'a>(line: &'a str, n: usize, path: &Path) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        bail!(
            "{}: expected {} comma-separated fields, got {} in `{}`",
            path.display(),
            n,
            fields.len(),
            line
        );
    }
    Ok(fields)
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.parse()
        .with_context(|| format!("{}: `{s}` is not a number", path.display()))
}

/// The final `samples,cells,fraction` row of `coverage.csv`, if any epoch
/// completed.
fn final_coverage_row(path: &Path) -> Result<Option<(u64, u64, f64)>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("samples,cells,fraction") {
        bail!("{}: missing `samples,cells,fraction` header", path.display());
    }
    let Some(last) = lines.last() else {
        return Ok(None);
    };
    let f = csv_fields(last, 3, path)?;
    Ok(Some((
        f[0].parse()
            .with_context(|| format!("{}: bad sample count `{}`", path.display(), f[0]))?,
        f[1].parse()
            .with_context(|| format!("{}: bad cell count `{}`", path.display(), f[1]))?,
        parse_f64(f[2], path)?,
    )))
}

/// Per-skill visited-cell counts from `skills.csv`.
fn skill_cells(path: &Path) -> Result<Vec<u64>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("skill,cells") {
        bail!("{}: missing `skill,cells` header", path.display());
    }
    let mut cells = Vec::new();
    for (i, line) in lines.enumerate() {
        let f = csv_fields(line, 2, path)?;
        if f[0] != i.to_string() {
            bail!("{}: expected skill {i}, found `{}`", path.display(), f[0]);
        }
        cells.push(
            f[1].parse()
                .with_context(|| format!("{}: bad cell count `{}`", path.display(), f[1]))?,
        );
    }
    Ok(cells)
}

/// The Jaccard matrix from `overlap.csv`.
fn overlap_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("skill") {
        bail!("{}: missing `skill,...` header", path.display());
    }
    let n = header.split(',').count() - 1;
    let mut rows = Vec::new();
    for line in lines {
        let f = csv_fields(line, n + 1, path)?;
        let row: Vec<f64> = f[1..]
            .iter()
            .map(|v| parse_f64(v, path))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.len() != n {
        bail!(
            "{}: {} skills in the header but {} rows",
            path.display(),
            n,
            rows.len()
        );
    }
    Ok(rows)
}

/// One target state per line, components space-separated.
fn parse_targets(path: &Path) -> Result<Vec<StateVec>> {
    let text = read_file(path)?;
    let mut targets = Vec::new();
    for line in text.lines() {
        let parts: Vec<f64> = line
            .split_whitespace()
            .map(|v| parse_f64(v, path))
            .collect::<Result<_>>()?;
        targets.push(StateVec(parts));
    }
    Ok(targets)
}

/// The single data row of a per-epoch `report.csv`.
struct EpochRow {
    objective: f64,
    entropy: f64,
    fit_loss: f64,
    refresh_loss: f64,
}

fn epoch_row(path: &Path) -> Result<EpochRow> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("epoch,steps,samples,objective,entropy,fit_loss,refresh_loss,coverage")
    {
        bail!("{}: unexpected header", path.display());
    }
    let Some(row) = lines.next() else {
        bail!("{}: no data row", path.display());
    };
    let f = csv_fields(row, 8, path)?;
    Ok(EpochRow {
        objective: parse_f64(f[3], path)?,
        entropy: parse_f64(f[4], path)?,
        fit_loss: parse_f64(f[5], path)?,
        refresh_loss: parse_f64(f[6], path)?,
    })
}

pub fn cmd_report(args: ReportArgs) -> Result<()> {
    let dir = &args.dir;
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }

    // Account for every required file before reading any of them, so one
    // error names everything that is wrong with the run directory.
    let mut missing: Vec<String> = Vec::new();
    for name in ["config.toml", "seed", "coverage.csv", "overlap.csv", "skills.csv"] {
        if !dir.join(name).is_file() {
            missing.push(name.into());
        }
    }
    let epochs = epoch_dirs(dir)?;
    match epochs.last() {
        None => missing.push("epoch_* directories".into()),
        Some((_, latest)) => {
            for name in ["policy.ckpt", "classifier.ckpt", "report.csv"] {
                if !latest.join(name).is_file() {
                    let dir_name = latest.file_name().unwrap_or_default().to_string_lossy();
                    missing.push(format!("{dir_name}/{name}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        bail!(
            "run directory {} is missing: {}",
            dir.display(),
            missing.join(", ")
        );
    }

    let config = RunConfig::load(&dir.join("config.toml"))?;
    let env = Env::by_name(&config.env)?;
    let n_skill = config.hp.n_skill;
    let coverage = final_coverage_row(&dir.join("coverage.csv"))?;
    let cells = skill_cells(&dir.join("skills.csv"))?;
    let overlap = overlap_matrix(&dir.join("overlap.csv"))?;
    if cells.len() != n_skill || overlap.len() != n_skill {
        bail!(
            "config declares {n_skill} skills but skills.csv has {} and overlap.csv has {}",
            cells.len(),
            overlap.len()
        );
    }

    let (last_epoch, latest) = epochs.last().expect("checked above");
    let policy = load_policy(&latest.join("policy.ckpt"))?;
    let (classifier, embedding) = load_classifier(&latest.join("classifier.ckpt"))?;
    if embedding.n_skill() != n_skill {
        bail!(
            "{}: checkpoint holds {} skills but the config declares {n_skill}",
            latest.join("classifier.ckpt").display(),
            embedding.n_skill()
        );
    }
    let row = epoch_row(&latest.join("report.csv"))?;
    let targets_path = latest.join("targets.txt");
    let targets = if targets_path.is_file() {
        parse_targets(&targets_path)?
    } else {
        vec![env.s0(); n_skill]
    };

    println!("env: {}", config.env);
    println!("objective: {}", config.objective);
    println!("seed: {}", config.seed);
    println!("epochs: {last_epoch}");
    match coverage {
        Some((samples, covered, fraction)) => println!(
            "coverage: {covered} cells ({:.1}%) after {samples} samples",
            fraction * 100.0
        ),
        None => println!("coverage: no completed epochs"),
    }
    println!(
        "final epoch: objective {}, entropy {}, fit loss {}, refresh loss {}",
        row.objective, row.entropy, row.fit_loss, row.refresh_loss
    );
    println!("per-skill cells:");
    for (z, c) in cells.iter().enumerate() {
        println!("  skill {z}: {c}");
    }
    println!("overlap matrix:");
    for row in &overlap {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", cols.join(" "));
    }
    let mut off = 0.0;
    for (i, row) in overlap.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                off += v;
            }
        }
    }
    let pairs = (n_skill * n_skill.saturating_sub(1)) as f64;
    if pairs > 0.0 {
        println!("mean off-diagonal overlap: {:.4}", off / pairs);
    }

    // Field maps are recomputed from the checkpoints alone; the selection
    // score is anchored at the stored targets and sees no archive, the
    // same convention as a first epoch.
    let report_dir = dir.join("report");
    let mut rng = derive(config.seed, Stream::Custom(REPORT_FIELD_STREAM));
    let fields = field_maps(
        &classifier,
        &SsmArchive::new(1),
        &policy,
        &embedding,
        &env,
        &targets,
        config.grid_resolution,
        config.hp.action_samples,
        &mut rng,
    );
    match fields {
        Some(f) => {
            fs::create_dir_all(&report_dir)
                .with_context(|| format!("creating {}", report_dir.display()))?;
            for (z, m) in f.measure.iter().enumerate() {
                write_ppm(&report_dir.join(format!("measure_skill_{z}.ppm")), m)?;
            }
            for (z, u) in f.uncertainty.iter().enumerate() {
                write_ppm(&report_dir.join(format!("uncertainty_skill_{z}.ppm")), u)?;
            }
            println!("field maps: {} regenerated under report/", 2 * n_skill);
        }
        None => println!("field maps: unavailable (cell centers have no state preimage)"),
    }
    Ok(())
}
