//! Run-artifact files: CSV tables, grayscale heatmaps, and the measure and
//! selection-score fields evaluated over the coverage grid.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::algo::{measure_table_for_states, uncertainty_from_table, SsmArchive};
use crate::clearning::{ClassifierModel, SkillEmbedding};
use crate::env::{Env, EnvKind, StateVec};
use crate::error::{Error, Result};
use crate::metrics::coverage::{CoverageCurve, CoverageGrid, SkillOverlapMatrix};
use crate::nn::PolicyModel;

/// Write a field as a binary grayscale pixmap, min-max normalized to
/// [0, 1]. The field is indexed (y-cell, x-cell) with y growing upward, so
/// the top image row is the last field row. A constant field maps to
/// mid-gray by convention.
pub fn write_ppm(path: &Path, field: &Array2<f64>) -> Result<()> {
    let (rows, cols) = field.dim();
    assert!(rows > 0 && cols > 0);
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut bytes = format!("P6\n{cols} {rows}\n255\n").into_bytes();
    for iy in (0..rows).rev() {
        for ix in 0..cols {
            let norm = if hi > lo {
                (field[[iy, ix]] - lo) / (hi - lo)
            } else {
                0.5
            };
            let v = (norm * 255.0).round() as u8;
            bytes.extend([v, v, v]);
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `coverage.csv`: one row per curve point under a fixed header.
pub fn write_coverage_csv(path: &Path, curve: &CoverageCurve) -> Result<()> {
    let mut text = String::from("samples,cells,fraction\n");
    for p in curve.points() {
        text.push_str(&format!("{},{},{}\n", p.samples, p.cells, p.fraction));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `skills.csv`: the number of grid cells each skill has visited. The
/// visited heatmaps carry the same information but are min-max normalized,
/// so a skill that covered everything and one that covered nothing render
/// identically; the counts stay unambiguous.
pub fn write_skills_csv(path: &Path, grid: &CoverageGrid) -> Result<()> {
    let mut text = String::from("skill,cells\n");
    for z in 0..grid.n_skill() {
        text.push_str(&format!("{},{}\n", z, grid.skill_covered_cells(z)));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `overlap.csv`: the Jaccard matrix with skill indices on both axes.
pub fn write_overlap_csv(path: &Path, overlap: &SkillOverlapMatrix) -> Result<()> {
    let n = overlap.n_skill();
    let mut text = String::from("skill");
    for j in 0..n {
        text.push_str(&format!(",{j}"));
    }
    text.push('\n');
    for i in 0..n {
        text.push_str(&i.to_string());
        for j in 0..n {
            text.push_str(&format!(",{}", overlap.values[[i, j]]));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A state whose features sit at the center of the given coverage cell, if
/// the feature map is invertible for this environment (it is not for the
/// arm, whose states are joint angles).
pub fn state_at_cell(env: &Env, ix: usize, iy: usize, resolution: usize) -> Option<StateVec> {
    let ([x0, x1], [y0, y1]) = env.feature_bounds();
    let fx = x0 + (ix as f64 + 0.5) * (x1 - x0) / resolution as f64;
    let fy = y0 + (iy as f64 + 0.5) * (y1 - y0) / resolution as f64;
    match &env.kind {
        EnvKind::Maze(_) => Some(StateVec(vec![fx, fy])),
        EnvKind::Grid(g) => {
            let col = (fx.round().max(0.0) as usize).min(g.cols - 1);
            let row = (fy.round().max(0.0) as usize).min(g.rows - 1);
            Some(StateVec(vec![g.cell_index((row, col)) as f64]))
        }
        EnvKind::Arm(_) => None,
    }
}

/// Per-skill fields over the coverage grid: the measure from the start
/// state, and the selection score as the next target selection would
/// compute it (anchored at the latest targets).
pub struct FieldMaps {
    pub resolution: usize,
    pub measure: Vec<Array2<f64>>,
    pub uncertainty: Vec<Array2<f64>>,
}

/// Evaluate both fields on every cell center. Returns `None` when cell
/// centers have no corresponding state.
#[allow(clippy::too_many_arguments)]
pub fn field_maps(
    cls: &ClassifierModel,
    archive: &SsmArchive,
    policy: &PolicyModel,
    emb: &SkillEmbedding,
    env: &Env,
    targets: &[StateVec],
    resolution: usize,
    action_samples: usize,
    rng: &mut impl Rng,
) -> Option<FieldMaps> {
    let mut states = Vec::with_capacity(resolution * resolution);
    for iy in 0..resolution {
        for ix in 0..resolution {
            states.push(state_at_cell(env, ix, iy, resolution)?);
        }
    }
    let n = states.len();
    let n_skill = emb.n_skill();
    let spans = vec![0..n; n_skill];
    let table = measure_table_for_states(
        cls,
        archive,
        policy,
        emb,
        env,
        states,
        spans,
        targets,
        action_samples,
        rng,
    );
    let field = |value: &dyn Fn(usize) -> f64| {
        Array2::from_shape_fn((resolution, resolution), |(iy, ix)| {
            value(iy * resolution + ix)
        })
    };
    let measure = (0..n_skill)
        .map(|z| field(&|c| table.from_start[[z, c]]))
        .collect();
    let uncertainty = (0..n_skill)
        .map(|z| field(&|c| uncertainty_from_table(&table, c, z)))
        .collect();
    Some(FieldMaps {
        resolution,
        measure,
        uncertainty,
    })
}

/// Write the full artifact set for a run into `dir`: coverage and overlap
/// tables plus per-skill visited, measure, and selection-score heatmaps.
pub fn emit_outputs(
    dir: &Path,
    curve: &CoverageCurve,
    grid: &CoverageGrid,
    fields: Option<&FieldMaps>,
) -> Result<()> {
    write_coverage_csv(&dir.join("coverage.csv"), curve)?;
    let overlap = SkillOverlapMatrix::from_grid(grid);
    write_overlap_csv(&dir.join("overlap.csv"), &overlap)?;
    write_skills_csv(&dir.join("skills.csv"), grid)?;
    for z in 0..grid.n_skill() {
        write_ppm(
            &dir.join(format!("visited_skill_{z}.ppm")),
            &grid.visited_field(z),
        )?;
    }
    if let Some(f) = fields {
        for (z, m) in f.measure.iter().enumerate() {
            write_ppm(&dir.join(format!("measure_skill_{z}.ppm")), m)?;
        }
        for (z, u) in f.uncertainty.iter().enumerate() {
            write_ppm(&dir.join(format!("uncertainty_skill_{z}.ppm")), u)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    use crate::clearning::InputLayout;
    use crate::metrics::coverage::CurvePoint;
    use crate::rng::{derive, Stream};

    #[test]
    fn ppm_bytes_are_exactly_as_specified() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        // Rows are y-cells: y = 0 holds (0, 1), y = 1 holds (2, 3). The
        // image is written top-down, so the y = 1 row comes first.
        let field = array![[0.0, 1.0], [2.0, 3.0]];
        write_ppm(&path, &field).unwrap();
        let bytes = fs::read(&path).unwrap();
        let mut expected = b"P6\n2 2\n255\n".to_vec();
        expected.extend([170, 170, 170, 255, 255, 255, 0, 0, 0, 85, 85, 85]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn constant_fields_render_mid_gray() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ppm");
        write_ppm(&path, &Array2::from_elem((3, 3), 7.25)).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P6\n3 3\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].iter().all(|&b| b == 128));
    }

    #[test]
    fn empty_curves_write_header_only_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coverage.csv");
        write_coverage_csv(&path, &CoverageCurve::new()).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "samples,cells,fraction\n");
    }

    #[test]
    fn coverage_rows_follow_the_header_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coverage.csv");
        let mut curve = CoverageCurve::new();
        curve.push(CurvePoint {
            samples: 800,
            cells: 12,
            fraction: 0.125,
        });
        curve.push(CurvePoint {
            samples: 1600,
            cells: 30,
            fraction: 0.3125,
        });
        write_coverage_csv(&path, &curve).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "samples,cells,fraction\n800,12,0.125\n1600,30,0.3125\n"
        );
    }

    #[test]
    fn skill_cell_counts_follow_the_header_schema() {
        use crate::env::{ActionVec, Episode, Transition};
        let env = Env::by_name("easy").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut grid = CoverageGrid::new(&env, 2, 8).unwrap();
        // Skill 1 walks along the diagonal through three distinct cells;
        // skill 0 never moves off the start cell.
        let walk = [[-0.75, -0.75], [-0.3, -0.3], [0.3, 0.3]];
        let transitions = walk
            .windows(2)
            .enumerate()
            .map(|(step, w)| Transition {
                skill: 1,
                step,
                s: StateVec(w[0].to_vec()),
                a: ActionVec(vec![0.0, 0.0]),
                s_next: StateVec(w[1].to_vec()),
                terminated: false,
            })
            .collect();
        grid.update_coverage(
            &env,
            &Episode {
                skill: 1,
                transitions,
            },
        );
        let path = dir.path().join("skills.csv");
        write_skills_csv(&path, &grid).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "skill,cells\n0,0\n1,3\n"
        );
    }

    #[test]
    fn grid_cell_centers_roundtrip_through_states() {
        let env = Env::by_name("grid").unwrap();
        let res = 10;
        for iy in 0..res {
            for ix in 0..res {
                let s = state_at_cell(&env, ix, iy, res).unwrap();
                let f = env.featurize(&s);
                // The reconstructed state's features must fall back into a
                // cell no farther than rounding allows.
                let ([x0, x1], _) = env.feature_bounds();
                let width = (x1 - x0) / res as f64;
                let cx = x0 + (ix as f64 + 0.5) * width;
                assert!((f[0] - cx).abs() <= 0.5 + width / 2.0);
            }
        }
        assert!(state_at_cell(&Env::by_name("arm").unwrap(), 0, 0, 8).is_none());
    }

    #[test]
    fn field_maps_cover_every_cell_and_replay_identically() {
        let env = Env::by_name("easy").unwrap();
        let mut rng = derive(21, Stream::Custom(32));
        let emb = SkillEmbedding::new(2, 3, &mut rng);
        let cls = ClassifierModel::with_hidden(InputLayout::of(&env, 3), &[8], &mut rng);
        let policy =
            PolicyModel::with_hidden(env.encode_dim() + 3, env.action_dim(), &[8], &mut rng);
        let archive = SsmArchive::new(1);
        let targets = vec![env.s0(); 2];
        let build = || {
            let mut r = derive(22, Stream::Custom(32));
            field_maps(&cls, &archive, &policy, &emb, &env, &targets, 8, 2, &mut r).unwrap()
        };
        let a = build();
        let b = build();
        assert_eq!(a.measure.len(), 2);
        assert_eq!(a.uncertainty.len(), 2);
        for z in 0..2 {
            assert_eq!(a.measure[z].dim(), (8, 8));
            assert!(a.measure[z].iter().all(|v| v.is_finite() && *v > 0.0));
            assert!(a.uncertainty[z].iter().all(|v| v.is_finite()));
            assert_eq!(a.measure[z], b.measure[z]);
            assert_eq!(a.uncertainty[z], b.uncertainty[z]);
        }
    }

    #[test]
    fn emit_outputs_writes_the_complete_artifact_set() {
        let env = Env::by_name("easy").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let grid = CoverageGrid::new(&env, 2, 8).unwrap();
        let mut rng = derive(23, Stream::Custom(32));
        let emb = SkillEmbedding::new(2, 3, &mut rng);
        let cls = ClassifierModel::with_hidden(InputLayout::of(&env, 3), &[8], &mut rng);
        let policy =
            PolicyModel::with_hidden(env.encode_dim() + 3, env.action_dim(), &[8], &mut rng);
        let archive = SsmArchive::new(1);
        let targets = vec![env.s0(); 2];
        let fields =
            field_maps(&cls, &archive, &policy, &emb, &env, &targets, 8, 2, &mut rng).unwrap();
        emit_outputs(dir.path(), &CoverageCurve::new(), &grid, Some(&fields)).unwrap();
        for name in [
            "coverage.csv",
            "overlap.csv",
            "skills.csv",
            "visited_skill_0.ppm",
            "visited_skill_1.ppm",
            "measure_skill_0.ppm",
            "measure_skill_1.ppm",
            "uncertainty_skill_0.ppm",
            "uncertainty_skill_1.ppm",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
    }

    #[test]
    fn io_failures_name_the_path() {
        let missing = Path::new("/nonexistent-dir-for-test/x.csv");
        let err = write_coverage_csv(missing, &CoverageCurve::new()).unwrap_err();
        assert!(err.to_string().contains("nonexistent-dir-for-test"));
    }
}
