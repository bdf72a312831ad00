//! Discretized coverage accounting and skill-overlap diagnostics.
//!
//! The feature plane is cut into a `resolution`-square grid; every state an
//! episode visits marks one cell for its skill and for the all-skill
//! aggregate. Maze environments also carry the set of cells reachable from
//! the start, which both bounds what can legally be marked and serves as
//! the denominator of coverage fractions.

use ndarray::Array2;

use crate::env::{reachable_cells, Env, EnvKind, Episode};
use crate::error::Result;

/// Visited-cell bitsets per skill plus their aggregate.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    resolution: usize,
    bounds: ([f64; 2], [f64; 2]),
    per_skill: Vec<Vec<bool>>,
    aggregate: Vec<bool>,
    /// Cells reachable from the start; present only for mazes, where it is
    /// also asserted to contain every visited cell.
    reachable: Option<Vec<bool>>,
}

impl CoverageGrid {
    pub fn new(env: &Env, n_skill: usize, resolution: usize) -> Result<Self> {
        assert!(resolution > 0 && n_skill > 0);
        let cells = resolution * resolution;
        let reachable = match &env.kind {
            EnvKind::Maze(m) => {
                let set = reachable_cells(m, resolution)?;
                let mut mask = vec![false; cells];
                for (ix, iy) in set {
                    mask[iy * resolution + ix] = true;
                }
                Some(mask)
            }
            _ => None,
        };
        Ok(CoverageGrid {
            resolution,
            bounds: env.feature_bounds(),
            per_skill: vec![vec![false; cells]; n_skill],
            aggregate: vec![false; cells],
            reachable,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn n_skill(&self) -> usize {
        self.per_skill.len()
    }

    /// Cell index of a feature point, clamping out-of-bounds coordinates
    /// onto the border cells.
    pub fn cell_index(&self, f: [f64; 2]) -> usize {
        let g = self.resolution;
        let axis = |v: f64, lo: f64, hi: f64| -> usize {
            let t = ((v - lo) / (hi - lo) * g as f64).floor();
            (t.max(0.0) as usize).min(g - 1)
        };
        let ix = axis(f[0], self.bounds.0[0], self.bounds.0[1]);
        let iy = axis(f[1], self.bounds.1[0], self.bounds.1[1]);
        iy * g + ix
    }

    fn mark(&mut self, skill: usize, cell: usize) {
        if let Some(reach) = &self.reachable {
            assert!(
                reach[cell],
                "visited cell {cell} is not reachable from the start"
            );
        }
        self.per_skill[skill][cell] = true;
        self.aggregate[cell] = true;
    }

    /// Mark every state of the episode — the initial state and each
    /// successor, including a terminal collision endpoint — for the
    /// episode's skill. Replays are idempotent.
    pub fn update_coverage(&mut self, env: &Env, episode: &Episode) {
        let cells: Vec<usize> = episode
            .states()
            .map(|s| self.cell_index(env.featurize(s)))
            .collect();
        for cell in cells {
            self.mark(episode.skill, cell);
        }
        debug_assert!(self.aggregate_is_union());
    }

    /// The set identity behind the aggregate bitset.
    pub fn aggregate_is_union(&self) -> bool {
        (0..self.aggregate.len()).all(|c| {
            let union = self.per_skill.iter().any(|m| m[c]);
            union == self.aggregate[c]
        })
    }

    pub fn covered_cells(&self) -> usize {
        self.aggregate.iter().filter(|&&v| v).count()
    }

    pub fn skill_covered_cells(&self, skill: usize) -> usize {
        self.per_skill[skill].iter().filter(|&&v| v).count()
    }

    /// Coverage denominator: reachable cells for mazes, all cells
    /// otherwise.
    pub fn denominator(&self) -> usize {
        match &self.reachable {
            Some(mask) => mask.iter().filter(|&&v| v).count(),
            None => self.aggregate.len(),
        }
    }

    pub fn fraction(&self) -> f64 {
        self.covered_cells() as f64 / self.denominator() as f64
    }

    pub fn skill_mask(&self, skill: usize) -> &[bool] {
        &self.per_skill[skill]
    }

    /// One skill's visited cells as a (row, column) = (y-cell, x-cell)
    /// matrix of zeros and ones, for heatmap rendering.
    pub fn visited_field(&self, skill: usize) -> Array2<f64> {
        let g = self.resolution;
        Array2::from_shape_fn((g, g), |(iy, ix)| {
            if self.per_skill[skill][iy * g + ix] {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// One point of a coverage-over-samples curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Cumulative environment interactions when the point was taken.
    pub samples: u64,
    pub cells: usize,
    pub fraction: f64,
}

/// Coverage as a function of environment samples; cells and fraction can
/// only grow.
#[derive(Debug, Clone, Default)]
pub struct CoverageCurve {
    points: Vec<CurvePoint>,
}

impl CoverageCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: CurvePoint) {
        if let Some(last) = self.points.last() {
            assert!(point.samples >= last.samples, "samples ran backwards");
            assert!(point.cells >= last.cells, "covered cells shrank");
            assert!(point.fraction >= last.fraction, "coverage fraction shrank");
        }
        self.points.push(point);
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Pairwise Jaccard overlap of the skills' visited-cell sets.
#[derive(Debug, Clone)]
pub struct SkillOverlapMatrix {
    pub values: Array2<f64>,
}

impl SkillOverlapMatrix {
    pub fn from_grid(grid: &CoverageGrid) -> Self {
        let n = grid.n_skill();
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let a = grid.skill_mask(i);
                let b = grid.skill_mask(j);
                let mut inter = 0usize;
                let mut union = 0usize;
                for (&x, &y) in a.iter().zip(b) {
                    inter += (x && y) as usize;
                    union += (x || y) as usize;
                }
                values[[i, j]] = if union == 0 {
                    0.0
                } else {
                    inter as f64 / union as f64
                };
            }
        }
        SkillOverlapMatrix { values }
    }

    pub fn n_skill(&self) -> usize {
        self.values.nrows()
    }

    /// Mean of the strictly off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.n_skill();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += self.values[[i, j]];
                }
            }
        }
        total / (n * (n - 1)) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{rollout, ActionVec, SkillPolicy, StateVec};
    use crate::rng::{derive, Stream};

    /// Constant-drift test policy.
    struct Fixed(f64, f64);

    impl SkillPolicy for Fixed {
        fn act(
            &self,
            _env: &Env,
            _s: &StateVec,
            _skill: usize,
            _rng: &mut dyn rand::RngCore,
        ) -> ActionVec {
            ActionVec(vec![self.0, self.1])
        }
    }

    #[test]
    fn a_stationary_episode_covers_one_cell() {
        let env = Env::by_name("easy").unwrap();
        let mut grid = CoverageGrid::new(&env, 2, 32).unwrap();
        let mut rng = derive(1, Stream::Custom(30));
        let ep = rollout(&env, &Fixed(0.0, 0.0), 0, 10, &mut rng).unwrap();
        grid.update_coverage(&env, &ep);
        assert_eq!(grid.covered_cells(), 1);
        assert_eq!(grid.skill_covered_cells(0), 1);
        assert_eq!(grid.skill_covered_cells(1), 0);
    }

    #[test]
    fn a_straight_line_crosses_the_expected_cells() {
        // From s0 = (-0.75, -0.75), full +x drift moves dt = 0.1 per step.
        // At resolution 32 (cell width 0.0625) the x-coordinates of the
        // first k+1 states are -0.75 + 0.1 i, all at y = -0.75; counting
        // distinct floor((x + 1) / 0.0625) values gives the cell tally.
        let env = Env::by_name("easy").unwrap();
        let mut grid = CoverageGrid::new(&env, 1, 32).unwrap();
        let mut rng = derive(2, Stream::Custom(30));
        let ep = rollout(&env, &Fixed(1.0, 0.0), 0, 10, &mut rng).unwrap();
        grid.update_coverage(&env, &ep);
        let mut expected: Vec<usize> = ep
            .states()
            .map(|s| ((s.0[0] + 1.0) / 0.0625) as usize)
            .collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(grid.covered_cells(), expected.len());
        assert!(expected.len() >= 10 * 2 / 4); // 1.0 units of travel, 0.0625 cells
    }

    #[test]
    fn replaying_an_episode_changes_nothing() {
        let env = Env::by_name("u").unwrap();
        let mut grid = CoverageGrid::new(&env, 2, 32).unwrap();
        let mut rng = derive(3, Stream::Custom(30));
        let ep = rollout(&env, &Fixed(0.3, 0.9), 1, 30, &mut rng).unwrap();
        grid.update_coverage(&env, &ep);
        let once = grid.clone();
        grid.update_coverage(&env, &ep);
        assert_eq!(grid.covered_cells(), once.covered_cells());
        assert_eq!(grid.skill_mask(1), once.skill_mask(1));
    }

    #[test]
    fn collision_endpoints_stay_within_reachable_cells() {
        // Drive straight into every boundary and the interior walls; the
        // contact endpoints must all land in reachable cells (the mark
        // asserts it).
        for name in ["easy", "u", "hard"] {
            let env = Env::by_name(name).unwrap();
            let mut grid = CoverageGrid::new(&env, 1, 32).unwrap();
            let mut rng = derive(4, Stream::Custom(30));
            for (dx, dy) in [
                (1.0, 0.0),
                (-1.0, 0.0),
                (0.0, 1.0),
                (0.0, -1.0),
                (0.7, 0.7),
                (-0.6, 0.8),
            ] {
                let ep = rollout(&env, &Fixed(dx, dy), 0, env.horizon(), &mut rng).unwrap();
                grid.update_coverage(&env, &ep);
            }
            assert!(grid.aggregate_is_union());
            assert!(grid.covered_cells() <= grid.denominator());
        }
    }

    #[test]
    fn out_of_bounds_features_clamp_to_border_cells() {
        let env = Env::by_name("easy").unwrap();
        let grid = CoverageGrid::new(&env, 1, 8).unwrap();
        assert_eq!(grid.cell_index([-5.0, -5.0]), 0);
        assert_eq!(grid.cell_index([5.0, 5.0]), 63);
        assert_eq!(grid.cell_index([5.0, -5.0]), 7);
    }

    #[test]
    fn curve_rejects_shrinking_coverage() {
        let mut curve = CoverageCurve::new();
        curve.push(CurvePoint {
            samples: 10,
            cells: 4,
            fraction: 0.1,
        });
        curve.push(CurvePoint {
            samples: 20,
            cells: 4,
            fraction: 0.1,
        });
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            curve.push(CurvePoint {
                samples: 30,
                cells: 3,
                fraction: 0.05,
            })
        }));
        assert!(result.is_err());
    }

    #[test]
    fn overlap_matrix_matches_hand_counts() {
        let env = Env::by_name("easy").unwrap();
        let mut grid = CoverageGrid::new(&env, 3, 32).unwrap();
        let mut rng = derive(5, Stream::Custom(30));
        // Skills 0 and 1 run the same line; skill 2 runs the opposite way.
        for (z, (dx, dy)) in [(0, (1.0, 0.0)), (1, (1.0, 0.0)), (2, (0.0, 1.0))] {
            let ep = rollout(&env, &Fixed(dx, dy), z, 8, &mut rng).unwrap();
            grid.update_coverage(&env, &ep);
        }
        let m = SkillOverlapMatrix::from_grid(&grid);
        assert_eq!(m.values[[0, 1]], 1.0);
        assert_eq!(m.values[[1, 0]], 1.0);
        assert_eq!(m.values[[0, 0]], 1.0);
        // Identical start cell: intersection 1, union = |a| + |b| - 1.
        let a = grid.skill_covered_cells(0);
        let b = grid.skill_covered_cells(2);
        let expected = 1.0 / (a + b - 1) as f64;
        assert!((m.values[[0, 2]] - expected).abs() < 1e-12);
        assert_eq!(m.values[[0, 2]], m.values[[2, 0]]);
        let by_hand = (1.0 + 1.0 + expected * 2.0 + expected * 2.0) / 6.0;
        assert!((m.mean_off_diagonal() - by_hand).abs() < 1e-12);
    }

    #[test]
    fn empty_skills_have_zero_overlap_rows() {
        let env = Env::by_name("easy").unwrap();
        let grid = CoverageGrid::new(&env, 2, 16).unwrap();
        let m = SkillOverlapMatrix::from_grid(&grid);
        assert_eq!(m.values[[0, 0]], 0.0);
        assert_eq!(m.values[[0, 1]], 0.0);
        assert_eq!(m.mean_off_diagonal(), 0.0);
    }
}
