//! Environments: continuous point-mass mazes, a two-joint arm, and a
//! discrete gridworld behind one interface.
//!
//! Environments are immutable specs; `step` is a pure function of
//! (state, action) apart from an interaction counter used to audit how many
//! transitions a training run consumed.

mod arm;
mod grid;
mod maze;
mod rollout;

pub use arm::ArmSpec;
pub use grid::{GridMove, Gridworld};
pub use maze::{reachable_cells, MazeSpec, Wall, WALL_MARGIN};
pub use rollout::{rollout, Episode, Transition};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// A state vector; length depends on the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec(pub Vec<f64>);

impl StateVec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// An action vector; components are expected in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVec(pub Vec<f64>);

impl ActionVec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Componentwise clamp to the action box.
    pub fn clamped(&self) -> ActionVec {
        ActionVec(self.0.iter().map(|a| a.clamp(-1.0, 1.0)).collect())
    }
}

/// Anything that maps (state, skill) to an action; implemented by the neural
/// policy and by simple fixed policies in tests.
pub trait SkillPolicy {
    fn act(&self, env: &Env, s: &StateVec, skill: usize, rng: &mut dyn rand::RngCore)
        -> ActionVec;
}

/// The concrete environment families.
#[derive(Debug)]
pub enum EnvKind {
    Maze(MazeSpec),
    Arm(ArmSpec),
    Grid(Gridworld),
}

/// An environment spec plus an interaction counter.
///
/// The counter increments on every `step` call, which lets the trainer assert
/// that only the collection phase touches the environment.
#[derive(Debug)]
pub struct Env {
    pub kind: EnvKind,
    interactions: AtomicU64,
}

impl Env {
    pub fn new(kind: EnvKind) -> Self {
        Env {
            kind,
            interactions: AtomicU64::new(0),
        }
    }

    /// Built-in environment by name: `easy`, `u`, `hard` (mazes), `arm`,
    /// `grid` (5x5 open), `four-rooms`.
    pub fn by_name(name: &str) -> Result<Self> {
        let kind = match name {
            "easy" | "u" | "hard" => EnvKind::Maze(MazeSpec::builtin(name)?),
            "arm" => EnvKind::Arm(ArmSpec::default()),
            "grid" => EnvKind::Grid(Gridworld::open(5, 5)),
            "four-rooms" => EnvKind::Grid(Gridworld::four_rooms()),
            other => {
                return Err(Error::InvalidSpec(format!("unknown environment {other:?}")));
            }
        };
        Ok(Env::new(kind))
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            EnvKind::Maze(m) => &m.name,
            EnvKind::Arm(_) => "arm",
            EnvKind::Grid(g) => &g.name,
        }
    }

    pub fn state_dim(&self) -> usize {
        match &self.kind {
            EnvKind::Maze(_) => 2,
            EnvKind::Arm(_) => 4,
            EnvKind::Grid(_) => 1,
        }
    }

    pub fn action_dim(&self) -> usize {
        2
    }

    /// Dimension of the network input encoding of a state.
    pub fn encode_dim(&self) -> usize {
        match &self.kind {
            EnvKind::Maze(_) => 2,
            EnvKind::Arm(_) => 4,
            EnvKind::Grid(g) => g.rows * g.cols,
        }
    }

    pub fn s0(&self) -> StateVec {
        match &self.kind {
            EnvKind::Maze(m) => StateVec(m.s0.to_vec()),
            EnvKind::Arm(_) => StateVec(vec![0.0; 4]),
            EnvKind::Grid(g) => StateVec(vec![g.cell_index(g.start) as f64]),
        }
    }

    pub fn horizon(&self) -> usize {
        match &self.kind {
            EnvKind::Maze(m) => m.horizon,
            EnvKind::Arm(a) => a.horizon,
            EnvKind::Grid(g) => g.horizon,
        }
    }

    /// Total `step` calls made against this environment.
    pub fn interactions(&self) -> u64 {
        self.interactions.load(Ordering::Relaxed)
    }

    /// One transition. Returns the next state and whether the episode ends
    /// (only mazes terminate, on wall contact).
    pub fn step(&self, s: &StateVec, a: &ActionVec) -> Result<(StateVec, bool)> {
        if s.dim() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "step state",
                expected: self.state_dim(),
                got: s.dim(),
            });
        }
        if a.dim() != self.action_dim() {
            return Err(Error::DimensionMismatch {
                context: "step action",
                expected: self.action_dim(),
                got: a.dim(),
            });
        }
        self.interactions.fetch_add(1, Ordering::Relaxed);
        let a = a.clamped();
        Ok(match &self.kind {
            EnvKind::Maze(m) => m.step(s, &a),
            EnvKind::Arm(sp) => (sp.step(s, &a), false),
            EnvKind::Grid(g) => (g.step(s, &a), false),
        })
    }

    /// Low-dimensional features used for coverage grids and plots.
    pub fn featurize(&self, s: &StateVec) -> [f64; 2] {
        match &self.kind {
            EnvKind::Maze(_) => [s.0[0], s.0[1]],
            EnvKind::Arm(sp) => sp.end_effector(s),
            EnvKind::Grid(g) => {
                // x is the column axis, y the row axis, matching the action
                // quantization.
                let (r, c) = g.cell_coords(s.0[0] as usize);
                [c as f64, r as f64]
            }
        }
    }

    /// Axis-aligned bounds of the feature space, as ([x0, x1], [y0, y1]).
    pub fn feature_bounds(&self) -> ([f64; 2], [f64; 2]) {
        match &self.kind {
            EnvKind::Maze(_) => ([-1.0, 1.0], [-1.0, 1.0]),
            EnvKind::Arm(sp) => {
                let r = sp.lengths[0] + sp.lengths[1];
                ([-r, r], [-r, r])
            }
            EnvKind::Grid(g) => (
                [-0.5, g.cols as f64 - 0.5],
                [-0.5, g.rows as f64 - 0.5],
            ),
        }
    }

    /// Network input encoding: identity for continuous states, one-hot for
    /// grid cells.
    pub fn encode(&self, s: &StateVec) -> Vec<f64> {
        match &self.kind {
            EnvKind::Maze(_) | EnvKind::Arm(_) => s.0.clone(),
            EnvKind::Grid(g) => {
                let mut v = vec![0.0; g.rows * g.cols];
                v[s.0[0] as usize] = 1.0;
                v
            }
        }
    }
}
