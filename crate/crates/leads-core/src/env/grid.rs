//! Discrete gridworld with five moves (stay + 4-neighbour).
//!
//! Continuous actions are quantized: below a 0.5 deadzone the agent stays
//! put, otherwise the dominant axis wins (x on ties). Moving into a wall or
//! off the board leaves the state unchanged; episodes never terminate. The
//! exact transition structure is exported as a finite MDP for the tabular
//! oracles.

use crate::env::{ActionVec, StateVec};
use crate::tabular::FiniteMdp;
use ndarray::Array3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMove {
    Stay,
    Up,
    Down,
    Left,
    Right,
}

impl GridMove {
    pub const ALL: [GridMove; 5] = [
        GridMove::Stay,
        GridMove::Up,
        GridMove::Down,
        GridMove::Left,
        GridMove::Right,
    ];

    /// Representative continuous action for this move.
    pub fn canonical_vector(self) -> ActionVec {
        let (dx, dy) = match self {
            GridMove::Stay => (0.0, 0.0),
            GridMove::Up => (0.0, 1.0),
            GridMove::Down => (0.0, -1.0),
            GridMove::Left => (-1.0, 0.0),
            GridMove::Right => (1.0, 0.0),
        };
        ActionVec(vec![dx, dy])
    }

    /// Quantize a continuous action; x is the column axis, y the row axis.
    pub fn from_action(a: &ActionVec) -> GridMove {
        let (ax, ay) = (a.0[0], a.0[1]);
        if ax.abs() < 0.5 && ay.abs() < 0.5 {
            GridMove::Stay
        } else if ax.abs() >= ay.abs() {
            if ax > 0.0 {
                GridMove::Right
            } else {
                GridMove::Left
            }
        } else if ay > 0.0 {
            GridMove::Up
        } else {
            GridMove::Down
        }
    }

    /// (row delta, col delta).
    fn delta(self) -> (isize, isize) {
        match self {
            GridMove::Stay => (0, 0),
            GridMove::Up => (1, 0),
            GridMove::Down => (-1, 0),
            GridMove::Left => (0, -1),
            GridMove::Right => (0, 1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gridworld {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major blocked mask.
    pub blocked: Vec<bool>,
    pub start: (usize, usize),
    pub horizon: usize,
}

impl Gridworld {
    /// Fully open grid starting at the center cell.
    pub fn open(rows: usize, cols: usize) -> Self {
        Gridworld {
            name: format!("grid{rows}x{cols}"),
            rows,
            cols,
            blocked: vec![false; rows * cols],
            start: (rows / 2, cols / 2),
            horizon: 50,
        }
    }

    /// Classic four-rooms layout on a 7x7 board with four doorways.
    pub fn four_rooms() -> Self {
        let mut g = Gridworld::open(7, 7);
        g.name = "four-rooms".into();
        g.start = (0, 0);
        for c in 0..7 {
            if c != 1 && c != 5 {
                let i = g.cell_index((3, c));
                g.blocked[i] = true;
            }
        }
        for r in 0..7 {
            if r != 1 && r != 5 {
                let i = g.cell_index((r, 3));
                g.blocked[i] = true;
            }
        }
        g
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_index(&self, (row, col): (usize, usize)) -> usize {
        row * self.cols + col
    }

    pub fn cell_coords(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    fn apply(&self, index: usize, mv: GridMove) -> usize {
        let (r, c) = self.cell_coords(index);
        let (dr, dc) = mv.delta();
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nr >= self.rows as isize || nc < 0 || nc >= self.cols as isize {
            return index;
        }
        let target = self.cell_index((nr as usize, nc as usize));
        if self.blocked[target] {
            index
        } else {
            target
        }
    }

    pub fn step(&self, s: &StateVec, a: &ActionVec) -> StateVec {
        let next = self.apply(s.0[0] as usize, GridMove::from_action(a));
        StateVec(vec![next as f64])
    }

    /// The exact MDP over all cells with the five canonical moves; blocked
    /// cells self-loop (they are unreachable anyway).
    pub fn to_mdp(&self, gamma: f64) -> FiniteMdp {
        let n = self.n_cells();
        let mut p = Array3::zeros((n, 5, n));
        for s in 0..n {
            for (ai, mv) in GridMove::ALL.iter().enumerate() {
                let next = if self.blocked[s] { s } else { self.apply(s, *mv) };
                p[[s, ai, next]] = 1.0;
            }
        }
        FiniteMdp {
            n_states: n,
            n_actions: 5,
            p,
            gamma,
            s0: self.cell_index(self.start),
        }
    }
}
