//! Point-mass mazes on [-1, 1]^2 with axis-aligned walls.
//!
//! The action is a velocity command integrated for `dt`. Walls are segments
//! inflated by `WALL_MARGIN` into thin boxes; the first contact along a step
//! stops the agent on the box surface and terminates the episode. The outer
//! boundary consists of four such walls, so no step can leave the square.

use std::collections::BTreeSet;
use std::collections::VecDeque;

use crate::env::{ActionVec, StateVec};
use crate::error::{Error, Result};

/// Half-thickness given to every wall segment.
pub const WALL_MARGIN: f64 = 0.01;

/// An axis-aligned wall segment from `a` to `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Wall {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Result<Self> {
        let axis_aligned = a[0] == b[0] || a[1] == b[1];
        if !axis_aligned || a == b {
            return Err(Error::InvalidSpec(format!(
                "wall {a:?} -> {b:?} must be a non-degenerate axis-aligned segment"
            )));
        }
        Ok(Wall { a, b })
    }

    /// The inflated box as (low corner, high corner).
    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let lo = [
            self.a[0].min(self.b[0]) - WALL_MARGIN,
            self.a[1].min(self.b[1]) - WALL_MARGIN,
        ];
        let hi = [
            self.a[0].max(self.b[0]) + WALL_MARGIN,
            self.a[1].max(self.b[1]) + WALL_MARGIN,
        ];
        (lo, hi)
    }

    /// Whether `p` lies inside the inflated box (surface included).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (lo, hi) = self.bounds();
        (0..2).all(|ax| lo[ax] <= p[ax] && p[ax] <= hi[ax])
    }

    /// Earliest `t` in [0, 1] at which `p + t d` touches the inflated box,
    /// if the swept segment intersects it at all. Slab test per axis.
    pub fn entry_time(&self, p: [f64; 2], d: [f64; 2]) -> Option<f64> {
        let (lo, hi) = self.bounds();
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        for ax in 0..2 {
            if d[ax] == 0.0 {
                if p[ax] < lo[ax] || p[ax] > hi[ax] {
                    return None;
                }
            } else {
                let t1 = (lo[ax] - p[ax]) / d[ax];
                let t2 = (hi[ax] - p[ax]) / d[ax];
                let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                t_enter = t_enter.max(near);
                t_exit = t_exit.min(far);
            }
        }
        if t_enter > t_exit || t_exit < 0.0 || t_enter > 1.0 {
            return None;
        }
        Some(t_enter.max(0.0))
    }
}

/// Immutable maze layout.
#[derive(Debug, Clone)]
pub struct MazeSpec {
    pub name: String,
    pub s0: [f64; 2],
    pub dt: f64,
    pub horizon: usize,
    pub interior: Vec<Wall>,
    boundary: [Wall; 4],
}

fn boundary_walls() -> [Wall; 4] {
    [
        Wall {
            a: [-1.0, -1.0],
            b: [1.0, -1.0],
        },
        Wall {
            a: [-1.0, 1.0],
            b: [1.0, 1.0],
        },
        Wall {
            a: [-1.0, -1.0],
            b: [-1.0, 1.0],
        },
        Wall {
            a: [1.0, -1.0],
            b: [1.0, 1.0],
        },
    ]
}

impl MazeSpec {
    pub fn new(
        name: impl Into<String>,
        s0: [f64; 2],
        dt: f64,
        horizon: usize,
        interior: Vec<Wall>,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
        }
        if horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be at least 1".into()));
        }
        let spec = MazeSpec {
            name: name.into(),
            s0,
            dt,
            horizon,
            interior,
            boundary: boundary_walls(),
        };
        if s0.iter().any(|c| c.abs() >= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "start {s0:?} must be strictly inside the unit square"
            )));
        }
        if spec.walls().any(|w| w.contains(s0)) {
            return Err(Error::InvalidSpec(format!(
                "start {s0:?} lies inside a wall"
            )));
        }
        Ok(spec)
    }

    /// All walls: the four boundary segments followed by interior ones.
    pub fn walls(&self) -> impl Iterator<Item = &Wall> {
        self.boundary.iter().chain(self.interior.iter())
    }

    /// Integrate the velocity command for `dt`, stopping at the first wall
    /// contact. Returns (next state, terminated).
    pub fn step(&self, s: &StateVec, a: &ActionVec) -> (StateVec, bool) {
        let p = [s.0[0], s.0[1]];
        let d = [self.dt * a.0[0], self.dt * a.0[1]];
        let mut first: Option<f64> = None;
        for w in self.walls() {
            if let Some(t) = w.entry_time(p, d) {
                if first.is_none_or(|cur| t < cur) {
                    first = Some(t);
                }
            }
        }
        match first {
            Some(t) => (StateVec(vec![p[0] + t * d[0], p[1] + t * d[1]]), true),
            None => (StateVec(vec![p[0] + d[0], p[1] + d[1]]), false),
        }
    }

    /// Whether the straight segment from `p` to `q` avoids every wall.
    pub fn segment_clear(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        let d = [q[0] - p[0], q[1] - p[1]];
        self.walls().all(|w| w.entry_time(p, d).is_none())
    }

    /// One of the shipped layouts: `easy`, `u`, or `hard`.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "easy" => include_str!("../../data/easy.maze"),
            "u" => include_str!("../../data/u.maze"),
            "hard" => include_str!("../../data/hard.maze"),
            other => {
                return Err(Error::InvalidSpec(format!("unknown maze {other:?}")));
            }
        };
        MazeSpec::parse(text)
    }

    /// Parse the `key = values` layout format; see the files under `data/`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Parse {
            what: "maze layout".into(),
            detail,
        };
        let mut name = None;
        let mut s0 = None;
        let mut dt = None;
        let mut horizon = None;
        let mut interior = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let numbers = |n: usize| -> Result<Vec<f64>> {
                let nums: Vec<f64> = value
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))
                    })
                    .collect::<Result<_>>()?;
                if nums.len() == n {
                    Ok(nums)
                } else {
                    Err(bad(format!(
                        "line {}: {key} takes {n} numbers, got {}",
                        lineno + 1,
                        nums.len()
                    )))
                }
            };
            match key {
                "name" => name = Some(value.trim().to_string()),
                "s0" => {
                    let v = numbers(2)?;
                    s0 = Some([v[0], v[1]]);
                }
                "dt" => dt = Some(numbers(1)?[0]),
                "horizon" => horizon = Some(numbers(1)?[0] as usize),
                "wall" => {
                    let v = numbers(4)?;
                    interior.push(Wall::new([v[0], v[1]], [v[2], v[3]])?);
                }
                other => return Err(bad(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        let name = name.ok_or_else(|| bad("missing name".into()))?;
        let s0 = s0.ok_or_else(|| bad("missing s0".into()))?;
        let dt = dt.ok_or_else(|| bad("missing dt".into()))?;
        let horizon = horizon.ok_or_else(|| bad("missing horizon".into()))?;
        MazeSpec::new(name, s0, dt, horizon, interior)
    }

    /// Inverse of `parse`, emitting interior walls only.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = {}\n", self.name));
        out.push_str(&format!("s0 = {} {}\n", self.s0[0], self.s0[1]));
        out.push_str(&format!("dt = {}\n", self.dt));
        out.push_str(&format!("horizon = {}\n", self.horizon));
        for w in &self.interior {
            out.push_str(&format!(
                "wall = {} {} {} {}\n",
                w.a[0], w.a[1], w.b[0], w.b[1]
            ));
        }
        out
    }
}

/// Cells of a `resolution`^2 grid over [-1, 1]^2 reachable from the start by
/// 4-neighbour moves whose center-to-center segments avoid all walls.
pub fn reachable_cells(maze: &MazeSpec, resolution: usize) -> Result<BTreeSet<(usize, usize)>> {
    assert!(resolution > 0);
    let g = resolution;
    let width = 2.0 / g as f64;
    let center = |i: usize| -1.0 + (i as f64 + 0.5) * width;
    let cell_of = |x: f64| (((x + 1.0) / width) as usize).min(g - 1);
    let start = (cell_of(maze.s0[0]), cell_of(maze.s0[1]));
    if maze
        .walls()
        .any(|w| w.contains([center(start.0), center(start.1)]))
    {
        return Err(Error::StartCellBlocked);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some((ix, iy)) = queue.pop_front() {
        let p = [center(ix), center(iy)];
        let neighbours = [
            (ix.wrapping_sub(1), iy),
            (ix + 1, iy),
            (ix, iy.wrapping_sub(1)),
            (ix, iy + 1),
        ];
        for (jx, jy) in neighbours {
            if jx >= g || jy >= g || seen.contains(&(jx, jy)) {
                continue;
            }
            if maze.segment_clear(p, [center(jx), center(jy)]) {
                seen.insert((jx, jy));
                queue.push_back((jx, jy));
            }
        }
    }
    Ok(seen)
}
