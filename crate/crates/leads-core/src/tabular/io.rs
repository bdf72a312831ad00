//! Plain-text serialization of finite MDPs, used to pin oracle test
//! fixtures. Floats print in shortest round-trip form, so load(save(x))
//! reproduces x exactly.

use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::tabular::FiniteMdp;

impl FiniteMdp {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n_states = {}\n", self.n_states));
        out.push_str(&format!("n_actions = {}\n", self.n_actions));
        out.push_str(&format!("gamma = {}\n", self.gamma));
        out.push_str(&format!("s0 = {}\n", self.s0));
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row: Vec<String> = (0..self.n_states)
                    .map(|s2| format!("{}", self.p[[s, a, s2]]))
                    .collect();
                out.push_str(&format!("p {s} {a} = {}\n", row.join(" ")));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Parse {
            what: "finite MDP".into(),
            detail,
        };
        let mut n_states = None;
        let mut n_actions = None;
        let mut gamma = None;
        let mut s0 = None;
        let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value", lineno + 1)))?;
            let key: Vec<&str> = key.split_whitespace().collect();
            let value = value.trim();
            match key.as_slice() {
                ["n_states"] => n_states = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                ["n_actions"] => n_actions = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                ["gamma"] => gamma = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                ["s0"] => s0 = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                ["p", s, a] => {
                    let s: usize = s.parse().map_err(|e| bad(format!("{e}")))?;
                    let a: usize = a.parse().map_err(|e| bad(format!("{e}")))?;
                    let vals = value
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{e}"))))
                        .collect::<Result<Vec<f64>>>()?;
                    rows.push((s, a, vals));
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let n_states = n_states.ok_or_else(|| bad("missing n_states".into()))?;
        let n_actions = n_actions.ok_or_else(|| bad("missing n_actions".into()))?;
        let gamma = gamma.ok_or_else(|| bad("missing gamma".into()))?;
        let s0 = s0.ok_or_else(|| bad("missing s0".into()))?;
        let mut p = Array3::zeros((n_states, n_actions, n_states));
        let mut seen = vec![false; n_states * n_actions];
        for (s, a, vals) in rows {
            if s >= n_states || a >= n_actions || vals.len() != n_states {
                return Err(bad(format!("row (state {s}, action {a}) malformed")));
            }
            seen[s * n_actions + a] = true;
            for (s2, v) in vals.into_iter().enumerate() {
                p[[s, a, s2]] = v;
            }
        }
        if !seen.iter().all(|b| *b) {
            return Err(bad("missing transition rows".into()));
        }
        let mdp = FiniteMdp {
            n_states,
            n_actions,
            p,
            gamma,
            s0,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
