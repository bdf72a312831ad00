//! Exact reference computations on finite MDPs.
//!
//! Everything here is closed-form linear algebra: successor state measures
//! from a matrix inverse, mutual information and its lower bounds by direct
//! summation, and the target-selection uncertainty score evaluated from
//! exact measures. The neural estimators elsewhere in the crate are tested
//! against these oracles.

mod bounds;
mod io;
mod random;
mod ssm;
mod uncertainty;

pub use bounds::{
    diversity_lower_bound, exact_mi, jensen_lower_bound, jensen_pointwise, MEASURE_FLOOR,
};
pub use random::{random_mdp, random_policies, random_policy};
pub use ssm::{exact_ssm, power_series_ssm, series_length};
pub use uncertainty::{
    brute_force_targets, exact_uncertainty, kl_decomposition_check, KlCheck,
};

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};

/// A finite MDP with dense transition probabilities `p[s, a, s']`.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub p: Array3<f64>,
    pub gamma: f64,
    pub s0: usize,
}

impl FiniteMdp {
    pub fn validate(&self) -> Result<()> {
        if self.p.shape() != [self.n_states, self.n_actions, self.n_states] {
            return Err(Error::InvalidSpec(format!(
                "transition tensor shape {:?} does not match {} states / {} actions",
                self.p.shape(),
                self.n_states,
                self.n_actions
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidSpec(format!(
                "gamma must be in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.s0 >= self.n_states {
            return Err(Error::InvalidSpec(format!(
                "start state {} out of range",
                self.s0
            )));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.p.slice(ndarray::s![s, a, ..]);
                if row.iter().any(|v| *v < 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "negative probability at state {s}, action {a}"
                    )));
                }
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!(
                        "row (state {s}, action {a}) sums to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks a stochastic policy `pi[s, a]` against this MDP's shape.
    pub fn validate_policy(&self, policy: &Array2<f64>) -> Result<()> {
        if policy.shape() != [self.n_states, self.n_actions] {
            return Err(Error::InvalidSpec(format!(
                "policy shape {:?} does not match MDP",
                policy.shape()
            )));
        }
        for s in 0..self.n_states {
            let sum: f64 = policy.row(s).sum();
            if (sum - 1.0).abs() > 1e-12 || policy.row(s).iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "policy row {s} is not a distribution"
                )));
            }
        }
        Ok(())
    }

    /// State-to-state transition matrix under `policy`.
    pub fn transition_matrix(&self, policy: &Array2<f64>) -> Array2<f64> {
        let mut t = Array2::zeros((self.n_states, self.n_states));
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let w = policy[[s, a]];
                if w == 0.0 {
                    continue;
                }
                for s2 in 0..self.n_states {
                    t[[s, s2]] += w * self.p[[s, a, s2]];
                }
            }
        }
        t
    }
}

/// Successor state measure of one skill: `m[s1, s2]` is the discounted
/// visit measure of `s2` starting from `s1`. Unnormalized rows sum to
/// `1 / (1 - gamma)`; normalized ones (scaled by `1 - gamma`) sum to 1.
#[derive(Debug, Clone)]
pub struct SsmMatrix {
    pub m: Array2<f64>,
    pub gamma: f64,
    pub normalized: bool,
}

impl SsmMatrix {
    pub fn n_states(&self) -> usize {
        self.m.nrows()
    }

    pub fn to_normalized(&self) -> SsmMatrix {
        if self.normalized {
            self.clone()
        } else {
            SsmMatrix {
                m: &self.m * (1.0 - self.gamma),
                gamma: self.gamma,
                normalized: true,
            }
        }
    }

    pub fn to_unnormalized(&self) -> SsmMatrix {
        if self.normalized {
            SsmMatrix {
                m: &self.m / (1.0 - self.gamma),
                gamma: self.gamma,
                normalized: false,
            }
        } else {
            self.clone()
        }
    }

    /// Discounted state distribution when starting from `s0`.
    pub fn occupancy(&self, s0: usize) -> Array1<f64> {
        self.to_normalized().m.row(s0).to_owned()
    }

    /// Largest deviation of any row sum from its expected value.
    pub fn row_sum_deviation(&self) -> f64 {
        let expected = if self.normalized {
            1.0
        } else {
            1.0 / (1.0 - self.gamma)
        };
        (0..self.n_states())
            .map(|s| (self.m.row(s).sum() - expected).abs())
            .fold(0.0, f64::max)
    }
}

/// Exact successor measures for a set of skills sharing one MDP, plus the
/// skill prior. Caches occupancies and the skill-marginal state
/// distribution, which normalizes all measure ratios.
#[derive(Debug, Clone)]
pub struct SsmSet {
    ssms: Vec<SsmMatrix>,
    p_z: Vec<f64>,
    s0: usize,
    occupancies: Vec<Array1<f64>>,
    marginal: Array1<f64>,
}

impl SsmSet {
    pub fn new(ssms: Vec<SsmMatrix>, p_z: Vec<f64>, s0: usize) -> Result<Self> {
        if ssms.is_empty() || ssms.len() != p_z.len() {
            return Err(Error::InvalidSpec(
                "skill measure set and prior must be non-empty and the same length".into(),
            ));
        }
        if (p_z.iter().sum::<f64>() - 1.0).abs() > 1e-12 || p_z.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidSpec("skill prior is not a distribution".into()));
        }
        let n = ssms[0].n_states();
        if ssms.iter().any(|m| m.n_states() != n) || s0 >= n {
            return Err(Error::InvalidSpec(
                "skill measures disagree on the state count".into(),
            ));
        }
        let occupancies: Vec<Array1<f64>> = ssms.iter().map(|m| m.occupancy(s0)).collect();
        let mut marginal = Array1::zeros(n);
        for (w, occ) in p_z.iter().zip(&occupancies) {
            marginal += &(occ * *w);
        }
        Ok(SsmSet {
            ssms,
            p_z,
            s0,
            occupancies,
            marginal,
        })
    }

    /// Exact measures for each skill policy on `mdp` under a uniform prior.
    pub fn from_mdp(mdp: &FiniteMdp, policies: &[Array2<f64>]) -> Result<Self> {
        let ssms = policies
            .iter()
            .map(|pi| exact_ssm(mdp, pi))
            .collect::<Result<Vec<_>>>()?;
        let n = policies.len();
        SsmSet::new(ssms, vec![1.0 / n as f64; n], mdp.s0)
    }

    pub fn n_skill(&self) -> usize {
        self.ssms.len()
    }

    pub fn n_states(&self) -> usize {
        self.ssms[0].n_states()
    }

    pub fn s0(&self) -> usize {
        self.s0
    }

    pub fn p_z(&self) -> &[f64] {
        &self.p_z
    }

    pub fn ssm(&self, z: usize) -> &SsmMatrix {
        &self.ssms[z]
    }

    pub fn occupancy(&self, z: usize) -> &Array1<f64> {
        &self.occupancies[z]
    }

    /// Skill-marginal state distribution sum_z p(z) rho_z.
    pub fn marginal(&self) -> &Array1<f64> {
        &self.marginal
    }

    /// Density-ratio form of the measure: normalized m_z(s1, s2) over the
    /// marginal probability of s2. Infinite when s2 has no marginal mass but
    /// positive measure; callers floor before taking logs.
    pub fn ratio(&self, z: usize, s1: usize, s2: usize) -> f64 {
        let ssm = &self.ssms[z];
        let raw = ssm.m[[s1, s2]];
        let num = if ssm.normalized {
            raw
        } else {
            (1.0 - ssm.gamma) * raw
        };
        let den = self.marginal[s2];
        if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}
