//! Mutual information between states and skills, and its two measure-based
//! lower bounds.
//!
//! Both bounds replace the intractable posterior with successor-measure
//! density ratios. The first applies Jensen's inequality per visited state
//! (the usual variational skill-discovery bound); the second trades it for a
//! contrastive denominator summing the ratios of all skills, which is what
//! the neural objective maximizes.

use ndarray::Array1;

use crate::tabular::SsmSet;

/// Floor applied to any measure ratio before a log or inside a denominator.
pub const MEASURE_FLOOR: f64 = 1e-8;

fn floored_ln(x: f64) -> f64 {
    x.max(MEASURE_FLOOR).ln()
}

/// Exact mutual information between the discounted state distribution and
/// the skill, `sum_z p(z) KL(rho_z || marginal)`. Zero-mass states
/// contribute zero.
pub fn exact_mi(occupancies: &[Array1<f64>], p_z: &[f64]) -> f64 {
    assert_eq!(occupancies.len(), p_z.len());
    let n = occupancies[0].len();
    let mut marginal = Array1::<f64>::zeros(n);
    for (w, occ) in p_z.iter().zip(occupancies) {
        marginal += &(occ * *w);
    }
    let mut mi = 0.0;
    for (w, occ) in p_z.iter().zip(occupancies) {
        for s in 0..n {
            let r = occ[s];
            if r > 0.0 && *w > 0.0 {
                mi += w * r * (r / marginal[s]).ln();
            }
        }
    }
    mi
}

/// Per-skill Jensen bound on the MI: both endpoints of the pointwise
/// inequality averaged over start states, for one (skill, target) pair.
/// Returns (inner expectation of the log ratio, log of the expected ratio).
pub fn jensen_pointwise(set: &SsmSet, z: usize, s2: usize) -> (f64, f64) {
    let rho = set.occupancy(z);
    let mut e_log = 0.0;
    let mut e_ratio = 0.0;
    for s1 in 0..set.n_states() {
        let w = rho[s1];
        if w == 0.0 {
            continue;
        }
        let r = set.ratio(z, s1, s2);
        e_log += w * floored_ln(r);
        e_ratio += w * r.max(MEASURE_FLOOR);
    }
    (e_log, e_ratio.ln())
}

/// Variational MI lower bound: the log density ratio averaged over two
/// independent states of the same skill.
pub fn jensen_lower_bound(set: &SsmSet) -> f64 {
    let mut total = 0.0;
    for z in 0..set.n_skill() {
        let rho = set.occupancy(z);
        let w_z = set.p_z()[z];
        if w_z == 0.0 {
            continue;
        }
        for s2 in 0..set.n_states() {
            if rho[s2] == 0.0 {
                continue;
            }
            let (e_log, _) = jensen_pointwise(set, z, s2);
            total += w_z * rho[s2] * e_log;
        }
    }
    total
}

/// Contrastive MI lower bound: each skill's ratio against one plus the
/// summed ratios of every skill, averaged the same way.
pub fn diversity_lower_bound(set: &SsmSet) -> f64 {
    let mut total = 0.0;
    for z in 0..set.n_skill() {
        let rho = set.occupancy(z);
        let w_z = set.p_z()[z];
        if w_z == 0.0 {
            continue;
        }
        for s2 in 0..set.n_states() {
            if rho[s2] == 0.0 {
                continue;
            }
            for s1 in 0..set.n_states() {
                if rho[s1] == 0.0 {
                    continue;
                }
                let own = set.ratio(z, s1, s2).max(MEASURE_FLOOR);
                let denom: f64 = 1.0
                    + (0..set.n_skill())
                        .map(|zp| set.ratio(zp, s1, s2).max(MEASURE_FLOOR))
                        .sum::<f64>();
                total += w_z * rho[s2] * rho[s1] * (own / denom).ln();
            }
        }
    }
    total
}
