//! Exact target-selection score and the KL decomposition behind it.
//!
//! Target selection prefers states whose measure under the current skill is
//! high but poorly explained by the archived measure snapshots and by the
//! other skills, evaluated both from the start state and from each skill's
//! previous target.

use crate::tabular::{SsmSet, MEASURE_FLOOR};

fn fln(x: f64) -> f64 {
    x.max(MEASURE_FLOOR).ln()
}

/// Uncertainty of state `s` for skill `z` given the current measure set, the
/// archived snapshots, and each skill's previous target state. An empty
/// archive contributes a unit denominator.
pub fn exact_uncertainty(
    current: &SsmSet,
    archive: &[SsmSet],
    prev_targets: &[usize],
    s: usize,
    z: usize,
) -> f64 {
    let n_skill = current.n_skill();
    assert_eq!(prev_targets.len(), n_skill);
    let s0 = current.s0();
    let own_from_start = fln(current.ratio(z, s0, s));
    let archive_mass = if archive.is_empty() {
        1.0
    } else {
        archive
            .iter()
            .map(|snap| {
                (0..snap.n_skill())
                    .map(|zp| snap.ratio(zp, s0, s))
                    .sum::<f64>()
            })
            .sum::<f64>()
    };
    let mut u = own_from_start - fln(archive_mass);
    for zp in 0..n_skill {
        if zp == z {
            continue;
        }
        u += fln(current.ratio(z, prev_targets[z], s))
            - fln(current.ratio(zp, prev_targets[zp], s));
        u += own_from_start - fln(current.ratio(zp, s0, s));
    }
    u
}

/// Exhaustive argmax of the uncertainty over each skill's candidate list;
/// ties break toward the earliest candidate.
pub fn brute_force_targets(
    current: &SsmSet,
    archive: &[SsmSet],
    prev_targets: &[usize],
    candidates: &[Vec<usize>],
) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .map(|(z, cands)| {
            assert!(!cands.is_empty(), "skill {z} has no candidate states");
            let mut best = cands[0];
            let mut best_u = f64::NEG_INFINITY;
            for &s in cands {
                let u = exact_uncertainty(current, archive, prev_targets, s, z);
                if u > best_u {
                    best_u = u;
                    best = s;
                }
            }
            best
        })
        .collect()
}

/// Result of comparing the occupancy-space KL divergence against the same
/// quantity resummed from raw measure matrices.
#[derive(Debug, Clone)]
pub struct KlCheck {
    /// KL computed from normalized occupancy vectors.
    pub lhs: f64,
    /// KL computed from unnormalized matrix entries, entropy and
    /// cross-entropy accumulated in separate passes.
    pub rhs: f64,
    /// States with current mass but zero archive-mixture mass, skipped on
    /// both routes.
    pub excluded: Vec<usize>,
}

impl KlCheck {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// KL divergence of skill `z`'s current occupancy from the uniform mixture
/// of all archived skill occupancies, computed along two independent
/// summation routes.
pub fn kl_decomposition_check(current: &SsmSet, z: usize, archive: &[SsmSet]) -> KlCheck {
    assert!(!archive.is_empty(), "KL check needs at least one archived set");
    let n = current.n_states();
    let k = archive.len() as f64;

    // Route one: probability vectors.
    let rho = current.occupancy(z);
    let mut mixture = vec![0.0; n];
    for snap in archive {
        for zp in 0..snap.n_skill() {
            let w = snap.p_z()[zp] / k;
            let occ = snap.occupancy(zp);
            for s in 0..n {
                mixture[s] += w * occ[s];
            }
        }
    }
    let mut excluded = Vec::new();
    let mut lhs = 0.0;
    for s in 0..n {
        if rho[s] > 0.0 {
            if mixture[s] > 0.0 {
                lhs += rho[s] * (rho[s] / mixture[s]).ln();
            } else {
                excluded.push(s);
            }
        }
    }

    // Route two: unnormalized matrices, KL as entropy plus cross-entropy.
    let s0 = current.s0();
    let cur = current.ssm(z);
    let scale = |m: &crate::tabular::SsmMatrix, s1: usize, s2: usize| {
        let raw = m.m[[s1, s2]];
        if m.normalized {
            raw
        } else {
            (1.0 - m.gamma) * raw
        }
    };
    let mass = |s: usize| -> f64 {
        archive
            .iter()
            .map(|snap| {
                (0..snap.n_skill())
                    .map(|zp| snap.p_z()[zp] * scale(snap.ssm(zp), snap.s0(), s))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / k
    };
    let mut neg_entropy = 0.0;
    for s in 0..n {
        let a = scale(cur, s0, s);
        if a > 0.0 && !excluded.contains(&s) {
            neg_entropy += a * a.ln();
        }
    }
    let mut cross = 0.0;
    for s in 0..n {
        let a = scale(cur, s0, s);
        if a > 0.0 && !excluded.contains(&s) {
            cross += a * mass(s).ln();
        }
    }
    KlCheck {
        lhs,
        rhs: neg_entropy - cross,
        excluded,
    }
}
