//! Uncertainty-scored target selection.
//!
//! Each epoch every skill gets one Dirac target: the visited state whose
//! measure under that skill is large while the archived all-skill mass and
//! the other skills' measures at it are small. All measure values are
//! tabulated first (one classifier pass per prefix/skill pair), then the
//! score is pure table arithmetic — which is also what lets tests inject
//! exact tabular values in place of network output.

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::clearning::{m_bar_batch, policy_actions, ClassifierModel, SkillBuffers, SkillEmbedding};
use crate::env::{Env, StateVec};
use crate::nn::PolicyModel;
use crate::tabular::MEASURE_FLOOR;

use super::SsmArchive;

fn fln(x: f64) -> f64 {
    x.max(MEASURE_FLOOR).ln()
}

/// Measure values behind one selection round: rows are skills, columns are
/// candidate states.
pub struct MeasureTable {
    pub n_skill: usize,
    /// Candidate states, grouped by skill.
    pub states: Vec<StateVec>,
    /// Which slice of `states` belongs to each skill's buffer draw.
    pub spans: Vec<std::ops::Range<usize>>,
    /// Measure of each candidate under each skill, from the start state.
    pub from_start: Array2<f64>,
    /// Measure from each skill's own previous target.
    pub from_prev: Array2<f64>,
    /// Archived all-skill measure mass per candidate; 1 when the archive is
    /// empty.
    pub archive_mass: Vec<f64>,
}

/// Build the table for an explicit candidate list (used for selection and,
/// with grid centers as candidates, for score heatmaps). Action draws are
/// shared per (prefix, skill) pair: the same actions feed the current
/// classifier and every archived snapshot.
#[allow(clippy::too_many_arguments)]
pub fn measure_table_for_states(
    cls: &ClassifierModel,
    archive: &SsmArchive,
    policy: &PolicyModel,
    emb: &SkillEmbedding,
    env: &Env,
    states: Vec<StateVec>,
    spans: Vec<std::ops::Range<usize>>,
    prev_targets: &[StateVec],
    action_samples: usize,
    rng: &mut impl Rng,
) -> MeasureTable {
    let n_skill = emb.n_skill();
    assert_eq!(prev_targets.len(), n_skill);
    assert_eq!(spans.len(), n_skill);
    let s0 = env.s0();
    let refs: Vec<&StateVec> = states.iter().collect();

    let start_actions: Vec<Array2<f64>> = (0..n_skill)
        .map(|z| policy_actions(policy, env, emb, &s0, z, action_samples, rng))
        .collect();
    let prev_actions: Vec<Array2<f64>> = (0..n_skill)
        .map(|z| policy_actions(policy, env, emb, &prev_targets[z], z, action_samples, rng))
        .collect();

    let mut from_start = Array2::zeros((n_skill, states.len()));
    let mut from_prev = Array2::zeros((n_skill, states.len()));
    for z in 0..n_skill {
        let row = m_bar_batch(cls, env, emb, &s0, &start_actions[z], &refs, z);
        from_start.row_mut(z).assign(&ArrayView1::from(&row));
        let row = m_bar_batch(cls, env, emb, &prev_targets[z], &prev_actions[z], &refs, z);
        from_prev.row_mut(z).assign(&ArrayView1::from(&row));
    }

    let archive_mass = if archive.is_empty() {
        vec![1.0; states.len()]
    } else {
        let mut mass = vec![0.0; states.len()];
        for snap in archive.snapshots() {
            for z in 0..n_skill {
                let row = m_bar_batch(snap, env, emb, &s0, &start_actions[z], &refs, z);
                for (slot, v) in mass.iter_mut().zip(row) {
                    *slot += v;
                }
            }
        }
        mass
    };

    MeasureTable {
        n_skill,
        states,
        spans,
        from_start,
        from_prev,
        archive_mass,
    }
}

/// Build the selection table from the epoch's buffers: per skill, up to
/// `subsample` uniformly drawn visited states (everything when the buffer
/// is small enough, consuming no randomness), kept in storage order so ties
/// break toward earlier visits.
#[allow(clippy::too_many_arguments)]
pub fn measure_table_from_buffers(
    cls: &ClassifierModel,
    archive: &SsmArchive,
    policy: &PolicyModel,
    emb: &SkillEmbedding,
    env: &Env,
    buffers: &SkillBuffers,
    prev_targets: &[StateVec],
    subsample: usize,
    action_samples: usize,
    rng: &mut impl Rng,
) -> MeasureTable {
    let n_skill = emb.n_skill();
    let mut states = Vec::new();
    let mut spans = Vec::with_capacity(n_skill);
    for z in 0..n_skill {
        let all = buffers.states_of_skill(z);
        assert!(!all.is_empty(), "skill {z} has an empty buffer");
        let start = states.len();
        if all.len() <= subsample {
            states.extend(all.iter().map(|s| (*s).clone()));
        } else {
            let mut picks = rand::seq::index::sample(rng, all.len(), subsample).into_vec();
            picks.sort_unstable();
            states.extend(picks.into_iter().map(|i| all[i].clone()));
        }
        spans.push(start..states.len());
    }
    measure_table_for_states(
        cls,
        archive,
        policy,
        emb,
        env,
        states,
        spans,
        prev_targets,
        action_samples,
        rng,
    )
}

/// Selection score of candidate `c` for skill `z`: log measure from the
/// start over archived mass, plus for every other skill the log ratio of
/// own-to-other measure from the previous targets and from the start. All
/// measures are floored before the log.
pub fn uncertainty_from_table(t: &MeasureTable, c: usize, z: usize) -> f64 {
    let own_start = fln(t.from_start[[z, c]]);
    let mut u = own_start - fln(t.archive_mass[c]);
    for zp in 0..t.n_skill {
        if zp == z {
            continue;
        }
        u += fln(t.from_prev[[z, c]]) - fln(t.from_prev[[zp, c]]);
        u += own_start - fln(t.from_start[[zp, c]]);
    }
    u
}

/// Per-skill argmax of the score over that skill's candidates; ties break
/// toward the earliest candidate (lowest buffer index).
pub fn select_targets(t: &MeasureTable) -> Vec<StateVec> {
    (0..t.n_skill)
        .map(|z| {
            let span = t.spans[z].clone();
            assert!(!span.is_empty(), "skill {z} has no candidates");
            let mut best = span.start;
            let mut best_u = f64::NEG_INFINITY;
            for c in span {
                let u = uncertainty_from_table(t, c, z);
                if u > best_u {
                    best_u = u;
                    best = c;
                }
            }
            t.states[best].clone()
        })
        .collect()
}
