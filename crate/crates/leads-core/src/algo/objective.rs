//! The actor objective and its ascent step.
//!
//! Each batch element carries a skill, a visited state, and a target state.
//! The contrastive objective scores the target's measure under the
//! element's own skill against one plus the summed measure under every
//! skill, with one reparameterized action per skill; the ablation objective
//! keeps only the numerator. Classifier parameters stay frozen here — the
//! off-policy refresh is their only writer during policy improvement.

use ndarray::Array2;
use rand::Rng;

use crate::clearning::{ClassifierModel, SkillBuffers, SkillEmbedding};
use crate::config::ObjectiveMode;
use crate::env::{Env, StateVec};
use crate::error::{Error, Result};
use crate::nn::{
    flatten_grads, sample_noise, squashed_logp, squashed_logp_tape, AdamState, PolicyModel,
    PolicyVars, Tape, Var,
};

/// One gradient step's worth of (skill, state, target) triples.
pub struct ActorBatch {
    pub skills: Vec<usize>,
    pub s1: Vec<StateVec>,
    pub s2: Vec<StateVec>,
}

impl ActorBatch {
    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }
}

/// Draw a batch: skills uniform, states uniform from the skill's buffer,
/// targets either the skill's selected target or (ablation) another uniform
/// buffer state.
pub fn assemble_actor_batch(
    buffers: &SkillBuffers,
    targets: Option<&[StateVec]>,
    n_skill: usize,
    batch: usize,
    rng: &mut impl Rng,
) -> ActorBatch {
    let mut skills = Vec::with_capacity(batch);
    let mut s1 = Vec::with_capacity(batch);
    let mut s2 = Vec::with_capacity(batch);
    for _ in 0..batch {
        let z = rng.random_range(0..n_skill);
        skills.push(z);
        s1.push(buffers.sample_state_of(z, rng).clone());
        s2.push(match targets {
            Some(t) => t[z].clone(),
            None => buffers.sample_state_of(z, rng).clone(),
        });
    }
    ActorBatch { skills, s1, s2 }
}

/// Objective and entropy values of one ascent step.
#[derive(Debug, Clone, Copy)]
pub struct ActorOutcome {
    pub objective: f64,
    pub entropy: f64,
}

/// Handles into a built actor graph.
pub(crate) struct ActorGraph {
    pub pvars: PolicyVars,
    pub score: Var,
    pub objective: Var,
    pub entropy: Option<Var>,
    /// Per action path: (pre-squash action, mean, log-std) handles; one
    /// path per skill for the contrastive objective, a single mixed-skill
    /// path for the ablation.
    pub paths: Vec<(Var, Var, Var)>,
}

fn encode_rows(env: &Env, states: &[StateVec]) -> Array2<f64> {
    let dim = env.encode_dim();
    let mut out = Array2::zeros((states.len(), dim));
    for (i, s) in states.iter().enumerate() {
        out.row_mut(i)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&env.encode(s));
    }
    out
}

fn one_hot(skills: &[usize], n_skill: usize) -> Array2<f64> {
    let mut m = Array2::zeros((skills.len(), n_skill));
    for (i, &z) in skills.iter().enumerate() {
        m[[i, z]] = 1.0;
    }
    m
}

fn embedding_rows(emb: &SkillEmbedding, skills: &[usize]) -> Array2<f64> {
    let mut m = Array2::zeros((skills.len(), emb.z_dim()));
    for (i, &z) in skills.iter().enumerate() {
        m.row_mut(i).assign(&emb.get(z));
    }
    m
}

/// Build the score graph. `noises` holds one standard-normal matrix per
/// action path (`n_skill` of them for the contrastive mode, one for the
/// ablation); keeping them as inputs makes the score a deterministic
/// function of the policy parameters, which the finite-difference tests
/// rely on.
#[allow(clippy::too_many_arguments)]
pub(crate) fn build_actor_graph(
    tape: &mut Tape,
    policy: &PolicyModel,
    cls: &ClassifierModel,
    emb: &SkillEmbedding,
    env: &Env,
    batch: &ActorBatch,
    noises: &[Array2<f64>],
    mode: ObjectiveMode,
    lambda_h: f64,
) -> ActorGraph {
    let b = batch.len();
    assert!(b > 0);
    let n_skill = emb.n_skill();
    let s1v = tape.constant(encode_rows(env, &batch.s1));
    let s2v = tape.constant(encode_rows(env, &batch.s2));
    let pvars = policy.bind(tape, true);
    let cvars = cls.net.bind(tape, false);

    let mut paths = Vec::new();
    let (objective, entropy_lp) = match mode {
        ObjectiveMode::Leads => {
            assert_eq!(noises.len(), n_skill);
            let mut f_cols = Vec::with_capacity(n_skill);
            let mut logp_cols = Vec::with_capacity(n_skill);
            let mut m_sum: Option<Var> = None;
            for z in 0..n_skill {
                let zmat = embedding_rows(emb, &vec![z; b]);
                let zv = tape.constant(zmat);
                let xp = tape.concat_cols(&[s1v, zv]);
                let (mu, logstd) = policy.forward_tape(tape, &pvars, xp);
                let nv = tape.constant(noises[z].clone());
                let sigma = tape.exp(logstd);
                let scaled = tape.mul(sigma, nv);
                let pre = tape.add(mu, scaled);
                let a = tape.tanh(pre);
                let xc = tape.concat_cols(&[s1v, a, s2v, zv]);
                let f = cls.net.forward_tape(tape, &cvars, xc);
                let m = tape.exp(f);
                m_sum = Some(match m_sum {
                    None => m,
                    Some(s) => tape.add(s, m),
                });
                f_cols.push(f);
                if lambda_h != 0.0 {
                    logp_cols.push(squashed_logp_tape(tape, pre, logstd, &noises[z]));
                }
                paths.push((pre, mu, logstd));
            }
            let maskv = tape.constant(one_hot(&batch.skills, n_skill));
            let fmat = tape.concat_cols(&f_cols);
            let masked = tape.mul(maskv, fmat);
            let num_logit = tape.sum_cols(masked);
            let den = tape.affine(m_sum.expect("at least one skill"), 1.0, 1.0);
            let ln_den = tape.ln(den);
            let per_elem = tape.sub(num_logit, ln_den);
            let objective = tape.mean_all(per_elem);
            let entropy_lp = if lambda_h != 0.0 {
                let lpmat = tape.concat_cols(&logp_cols);
                let sel = tape.mul(maskv, lpmat);
                Some(tape.sum_cols(sel))
            } else {
                None
            };
            (objective, entropy_lp)
        }
        ObjectiveMode::DiaynAblation => {
            assert_eq!(noises.len(), 1);
            let zv = tape.constant(embedding_rows(emb, &batch.skills));
            let xp = tape.concat_cols(&[s1v, zv]);
            let (mu, logstd) = policy.forward_tape(tape, &pvars, xp);
            let nv = tape.constant(noises[0].clone());
            let sigma = tape.exp(logstd);
            let scaled = tape.mul(sigma, nv);
            let pre = tape.add(mu, scaled);
            let a = tape.tanh(pre);
            let xc = tape.concat_cols(&[s1v, a, s2v, zv]);
            let f = cls.net.forward_tape(tape, &cvars, xc);
            let objective = tape.mean_all(f);
            let entropy_lp = if lambda_h != 0.0 {
                Some(squashed_logp_tape(tape, pre, logstd, &noises[0]))
            } else {
                None
            };
            paths.push((pre, mu, logstd));
            (objective, entropy_lp)
        }
    };

    let (score, entropy) = match entropy_lp {
        Some(lp) => {
            let mean_lp = tape.mean_all(lp);
            let h = tape.affine(mean_lp, -1.0, 0.0);
            let bonus = tape.affine(h, lambda_h, 0.0);
            (tape.add(objective, bonus), Some(h))
        }
        None => (objective, None),
    };

    ActorGraph {
        pvars,
        score,
        objective,
        entropy,
        paths,
    }
}

/// Entropy estimate recomputed from stored head values, used when the
/// entropy carries no weight and therefore never entered the graph.
fn entropy_report(tape: &Tape, graph: &ActorGraph, batch: &ActorBatch) -> f64 {
    let b = batch.len();
    let mut total = 0.0;
    for i in 0..b {
        let path = if graph.paths.len() == 1 {
            0
        } else {
            batch.skills[i]
        };
        let (pre, mu, logstd) = graph.paths[path];
        total += squashed_logp(
            tape.value(pre).row(i).to_slice().unwrap(),
            tape.value(mu).row(i).to_slice().unwrap(),
            tape.value(logstd).row(i).to_slice().unwrap(),
        );
    }
    -total / b as f64
}

/// Score and flat parameter gradient for one batch under fixed
/// exploration noise: the pure function the ascent step climbs, exposed so
/// external checks can difference it against the analytic gradient.
/// `noises` holds one matrix per skill in contrastive mode and exactly one
/// in ablation mode.
#[allow(clippy::too_many_arguments)]
pub fn actor_score_and_grad(
    policy: &PolicyModel,
    cls: &ClassifierModel,
    emb: &SkillEmbedding,
    env: &Env,
    batch: &ActorBatch,
    noises: &[Array2<f64>],
    mode: ObjectiveMode,
    lambda_h: f64,
) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    let graph = build_actor_graph(&mut tape, policy, cls, emb, env, batch, noises, mode, lambda_h);
    let score = tape.scalar(graph.score);
    let grads = tape.backward(graph.score);
    let vars = graph.pvars.all();
    (score, flatten_grads(&grads, &vars, &tape))
}

/// One ascent step on `objective + lambda_h * entropy`. Gradients flow only
/// through the sampled actions; the classifier is read, never written.
#[allow(clippy::too_many_arguments)]
pub fn actor_step(
    policy: &mut PolicyModel,
    cls: &ClassifierModel,
    emb: &SkillEmbedding,
    env: &Env,
    batch: &ActorBatch,
    mode: ObjectiveMode,
    lambda_h: f64,
    lr: f64,
    adam: &mut AdamState,
    rng: &mut impl Rng,
) -> Result<ActorOutcome> {
    let n_paths = match mode {
        ObjectiveMode::Leads => emb.n_skill(),
        ObjectiveMode::DiaynAblation => 1,
    };
    let noises: Vec<Array2<f64>> = (0..n_paths)
        .map(|_| sample_noise(batch.len(), env.action_dim(), rng))
        .collect();
    let mut tape = Tape::new();
    let graph = build_actor_graph(&mut tape, policy, cls, emb, env, batch, &noises, mode, lambda_h);
    let objective = tape.scalar(graph.objective);
    let score = tape.scalar(graph.score);
    if !score.is_finite() {
        return Err(Error::NumericAbort {
            context: "actor step",
            detail: format!("score {score}"),
        });
    }
    // The contrastive integrand is log(m / (1 + sum of m)) < 0 always.
    if mode == ObjectiveMode::Leads {
        assert!(
            objective < 0.0,
            "contrastive objective must be negative, got {objective}"
        );
    }
    let entropy = match graph.entropy {
        Some(h) => tape.scalar(h),
        None => entropy_report(&tape, &graph, batch),
    };
    let grads = tape.backward(graph.score);
    let vars = graph.pvars.all();
    let ascent: Vec<f64> = flatten_grads(&grads, &vars, &tape)
        .into_iter()
        .map(|g| -g)
        .collect();
    let mut flat = policy.flatten();
    adam.step(&mut flat, &ascent, lr)?;
    policy.assign(&flat);
    Ok(ActorOutcome { objective, entropy })
}
