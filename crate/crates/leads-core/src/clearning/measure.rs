//! Measure-ratio evaluation through the classifier.

use ndarray::Array2;
use rand::Rng;

use crate::clearning::{policy_input, ClassifierModel, SkillEmbedding};
use crate::env::{Env, StateVec};
use crate::nn::{sample_noise, PolicyModel};

/// Point estimate `exp(f(s1, a, s2, z))` of the measure ratio.
pub fn m_eval(
    cls: &ClassifierModel,
    env: &Env,
    emb: &SkillEmbedding,
    s1: &StateVec,
    a: &[f64],
    s2: &StateVec,
    z: usize,
) -> f64 {
    let layout = cls.layout;
    let mut x = Array2::zeros((1, layout.dim()));
    layout.write(
        x.row_mut(0).as_slice_mut().unwrap(),
        &env.encode(s1),
        a,
        &env.encode(s2),
        emb.get(z).as_slice().unwrap(),
    );
    cls.logits(&x)[[0, 0]].exp()
}

/// `k` reparameterized policy actions at one state. The heads are evaluated
/// once; only the noise differs between samples.
pub fn policy_actions(
    policy: &PolicyModel,
    env: &Env,
    emb: &SkillEmbedding,
    s: &StateVec,
    z: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Array2<f64> {
    let x = policy_input(env, emb, s, z);
    let (mu, logstd) = policy.heads(&x);
    let noise = sample_noise(k, policy.action_dim(), rng);
    let mut actions = Array2::zeros((k, policy.action_dim()));
    for i in 0..k {
        for d in 0..policy.action_dim() {
            let pre = mu[[0, d]] + logstd[[0, d]].exp() * noise[[i, d]];
            actions[[i, d]] = pre.tanh();
        }
    }
    actions
}

/// Action-marginalized measure estimate: mean of `exp(f)` over `k` policy
/// actions at `s1`.
pub fn m_bar(
    cls: &ClassifierModel,
    policy: &PolicyModel,
    env: &Env,
    emb: &SkillEmbedding,
    s1: &StateVec,
    s2: &StateVec,
    z: usize,
    k: usize,
    rng: &mut impl Rng,
) -> f64 {
    let actions = policy_actions(policy, env, emb, s1, z, k, rng);
    let values = m_bar_batch(cls, env, emb, s1, &actions, &[s2], z);
    values[0]
}

/// `m_bar` against many target states sharing one start state and one
/// pre-drawn action set; one classifier pass for the whole block.
pub fn m_bar_batch(
    cls: &ClassifierModel,
    env: &Env,
    emb: &SkillEmbedding,
    s1: &StateVec,
    actions: &Array2<f64>,
    targets: &[&StateVec],
    z: usize,
) -> Vec<f64> {
    let layout = cls.layout;
    let k = actions.nrows();
    assert!(k > 0 && !targets.is_empty());
    let s1_enc = env.encode(s1);
    let z_emb = emb.get(z);
    let mut x = Array2::zeros((targets.len() * k, layout.dim()));
    for (ti, s2) in targets.iter().enumerate() {
        let s2_enc = env.encode(s2);
        for ai in 0..k {
            layout.write(
                x.row_mut(ti * k + ai).as_slice_mut().unwrap(),
                &s1_enc,
                actions.row(ai).as_slice().unwrap(),
                &s2_enc,
                z_emb.as_slice().unwrap(),
            );
        }
    }
    let logits = cls.logits(&x);
    targets
        .iter()
        .enumerate()
        .map(|(ti, _)| {
            (0..k)
                .map(|ai| logits[[ti * k + ai, 0]].exp())
                .sum::<f64>()
                / k as f64
        })
        .collect()
}
