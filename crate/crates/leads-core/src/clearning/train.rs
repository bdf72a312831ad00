//! Classifier training: on-policy fitting and off-policy refresh.
//!
//! On-policy fitting is plain contrastive classification of
//! geometric-horizon future states against marginal states. The off-policy
//! refresh keeps the classifier aligned with a moving policy by mixing a
//! Monte-Carlo term with a temporal-difference term whose bootstrap weight
//! comes from a periodically copied target classifier.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::clearning::{policy_input, ClassifierModel, SkillBuffers, SkillEmbedding};
use crate::env::{Env, Episode, StateVec};
use crate::error::{Error, Result};
use crate::nn::{flatten_grads, AdamState, PolicyModel, Tape};

/// Draw a discounted-future state of episode `ep` after step `t`: offset
/// geometric in the discount, re-drawn while it overruns the episode,
/// falling back to the final state.
pub fn sample_positive<'a>(
    ep: &'a Episode,
    t: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> &'a StateVec {
    assert!(t < ep.len());
    let geo = Geometric::new(1.0 - gamma).expect("gamma must lie in [0, 1)");
    for _ in 0..16 {
        let delta = geo.sample(rng) as usize;
        if let Some(tr) = ep.transitions.get(t + delta) {
            return &tr.s_next;
        }
    }
    ep.final_state()
}

/// Loss trace of a fitting phase.
#[derive(Debug, Clone)]
pub struct FitStats {
    pub losses: Vec<f64>,
}

impl FitStats {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least one step")
    }
}

fn check_finite(value: f64, context: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericAbort {
            context,
            detail: format!("loss {value}"),
        })
    }
}

/// Contrastive fit of the classifier on the current buffers: positives are
/// discounted-future states of a uniformly drawn transition, negatives are
/// marginal states, both judged for the transition's own skill.
#[allow(clippy::too_many_arguments)]
pub fn fit_onpolicy(
    cls: &mut ClassifierModel,
    emb: &SkillEmbedding,
    env: &Env,
    buffers: &SkillBuffers,
    steps: usize,
    batch: usize,
    lr: f64,
    gamma: f64,
    adam: &mut AdamState,
    rng: &mut impl Rng,
) -> Result<FitStats> {
    assert!(batch > 0 && steps > 0);
    if buffers.n_transitions() == 0 {
        return Err(Error::EmptyBuffer("classifier fit"));
    }
    let layout = cls.layout;
    let mut losses = Vec::with_capacity(steps);
    // Labels: first half positives, second half negatives.
    let mut labels = Array2::zeros((2 * batch, 1));
    labels.slice_mut(ndarray::s![..batch, ..]).fill(1.0);

    for _ in 0..steps {
        let mut x = Array2::zeros((2 * batch, layout.dim()));
        for i in 0..batch {
            let anchor = buffers.sample_anchor(rng);
            let ep = buffers.episode(anchor);
            let tr = &ep.transitions[anchor.t];
            let s1_enc = env.encode(&tr.s);
            let z_emb = emb.get(anchor.skill);
            let pos = sample_positive(ep, anchor.t, gamma, rng);
            layout.write(
                x.row_mut(i).as_slice_mut().unwrap(),
                &s1_enc,
                tr.a.as_slice(),
                &env.encode(pos),
                z_emb.as_slice().unwrap(),
            );
            let neg = buffers.sample_state(rng);
            layout.write(
                x.row_mut(batch + i).as_slice_mut().unwrap(),
                &s1_enc,
                tr.a.as_slice(),
                &env.encode(neg),
                z_emb.as_slice().unwrap(),
            );
        }
        let mut tape = Tape::new();
        let vars = cls.net.bind(&mut tape, true);
        let xv = tape.constant(x);
        let f = cls.net.forward_tape(&mut tape, &vars, xv);
        // Cross entropy with logits: softplus(f) - y * f.
        let yv = tape.constant(labels.clone());
        let sp = tape.softplus_node(f);
        let yf = tape.mul(yv, f);
        let ce = tape.sub(sp, yf);
        let loss = tape.mean_all(ce);
        let loss_val = tape.scalar(loss);
        check_finite(loss_val, "classifier fit")?;
        let grads = tape.backward(loss);
        let g = flatten_grads(&grads, &vars, &tape);
        let mut flat = cls.net.flatten();
        adam.step(&mut flat, &g, lr)?;
        cls.net.assign(&flat);
        losses.push(loss_val);
    }
    Ok(FitStats { losses })
}

/// Knobs of the off-policy refresh.
#[derive(Debug, Clone, Copy)]
pub struct RefreshSettings {
    pub gamma: f64,
    /// Mix between the Monte-Carlo positive and the TD pair.
    pub mix_lambda: f64,
    /// Cap on the bootstrap importance weight.
    pub weight_clip: f64,
    pub batch: usize,
    pub lr: f64,
}

/// One off-policy refresh step. Positives mix the stored Monte-Carlo future
/// with a TD pair (the actual next state, plus a marginal state weighted by
/// the target classifier under a fresh policy action); negatives get the
/// matching total weight so the two classes stay balanced.
#[allow(clippy::too_many_arguments)]
pub fn refresh_offpolicy(
    cls: &mut ClassifierModel,
    target: &ClassifierModel,
    policy: &PolicyModel,
    emb: &SkillEmbedding,
    env: &Env,
    buffers: &SkillBuffers,
    settings: &RefreshSettings,
    adam: &mut AdamState,
    rng: &mut impl Rng,
) -> Result<f64> {
    let RefreshSettings {
        gamma,
        mix_lambda: lambda,
        weight_clip,
        batch,
        lr,
    } = *settings;
    assert!(batch > 0);
    if buffers.n_transitions() == 0 {
        return Err(Error::EmptyBuffer("classifier refresh"));
    }
    let layout = cls.layout;
    let mut x_next = Array2::zeros((batch, layout.dim()));
    let mut x_boot = Array2::zeros((batch, layout.dim()));
    let mut x_mc = Array2::zeros((batch, layout.dim()));
    let mut x_neg = Array2::zeros((batch, layout.dim()));
    let mut x_target = Array2::zeros((batch, layout.dim()));

    for i in 0..batch {
        let anchor = buffers.sample_anchor(rng);
        let ep = buffers.episode(anchor);
        let tr = &ep.transitions[anchor.t];
        let z = anchor.skill;
        let s_enc = env.encode(&tr.s);
        let next_enc = env.encode(&tr.s_next);
        let z_emb = emb.get(z);
        // Fresh on-policy action at the next state, for the bootstrap.
        let a_next = policy.sample(&policy_input(env, emb, &tr.s_next, z), rng);
        let s_boot = env.encode(buffers.sample_state(rng));
        let s_negative = env.encode(buffers.sample_state(rng));
        let s_mc = env.encode(sample_positive(ep, anchor.t, gamma, rng));

        let ze = z_emb.as_slice().unwrap();
        let a = tr.a.as_slice();
        layout.write(x_next.row_mut(i).as_slice_mut().unwrap(), &s_enc, a, &next_enc, ze);
        layout.write(x_boot.row_mut(i).as_slice_mut().unwrap(), &s_enc, a, &s_boot, ze);
        layout.write(x_mc.row_mut(i).as_slice_mut().unwrap(), &s_enc, a, &s_mc, ze);
        layout.write(x_neg.row_mut(i).as_slice_mut().unwrap(), &s_enc, a, &s_negative, ze);
        layout.write(
            x_target.row_mut(i).as_slice_mut().unwrap(),
            &next_enc,
            a_next.row(0).as_slice().unwrap(),
            &s_boot,
            ze,
        );
    }

    // Bootstrap weights from the frozen target classifier.
    let w = target
        .logits(&x_target)
        .mapv(|f| f.exp().clamp(0.0, weight_clip));
    let lmix = w.mapv(|wi| lambda + (1.0 - lambda) * ((1.0 - gamma) + gamma * wi));

    let mut tape = Tape::new();
    let vars = cls.net.bind(&mut tape, true);
    let fwd = |tape: &mut Tape, x: Array2<f64>| {
        let xv = tape.constant(x);
        cls.net.forward_tape(tape, &vars, xv)
    };
    let f_next = fwd(&mut tape, x_next);
    let f_boot = fwd(&mut tape, x_boot);
    let f_mc = fwd(&mut tape, x_mc);
    let f_neg = fwd(&mut tape, x_neg);

    let sp_not = |tape: &mut Tape, f: crate::nn::Var| {
        let neg = tape.affine(f, -1.0, 0.0);
        tape.softplus_node(neg)
    };
    let t_next = sp_not(&mut tape, f_next);
    let t_boot = sp_not(&mut tape, f_boot);
    let t_mc = sp_not(&mut tape, f_mc);
    let t_neg = tape.softplus_node(f_neg);

    let wv = tape.constant(w);
    let lmixv = tape.constant(lmix);
    let mc_part = tape.affine(t_mc, lambda, 0.0);
    let next_part = tape.affine(t_next, (1.0 - lambda) * (1.0 - gamma), 0.0);
    let boot_weighted = tape.mul(wv, t_boot);
    let boot_part = tape.affine(boot_weighted, (1.0 - lambda) * gamma, 0.0);
    let neg_part = tape.mul(lmixv, t_neg);
    let pos = tape.add(mc_part, next_part);
    let pos = tape.add(pos, boot_part);
    let total = tape.add(pos, neg_part);
    let loss = tape.mean_all(total);
    let loss_val = tape.scalar(loss);
    check_finite(loss_val, "classifier refresh")?;
    let grads = tape.backward(loss);
    let g = flatten_grads(&grads, &vars, &tape);
    let mut flat = cls.net.flatten();
    adam.step(&mut flat, &g, lr)?;
    cls.net.assign(&flat);
    Ok(loss_val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearning::{m_eval, InputLayout};
    use crate::env::rollout;
    use crate::rng::{derive, Stream};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Deterministic maze episodes: skill 0 walks right, skill 1 left.
    fn drifting_buffers(env: &Env, n_each: usize) -> SkillBuffers {
        struct Fixed(f64);
        impl crate::env::SkillPolicy for Fixed {
            fn act(
                &self,
                _env: &Env,
                _s: &StateVec,
                _skill: usize,
                _rng: &mut dyn rand::RngCore,
            ) -> crate::env::ActionVec {
                crate::env::ActionVec(vec![self.0, 0.0])
            }
        }
        let mut buffers = SkillBuffers::new(2);
        let mut rng = derive(131, Stream::Custom(13));
        for _ in 0..n_each {
            for (z, dir) in [(0usize, 1.0), (1usize, -1.0)] {
                let pol = Fixed(dir);
                let ep = rollout(env, &pol, z, env.horizon(), &mut rng).unwrap();
                buffers.push_episode(ep);
            }
        }
        buffers
    }

    #[test]
    fn positive_offsets_follow_the_discount_geometric() {
        // Long episode, anchor at the start: offsets should match the
        // geometric law with success probability 1 - gamma.
        let env = Env::by_name("arm").unwrap();
        struct Zero;
        impl crate::env::SkillPolicy for Zero {
            fn act(
                &self,
                _e: &Env,
                _s: &StateVec,
                _z: usize,
                _r: &mut dyn rand::RngCore,
            ) -> crate::env::ActionVec {
                crate::env::ActionVec(vec![0.31, -0.17])
            }
        }
        let mut rng = derive(132, Stream::Custom(13));
        let ep = rollout(&env, &Zero, 0, 50, &mut rng).unwrap();
        // Tag states by step so offsets are recoverable: use s, whose first
        // angle grows monotonically under constant positive acceleration.
        let gamma = 0.8;
        let n = 20_000;
        let bins = 12usize;
        let mut counts = vec![0usize; bins + 1];
        for _ in 0..n {
            let s2 = sample_positive(&ep, 0, gamma, &mut rng);
            let offset = ep
                .transitions
                .iter()
                .position(|tr| tr.s_next == *s2)
                .unwrap();
            counts[offset.min(bins)] += 1;
        }
        // Chi-squared against the geometric pmf, tail pooled. The episode is
        // long enough (50 >> 12) that truncation inside the bins is nil.
        let mut chi2 = 0.0;
        let mut tail = 1.0;
        for (k, count) in counts.iter().enumerate().take(bins) {
            let p = (1.0 - gamma) * gamma.powi(k as i32);
            tail -= p;
            let expect = p * n as f64;
            chi2 += (*count as f64 - expect).powi(2) / expect;
        }
        let expect_tail = tail * n as f64;
        chi2 += (counts[bins] as f64 - expect_tail).powi(2) / expect_tail;
        let crit = ChiSquared::new(bins as f64).unwrap().inverse_cdf(0.999);
        assert!(chi2 < crit, "chi2 {chi2} exceeds {crit}");
    }

    #[test]
    fn zero_discount_returns_the_immediate_successor() {
        let env = Env::by_name("easy").unwrap();
        let buffers = drifting_buffers(&env, 1);
        let ep = &buffers.episodes_of(0)[0];
        let mut rng = derive(133, Stream::Custom(13));
        for t in 0..ep.len() {
            let s2 = sample_positive(ep, t, 0.0, &mut rng);
            assert_eq!(*s2, ep.transitions[t].s_next);
        }
    }

    #[test]
    fn short_episode_falls_back_to_the_final_state() {
        let env = Env::by_name("easy").unwrap();
        let buffers = drifting_buffers(&env, 1);
        let ep = &buffers.episodes_of(1)[0];
        let last = ep.len() - 1;
        let mut rng = derive(134, Stream::Custom(13));
        for _ in 0..50 {
            let s2 = sample_positive(ep, last, 0.99, &mut rng);
            assert_eq!(*s2, *ep.final_state());
        }
    }

    #[test]
    fn fitting_separates_opposed_skills() {
        let env = Env::by_name("easy").unwrap();
        let mut rng = derive(135, Stream::Custom(13));
        let emb = SkillEmbedding::new(2, 6, &mut rng);
        let layout = InputLayout::of(&env, 6);
        let mut cls = ClassifierModel::with_hidden(layout, &[32], &mut rng);
        let buffers = drifting_buffers(&env, 4);
        let mut adam = AdamState::new(cls.net.n_params());
        let stats = fit_onpolicy(
            &mut cls, &emb, &env, &buffers, 400, 64, 3e-3, 0.9, &mut adam, &mut rng,
        )
        .unwrap();
        assert!(stats.final_loss() < stats.losses[0], "no learning progress");
        // The right half of the square belongs to skill 0's future, the
        // left half to skill 1's.
        let s0 = env.s0();
        let right = StateVec(vec![0.3, -0.75]);
        let left = StateVec(vec![-0.97, -0.75]);
        let a = [0.5, 0.0];
        let m_right_0 = m_eval(&cls, &env, &emb, &s0, &a, &right, 0);
        let m_right_1 = m_eval(&cls, &env, &emb, &s0, &a, &right, 1);
        let m_left_0 = m_eval(&cls, &env, &emb, &s0, &a, &left, 0);
        let m_left_1 = m_eval(&cls, &env, &emb, &s0, &a, &left, 1);
        assert!(
            m_right_0 > 2.0 * m_right_1,
            "right target not attributed to skill 0: {m_right_0} vs {m_right_1}"
        );
        assert!(
            m_left_1 > 2.0 * m_left_0,
            "left target not attributed to skill 1: {m_left_1} vs {m_left_0}"
        );
    }

    #[test]
    fn refresh_moves_parameters_and_stays_finite() {
        let env = Env::by_name("easy").unwrap();
        let mut rng = derive(136, Stream::Custom(13));
        let emb = SkillEmbedding::new(2, 6, &mut rng);
        let layout = InputLayout::of(&env, 6);
        let mut cls = ClassifierModel::with_hidden(layout, &[32], &mut rng);
        let target = cls.clone();
        let policy = PolicyModel::with_hidden(env.encode_dim() + 6, 2, &[16], &mut rng);
        let buffers = drifting_buffers(&env, 2);
        let mut adam = AdamState::new(cls.net.n_params());
        let before = cls.net.flatten();
        let settings = RefreshSettings {
            gamma: 0.95,
            mix_lambda: 0.5,
            weight_clip: 20.0,
            batch: 32,
            lr: 5e-4,
        };
        let loss = refresh_offpolicy(
            &mut cls, &target, &policy, &emb, &env, &buffers, &settings, &mut adam, &mut rng,
        )
        .unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        assert_ne!(before, cls.net.flatten());
    }

    #[test]
    fn zero_discount_refresh_ignores_the_bootstrap_weight() {
        // With gamma = 0 the bootstrap term has zero coefficient and the
        // negative weight collapses to one, so the clip level cannot matter.
        let env = Env::by_name("easy").unwrap();
        let mut setup_rng = derive(137, Stream::Custom(13));
        let emb = SkillEmbedding::new(2, 6, &mut setup_rng);
        let layout = InputLayout::of(&env, 6);
        let cls0 = ClassifierModel::with_hidden(layout, &[16], &mut setup_rng);
        let policy = PolicyModel::with_hidden(env.encode_dim() + 6, 2, &[8], &mut setup_rng);
        let buffers = drifting_buffers(&env, 2);
        let mut outcomes = Vec::new();
        for clip in [0.0, 20.0] {
            let mut cls = cls0.clone();
            let target = cls0.clone();
            let mut adam = AdamState::new(cls.net.n_params());
            let mut rng = derive(900, Stream::Custom(13));
            let settings = RefreshSettings {
                gamma: 0.0,
                mix_lambda: 0.5,
                weight_clip: clip,
                batch: 16,
                lr: 5e-4,
            };
            refresh_offpolicy(
                &mut cls, &target, &policy, &emb, &env, &buffers, &settings, &mut adam, &mut rng,
            )
            .unwrap();
            outcomes.push(cls.net.flatten());
        }
        assert_eq!(outcomes[0], outcomes[1]);
    }

    #[test]
    fn non_finite_network_aborts_without_an_update() {
        let env = Env::by_name("easy").unwrap();
        let mut rng = derive(138, Stream::Custom(13));
        let emb = SkillEmbedding::new(2, 6, &mut rng);
        let layout = InputLayout::of(&env, 6);
        let mut cls = ClassifierModel::with_hidden(layout, &[8], &mut rng);
        cls.net.layers[0].w[[0, 0]] = f64::INFINITY;
        let frozen = cls.net.flatten();
        let buffers = drifting_buffers(&env, 1);
        let mut adam = AdamState::new(cls.net.n_params());
        let err = fit_onpolicy(
            &mut cls, &emb, &env, &buffers, 3, 8, 1e-3, 0.9, &mut adam, &mut rng,
        );
        assert!(matches!(err, Err(Error::NumericAbort { .. })));
        assert_eq!(cls.net.flatten(), frozen);
    }
}
