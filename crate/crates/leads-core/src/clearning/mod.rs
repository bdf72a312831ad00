//! Contrastive successor-measure estimation.
//!
//! A classifier is trained to tell discounted-future states of a (state,
//! action, skill) triple apart from marginal states drawn across all
//! skills. At the optimum its logit is the log density ratio, so `exp(f)`
//! estimates the successor measure ratio the skill objective needs.

mod buffers;
mod measure;
mod train;

pub use buffers::{Anchor, SkillBuffers};
pub use measure::{m_bar, m_bar_batch, m_eval, policy_actions};
pub use train::{fit_onpolicy, refresh_offpolicy, sample_positive, FitStats, RefreshSettings};

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{ActionVec, Env, SkillPolicy, StateVec};
use crate::error::Result;
use crate::nn::checkpoint::{CkptReader, CkptWriter, KIND_CLASSIFIER};
use crate::nn::{Activation, DenseNet, PolicyModel};

/// Hidden widths of the classifier.
pub const CLASSIFIER_HIDDEN: [usize; 2] = [256, 128];

/// Fixed unit-norm embedding per skill, drawn once per run.
#[derive(Debug, Clone)]
pub struct SkillEmbedding {
    pub table: Array2<f64>,
}

impl SkillEmbedding {
    /// Rows are normalized Gaussian draws, re-drawn (bounded times) when
    /// they land within 0.1 of an earlier skill's embedding.
    pub fn new(n_skill: usize, z_dim: usize, rng: &mut impl Rng) -> Self {
        assert!(n_skill > 0 && z_dim > 0);
        let mut table = Array2::zeros((n_skill, z_dim));
        for z in 0..n_skill {
            for _attempt in 0..100 {
                let mut row: Array1<f64> =
                    Array1::from_shape_fn(z_dim, |_| StandardNormal.sample(rng));
                let norm = row.dot(&row).sqrt();
                if norm < 1e-12 {
                    continue;
                }
                row /= norm;
                let too_close = (0..z).any(|prev| {
                    let d = &row - &table.row(prev);
                    d.dot(&d).sqrt() < 0.1
                });
                table.row_mut(z).assign(&row);
                if !too_close {
                    break;
                }
            }
        }
        SkillEmbedding { table }
    }

    pub fn n_skill(&self) -> usize {
        self.table.nrows()
    }

    pub fn z_dim(&self) -> usize {
        self.table.ncols()
    }

    pub fn get(&self, z: usize) -> ArrayView1<'_, f64> {
        self.table.row(z)
    }
}

/// Layout of classifier input rows:
/// `[encode(s1) | action | encode(s2) | skill embedding]`.
#[derive(Debug, Clone, Copy)]
pub struct InputLayout {
    pub enc_dim: usize,
    pub action_dim: usize,
    pub z_dim: usize,
}

impl InputLayout {
    pub fn of(env: &Env, z_dim: usize) -> Self {
        InputLayout {
            enc_dim: env.encode_dim(),
            action_dim: env.action_dim(),
            z_dim,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.enc_dim + self.action_dim + self.z_dim
    }

    pub fn write(&self, row: &mut [f64], s1: &[f64], a: &[f64], s2: &[f64], z: &[f64]) {
        debug_assert_eq!(row.len(), self.dim());
        debug_assert_eq!(s1.len(), self.enc_dim);
        debug_assert_eq!(a.len(), self.action_dim);
        debug_assert_eq!(s2.len(), self.enc_dim);
        debug_assert_eq!(z.len(), self.z_dim);
        let (e, ad) = (self.enc_dim, self.action_dim);
        row[..e].copy_from_slice(s1);
        row[e..e + ad].copy_from_slice(a);
        row[e + ad..2 * e + ad].copy_from_slice(s2);
        row[2 * e + ad..].copy_from_slice(z);
    }
}

/// The measure classifier; its scalar output is a logit whose exponential
/// estimates the successor measure density ratio.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub net: DenseNet,
    pub layout: InputLayout,
}

impl ClassifierModel {
    pub fn new(layout: InputLayout, rng: &mut impl Rng) -> Self {
        Self::with_hidden(layout, &CLASSIFIER_HIDDEN, rng)
    }

    pub fn with_hidden(layout: InputLayout, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut dims = vec![layout.dim()];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Linear);
        ClassifierModel {
            net: DenseNet::new(&dims, &acts, rng),
            layout,
        }
    }

    /// Logits for a batch of assembled input rows.
    pub fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(x.ncols(), self.layout.dim());
        self.net.forward(x)
    }
}

/// Borrowing adapter that lets a policy plus embedding act as a rollout
/// policy.
pub struct SkillActor<'a> {
    pub policy: &'a PolicyModel,
    pub embedding: &'a SkillEmbedding,
}

/// Policy input row: `[encode(s) | skill embedding]`.
pub fn policy_input(env: &Env, embedding: &SkillEmbedding, s: &StateVec, z: usize) -> Array2<f64> {
    let enc = env.encode(s);
    let n = enc.len();
    let zv = embedding.get(z);
    let mut x = Array2::zeros((1, n + zv.len()));
    x.slice_mut(ndarray::s![0, ..n]).assign(&Array1::from_vec(enc));
    x.slice_mut(ndarray::s![0, n..]).assign(&zv);
    x
}

impl SkillPolicy for SkillActor<'_> {
    fn act(
        &self,
        env: &Env,
        s: &StateVec,
        skill: usize,
        rng: &mut dyn rand::RngCore,
    ) -> ActionVec {
        let x = policy_input(env, self.embedding, s, skill);
        let mut rng = rng;
        let a = self.policy.sample(&x, &mut rng);
        ActionVec(a.row(0).to_vec())
    }
}

/// Classifier checkpoint, embedding table included so reports can re-derive
/// measure values without the original run state.
pub fn save_classifier(
    path: &Path,
    classifier: &ClassifierModel,
    embedding: &SkillEmbedding,
) -> Result<()> {
    let mut w = CkptWriter::create(path, KIND_CLASSIFIER)?;
    w.dense(&classifier.net)?;
    w.u32(classifier.layout.enc_dim as u32)?;
    w.u32(classifier.layout.action_dim as u32)?;
    w.u32(classifier.layout.z_dim as u32)?;
    w.matrix(&embedding.table)?;
    w.finish()
}

pub fn load_classifier(path: &Path) -> Result<(ClassifierModel, SkillEmbedding)> {
    let mut r = CkptReader::open(path, KIND_CLASSIFIER)?;
    let net = r.dense()?;
    let layout = InputLayout {
        enc_dim: r.u32()? as usize,
        action_dim: r.u32()? as usize,
        z_dim: r.u32()? as usize,
    };
    let table = r.matrix()?;
    if layout.dim() != net.in_dim() || table.ncols() != layout.z_dim {
        return Err(r.corrupt("layout does not match the network"));
    }
    r.finish()?;
    Ok((ClassifierModel { net, layout }, SkillEmbedding { table }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, Stream};

    #[test]
    fn embeddings_are_unit_norm_and_separated() {
        let mut rng = derive(101, Stream::SkillEmbedding);
        let emb = SkillEmbedding::new(6, 20, &mut rng);
        for z in 0..6 {
            let r = emb.get(z);
            assert!((r.dot(&r).sqrt() - 1.0).abs() < 1e-12);
            for zp in 0..z {
                let d = &r.to_owned() - &emb.get(zp);
                assert!(d.dot(&d).sqrt() >= 0.1);
            }
        }
    }

    #[test]
    fn input_layout_places_sections_in_order() {
        let layout = InputLayout {
            enc_dim: 2,
            action_dim: 2,
            z_dim: 3,
        };
        let mut row = vec![0.0; layout.dim()];
        layout.write(
            &mut row,
            &[1.0, 2.0],
            &[3.0, 4.0],
            &[5.0, 6.0],
            &[7.0, 8.0, 9.0],
        );
        assert_eq!(row, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn classifier_checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("classifier.ckpt");
        let mut rng = derive(102, Stream::ClassifierInit);
        let layout = InputLayout {
            enc_dim: 2,
            action_dim: 2,
            z_dim: 4,
        };
        let cls = ClassifierModel::with_hidden(layout, &[16, 8], &mut rng);
        let emb = SkillEmbedding::new(3, 4, &mut rng);
        save_classifier(&path, &cls, &emb).unwrap();
        let (cls2, emb2) = load_classifier(&path).unwrap();
        assert_eq!(cls.net.flatten(), cls2.net.flatten());
        assert_eq!(emb.table, emb2.table);
        assert_eq!(cls2.layout.dim(), layout.dim());
    }

    #[test]
    fn actor_produces_in_range_actions() {
        let env = Env::by_name("easy").unwrap();
        let mut rng = derive(103, Stream::PolicyInit);
        let emb = SkillEmbedding::new(4, 8, &mut rng);
        let pol = PolicyModel::new(env.encode_dim() + 8, env.action_dim(), &mut rng);
        let actor = SkillActor {
            policy: &pol,
            embedding: &emb,
        };
        let s = env.s0();
        let mut rng2 = derive(103, Stream::Custom(1));
        let a = actor.act(&env, &s, 2, &mut rng2);
        assert_eq!(a.dim(), 2);
        assert!(a.0.iter().all(|v| v.abs() < 1.0));
    }
}
