//! The skill-discovery training loop.
//!
//! Each epoch runs four phases in order: collect fresh on-policy episodes
//! (the only phase that touches the environment), fit the measure
//! classifier on them, pick one target state per skill by its uncertainty
//! score, and ascend the actor objective with an off-policy classifier
//! refresh after every actor step. A bounded archive of classifier
//! snapshots from past epochs feeds the selection score's exploration
//! term.

pub mod objective;
pub mod select;

pub use objective::{
    actor_score_and_grad, actor_step, assemble_actor_batch, ActorBatch, ActorOutcome,
};
pub use select::{
    measure_table_for_states, measure_table_from_buffers, select_targets, uncertainty_from_table,
    MeasureTable,
};

use std::collections::VecDeque;

use crate::clearning::{
    fit_onpolicy, refresh_offpolicy, ClassifierModel, InputLayout, RefreshSettings, SkillActor,
    SkillBuffers, SkillEmbedding,
};
use crate::config::{HyperParams, ObjectiveMode};
use crate::env::{rollout, Env, StateVec};
use crate::error::Result;
use crate::nn::{AdamState, PolicyModel};
use crate::rng::{derive, Stream};

/// Bounded deque of past classifier snapshots, oldest first.
pub struct SsmArchive {
    capacity: usize,
    entries: VecDeque<(u64, ClassifierModel)>,
}

impl SsmArchive {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "archive capacity must be positive");
        SsmArchive {
            capacity,
            entries: VecDeque::new(),
        }
    }

    /// Append a snapshot, evicting the oldest beyond capacity.
    pub fn push(&mut self, epoch: u64, snapshot: ClassifierModel) {
        self.entries.push_back((epoch, snapshot));
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &(u64, ClassifierModel)> {
        self.entries.iter()
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &ClassifierModel> {
        self.entries.iter().map(|(_, c)| c)
    }
}

/// Current and previous per-skill target states.
#[derive(Debug, Clone)]
pub struct SkillTargets {
    pub current: Vec<StateVec>,
    pub previous: Vec<StateVec>,
}

impl SkillTargets {
    /// Before any selection both generations sit at the start state.
    pub fn at_start(env: &Env, n_skill: usize) -> Self {
        let s0 = env.s0();
        SkillTargets {
            current: vec![s0.clone(); n_skill],
            previous: vec![s0; n_skill],
        }
    }

    /// Install a fresh selection, retiring the current generation.
    pub fn advance(&mut self, picks: Vec<StateVec>) {
        self.previous = std::mem::replace(&mut self.current, picks);
    }
}

/// What one epoch did, in numbers.
#[derive(Debug, Clone)]
pub struct EpochReport {
    pub epoch: u64,
    /// Environment steps taken this epoch (collection only).
    pub steps_collected: usize,
    /// Cumulative environment interactions after this epoch.
    pub interactions: u64,
    /// Selected targets, absent for the ablation objective.
    pub targets: Option<Vec<StateVec>>,
    /// Mean actor objective over the epoch's actor steps (NaN if none ran).
    pub objective: f64,
    /// Mean policy entropy estimate over the actor steps (NaN if none ran).
    pub entropy: f64,
    /// Final on-policy classifier fit loss.
    pub fit_loss: f64,
    /// Mean off-policy refresh loss (NaN if no refresh ran).
    pub refresh_loss: f64,
    /// Fraction of reachable cells visited so far; filled in by the run
    /// driver, which owns the coverage grid.
    pub coverage: Option<f64>,
}

/// Everything a run mutates across epochs.
pub struct LeadsState {
    pub seed: u64,
    /// Last completed epoch; 0 before training.
    pub epoch: u64,
    pub policy: PolicyModel,
    pub classifier: ClassifierModel,
    /// Slow copy used for refresh bootstrap weights.
    pub target_classifier: ClassifierModel,
    pub embedding: SkillEmbedding,
    /// The most recent epoch's episodes (on-policy; rebuilt every epoch).
    pub buffers: SkillBuffers,
    pub archive: SsmArchive,
    pub targets: SkillTargets,
    pub policy_adam: AdamState,
    pub classifier_adam: AdamState,
    /// Global refresh-step counter driving the target-copy cadence.
    pub refresh_steps: u64,
}

/// Fresh models and empty buffers for a run.
pub fn init_state(env: &Env, hp: &HyperParams, seed: u64) -> LeadsState {
    let mut prng = derive(seed, Stream::PolicyInit);
    let policy = PolicyModel::new(env.encode_dim() + hp.z_dim, env.action_dim(), &mut prng);
    let mut crng = derive(seed, Stream::ClassifierInit);
    let classifier = ClassifierModel::new(InputLayout::of(env, hp.z_dim), &mut crng);
    let mut erng = derive(seed, Stream::SkillEmbedding);
    let embedding = SkillEmbedding::new(hp.n_skill, hp.z_dim, &mut erng);
    let policy_adam = AdamState::new(policy.n_params());
    let classifier_adam = AdamState::new(classifier.net.n_params());
    LeadsState {
        seed,
        epoch: 0,
        target_classifier: classifier.clone(),
        policy,
        classifier,
        embedding,
        buffers: SkillBuffers::new(hp.n_skill),
        archive: SsmArchive::new(hp.n_archive),
        targets: SkillTargets::at_start(env, hp.n_skill),
        policy_adam,
        classifier_adam,
        refresh_steps: 0,
    }
}

/// The skill of the i-th episode collected in `epoch`: round-robin with a
/// rotating offset, so every skill banks episodes every epoch.
pub fn skill_for_episode(i: usize, epoch: u64, hp: &HyperParams) -> usize {
    (i + (epoch as usize) * hp.n_episode) % hp.n_skill
}

/// Run one epoch: collect, fit, select, improve. Returns the epoch's
/// report; on error the state may hold a partially updated model, and the
/// run driver falls back to its last on-disk checkpoint.
pub fn train_epoch(
    state: &mut LeadsState,
    env: &Env,
    hp: &HyperParams,
    mode: ObjectiveMode,
) -> Result<EpochReport> {
    let epoch = state.epoch + 1;

    // Phase 1 — collect. The single phase allowed to touch the
    // environment; everything after runs off the buffers.
    let before = env.interactions();
    let mut rng = derive(state.seed, Stream::Collect(epoch));
    let mut buffers = SkillBuffers::new(hp.n_skill);
    let actor = SkillActor {
        policy: &state.policy,
        embedding: &state.embedding,
    };
    let horizon = env.horizon();
    for i in 0..hp.n_episode {
        let z = skill_for_episode(i, epoch, hp);
        let ep = rollout(env, &actor, z, horizon, &mut rng)?;
        buffers.push_episode(ep);
    }
    state.buffers = buffers;
    let steps_collected = state.buffers.n_transitions();
    let after_collect = env.interactions();
    assert_eq!(
        after_collect - before,
        steps_collected as u64,
        "collection accounting mismatch"
    );
    assert!(steps_collected <= hp.n_episode * horizon);

    // Phase 2 — fit the classifier to this epoch's episodes.
    let mut rng = derive(state.seed, Stream::Fit(epoch));
    let fit = fit_onpolicy(
        &mut state.classifier,
        &state.embedding,
        env,
        &state.buffers,
        hp.n_sgd_clearning,
        hp.batch_clearning,
        hp.alpha_clearning,
        hp.gamma,
        &mut state.classifier_adam,
        &mut rng,
    )?;
    let snapshot = state.classifier.clone();

    // Phase 3 — pick targets. The archive holds only snapshots of prior
    // epochs while scoring, so this epoch's snapshot joins it afterwards;
    // at epoch 1 the archive is empty and the exploration denominator is
    // one. The ablation keeps no targets and no archive.
    let targets = match mode {
        ObjectiveMode::Leads => {
            let mut rng = derive(state.seed, Stream::Select(epoch));
            let table = measure_table_from_buffers(
                &state.classifier,
                &state.archive,
                &state.policy,
                &state.embedding,
                env,
                &state.buffers,
                &state.targets.current,
                hp.subsample,
                hp.action_samples,
                &mut rng,
            );
            let picks = select_targets(&table);
            state.targets.advance(picks.clone());
            state.archive.push(epoch, snapshot.clone());
            Some(picks)
        }
        ObjectiveMode::DiaynAblation => None,
    };

    // Phase 4 — improve the policy; each actor step reads a frozen
    // classifier copy, then one refresh step updates the live classifier.
    let mut rng = derive(state.seed, Stream::Actor(epoch));
    let mut objectives = Vec::with_capacity(hp.n_sgd_actor);
    let mut entropies = Vec::with_capacity(hp.n_sgd_actor);
    let mut refresh_losses = Vec::with_capacity(hp.n_sgd_actor);
    let refresh = RefreshSettings {
        gamma: hp.gamma,
        mix_lambda: hp.lambda_clearning,
        weight_clip: hp.weight_clip,
        batch: hp.batch_clearning,
        lr: hp.alpha_clearning,
    };
    for _ in 0..hp.n_sgd_actor {
        let batch = assemble_actor_batch(
            &state.buffers,
            targets.as_deref(),
            hp.n_skill,
            hp.batch_loss,
            &mut rng,
        );
        let frozen = state.classifier.clone();
        let out = actor_step(
            &mut state.policy,
            &frozen,
            &state.embedding,
            env,
            &batch,
            mode,
            hp.lambda_h,
            hp.alpha_policy,
            &mut state.policy_adam,
            &mut rng,
        )?;
        objectives.push(out.objective);
        entropies.push(out.entropy);
        if state.refresh_steps % hp.target_refresh as u64 == 0 {
            state.target_classifier = state.classifier.clone();
        }
        let loss = refresh_offpolicy(
            &mut state.classifier,
            &state.target_classifier,
            &state.policy,
            &state.embedding,
            env,
            &state.buffers,
            &refresh,
            &mut state.classifier_adam,
            &mut rng,
        )?;
        refresh_losses.push(loss);
        state.refresh_steps += 1;
    }
    assert_eq!(
        env.interactions(),
        after_collect,
        "phases after collection must not step the environment"
    );

    state.epoch = epoch;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(EpochReport {
        epoch,
        steps_collected,
        interactions: after_collect,
        targets,
        objective: mean(&objectives),
        entropy: mean(&entropies),
        fit_loss: fit.final_loss(),
        refresh_loss: mean(&refresh_losses),
        coverage: None,
    })
}
