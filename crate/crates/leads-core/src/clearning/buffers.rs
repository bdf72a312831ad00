//! Per-skill episode storage with uniform anchor and marginal-state
//! sampling.
//!
//! Anchors are transitions drawn uniformly across all skills; marginal
//! states are drawn uniformly over every stored state (initial states
//! included), which defines the negative distribution the classifier
//! contrasts against.

use rand::Rng;

use crate::env::{Episode, StateVec};

/// A sampled transition: which skill, episode, and step it came from.
#[derive(Debug, Clone, Copy)]
pub struct Anchor {
    pub skill: usize,
    pub episode: usize,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct SkillBuffers {
    episodes: Vec<Vec<Episode>>,
    /// (skill, episode, t) for every stored transition.
    transition_index: Vec<(u32, u32, u32)>,
    /// (skill, episode, position) for every stored state; position 0 is the
    /// episode's initial state, position t+1 the successor of step t.
    state_index: Vec<(u32, u32, u32)>,
}

impl SkillBuffers {
    pub fn new(n_skill: usize) -> Self {
        SkillBuffers {
            episodes: vec![Vec::new(); n_skill],
            transition_index: Vec::new(),
            state_index: Vec::new(),
        }
    }

    pub fn n_skill(&self) -> usize {
        self.episodes.len()
    }

    /// Drop all stored episodes, keeping the skill count.
    pub fn reset(&mut self) {
        for eps in &mut self.episodes {
            eps.clear();
        }
        self.transition_index.clear();
        self.state_index.clear();
    }

    pub fn push_episode(&mut self, ep: Episode) {
        assert!(ep.skill < self.n_skill(), "episode skill out of range");
        assert!(!ep.is_empty(), "refusing to store an empty episode");
        let z = ep.skill as u32;
        let e = self.episodes[ep.skill].len() as u32;
        self.state_index.push((z, e, 0));
        for t in 0..ep.len() {
            self.transition_index.push((z, e, t as u32));
            self.state_index.push((z, e, t as u32 + 1));
        }
        self.episodes[ep.skill].push(ep);
    }

    pub fn n_transitions(&self) -> usize {
        self.transition_index.len()
    }

    pub fn n_states(&self) -> usize {
        self.state_index.len()
    }

    pub fn episodes_of(&self, skill: usize) -> &[Episode] {
        &self.episodes[skill]
    }

    pub fn episode(&self, anchor: Anchor) -> &Episode {
        &self.episodes[anchor.skill][anchor.episode]
    }

    /// Uniform transition across every skill.
    pub fn sample_anchor(&self, rng: &mut impl Rng) -> Anchor {
        assert!(!self.transition_index.is_empty(), "no transitions stored");
        let (z, e, t) = self.transition_index[rng.random_range(0..self.transition_index.len())];
        Anchor {
            skill: z as usize,
            episode: e as usize,
            t: t as usize,
        }
    }

    /// Uniform state across every skill; the marginal distribution.
    pub fn sample_state(&self, rng: &mut impl Rng) -> &StateVec {
        assert!(!self.state_index.is_empty(), "no states stored");
        let (z, e, pos) = self.state_index[rng.random_range(0..self.state_index.len())];
        self.state_at(z as usize, e as usize, pos as usize)
    }

    fn state_at(&self, skill: usize, episode: usize, pos: usize) -> &StateVec {
        let ep = &self.episodes[skill][episode];
        if pos == 0 {
            &ep.transitions[0].s
        } else {
            &ep.transitions[pos - 1].s_next
        }
    }

    /// Number of states one skill stored, initial states included.
    pub fn n_states_of(&self, skill: usize) -> usize {
        self.episodes[skill].iter().map(|ep| ep.len() + 1).sum()
    }

    /// Uniform draw over one skill's stored states.
    pub fn sample_state_of(&self, skill: usize, rng: &mut impl Rng) -> &StateVec {
        let n = self.n_states_of(skill);
        assert!(n > 0, "skill buffer is empty");
        let mut j = rng.random_range(0..n);
        for (e, ep) in self.episodes[skill].iter().enumerate() {
            let len = ep.len() + 1;
            if j < len {
                return self.state_at(skill, e, j);
            }
            j -= len;
        }
        unreachable!()
    }

    /// All states one skill visited, in storage order (episode by episode,
    /// step by step). The enumeration index is the tie-break order for
    /// target selection.
    pub fn states_of_skill(&self, skill: usize) -> Vec<&StateVec> {
        let mut out = Vec::new();
        for ep in &self.episodes[skill] {
            out.extend(ep.states());
        }
        out
    }
}
