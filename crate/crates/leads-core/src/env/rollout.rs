//! Episode collection.

use crate::env::{ActionVec, Env, SkillPolicy, StateVec};
use crate::error::Result;

/// One transition, tagged with the skill that produced it.
#[derive(Debug, Clone)]
pub struct Transition {
    pub skill: usize,
    pub step: usize,
    pub s: StateVec,
    pub a: ActionVec,
    pub s_next: StateVec,
    pub terminated: bool,
}

/// A rollout of one skill from the environment's start state.
#[derive(Debug, Clone)]
pub struct Episode {
    pub skill: usize,
    pub transitions: Vec<Transition>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// All states in visit order: the initial state followed by every
    /// successor.
    pub fn states(&self) -> impl Iterator<Item = &StateVec> {
        self.transitions
            .first()
            .map(|t| &t.s)
            .into_iter()
            .chain(self.transitions.iter().map(|t| &t.s_next))
    }

    /// The state the episode ended in.
    pub fn final_state(&self) -> &StateVec {
        &self
            .transitions
            .last()
            .expect("episode has at least one transition")
            .s_next
    }
}

/// Roll one episode of at most `horizon` steps, stopping early on
/// termination.
pub fn rollout(
    env: &Env,
    policy: &dyn SkillPolicy,
    skill: usize,
    horizon: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<Episode> {
    assert!(horizon > 0, "rollout needs a positive horizon");
    let mut transitions = Vec::with_capacity(horizon);
    let mut s = env.s0();
    for step in 0..horizon {
        let a = policy.act(env, &s, skill, rng);
        let (s_next, terminated) = env.step(&s, &a)?;
        transitions.push(Transition {
            skill,
            step,
            s: s.clone(),
            a,
            s_next: s_next.clone(),
            terminated,
        });
        if terminated {
            break;
        }
        s = s_next;
    }
    Ok(Episode { skill, transitions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, Stream};

    /// Constant-action policy for tests.
    pub struct Constant(pub [f64; 2]);

    impl SkillPolicy for Constant {
        fn act(
            &self,
            _env: &Env,
            _s: &StateVec,
            _skill: usize,
            _rng: &mut dyn rand::RngCore,
        ) -> ActionVec {
            ActionVec(vec![self.0[0], self.0[1]])
        }
    }

    #[test]
    fn full_horizon_when_nothing_terminates() {
        let env = Env::by_name("arm").unwrap();
        let mut rng = derive(0, Stream::Custom(0));
        let ep = rollout(&env, &Constant([0.3, -0.2]), 2, 13, &mut rng).unwrap();
        assert_eq!(ep.len(), 13);
        assert_eq!(ep.states().count(), 14);
        assert!(ep.transitions.iter().all(|t| !t.terminated && t.skill == 2));
        assert_eq!(env.interactions(), 13);
        // Transitions chain: each s_next is the next transition's s.
        for w in ep.transitions.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
            assert_eq!(w[1].step, w[0].step + 1);
        }
    }

    #[test]
    fn wall_contact_cuts_the_episode_short() {
        let env = Env::by_name("easy").unwrap();
        let mut rng = derive(0, Stream::Custom(0));
        // Full speed left from (-0.75, -0.75): the boundary is ~0.24 away at
        // 0.1 per step, so contact comes on the third step.
        let ep = rollout(&env, &Constant([-1.0, 0.0]), 0, 50, &mut rng).unwrap();
        assert_eq!(ep.len(), 3);
        assert!(ep.transitions.last().unwrap().terminated);
        assert!(ep.transitions[..2].iter().all(|t| !t.terminated));
        assert!((ep.final_state().0[0] - (-1.0 + 0.01)).abs() < 1e-12);
    }
}
