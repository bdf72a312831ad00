//! Random MDP and policy instances for oracle validation.
//!
//! Transition and policy rows are Dirichlet(1) draws (normalized unit
//! exponentials), so every entry is strictly positive and the induced
//! occupancies have full support.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::tabular::FiniteMdp;

fn dirichlet_row(rng: &mut impl Rng, out: &mut [f64]) {
    let mut sum = 0.0;
    for v in out.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        *v = e;
        sum += e;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
}

/// A dense random MDP starting from state 0.
pub fn random_mdp(rng: &mut impl Rng, n_states: usize, n_actions: usize, gamma: f64) -> FiniteMdp {
    let mut p = Array3::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            dirichlet_row(rng, p.slice_mut(ndarray::s![s, a, ..]).as_slice_mut().unwrap());
        }
    }
    FiniteMdp {
        n_states,
        n_actions,
        p,
        gamma,
        s0: 0,
    }
}

/// A random stochastic policy for `mdp`.
pub fn random_policy(rng: &mut impl Rng, mdp: &FiniteMdp) -> Array2<f64> {
    let mut pi = Array2::zeros((mdp.n_states, mdp.n_actions));
    for s in 0..mdp.n_states {
        dirichlet_row(rng, pi.row_mut(s).as_slice_mut().unwrap());
    }
    pi
}

/// One random policy per skill.
pub fn random_policies(rng: &mut impl Rng, mdp: &FiniteMdp, n_skill: usize) -> Vec<Array2<f64>> {
    (0..n_skill).map(|_| random_policy(rng, mdp)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, Stream};

    #[test]
    fn instances_validate_and_have_full_support() {
        let mut rng = derive(41, Stream::Custom(4));
        let mdp = random_mdp(&mut rng, 7, 3, 0.9);
        mdp.validate().unwrap();
        assert!(mdp.p.iter().all(|v| *v > 0.0));
        let pi = random_policy(&mut rng, &mdp);
        mdp.validate_policy(&pi).unwrap();
        assert!(pi.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn generation_is_deterministic_per_stream() {
        let mut a = derive(42, Stream::Custom(4));
        let mut b = derive(42, Stream::Custom(4));
        let m1 = random_mdp(&mut a, 5, 2, 0.8);
        let m2 = random_mdp(&mut b, 5, 2, 0.8);
        assert_eq!(m1.p, m2.p);
    }
}
