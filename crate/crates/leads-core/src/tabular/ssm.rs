//! Closed-form and series-expansion successor state measures.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tabular::{FiniteMdp, SsmMatrix};

/// Exact unnormalized successor measure `(I - gamma P_pi)^{-1}` for one
/// skill policy.
pub fn exact_ssm(mdp: &FiniteMdp, policy: &Array2<f64>) -> Result<SsmMatrix> {
    mdp.validate_policy(policy)?;
    let n = mdp.n_states;
    let ppi = mdp.transition_matrix(policy);
    let a = DMatrix::from_fn(n, n, |i, j| {
        let eye = if i == j { 1.0 } else { 0.0 };
        eye - mdp.gamma * ppi[[i, j]]
    });
    let inv = a.try_inverse().ok_or_else(|| Error::NumericAbort {
        context: "successor measure inversion",
        detail: "I - gamma P is singular".into(),
    })?;
    let m = Array2::from_shape_fn((n, n), |(i, j)| inv[(i, j)]);
    Ok(SsmMatrix {
        m,
        gamma: mdp.gamma,
        normalized: false,
    })
}

/// Number of terms needed for the geometric tail past `t` to fall below
/// `tol`: the truncation error of the series is bounded by
/// `gamma^(T+1) / (1 - gamma)`.
pub fn series_length(gamma: f64, tol: f64) -> usize {
    if gamma == 0.0 {
        return 0;
    }
    let t = ((tol * (1.0 - gamma)).ln() / gamma.ln()).ceil();
    t.max(0.0) as usize
}

/// Independent check of `exact_ssm`: sum the discounted power series of the
/// policy's transition matrix until the tail is below `tol`.
pub fn power_series_ssm(mdp: &FiniteMdp, policy: &Array2<f64>, tol: f64) -> Result<SsmMatrix> {
    mdp.validate_policy(policy)?;
    let n = mdp.n_states;
    let ppi = mdp.transition_matrix(policy);
    let mut acc = Array2::eye(n);
    let mut term = Array2::eye(n);
    for _ in 0..series_length(mdp.gamma, tol) {
        term = term.dot(&ppi) * mdp.gamma;
        acc += &term;
    }
    Ok(SsmMatrix {
        m: acc,
        gamma: mdp.gamma,
        normalized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, Stream};
    use crate::tabular::{random_mdp, random_policy};

    /// Two-state chain with a known closed form: from either state, move to
    /// the other with probability q, stay otherwise.
    fn symmetric_chain(q: f64, gamma: f64) -> (FiniteMdp, Array2<f64>) {
        let mut p = ndarray::Array3::zeros((2, 1, 2));
        p[[0, 0, 0]] = 1.0 - q;
        p[[0, 0, 1]] = q;
        p[[1, 0, 1]] = 1.0 - q;
        p[[1, 0, 0]] = q;
        let mdp = FiniteMdp {
            n_states: 2,
            n_actions: 1,
            p,
            gamma,
            s0: 0,
        };
        (mdp, Array2::ones((2, 1)))
    }

    #[test]
    fn two_state_chain_matches_hand_solution() {
        // With P = [[1-q, q], [q, 1-q]], eigenvalues 1 and 1-2q give
        // M = 1/2 [ 1/(1-g) + 1/(1-g(1-2q)), 1/(1-g) - 1/(1-g(1-2q)); sym ].
        let (q, g) = (0.3, 0.9);
        let (mdp, pi) = symmetric_chain(q, g);
        let m = exact_ssm(&mdp, &pi).unwrap();
        let fast = 1.0 / (1.0 - g);
        let slow = 1.0 / (1.0 - g * (1.0 - 2.0 * q));
        assert!((m.m[[0, 0]] - 0.5 * (fast + slow)).abs() < 1e-12);
        assert!((m.m[[0, 1]] - 0.5 * (fast - slow)).abs() < 1e-12);
        assert!((m.m[[1, 0]] - m.m[[0, 1]]).abs() < 1e-14);
    }

    #[test]
    fn rows_sum_to_discounted_mass() {
        let mut rng = derive(11, Stream::Custom(1));
        for gamma in [0.5, 0.9, 0.95] {
            let mdp = random_mdp(&mut rng, 12, 3, gamma);
            let pi = random_policy(&mut rng, &mdp);
            let m = exact_ssm(&mdp, &pi).unwrap();
            assert!(m.row_sum_deviation() < 1e-9, "gamma {gamma}");
            assert!(m.to_normalized().row_sum_deviation() < 1e-9);
        }
    }

    #[test]
    fn zero_gamma_gives_identity() {
        let mut rng = derive(12, Stream::Custom(1));
        let mdp = random_mdp(&mut rng, 6, 2, 0.0);
        let pi = random_policy(&mut rng, &mdp);
        let m = exact_ssm(&mdp, &pi).unwrap();
        let eye: Array2<f64> = Array2::eye(6);
        let diff = (&m.m - &eye).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        assert_eq!(series_length(0.0, 1e-11), 0);
    }

    #[test]
    fn series_agrees_with_inverse() {
        let mut rng = derive(13, Stream::Custom(1));
        let mdp = random_mdp(&mut rng, 10, 4, 0.95);
        let pi = random_policy(&mut rng, &mdp);
        let a = exact_ssm(&mdp, &pi).unwrap();
        let b = power_series_ssm(&mdp, &pi, 1e-12).unwrap();
        let diff = (&a.m - &b.m).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn normalization_roundtrip() {
        let (mdp, pi) = symmetric_chain(0.2, 0.8);
        let m = exact_ssm(&mdp, &pi).unwrap();
        let back = m.to_normalized().to_unnormalized();
        let diff = (&m.m - &back.m).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
        let occ = m.occupancy(0);
        assert!((occ.sum() - 1.0).abs() < 1e-12);
    }
}
