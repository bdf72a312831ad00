//! Squashed-Gaussian skill policy.
//!
//! The trunk maps an encoded state (with the skill embedding appended) to a
//! hidden vector; a tanh head produces the bounded pre-squash mean, a linear
//! head the clamped log standard deviation. Actions are
//! `tanh(mu + sigma * noise)`, keeping them strictly inside the action box
//! while staying reparameterizable.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::nn::dense::{Activation, DenseNet, Layer};
use crate::nn::tape::{softplus, Tape, Var};

pub const LOGSTD_MIN: f64 = -5.0;
pub const LOGSTD_MAX: f64 = 2.0;

/// Hidden widths of the policy trunk.
pub const POLICY_HIDDEN: [usize; 2] = [256, 256];

#[derive(Debug, Clone)]
pub struct PolicyModel {
    pub trunk: DenseNet,
    pub mean: Layer,
    pub logstd: Layer,
}

/// Tape handles for all policy parameters.
pub struct PolicyVars {
    pub trunk: Vec<Var>,
    pub mean: [Var; 2],
    pub logstd: [Var; 2],
}

impl PolicyVars {
    pub fn all(&self) -> Vec<Var> {
        let mut v = self.trunk.clone();
        v.extend(self.mean);
        v.extend(self.logstd);
        v
    }
}

impl PolicyModel {
    pub fn new(input_dim: usize, action_dim: usize, rng: &mut impl Rng) -> Self {
        Self::with_hidden(input_dim, action_dim, &POLICY_HIDDEN, rng)
    }

    /// Narrower trunks are used by gradient-check tests.
    pub fn with_hidden(
        input_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Self {
        assert!(!hidden.is_empty());
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        let acts = vec![Activation::Relu; hidden.len()];
        let trunk = DenseNet::new(&dims, &acts, rng);
        let mean = Layer::new(*hidden.last().unwrap(), action_dim, Activation::Tanh, rng);
        let logstd = Layer::new(*hidden.last().unwrap(), action_dim, Activation::Linear, rng);
        PolicyModel {
            trunk,
            mean,
            logstd,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.mean.out_dim()
    }

    /// Bounded mean and clamped log-std for a batch of inputs.
    pub fn heads(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let h = self.trunk.forward(x);
        let mu = self.mean.forward(&h);
        let logstd = self
            .logstd
            .forward(&h)
            .mapv(|v| v.clamp(LOGSTD_MIN, LOGSTD_MAX));
        (mu, logstd)
    }

    /// Deterministic reparameterized actions for given noise.
    pub fn actions_for_noise(&self, x: &Array2<f64>, noise: &Array2<f64>) -> Array2<f64> {
        let (mu, logstd) = self.heads(x);
        assert_eq!(noise.shape(), mu.shape());
        let pre = &mu + &(logstd.mapv(f64::exp) * noise);
        pre.mapv(f64::tanh)
    }

    /// Sample one action per input row.
    pub fn sample(&self, x: &Array2<f64>, rng: &mut impl Rng) -> Array2<f64> {
        let noise = sample_noise(x.nrows(), self.action_dim(), rng);
        self.actions_for_noise(x, &noise)
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> PolicyVars {
        PolicyVars {
            trunk: self.trunk.bind(tape, trainable),
            mean: self.mean.bind(tape, trainable),
            logstd: self.logstd.bind(tape, trainable),
        }
    }

    /// Taped version of `heads`.
    pub fn forward_tape(&self, tape: &mut Tape, vars: &PolicyVars, x: Var) -> (Var, Var) {
        let h = self.trunk.forward_tape(tape, &vars.trunk, x);
        let mu = self.mean.forward_tape(tape, vars.mean, h);
        let raw = self.logstd.forward_tape(tape, vars.logstd, h);
        let logstd = tape.clamp(raw, LOGSTD_MIN, LOGSTD_MAX);
        (mu, logstd)
    }

    pub fn n_params(&self) -> usize {
        self.trunk.n_params() + self.mean.n_params() + self.logstd.n_params()
    }

    pub fn param_refs(&self) -> Vec<&Array2<f64>> {
        let mut refs = self.trunk.param_refs();
        refs.extend([&self.mean.w, &self.mean.b, &self.logstd.w, &self.logstd.b]);
        refs
    }

    pub fn param_refs_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut refs = self.trunk.param_refs_mut();
        refs.extend([
            &mut self.mean.w,
            &mut self.mean.b,
            &mut self.logstd.w,
            &mut self.logstd.b,
        ]);
        refs
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        crate::nn::dense::flatten_into(&mut out, &self.param_refs());
        out
    }

    pub fn assign(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        crate::nn::dense::assign_from_flat(flat, &mut self.param_refs_mut());
    }
}

/// Standard normal noise matrix with a deterministic draw order.
pub fn sample_noise(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// `log(1 - tanh(u)^2)` evaluated without cancellation; exactly zero at
/// `u = 0`.
pub fn tanh_log_jacobian(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Log density of the squashed action `tanh(pre)` when `pre` is normal with
/// the given mean and log standard deviation, summed over dimensions.
pub fn squashed_logp(pre: &[f64], mu: &[f64], logstd: &[f64]) -> f64 {
    let mut lp = 0.0;
    for d in 0..pre.len() {
        let sigma = logstd[d].exp();
        let xi = (pre[d] - mu[d]) / sigma;
        lp += -0.5 * xi * xi - logstd[d] - HALF_LN_2PI;
        lp -= tanh_log_jacobian(pre[d]);
    }
    lp
}

/// Tape version of `squashed_logp` for reparameterized rows
/// `pre = mu + exp(logstd) * noise`: the normalized residual is `noise`
/// itself, a constant, so the Gaussian part differentiates only through
/// `logstd` and the squash correction through `pre`. Returns one log
/// density per row.
pub fn squashed_logp_tape(tape: &mut Tape, pre: Var, logstd: Var, noise: &Array2<f64>) -> Var {
    let gauss_const = tape.constant(noise.mapv(|e| -0.5 * e * e - HALF_LN_2PI));
    let gauss = tape.sub(gauss_const, logstd);
    // log(1 - tanh(pre)^2) = 2 (ln 2 - pre - softplus(-2 pre)).
    let n2 = tape.affine(pre, -2.0, 0.0);
    let sp = tape.softplus_node(n2);
    let inner = tape.add(pre, sp);
    let jac = tape.affine(inner, -2.0, 2.0 * std::f64::consts::LN_2);
    let per_dim = tape.sub(gauss, jac);
    tape.sum_cols(per_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, Stream};

    #[test]
    fn heads_respect_their_bounds() {
        let mut rng = derive(81, Stream::Custom(8));
        let mut pol = PolicyModel::new(6, 2, &mut rng);
        // Blow up the log-std weights so the clamp must engage.
        for v in pol.logstd.w.iter_mut() {
            *v *= 1e4;
        }
        let x = Array2::from_shape_fn((32, 6), |_| rng.random_range(-1.0..1.0));
        let (mu, logstd) = pol.heads(&x);
        assert!(mu.iter().all(|v| v.abs() <= 1.0));
        assert!(logstd.iter().all(|v| (LOGSTD_MIN..=LOGSTD_MAX).contains(v)));
        assert!(logstd.iter().any(|v| *v == LOGSTD_MIN || *v == LOGSTD_MAX));
    }

    #[test]
    fn actions_stay_strictly_inside_the_box() {
        let mut rng = derive(82, Stream::Custom(8));
        let pol = PolicyModel::new(4, 2, &mut rng);
        let x = Array2::from_shape_fn((64, 4), |_| rng.random_range(-1.0..1.0));
        let a = pol.sample(&x, &mut rng);
        assert!(a.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn zero_noise_returns_the_squashed_mean() {
        let mut rng = derive(83, Stream::Custom(8));
        let pol = PolicyModel::new(4, 2, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        let (mu, _) = pol.heads(&x);
        let a = pol.actions_for_noise(&x, &Array2::zeros((3, 2)));
        let diff = (&a - &mu.mapv(f64::tanh)).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn taped_heads_agree_with_plain() {
        let mut rng = derive(84, Stream::Custom(8));
        let pol = PolicyModel::new(5, 2, &mut rng);
        let x = Array2::from_shape_fn((7, 5), |_| rng.random_range(-1.0..1.0));
        let (mu, logstd) = pol.heads(&x);
        let mut tape = Tape::new();
        let vars = pol.bind(&mut tape, true);
        let xv = tape.constant(x);
        let (mu_t, logstd_t) = pol.forward_tape(&mut tape, &vars, xv);
        assert!((&mu - tape.value(mu_t)).iter().all(|d| d.abs() < 1e-14));
        assert!((&logstd - tape.value(logstd_t)).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn flatten_assign_roundtrip_covers_all_heads() {
        let mut rng = derive(85, Stream::Custom(8));
        let mut pol = PolicyModel::with_hidden(3, 2, &[8], &mut rng);
        assert_eq!(pol.n_params(), (3 * 8 + 8) + 2 * (8 * 2 + 2));
        let mut flat = pol.flatten();
        for v in &mut flat {
            *v = -*v;
        }
        pol.assign(&flat);
        assert_eq!(pol.flatten(), flat);
    }

    #[test]
    fn jacobian_term_vanishes_at_zero_and_matches_naive_form() {
        assert_eq!(tanh_log_jacobian(0.0), 0.0);
        for u in [-3.0f64, -0.7, 0.2, 2.5] {
            let naive = (1.0 - u.tanh() * u.tanh()).ln();
            assert!((tanh_log_jacobian(u) - naive).abs() < 1e-12);
        }
        // Far in the tail the naive form underflows but this one stays finite.
        assert!(tanh_log_jacobian(-40.0).is_finite());
    }

    #[test]
    fn taped_log_density_matches_the_scalar_form() {
        let mut rng = derive(86, Stream::Custom(8));
        let (b, d) = (17, 3);
        let mu = Array2::from_shape_fn((b, d), |_| rng.random_range(-1.0..1.0));
        let logstd = Array2::from_shape_fn((b, d), |_| rng.random_range(-2.0..0.5));
        let noise = sample_noise(b, d, &mut rng);
        let pre = &mu + &(logstd.mapv(f64::exp) * &noise);

        let mut tape = Tape::new();
        let prev = tape.constant(pre.clone());
        let lsv = tape.constant(logstd.clone());
        let lp = squashed_logp_tape(&mut tape, prev, lsv, &noise);
        for i in 0..b {
            let scalar = squashed_logp(
                pre.row(i).as_slice().unwrap(),
                mu.row(i).as_slice().unwrap(),
                logstd.row(i).as_slice().unwrap(),
            );
            assert!((tape.value(lp)[[i, 0]] - scalar).abs() < 1e-12);
        }
    }

    #[test]
    fn taped_log_density_gradients_match_finite_differences() {
        let mut rng = derive(87, Stream::Custom(8));
        let (b, d) = (3, 2);
        let mu0 = Array2::from_shape_fn((b, d), |_| rng.random_range(-0.8..0.8));
        let ls0 = Array2::from_shape_fn((b, d), |_| rng.random_range(-1.5..0.2));
        let noise = sample_noise(b, d, &mut rng);
        let eval = |mu: &Array2<f64>, ls: &Array2<f64>| -> (Tape, Var, Var, Var) {
            let mut tape = Tape::new();
            let muv = tape.param(mu.clone());
            let lsv = tape.param(ls.clone());
            let sigma = tape.exp(lsv);
            let nv = tape.constant(noise.clone());
            let scaled = tape.mul(sigma, nv);
            let pre = tape.add(muv, scaled);
            let lp = squashed_logp_tape(&mut tape, pre, lsv, &noise);
            let loss = tape.mean_all(lp);
            (tape, loss, muv, lsv)
        };
        let (tape, loss, muv, lsv) = eval(&mu0, &ls0);
        let grads = tape.backward(loss);
        let h = 1e-5;
        for (which, var) in [(0, muv), (1, lsv)] {
            let g = grads.wrt(var).unwrap();
            for i in 0..b {
                for j in 0..d {
                    let mut plus_mu = mu0.clone();
                    let mut plus_ls = ls0.clone();
                    let mut minus_mu = mu0.clone();
                    let mut minus_ls = ls0.clone();
                    if which == 0 {
                        plus_mu[[i, j]] += h;
                        minus_mu[[i, j]] -= h;
                    } else {
                        plus_ls[[i, j]] += h;
                        minus_ls[[i, j]] -= h;
                    }
                    let (tp, lp, _, _) = eval(&plus_mu, &plus_ls);
                    let (tm, lm, _, _) = eval(&minus_mu, &minus_ls);
                    let fd = (tp.scalar(lp) - tm.scalar(lm)) / (2.0 * h);
                    let got = g[[i, j]];
                    let denom = fd.abs().max(1e-6);
                    assert!(
                        ((got - fd) / denom).abs() < 1e-4,
                        "({which},{i},{j}): tape {got} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn monte_carlo_entropy_matches_quadrature() {
        let (mu, logstd) = (0.4, -0.3);
        let sigma = (logstd as f64).exp();
        // Quadrature: H = E_u[-log N(u) + log(1 - tanh(u)^2)] under
        // u ~ N(mu, sigma), by Simpson's rule over a wide window.
        let n = 20_000;
        let (lo, hi) = (mu - 12.0 * sigma, mu + 12.0 * sigma);
        let step = (hi - lo) / n as f64;
        let f = |u: f64| -> f64 {
            let xi = (u - mu) / sigma;
            let log_n = -0.5 * xi * xi - logstd - 0.918_938_533_204_672_7;
            log_n.exp() * (-log_n + tanh_log_jacobian(u))
        };
        let mut h_quad = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            h_quad += w * f(lo + i as f64 * step);
        }
        h_quad *= step / 3.0;

        let mut rng = derive(88, Stream::Custom(8));
        let draws = 20_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let pre = mu + sigma * xi;
            let nl = -squashed_logp(&[pre], &[mu], &[logstd]);
            sum += nl;
            sum_sq += nl * nl;
        }
        let h_mc = sum / draws as f64;
        let var = (sum_sq / draws as f64 - h_mc * h_mc).max(0.0);
        let se = (var / draws as f64).sqrt();
        assert!(
            (h_mc - h_quad).abs() < 3.0 * se,
            "mc {h_mc} vs quadrature {h_quad} (se {se})"
        );
    }

    #[test]
    fn entropy_shrinks_toward_the_clamp_floor() {
        // Fixed noise draws; entropy of the squashed Gaussian must be
        // non-increasing as the log-std walks down to the clamp floor.
        let mut rng = derive(89, Stream::Custom(8));
        let xis: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut last = f64::INFINITY;
        for k in [-1.0, -2.0, -3.0, -4.0, LOGSTD_MIN] {
            let sigma = (k as f64).exp();
            let h: f64 = xis
                .iter()
                .map(|&xi| -squashed_logp(&[sigma * xi], &[0.0], &[k]))
                .sum::<f64>()
                / xis.len() as f64;
            assert!(h < last, "entropy rose from {last} to {h} at logstd {k}");
            last = h;
        }
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        // Simpson's rule over the pre-squash variable u, integrating
        // p(a(u)) * da/du; the tails beyond |u| = 12 are negligible.
        let (mu, logstd) = (0.4, -0.3);
        let n = 40_000;
        let (lo, hi) = (-12.0, 12.0);
        let hstep = (hi - lo) / n as f64;
        let f = |u: f64| -> f64 {
            let da_du = (1.0 - u.tanh() * u.tanh()).max(1e-300);
            squashed_logp(&[u], &[mu], &[logstd]).exp() * da_du
        };
        let mut total = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            total += w * f(lo + i as f64 * hstep);
        }
        total *= hstep / 3.0;
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }
}
