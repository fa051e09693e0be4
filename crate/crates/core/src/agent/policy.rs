//! Diagonal Gaussian policy over bounded couplings.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::mlp::{ForwardCache, Mlp};
use crate::linalg::Rng;
use crate::{Error, Result, OMEGA_MAX};

/// Policy mean is `Ω_max · sigmoid(net(obs))`; the log standard deviation is
/// a free per-action parameter independent of the observation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    mean_net: Mlp,
    log_std: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) * libm::exp(-ls);
            -0.5 * z * z - ls - 0.5 * libm::log(2.0 * PI)
        })
        .sum()
}

/// `KL(old ‖ new)` between diagonal Gaussians.
pub fn gaussian_kl(old_mean: &[f64], old_log_std: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..mean.len() {
        let var_old = libm::exp(2.0 * old_log_std[i]);
        let var_new = libm::exp(2.0 * log_std[i]);
        let d = old_mean[i] - mean[i];
        kl += log_std[i] - old_log_std[i] + (var_old + d * d) / (2.0 * var_new) - 0.5;
    }
    kl
}

/// Forward pass state kept for differentiating the mean.
#[derive(Clone, Debug)]
pub struct PolicyEval {
    pub mean: Vec<f64>,
    cache: ForwardCache,
}

impl GaussianPolicy {
    pub fn new(mean_net: Mlp, log_std: Vec<f64>) -> Result<Self> {
        let n = mean_net.output_dim();
        if log_std.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: log_std.len() });
        }
        if !(2..=3).contains(&n) {
            return Err(Error::invalid("policies act on 2 or 3 couplings"));
        }
        if log_std.iter().any(|v| !v.is_finite()) || !mean_net.is_finite() {
            return Err(Error::invalid("policy parameters must be finite"));
        }
        Ok(Self { mean_net, log_std })
    }

    /// Random mean network with small output weights, so initial means sit
    /// near `Ω_max / 2`.
    pub fn random(obs_dim: usize, hidden: &[usize], action_dim: usize, log_std: f64, rng: &mut Rng) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(obs_dim);
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        let net = Mlp::random(&dims, 0.1, rng)?;
        Self::new(net, alloc::vec![log_std; action_dim])
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean_net
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    /// Mean-network parameters followed by `log_std`.
    pub fn n_params(&self) -> usize {
        self.mean_net.n_params() + self.log_std.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), found: params.len() });
        }
        let (net, ls) = params.split_at(self.mean_net.n_params());
        self.mean_net.set_params(net)?;
        self.log_std.copy_from_slice(ls);
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, &[f64])> {
        Ok((self.eval(obs)?.mean, &self.log_std))
    }

    pub fn eval(&self, obs: &[f64]) -> Result<PolicyEval> {
        let cache = self.mean_net.forward_cached(obs)?;
        let mean = cache.output().iter().map(|&z| OMEGA_MAX * sigmoid(z)).collect();
        Ok(PolicyEval { mean, cache })
    }

    /// Draws `mean + σ·ξ` (unclipped) and its log-density.
    pub fn sample_action(&self, obs: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let mean = self.eval(obs)?.mean;
        let action: Vec<f64> = mean.iter().zip(&self.log_std).map(|(m, ls)| m + libm::exp(*ls) * rng.normal()).collect();
        let lp = gaussian_log_prob(&mean, &self.log_std, &action);
        Ok((action, lp))
    }

    /// Adds `(∂mean/∂θ_net)ᵀ · d_mean` into the mean-network block of `grad`.
    pub fn backward_mean(&self, eval: &PolicyEval, d_mean: &[f64], grad: &mut [f64]) {
        let d_raw: Vec<f64> = eval.mean.iter().zip(d_mean).map(|(m, d)| d * m * (1.0 - m / OMEGA_MAX)).collect();
        let n = self.mean_net.n_params();
        self.mean_net.backward(&eval.cache, &d_raw, &mut grad[..n]);
    }

    /// `(∂mean/∂θ_net) · tangent_net`.
    pub fn jvp_mean(&self, eval: &PolicyEval, tangent: &[f64]) -> Vec<f64> {
        let d_raw = self.mean_net.jvp(&eval.cache, &tangent[..self.mean_net.n_params()]);
        eval.mean.iter().zip(d_raw).map(|(m, d)| d * m * (1.0 - m / OMEGA_MAX)).collect()
    }

    /// Adds `∇_θ log π(action | obs)` into `grad`, scaled by `weight`.
    pub fn add_log_prob_grad(&self, eval: &PolicyEval, action: &[f64], weight: f64, grad: &mut [f64]) {
        let n = self.mean_net.n_params();
        let mut d_mean = Vec::with_capacity(action.len());
        for i in 0..action.len() {
            let inv_var = libm::exp(-2.0 * self.log_std[i]);
            let diff = action[i] - eval.mean[i];
            d_mean.push(weight * diff * inv_var);
            grad[n + i] += weight * (diff * diff * inv_var - 1.0);
        }
        self.backward_mean(eval, &d_mean, grad);
    }

    /// Adds `∇_θ KL(old ‖ self)` at one state into `grad`, scaled by `weight`.
    pub fn add_kl_grad(&self, eval: &PolicyEval, old_mean: &[f64], old_log_std: &[f64], weight: f64, grad: &mut [f64]) {
        let n = self.mean_net.n_params();
        let mut d_mean = Vec::with_capacity(old_mean.len());
        for i in 0..old_mean.len() {
            let inv_var = libm::exp(-2.0 * self.log_std[i]);
            let d = eval.mean[i] - old_mean[i];
            d_mean.push(weight * d * inv_var);
            let var_old = libm::exp(2.0 * old_log_std[i]);
            grad[n + i] += weight * (1.0 - (var_old + d * d) * inv_var);
        }
        self.backward_mean(eval, &d_mean, grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_network_centres_the_range() {
        let p = GaussianPolicy::new(Mlp::zeros(&[4, 16, 2]).unwrap(), vec![0.0; 2]).unwrap();
        let (mean, _) = p.forward(&[0.3, 0.1, 0.2, 0.9]).unwrap();
        assert_eq!(mean, vec![0.5 * OMEGA_MAX; 2]);
        assert_eq!(p.forward(&[0.3, 0.1, 0.2, 0.9]).unwrap().0, mean);
    }

    #[test]
    fn tiny_std_samples_the_mean() {
        let mut rng = Rng::seed_from_u64(2);
        let p = GaussianPolicy::random(4, &[8], 2, -20.0, &mut rng).unwrap();
        let obs = [0.1, 0.2, 0.3, 0.4];
        let (mean, _) = p.forward(&obs).unwrap();
        let (a, _) = p.sample_action(&obs, &mut rng).unwrap();
        assert!(a.iter().zip(&mean).all(|(x, m)| (x - m).abs() <= 1e-6));
    }

    #[test]
    fn log_prob_at_mean() {
        let ls = [-0.3, 0.2];
        let want = -(ls[0] + 0.5 * libm::log(2.0 * PI)) - (ls[1] + 0.5 * libm::log(2.0 * PI));
        assert!((gaussian_log_prob(&[0.4, 0.6], &ls, &[0.4, 0.6]) - want).abs() < 1e-15);
    }

    #[test]
    fn sample_spread_matches_std() {
        let mut rng = Rng::seed_from_u64(3);
        let p = GaussianPolicy::random(2, &[4], 2, libm::log(0.3), &mut rng).unwrap();
        let n = 100_000;
        let (mean, _) = p.forward(&[0.5, 0.5]).unwrap();
        let mut ss = 0.0;
        for _ in 0..n {
            let (a, _) = p.sample_action(&[0.5, 0.5], &mut rng).unwrap();
            ss += (a[0] - mean[0]).powi(2);
        }
        let std = libm::sqrt(ss / n as f64);
        assert!((std / 0.3 - 1.0).abs() <= 0.02, "{std}");
    }

    #[test]
    fn kl_of_identical_policies_is_zero() {
        assert_eq!(gaussian_kl(&[0.2, 0.7], &[-1.0, 0.3], &[0.2, 0.7], &[-1.0, 0.3]), 0.0);
    }
}
