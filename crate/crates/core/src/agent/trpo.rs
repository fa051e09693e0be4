//! KL-constrained natural-gradient policy update.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mlp::Mlp;
use super::policy::{gaussian_kl, gaussian_log_prob, GaussianPolicy, PolicyEval};
use super::rollout::{compute_gae, RolloutBatch};
use crate::linalg::{conjugate_gradient, dot, norm, Rng};
use crate::{Error, Result};

/// Optimizer settings. Defaults are conventional TRPO choices.
#[derive(Clone, Debug, PartialEq)]
pub struct TrpoConfig {
    pub discount: f64,
    pub gae_lambda: f64,
    pub max_kl: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    pub episodes_per_batch: usize,
    pub value_fit_epochs: usize,
    pub value_lr: f64,
    pub value_minibatch: usize,
    pub total_epochs: usize,
    pub seed: u64,
    pub log_std_init: f64,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            gae_lambda: 0.97,
            max_kl: 0.01,
            cg_iters: 10,
            cg_damping: 0.1,
            backtrack_ratio: 0.8,
            max_backtracks: 10,
            episodes_per_batch: 20,
            value_fit_epochs: 5,
            value_lr: 1e-3,
            value_minibatch: 64,
            total_epochs: 1000,
            seed: 0,
            log_std_init: libm::log(0.3),
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.discount) || !unit(self.gae_lambda) {
            return Err(Error::invalid("discount and gae_lambda must lie in (0, 1]"));
        }
        if !(self.max_kl > 0.0 && self.max_kl.is_finite()) {
            return Err(Error::invalid("max_kl must be positive"));
        }
        if !(self.cg_damping >= 0.0 && self.cg_damping.is_finite()) {
            return Err(Error::invalid("cg_damping must be non-negative"));
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return Err(Error::invalid("backtrack_ratio must lie in (0, 1)"));
        }
        if !(self.value_lr > 0.0 && self.value_lr.is_finite()) {
            return Err(Error::invalid("value_lr must be positive"));
        }
        if self.cg_iters == 0 || self.max_backtracks == 0 || self.episodes_per_batch == 0 || self.value_minibatch == 0 {
            return Err(Error::invalid("cg_iters, max_backtracks, episodes_per_batch and value_minibatch must be positive"));
        }
        if !self.log_std_init.is_finite() {
            return Err(Error::invalid("log_std_init must be finite"));
        }
        Ok(())
    }
}

/// Flattened samples with everything the surrogate and KL need from the
/// sampling-time policy.
#[derive(Clone, Debug)]
pub struct PolicySamples {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub old_means: Vec<Vec<f64>>,
    pub old_log_std: Vec<f64>,
}

impl PolicySamples {
    /// Records the current policy's means as the KL reference.
    pub fn new(
        policy: &GaussianPolicy,
        observations: Vec<Vec<f64>>,
        actions: Vec<Vec<f64>>,
        old_log_probs: Vec<f64>,
        advantages: Vec<f64>,
    ) -> Result<Self> {
        let n = observations.len();
        if actions.len() != n || old_log_probs.len() != n || advantages.len() != n {
            return Err(Error::invalid("sample buffers have inconsistent lengths"));
        }
        if n == 0 {
            return Err(Error::invalid("no samples"));
        }
        let old_means = observations.iter().map(|o| policy.forward(o).map(|(m, _)| m)).collect::<Result<_>>()?;
        Ok(Self { observations, actions, old_log_probs, advantages, old_means, old_log_std: policy.log_std().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

fn evals(policy: &GaussianPolicy, s: &PolicySamples) -> Result<Vec<PolicyEval>> {
    s.observations.iter().map(|o| policy.eval(o)).collect()
}

/// Importance-weighted surrogate `mean[exp(log π − log π_old) · A]`.
pub fn surrogate(policy: &GaussianPolicy, s: &PolicySamples) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..s.len() {
        let (mean, ls) = policy.forward(&s.observations[i])?;
        let lp = gaussian_log_prob(&mean, ls, &s.actions[i]);
        total += libm::exp(lp - s.old_log_probs[i]) * s.advantages[i];
    }
    Ok(total / s.len() as f64)
}

/// Surrogate and its gradient at the current parameters.
pub fn surrogate_grad(policy: &GaussianPolicy, s: &PolicySamples) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; policy.n_params()];
    let mut total = 0.0;
    let w = 1.0 / s.len() as f64;
    for (i, e) in evals(policy, s)?.iter().enumerate() {
        let lp = gaussian_log_prob(&e.mean, policy.log_std(), &s.actions[i]);
        let ratio = libm::exp(lp - s.old_log_probs[i]);
        total += ratio * s.advantages[i];
        policy.add_log_prob_grad(e, &s.actions[i], w * ratio * s.advantages[i], &mut grad);
    }
    Ok((total * w, grad))
}

/// Mean `KL(old ‖ policy)` over the sampled states.
pub fn mean_kl(policy: &GaussianPolicy, s: &PolicySamples) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..s.len() {
        let (mean, ls) = policy.forward(&s.observations[i])?;
        total += gaussian_kl(&s.old_means[i], &s.old_log_std, &mean, ls);
    }
    Ok(total / s.len() as f64)
}

pub fn mean_kl_grad(policy: &GaussianPolicy, s: &PolicySamples) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; policy.n_params()];
    let mut total = 0.0;
    let w = 1.0 / s.len() as f64;
    for (i, e) in evals(policy, s)?.iter().enumerate() {
        total += gaussian_kl(&s.old_means[i], &s.old_log_std, &e.mean, policy.log_std());
        policy.add_kl_grad(e, &s.old_means[i], &s.old_log_std, w, &mut grad);
    }
    Ok((total * w, grad))
}

/// Products with the Hessian of the mean KL at the sampling-time policy.
///
/// At that point the Hessian equals the Fisher matrix `Jᵀ M J`, with `M`
/// holding `1/σ²` for the means and `2` for each `log σ`.
#[derive(Debug)]
pub struct FisherOperator<'a> {
    policy: &'a GaussianPolicy,
    evals: Vec<PolicyEval>,
}

impl<'a> FisherOperator<'a> {
    pub fn new(policy: &'a GaussianPolicy, s: &PolicySamples) -> Result<Self> {
        Ok(Self { policy, evals: evals(policy, s)? })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let p = self.policy;
        let n_net = p.mean_net().n_params();
        let w = 1.0 / self.evals.len() as f64;
        let inv_var: Vec<f64> = p.log_std().iter().map(|ls| libm::exp(-2.0 * ls)).collect();
        let mut out = vec![0.0; v.len()];
        for e in &self.evals {
            let jv = p.jvp_mean(e, v);
            let weighted: Vec<f64> = jv.iter().zip(&inv_var).map(|(j, iv)| w * j * iv).collect();
            p.backward_mean(e, &weighted, &mut out);
        }
        for i in 0..p.action_dim() {
            out[n_net + i] += 2.0 * v[n_net + i];
        }
        out
    }
}

/// Scalar state-value network trained with Adam on squared error.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueBaseline {
    net: Mlp,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
    fitted: bool,
}

impl ValueBaseline {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: net.output_dim() });
        }
        let n = net.n_params();
        Ok(Self { net, adam_m: vec![0.0; n], adam_v: vec![0.0; n], adam_t: 0, fitted: false })
    }

    /// A network that has already been fitted, e.g. restored for a warm start.
    pub fn pretrained(net: Mlp) -> Result<Self> {
        let mut v = Self::new(net)?;
        v.fitted = true;
        Ok(v)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn predict(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.net.forward(obs)?[0])
    }

    /// Runs `epochs` shuffled minibatch passes; returns the final full-batch
    /// mean squared error.
    pub fn fit(&mut self, obs: &[Vec<f64>], targets: &[f64], epochs: usize, lr: f64, minibatch: usize, rng: &mut Rng) -> Result<f64> {
        if obs.len() != targets.len() || obs.is_empty() {
            return Err(Error::invalid("value targets must match observations and be nonempty"));
        }
        if !self.fitted {
            // Start from the mean return so early updates are not spent on the offset.
            let m = targets.iter().sum::<f64>() / targets.len() as f64;
            self.net.set_output_bias(&[m])?;
            self.fitted = true;
        }
        let mut order: Vec<usize> = (0..obs.len()).collect();
        for _ in 0..epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(minibatch) {
                let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| obs[i].clone()).collect();
                let ys: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                let (_, grad) = value_loss_grad(&self.net, &xs, &ys)?;
                self.adam_step(&grad, lr)?;
            }
        }
        Ok(value_loss_grad(&self.net, obs, targets)?.0)
    }

    fn adam_step(&mut self, grad: &[f64], lr: f64) -> Result<()> {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalInstability { step: 0, reason: "non-finite value-network gradient".into() });
        }
        self.adam_t += 1;
        let c1 = 1.0 - libm::pow(B1, self.adam_t as f64);
        let c2 = 1.0 - libm::pow(B2, self.adam_t as f64);
        let mut p = self.net.params();
        for i in 0..p.len() {
            self.adam_m[i] = B1 * self.adam_m[i] + (1.0 - B1) * grad[i];
            self.adam_v[i] = B2 * self.adam_v[i] + (1.0 - B2) * grad[i] * grad[i];
            p[i] -= lr * (self.adam_m[i] / c1) / (libm::sqrt(self.adam_v[i] / c2) + 1e-8);
        }
        self.net.set_params(&p)
    }
}

/// Mean squared error of `net` on `(obs, targets)` and its gradient.
pub fn value_loss_grad(net: &Mlp, obs: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; net.n_params()];
    let mut loss = 0.0;
    let w = 1.0 / obs.len() as f64;
    for (x, y) in obs.iter().zip(targets) {
        let cache = net.forward_cached(x)?;
        let r = cache.output()[0] - y;
        loss += w * r * r;
        net.backward(&cache, &[2.0 * w * r], &mut grad);
    }
    Ok((loss, grad))
}

/// Outcome of one policy/value update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub surrogate_improvement: f64,
    /// Measured mean KL of the accepted step (0 when rejected).
    pub kl: f64,
    pub accepted: bool,
    pub backtracks: usize,
    pub grad_norm: f64,
    pub value_loss: f64,
}

/// Natural-gradient step on `policy` followed by a refit of `value`.
pub fn trpo_update(
    policy: &mut GaussianPolicy,
    value: &mut ValueBaseline,
    batch: &RolloutBatch,
    cfg: &TrpoConfig,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let (advantages, returns) = compute_gae(batch, cfg.discount, cfg.gae_lambda)?;
    let mut obs = Vec::with_capacity(advantages.len());
    let mut actions = Vec::with_capacity(advantages.len());
    let mut log_probs = Vec::with_capacity(advantages.len());
    for ep in &batch.episodes {
        obs.extend(ep.observations.iter().cloned());
        actions.extend(ep.actions.iter().cloned());
        log_probs.extend_from_slice(&ep.log_probs);
    }
    let samples = PolicySamples::new(policy, obs, actions, log_probs, advantages)?;
    let mut stats = policy_step(policy, &samples, cfg)?;
    stats.value_loss =
        value.fit(&samples.observations, &returns, cfg.value_fit_epochs, cfg.value_lr, cfg.value_minibatch, rng)?;
    Ok(stats)
}

/// Conjugate-gradient direction, trust-region scaling and backtracking.
/// Leaves `policy` untouched when no candidate improves the surrogate
/// within the KL bound.
pub fn policy_step(policy: &mut GaussianPolicy, s: &PolicySamples, cfg: &TrpoConfig) -> Result<UpdateStats> {
    let (base, g) = surrogate_grad(policy, s)?;
    let grad_norm = norm(&g);
    if !grad_norm.is_finite() {
        return Err(Error::NumericalInstability {
            step: 0,
            reason: format!("non-finite policy gradient over {} samples", s.len()),
        });
    }
    let mut stats = UpdateStats { grad_norm, ..Default::default() };
    if grad_norm == 0.0 {
        return Ok(stats);
    }

    let damping = cfg.cg_damping;
    let dir = {
        let fisher = FisherOperator::new(policy, s)?;
        let apply = |v: &[f64]| {
            let mut fv = fisher.apply(v);
            fv.iter_mut().zip(v).for_each(|(f, x)| *f += damping * x);
            fv
        };
        let sol = conjugate_gradient(apply, &g, cfg.cg_iters, 1e-10)?;
        let mut fs = fisher.apply(&sol.x);
        fs.iter_mut().zip(&sol.x).for_each(|(f, x)| *f += damping * x);
        let shs = dot(&sol.x, &fs);
        if !(shs > 0.0 && shs.is_finite()) {
            return Err(Error::NumericalInstability { step: 0, reason: format!("step curvature {shs:e} is not positive") });
        }
        let scale = libm::sqrt(2.0 * cfg.max_kl / shs);
        sol.x.iter().map(|x| x * scale).collect::<Vec<f64>>()
    };

    let theta0 = policy.params();
    let mut candidate = policy.clone();
    let mut frac = 1.0;
    for k in 0..cfg.max_backtracks {
        let theta: Vec<f64> = theta0.iter().zip(&dir).map(|(t, d)| t + frac * d).collect();
        candidate.set_params(&theta)?;
        let kl = mean_kl(&candidate, s)?;
        let improvement = surrogate(&candidate, s)? - base;
        if kl.is_finite() && kl <= cfg.max_kl && improvement > 0.0 && candidate.mean_net().is_finite() {
            *policy = candidate;
            stats.accepted = true;
            stats.kl = kl;
            stats.surrogate_improvement = improvement;
            stats.backtracks = k;
            return Ok(stats);
        }
        frac *= cfg.backtrack_ratio;
    }
    stats.backtracks = cfg.max_backtracks;
    Ok(stats)
}
