//! Episode storage and advantage estimation.

use alloc::vec::Vec;

use crate::{Error, Result};

/// One episode collected under a fixed policy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Episode {
    pub observations: Vec<Vec<f64>>,
    /// Actions as sampled, before the environment clips them.
    pub actions: Vec<Vec<f64>>,
    /// Log-densities under the sampling-time policy.
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Value estimates `V(s_t)` at sampling time.
    pub values: Vec<f64>,
    /// Last-dot occupation when the episode ended.
    pub final_fidelity: f64,
    /// Peak occupation of dot 2 during the episode.
    pub max_rho22: f64,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    fn check(&self) -> Result<()> {
        let n = self.rewards.len();
        if [self.observations.len(), self.actions.len(), self.log_probs.len(), self.values.len()].iter().any(|&l| l != n) {
            return Err(Error::invalid("episode buffers have inconsistent lengths"));
        }
        Ok(())
    }
}

/// Episodes of one training epoch, merged in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBatch {
    pub episodes: Vec<Episode>,
}

impl RolloutBatch {
    pub fn n_samples(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn mean_return(&self) -> f64 {
        mean(self.episodes.iter().map(Episode::total_reward))
    }

    pub fn mean_final_fidelity(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.final_fidelity))
    }

    pub fn mean_max_rho22(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.max_rho22))
    }
}

fn mean(it: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = it.len();
    if n == 0 {
        0.0
    } else {
        it.sum::<f64>() / n as f64
    }
}

/// Unnormalized GAE for one episode that terminates after its last reward.
pub fn episode_advantages(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let mut adv = alloc::vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let next_value = if t + 1 < values.len() { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    adv
}

/// Advantages (normalized over the batch) and value targets, flattened in
/// episode order.
pub fn compute_gae(batch: &RolloutBatch, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if batch.n_samples() == 0 {
        return Err(Error::invalid("cannot estimate advantages on an empty batch"));
    }
    let mut adv = Vec::with_capacity(batch.n_samples());
    let mut returns = Vec::with_capacity(batch.n_samples());
    for ep in &batch.episodes {
        ep.check()?;
        let a = episode_advantages(&ep.rewards, &ep.values, gamma, lambda);
        returns.extend(a.iter().zip(&ep.values).map(|(a, v)| a + v));
        adv.extend(a);
    }
    normalize(&mut adv);
    Ok((adv, returns))
}

/// Shifts to zero mean and scales to unit variance; a constant input only
/// gets centred.
pub fn normalize(xs: &mut [f64]) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
    xs.iter_mut().for_each(|x| *x = (*x - m) * scale);
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn undiscounted_advantage_is_reward_to_go() {
        let r = [-1.0, -2.0, 0.5, -0.25];
        let a = episode_advantages(&r, &[0.0; 4], 1.0, 1.0);
        assert_eq!(a, vec![-2.75, -1.75, 0.25, -0.25]);
    }

    #[test]
    fn single_step() {
        for (g, l) in [(0.9, 0.5), (1.0, 0.0), (0.3, 1.0)] {
            assert_eq!(episode_advantages(&[-1.0], &[0.0], g, l), vec![-1.0]);
        }
    }

    #[test]
    fn three_steps_match_explicit_sum() {
        let (r, v, g, l) = ([0.3, -1.2, 0.7], [0.1, -0.4, 0.25], 0.95, 0.8);
        let delta = |t: usize| r[t] + g * if t + 1 < 3 { v[t + 1] } else { 0.0 } - v[t];
        let a = episode_advantages(&r, &v, g, l);
        for t in 0..3 {
            let want: f64 = (t..3).map(|k| (g * l).powi((k - t) as i32) * delta(k)).sum();
            assert!((a[t] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn batch_advantages_are_standardized() {
        let ep = |r: Vec<f64>| Episode {
            observations: vec![vec![]; r.len()],
            actions: vec![vec![]; r.len()],
            log_probs: vec![0.0; r.len()],
            values: vec![0.5; r.len()],
            rewards: r,
            ..Default::default()
        };
        let batch = RolloutBatch { episodes: vec![ep(vec![-1.0, -2.0]), ep(vec![-3.0, 0.0, 1.0])] };
        let (adv, ret) = compute_gae(&batch, 0.99, 0.97).unwrap();
        assert_eq!(ret.len(), 5);
        let m = adv.iter().sum::<f64>() / 5.0;
        let v = adv.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 5.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        assert!(compute_gae(&RolloutBatch::default(), 0.99, 0.97).is_err());
    }
}
