//! One-dimensional continuous bandit for exercising the policy trainer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::policy::ppo::{PolicyModel, PpoConfig, Transition};

/// Reward landscape made of Gaussian bumps `height * exp(-(a - centre)^2 / (2 width^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandit {
    pub bumps: Vec<(f64, f64, f64)>,
    /// Actions are clipped to `[-bound, bound]` before scoring.
    pub bound: f64,
}

impl Bandit {
    /// Global bump at 2.0 with a lower decoy at -3.0.
    pub fn reference() -> Self {
        Self {
            bumps: vec![(2.0, 1.0, 1.5), (-3.0, 0.4, 0.8)],
            bound: 5.0,
        }
    }

    pub fn reward(&self, action: f64) -> f64 {
        let a = action.clamp(-self.bound, self.bound);
        self.bumps
            .iter()
            .map(|&(c, h, w)| h * (-(a - c).powi(2) / (2.0 * w * w)).exp())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    /// Mean reward over the trailing 32 episodes after every iteration.
    pub trailing_mean: Vec<f64>,
    pub final_mean_action: f64,
    pub final_std: f64,
}

pub fn bandit_config() -> PpoConfig {
    PpoConfig {
        learning_rate: 1e-2,
        clip_ratio: 0.2,
        epochs: 4,
        minibatch_size: 64,
        entropy_coef: 0.0,
        max_grad_norm: 0.5,
        hidden: vec![16],
        init_action_std: 1.0,
    }
}

/// Trains on the constant context `[0]`, `episodes` samples per iteration.
pub fn train_bandit(bandit: &Bandit, config: PpoConfig, iterations: usize, episodes: usize, seed: u64) -> Result<BanditRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = PolicyModel::new(vec![0.0], vec![1.0], 1, bandit.bound, config, &mut rng)?;
    let mut rewards: Vec<f64> = Vec::new();
    let mut trailing_mean = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut batch = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let s = policy.sample(&[0.0], &mut rng)?;
            let reward = bandit.reward(s.action[0]);
            rewards.push(reward);
            batch.push(Transition {
                state: vec![0.0],
                action: s.action,
                log_prob: s.log_prob,
                reward,
            });
        }
        policy.update(&batch, &mut rng)?;
        let tail = &rewards[rewards.len().saturating_sub(32)..];
        trailing_mean.push(tail.iter().sum::<f64>() / tail.len() as f64);
    }
    Ok(BanditRun {
        trailing_mean,
        final_mean_action: policy.mean(&[0.0])?[0],
        final_std: policy.std()[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_shape() {
        let b = Bandit::reference();
        assert!(b.reward(2.0) > b.reward(-3.0));
        assert!(b.reward(-3.0) > b.reward(-1.0));
        assert_eq!(b.reward(9.0), b.reward(5.0));
    }

    #[test]
    fn seeded_runs_repeat() {
        let b = Bandit::reference();
        let x = train_bandit(&b, bandit_config(), 5, 32, 7).unwrap();
        assert_eq!(x, train_bandit(&b, bandit_config(), 5, 32, 7).unwrap());
    }
}
