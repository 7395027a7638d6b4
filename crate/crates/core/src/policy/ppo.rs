//! Gaussian actor-critic trained with the clipped-ratio policy gradient.
//!
//! Episodes are single steps, so the advantage of a sample is its reward
//! minus the critic's value of the state. The actor's mean is squashed to
//! `action_bound * tanh(z)`; the per-dimension log standard deviation is a
//! free parameter shared by every state.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{PolicyConfig, Variant};
use crate::error::{Error, Result};
use crate::io::{read_document, write_document};
use crate::policy::scenario::ScenarioBounds;
use crate::surrogate::{Adam, Mlp};

pub const CHECKPOINT_FORMAT: &str = "tethernet-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

const LOG_STD_RANGE: (f64, f64) = (-10.0, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_action_std: f64,
}

impl From<&PolicyConfig> for PpoConfig {
    fn from(c: &PolicyConfig) -> Self {
        Self {
            learning_rate: c.learning_rate,
            clip_ratio: c.clip_ratio,
            epochs: c.epochs_per_batch,
            minibatch_size: c.minibatch_size,
            entropy_coef: c.entropy_coef,
            max_grad_norm: c.max_grad_norm,
            hidden: c.hidden.clone(),
            init_action_std: c.init_action_std,
        }
    }
}

/// One collected step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Unclipped sample the log-probability refers to.
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSample {
    pub action: Vec<f64>,
    pub mean: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub mean_std: f64,
    pub minibatches: usize,
    /// Minibatches dropped because a gradient was not finite.
    pub skipped: usize,
}

/// Clipped surrogate `min(r A, clip(r, 1-e, 1+e) A)` and its derivative in `r`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        // The clipped branch is flat in r.
        (clipped, 0.0)
    }
}

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyModel {
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub critic: Mlp,
    /// States are mapped to `(s - offset) / scale` before the networks.
    pub state_offset: Vec<f64>,
    pub state_scale: Vec<f64>,
    pub action_bound: f64,
    pub config: PpoConfig,
    actor_opt: Adam,
    critic_opt: Adam,
    pub updates: u64,
}

impl PolicyModel {
    pub fn new<R: Rng + ?Sized>(
        state_offset: Vec<f64>,
        state_scale: Vec<f64>,
        action_dim: usize,
        action_bound: f64,
        config: PpoConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let state_dim = state_offset.len();
        if state_scale.len() != state_dim || state_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("state scale must be positive for every dimension".into()));
        }
        if !(action_bound > 0.0) || !(config.init_action_std > 0.0) {
            return Err(Error::Config("action bound and initial spread must be positive".into()));
        }
        let widths = |out: usize| {
            let mut w = vec![state_dim];
            w.extend(&config.hidden);
            w.push(out);
            w
        };
        let mut actor = Mlp::new(&widths(action_dim), rng)?;
        // Start near zero offset.
        if let Some(last) = actor.weights.last_mut() {
            *last *= 0.01;
        }
        let critic = Mlp::new(&widths(1), rng)?;
        let actor_opt = Adam::new(config.learning_rate, actor.param_count() + action_dim);
        let critic_opt = Adam::new(config.learning_rate, critic.param_count());
        Ok(Self {
            log_std: vec![config.init_action_std.ln(); action_dim],
            actor,
            critic,
            state_offset,
            state_scale,
            action_bound,
            config,
            actor_opt,
            critic_opt,
            updates: 0,
        })
    }

    /// Policy over debris positions emitting one (dx, dy) pair per MU.
    pub fn for_scenarios<R: Rng + ?Sized>(
        variant: Variant,
        bounds: &ScenarioBounds,
        config: PpoConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mid = |(lo, hi): (f64, f64)| ((lo + hi) / 2.0, ((hi - lo) / 2.0).max(1e-9));
        let (axes_mid, axes_half): (Vec<f64>, Vec<f64>) = [bounds.x, bounds.y, bounds.z].into_iter().map(mid).unzip();
        Self::new(axes_mid, axes_half, 2 * variant.mu_count(), bounds.action, config, rng)
    }

    pub fn state_dim(&self) -> usize {
        self.state_offset.len()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    fn state_matrix<'a>(&self, states: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<DMatrix<f64>> {
        let mut x = DMatrix::zeros(self.state_dim(), states.len());
        for (j, s) in states.enumerate() {
            if s.len() != self.state_dim() {
                return Err(Error::WidthMismatch {
                    expected: self.state_dim(),
                    actual: s.len(),
                });
            }
            for k in 0..s.len() {
                x[(k, j)] = (s[k] - self.state_offset[k]) / self.state_scale[k];
            }
        }
        Ok(x)
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        let z = self.actor.forward_batch(self.state_matrix(std::iter::once(state))?);
        Ok(z.iter().map(|v| self.action_bound * v.tanh()).collect())
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.critic.forward_batch(self.state_matrix(std::iter::once(state))?)[(0, 0)])
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<ActionSample> {
        let mean = self.mean(state)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(ActionSample {
            log_prob: gaussian_log_prob(&action, &mean, &self.log_std),
            value: self.value(state)?,
            action,
            mean,
        })
    }

    /// Centred advantages, scaled to unit deviation when the batch has spread.
    fn advantages(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        let x = self.state_matrix(batch.iter().map(|t| t.state.as_slice()))?;
        let v = self.critic.forward_batch(x);
        let raw: Vec<f64> = batch.iter().zip(v.iter()).map(|(t, v)| t.reward - v).collect();
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let std = (raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        let scale = if std > 1e-8 { std } else { 1.0 };
        Ok(raw.iter().map(|a| (a - mean) / scale).collect())
    }

    /// Actor gradients of the negated clipped objective (plus entropy bonus)
    /// over one minibatch with fixed advantages.
    pub fn actor_gradients(
        &self,
        batch: &[&Transition],
        advantages: &[f64],
    ) -> Result<(crate::surrogate::Gradients, Vec<f64>, MinibatchStats)> {
        let x = self.state_matrix(batch.iter().map(|t| t.state.as_slice()))?;
        let trace = self.actor.trace(x);
        let z = trace.output();
        let n = batch.len() as f64;
        let dim = self.action_dim();
        let mut d_z = DMatrix::zeros(dim, batch.len());
        let mut d_log_std = vec![0.0; dim];
        let mut stats = MinibatchStats::default();
        let clip = self.config.clip_ratio;
        for (j, (t, &adv)) in batch.iter().zip(advantages).enumerate() {
            if t.action.len() != dim {
                return Err(Error::WidthMismatch {
                    expected: dim,
                    actual: t.action.len(),
                });
            }
            let mean: Vec<f64> = (0..dim).map(|k| self.action_bound * z[(k, j)].tanh()).collect();
            let logp = gaussian_log_prob(&t.action, &mean, &self.log_std);
            let ratio = (logp - t.log_prob).exp();
            let (obj, d_ratio) = clipped_objective(ratio, adv, clip);
            stats.objective += obj / n;
            stats.approx_kl += (t.log_prob - logp) / n;
            if (ratio - 1.0).abs() > clip {
                stats.clipped += 1;
            }
            // d(-obj)/d logp = -d_ratio * ratio.
            let g = -d_ratio * ratio / n;
            for k in 0..dim {
                let var = (2.0 * self.log_std[k]).exp();
                let diff = t.action[k] - mean[k];
                let th = z[(k, j)].tanh();
                d_z[(k, j)] = g * diff / var * self.action_bound * (1.0 - th * th);
                d_log_std[k] += g * (diff * diff / var - 1.0);
            }
        }
        // Entropy of a diagonal Gaussian grows by one per unit log-std.
        for d in &mut d_log_std {
            *d -= self.config.entropy_coef;
        }
        let grads = self.actor.backward(&trace, &d_z);
        Ok((grads, d_log_std, stats))
    }

    /// Clipped-ratio update over `batch`, collected under the current policy.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &[Transition], rng: &mut R) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty update batch".into()));
        }
        let advantages = self.advantages(batch)?;
        let size = self.config.minibatch_size.clamp(1, batch.len());
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut stats = UpdateStats::default();
        let mut clipped = 0usize;
        let mut seen = 0usize;
        for _ in 0..self.config.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(size) {
                let mb: Vec<&Transition> = chunk.iter().map(|&i| &batch[i]).collect();
                let adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
                let (mut grads, mut d_log_std, mb_stats) = self.actor_gradients(&mb, &adv)?;
                stats.minibatches += 1;
                let finite = grads.is_finite() && d_log_std.iter().all(|g| g.is_finite());
                let (mut vgrads, vloss) = self.critic_gradients(&mb)?;
                if !finite || !vgrads.is_finite() || !vloss.is_finite() {
                    stats.skipped += 1;
                    continue;
                }
                let norm = (grads.norm().powi(2) + d_log_std.iter().map(|g| g * g).sum::<f64>()).sqrt();
                if norm > self.config.max_grad_norm {
                    let s = self.config.max_grad_norm / norm;
                    grads.scale(s);
                    d_log_std.iter_mut().for_each(|g| *g *= s);
                }
                let vnorm = vgrads.norm();
                if vnorm > self.config.max_grad_norm {
                    vgrads.scale(self.config.max_grad_norm / vnorm);
                }
                self.actor_opt.step(
                    self.actor.slices_mut().chain(std::iter::once(self.log_std.as_mut_slice())),
                    grads.slices().chain(std::iter::once(d_log_std.as_slice())),
                );
                self.log_std
                    .iter_mut()
                    .for_each(|l| *l = l.clamp(LOG_STD_RANGE.0, LOG_STD_RANGE.1));
                self.critic_opt.step_mlp(&mut self.critic, &vgrads);
                stats.policy_loss -= mb_stats.objective;
                stats.approx_kl += mb_stats.approx_kl;
                stats.value_loss += vloss;
                clipped += mb_stats.clipped;
                seen += mb.len();
            }
        }
        let applied = (stats.minibatches - stats.skipped).max(1) as f64;
        stats.policy_loss /= applied;
        stats.approx_kl /= applied;
        stats.value_loss /= applied;
        stats.clip_fraction = clipped as f64 / seen.max(1) as f64;
        stats.mean_std = self.std().iter().sum::<f64>() / self.action_dim() as f64;
        self.updates += 1;
        Ok(stats)
    }

    fn critic_gradients(&self, batch: &[&Transition]) -> Result<(crate::surrogate::Gradients, f64)> {
        let x = self.state_matrix(batch.iter().map(|t| t.state.as_slice()))?;
        let y = DMatrix::from_iterator(1, batch.len(), batch.iter().map(|t| t.reward));
        let trace = self.critic.trace(x);
        let (loss, d) = crate::surrogate::nn::mse_loss(trace.output(), &y);
        Ok((self.critic.backward(&trace, &d), loss))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_document(path, CHECKPOINT_FORMAT, CHECKPOINT_VERSION, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_document(path, CHECKPOINT_FORMAT, CHECKPOINT_VERSION)?;
        if m.actor.output_width() != m.log_std.len() || m.actor.input_width() != m.state_dim() {
            return Err(Error::Malformed {
                kind: CHECKPOINT_FORMAT.into(),
                reason: "actor widths disagree with the state or action size".into(),
            });
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MinibatchStats {
    pub objective: f64,
    pub approx_kl: f64,
    pub clipped: usize,
}
