use serde::{Deserialize, Serialize};

use crate::config::{BoundPolicy, CaptureMode, Config};
use crate::error::{Error, Result};
use crate::harness::runner::{derive_rng, derive_seed, Runner, SeedDomain};
use crate::harness::dataset::split_holdout;
use crate::policy::{
    sample_scenario, stream_rng, AimingAction, Environment, EpisodeRecord, PolicyModel, PpoConfig, ScenarioBounds,
    Transition, UpdateStats,
};
use crate::surrogate::{train, Dataset, ErrorModel, SurrogateModel, TrainOptions, TrainReport};

/// Episodes in the trailing reward average.
pub const TRAILING_WINDOW: usize = 32;

/// Linear interpolation between order statistics, `q` in percent.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidInput(format!("percentile {q} of {} values", values.len())));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelCalibration {
    pub max_fuel: f64,
    pub percentile: f64,
    pub fuels: Vec<f64>,
}

/// Reference fuel: a percentile of the total fuel of nominal-aiming
/// episodes simulated through the capture.
pub fn calibrate_max_fuel(config: &Config, root_seed: u64, runner: &Runner) -> Result<FuelCalibration> {
    let n = config.policy.calibration_episodes;
    // Placeholder reference; rewards are not used here.
    let env = Environment::new(config, Some(1.0), None)?;
    let bounds = ScenarioBounds::default();
    let fuels = runner.try_map(n, |i| {
        let mut rng = derive_rng(root_seed, SeedDomain::Calibration, i as u64);
        let scenario = sample_scenario(&mut rng, &bounds, config.variant);
        let out = env.execute(
            &scenario,
            &AimingAction::zeros(env.mu_count()),
            CaptureMode::FullCapture,
            BoundPolicy::Reject,
        )?;
        Ok(out.total_fuel)
    })?;
    let q = config.policy.calibration_percentile;
    Ok(FuelCalibration {
        max_fuel: percentile(&fuels, q)?,
        percentile: q,
        fuels,
    })
}

impl TrainOptions {
    pub fn from_config(config: &Config) -> Self {
        let s = &config.surrogate;
        Self {
            hidden: s.hidden.clone(),
            learning_rate: s.learning_rate,
            epochs: s.epochs,
            batch_size: s.batch_size,
            weight_decay: s.weight_decay,
            cqi_target: s.cqi_target,
            cqi_threshold: config.capture.cqi_threshold,
        }
    }
}

/// Trains on all but the last `holdout` samples, then fits the error model
/// on the held-out ones.
pub fn fit_surrogate(
    config: &Config,
    dataset: &Dataset,
    holdout: usize,
    seed: u64,
) -> Result<(SurrogateModel, TrainReport, ErrorModel)> {
    if dataset.spec.variant != config.variant {
        return Err(Error::VariantMismatch {
            expected: config.variant.to_string(),
            actual: dataset.spec.variant.to_string(),
        });
    }
    let (train_set, held) = split_holdout(&dataset.samples, holdout);
    let mut rng = stream_rng(derive_seed(seed, SeedDomain::Update, 0), 0);
    let (mut model, report) = train(&dataset.spec, train_set, held, &TrainOptions::from_config(config), &mut rng)?;
    let error_model = model.fit_error_model(held, config.surrogate.error_model_cqi_cutoff)?;
    Ok((model, report, error_model))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub episodes: usize,
    pub batch_mean_reward: f64,
    /// Mean reward over the last [`TRAILING_WINDOW`] episodes.
    pub trailing_mean_reward: f64,
    pub success_fraction: f64,
    pub trigger_fraction: f64,
    pub mean_fuel: f64,
    pub update: UpdateStats,
}

/// Collects `episodes_per_iteration` episodes under the current policy, then
/// updates it, `iterations` times. `sink` sees every iteration's records.
pub fn train_policy<F>(
    env: &Environment,
    iterations: usize,
    root_seed: u64,
    runner: &Runner,
    mut sink: F,
) -> Result<(PolicyModel, Vec<IterationStats>)>
where
    F: FnMut(&IterationStats, &[EpisodeRecord]) -> Result<()>,
{
    let cfg = &env.config.policy;
    let mut init_rng = derive_rng(root_seed, SeedDomain::Update, u64::MAX);
    let mut policy = PolicyModel::for_scenarios(env.variant(), &env.bounds, PpoConfig::from(cfg), &mut init_rng)?;
    let per_iter = cfg.episodes_per_iteration.max(1);
    let mut rewards: Vec<f64> = Vec::with_capacity(iterations * per_iter);
    let mut history = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let current = &policy;
        let records = runner.try_map(per_iter, |j| {
            let index = (it * per_iter + j) as u64;
            let mut rng = derive_rng(root_seed, SeedDomain::Training, index);
            let scenario = sample_scenario(&mut rng, &env.bounds, env.variant());
            env.run_episode(current, &scenario, cfg.mode, &mut rng)
        })?;
        let batch: Vec<Transition> = records
            .iter()
            .map(|r| Transition {
                state: r.state.clone(),
                action: r.raw_action.clone(),
                log_prob: r.log_prob,
                reward: r.outcome.reward,
            })
            .collect();
        let mut update_rng = derive_rng(root_seed, SeedDomain::Update, it as u64);
        let update = policy.update(&batch, &mut update_rng)?;
        rewards.extend(records.iter().map(|r| r.outcome.reward));
        let tail = &rewards[rewards.len().saturating_sub(TRAILING_WINDOW)..];
        let n = records.len() as f64;
        let stats = IterationStats {
            iteration: it,
            episodes: rewards.len(),
            batch_mean_reward: records.iter().map(|r| r.outcome.reward).sum::<f64>() / n,
            trailing_mean_reward: tail.iter().sum::<f64>() / tail.len() as f64,
            success_fraction: records.iter().filter(|r| r.outcome.success).count() as f64 / n,
            trigger_fraction: records.iter().filter(|r| r.outcome.triggered).count() as f64 / n,
            mean_fuel: records.iter().map(|r| r.outcome.total_fuel).sum::<f64>() / n,
            update,
        };
        sink(&stats, &records)?;
        history.push(stats);
    }
    Ok((policy, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (1..=5).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 5.0);
        assert_eq!(percentile(&v, 50.0).unwrap(), 3.0);
        assert!((percentile(&v, 95.0).unwrap() - 4.8).abs() < 1e-12);
        assert!(percentile(&[], 95.0).is_err());
    }
}
