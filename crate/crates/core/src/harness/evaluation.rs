use serde::{Deserialize, Serialize};

use crate::config::{BoundPolicy, CaptureMode, Variant};
use crate::error::{Error, Result};
use crate::harness::runner::{derive_rng, Runner, SeedDomain};
use crate::policy::{sample_scenario, AimingAction, Environment, EpisodeOutcome, PolicyModel, Scenario};

/// Nominal and policy episodes on one scenario with the same physics seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub scenario: Scenario,
    pub nominal: EpisodeOutcome,
    /// `None` when the policy's offsets were rejected by the action bounds.
    pub policy: Option<EpisodeOutcome>,
    pub rejected: Option<String>,
    /// Nominal minus policy total fuel, kg.
    pub fuel_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub variant: Variant,
    pub episodes: usize,
    pub success_rate: f64,
    pub nominal_success_rate: f64,
    /// Mean total fuel per episode, kg.
    pub fuel_nominal: f64,
    pub fuel_policy: f64,
    pub mean_fuel_delta: f64,
    pub fuel_delta: Vec<f64>,
    /// Mean fuel of a single MU, kg.
    pub per_mu_fuel_nominal: f64,
    pub per_mu_fuel_policy: f64,
    pub pairs: Vec<PairRecord>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs `episodes` unseen scenarios twice in full capture: with nominal
/// aiming and with the policy's mean offsets.
pub fn paired_evaluation(env: &Environment, policy: &PolicyModel, episodes: usize, root_seed: u64, runner: &Runner) -> Result<EvaluationReport> {
    if policy.action_dim() != 2 * env.mu_count() {
        return Err(Error::WidthMismatch {
            expected: 2 * env.mu_count(),
            actual: policy.action_dim(),
        });
    }
    let pairs = runner.try_map(episodes, |i| {
        let mut rng = derive_rng(root_seed, SeedDomain::Evaluation, i as u64);
        let scenario = sample_scenario(&mut rng, &env.bounds, env.variant());
        let nominal = env.execute(
            &scenario,
            &AimingAction::zeros(env.mu_count()),
            CaptureMode::FullCapture,
            BoundPolicy::Reject,
        )?;
        let (policy_out, rejected) = match env.run_deterministic(policy, &scenario) {
            Ok(o) => (Some(o), None),
            Err(Error::Scenario(msg)) => (None, Some(msg)),
            Err(e) => return Err(e),
        };
        let fuel_delta = policy_out.as_ref().map(|p| nominal.total_fuel - p.total_fuel);
        Ok(PairRecord {
            index: i,
            scenario,
            nominal,
            policy: policy_out,
            rejected,
            fuel_delta,
        })
    })?;
    let n = pairs.len().max(1) as f64;
    let mus = env.mu_count() as f64;
    let fuel_delta: Vec<f64> = pairs.iter().filter_map(|p| p.fuel_delta).collect();
    let policy_outs = || pairs.iter().filter_map(|p| p.policy.as_ref());
    Ok(EvaluationReport {
        variant: env.variant(),
        episodes: pairs.len(),
        success_rate: policy_outs().filter(|o| o.success).count() as f64 / n,
        nominal_success_rate: pairs.iter().filter(|p| p.nominal.success).count() as f64 / n,
        fuel_nominal: mean(pairs.iter().map(|p| p.nominal.total_fuel)),
        fuel_policy: mean(policy_outs().map(|o| o.total_fuel)),
        mean_fuel_delta: mean(fuel_delta.iter().copied()),
        per_mu_fuel_nominal: mean(pairs.iter().map(|p| p.nominal.total_fuel / mus)),
        per_mu_fuel_policy: mean(policy_outs().map(|o| o.total_fuel / mus)),
        fuel_delta,
        pairs,
    })
}
