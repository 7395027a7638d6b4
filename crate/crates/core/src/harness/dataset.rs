use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capture::{evaluate_capture, FailureReason};
use crate::config::Config;
use crate::episode::LogOptions;
use crate::error::Result;
use crate::harness::runner::{derive_rng, Runner, SeedDomain};
use crate::policy::{
    apply_action, nominal_aiming, sample_scenario, scenario_simulation, stream_rng, AimingAction,
    ScenarioBounds, GRID_STEP,
};
use crate::surrogate::{extract_window_features, Dataset, FeatureSpec, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub attempted: usize,
    pub kept: usize,
    pub successes: usize,
    pub no_trigger: usize,
    pub diverged: usize,
}

/// Offsets drawn uniformly from the lattice points of the action box.
pub fn uniform_action<R: Rng + ?Sized>(rng: &mut R, mu_count: usize, bound: f64) -> AimingAction {
    let steps = (bound / GRID_STEP).round() as i64;
    let mut draw = || crate::policy::quantize(rng.gen_range(-steps..=steps) as f64 * GRID_STEP);
    AimingAction {
        offsets: (0..mu_count).map(|_| [draw(), draw()]).collect(),
    }
}

enum Attempt {
    Kept(Sample),
    NoTrigger,
    Diverged,
}

/// Runs `episodes` randomized scenarios with uniform offsets through the full
/// capture and keeps the trigger snapshot of every episode that reached it.
pub fn generate_dataset(config: &Config, episodes: usize, root_seed: u64, runner: &Runner) -> Result<(Dataset, DatasetSummary)> {
    let bounds = ScenarioBounds::default();
    let base = crate::episode::Simulation::new(config)?;
    let spec = FeatureSpec::for_assembly(
        &base.assembly,
        config.surrogate.mu_features,
        config.surrogate.recurrent_window,
    );
    let attempts = runner.try_map(episodes, |i| -> Result<Attempt> {
        let mut rng = derive_rng(root_seed, SeedDomain::Dataset, i as u64);
        let scenario = sample_scenario(&mut rng, &bounds, config.variant);
        let action = uniform_action(&mut rng, config.variant.mu_count(), bounds.action);
        let sim = scenario_simulation(config, &scenario, &bounds)?;
        let nominal = nominal_aiming(&scenario.debris_position(), config.variant, config.policy.raw_nominal_table);
        let aiming = apply_action(&nominal, &action)?;
        let mut d = sim.deploy(aiming, stream_rng(scenario.seed, 0), LogOptions::default())?;
        if d.diverged.is_some() {
            return Ok(Attempt::Diverged);
        }
        if !d.triggered() {
            return Ok(Attempt::NoTrigger);
        }
        let features = extract_window_features(d.history.iter(), &sim.assembly, &spec)?;
        let log = sim.capture(&mut d, LogOptions::default())?;
        let m = evaluate_capture(&log, config.variant, sim.assembly.max_mouth_area(), config.capture.cqi_threshold);
        if m.failure == Some(FailureReason::Diverged) {
            return Ok(Attempt::Diverged);
        }
        Ok(Attempt::Kept(Sample {
            features,
            cqi: m.settled_cqi,
            locked_pairs: m.locked_pairs,
            success: m.success,
            scenario: Some(scenario),
            action: Some(action),
        }))
    })?;
    let mut summary = DatasetSummary {
        attempted: episodes,
        ..Default::default()
    };
    let mut samples = Vec::new();
    for a in attempts {
        match a {
            Attempt::Kept(s) => {
                summary.successes += s.success as usize;
                samples.push(s);
            }
            Attempt::NoTrigger => summary.no_trigger += 1,
            Attempt::Diverged => summary.diverged += 1,
        }
    }
    summary.kept = samples.len();
    Ok((Dataset::new(spec, samples)?, summary))
}

/// Deterministic split: the last `holdout` samples are held out.
pub fn split_holdout(samples: &[Sample], holdout: usize) -> (&[Sample], &[Sample]) {
    let cut = samples.len().saturating_sub(holdout);
    samples.split_at(cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_actions_cover_the_box_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 0.0;
        for _ in 0..2000 {
            let a = uniform_action(&mut rng, 4, 5.0);
            assert!(a.within(5.0));
            assert_eq!(a, a.quantized());
            for v in a.offsets.iter().flatten() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        assert_eq!((lo, hi), (-5.0, 5.0));
    }
}
