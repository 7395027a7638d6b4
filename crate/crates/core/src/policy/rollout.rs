//! Single-step episodes: pick aiming offsets for a scenario, fly the
//! deployment, then score the capture by simulation or by the surrogate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capture::{evaluate_capture, CaptureLog, CaptureMetrics, CqiSample, FailureReason};
use crate::config::{BoundPolicy, CaptureMode, Config, Variant};
use crate::episode::{LogOptions, Simulation};
use crate::error::{Error, Result};
use crate::policy::ppo::PolicyModel;
use crate::policy::reward::{reward_terms, RewardConfig, RewardInputs, RewardTerms};
use crate::policy::scenario::{apply_action, nominal_aiming, AimingAction, Scenario, ScenarioBounds};
use crate::surrogate::{extract_window_features, SurrogateModel};

/// Stream ids of the per-episode generators derived from the scenario seed.
const PHYSICS_STREAM: u64 = 0;
const SURROGATE_STREAM: u64 = 1;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulation of `config` with the debris moved to the scenario position.
pub fn scenario_simulation(config: &Config, scenario: &Scenario, bounds: &ScenarioBounds) -> Result<Simulation> {
    scenario.validate(bounds)?;
    if scenario.variant != config.variant {
        return Err(Error::VariantMismatch {
            expected: config.variant.to_string(),
            actual: scenario.variant.to_string(),
        });
    }
    let mut cfg = config.clone();
    cfg.debris.position = scenario.debris;
    Simulation::new(&cfg)
}

/// Scored outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub scenario: Scenario,
    pub action: AimingAction,
    /// The requested offsets had to be clipped to the action box.
    pub clipped: bool,
    pub mode: CaptureMode,
    pub triggered: bool,
    pub mouth_area: f64,
    #[serde(with = "crate::io::non_finite")]
    pub settled_cqi: f64,
    pub locked_pairs: usize,
    pub fuel_per_mu: Vec<f64>,
    pub total_fuel: f64,
    pub success: bool,
    pub failure: Option<FailureReason>,
    pub reward: f64,
    pub terms: RewardTerms,
}

/// Scenario plus a policy's choice for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub state: Vec<f64>,
    /// Raw Gaussian sample, before quantization and clipping.
    pub raw_action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub outcome: EpisodeOutcome,
}

/// Everything needed to run and score episodes of one variant.
#[derive(Debug, Clone)]
pub struct Environment {
    pub config: Config,
    pub bounds: ScenarioBounds,
    pub reward: RewardConfig,
    pub surrogate: Option<SurrogateModel>,
    base: Simulation,
}

impl Environment {
    /// `max_fuel` overrides the configured reference fuel; one of the two
    /// must be present.
    pub fn new(config: &Config, max_fuel: Option<f64>, surrogate: Option<SurrogateModel>) -> Result<Self> {
        let base = Simulation::new(config)?;
        let max_fuel = max_fuel
            .or(config.policy.max_fuel)
            .ok_or_else(|| Error::Config("reference fuel is neither configured nor calibrated".into()))?;
        let reward = RewardConfig::new(
            config.variant,
            config.policy.fuel_weight_for(config.variant),
            max_fuel,
            base.assembly.max_mouth_area(),
            config.capture.cqi_threshold,
        )?;
        if let Some(m) = &surrogate {
            if m.spec.variant != config.variant {
                return Err(Error::VariantMismatch {
                    expected: config.variant.to_string(),
                    actual: m.spec.variant.to_string(),
                });
            }
        }
        Ok(Self {
            config: config.clone(),
            bounds: ScenarioBounds::default(),
            reward,
            surrogate,
            base,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn mu_count(&self) -> usize {
        self.variant().mu_count()
    }

    /// Simulation with the debris placed at the scenario position.
    pub fn simulation(&self, scenario: &Scenario) -> Result<Simulation> {
        if scenario.debris == self.base.config.debris.position && scenario.variant == self.variant() {
            scenario.validate(&self.bounds)?;
            return Ok(self.base.clone());
        }
        scenario_simulation(&self.config, scenario, &self.bounds)
    }

    pub fn aiming_points(&self, scenario: &Scenario, action: &AimingAction) -> Result<Vec<nalgebra::Vector3<f64>>> {
        let nominal = nominal_aiming(
            &scenario.debris_position(),
            self.variant(),
            self.config.policy.raw_nominal_table,
        );
        apply_action(&nominal, action)
    }

    /// Legalizes `action` under `bounds`, runs the episode and scores it.
    pub fn execute(
        &self,
        scenario: &Scenario,
        action: &AimingAction,
        mode: CaptureMode,
        bounds: BoundPolicy,
    ) -> Result<EpisodeOutcome> {
        let (action, clipped) = action.legalize(self.bounds.action, bounds)?;
        let sim = self.simulation(scenario)?;
        let aiming = self.aiming_points(scenario, &action)?;
        let physics = stream_rng(scenario.seed, PHYSICS_STREAM);
        let mut deployment = sim.deploy(aiming, physics, LogOptions::default())?;
        let max_area = sim.assembly.max_mouth_area();
        let cqi_threshold = self.config.capture.cqi_threshold;

        let metrics: CaptureMetrics = match mode {
            CaptureMode::FullCapture => {
                let log = sim.capture(&mut deployment, LogOptions::default())?;
                evaluate_capture(&log, self.variant(), max_area, cqi_threshold)
            }
            CaptureMode::SurrogateCapture => {
                let model = self
                    .surrogate
                    .as_ref()
                    .ok_or_else(|| Error::Config("surrogate mode needs a trained surrogate model".into()))?;
                let mut log = CaptureLog {
                    trigger_time: deployment.trigger.fired_at,
                    mouth_area_at_trigger: deployment.mouth_area_at_trigger,
                    fuel_per_mu: deployment.controller.fuel_per_mu(),
                    diverged: deployment.diverged.is_some(),
                    ..Default::default()
                };
                if deployment.triggered() && !log.diverged {
                    let features = extract_window_features(deployment.history.iter(), &sim.assembly, &model.spec)?;
                    let mut rng = stream_rng(scenario.seed, SURROGATE_STREAM);
                    let p = model.noisy_predict(&features, &mut rng)?;
                    // Only the index itself is predicted.
                    log.settled = Some(CqiSample {
                        time: deployment.state.time + self.config.capture.settle_time,
                        cqi: p.cqi,
                        hull_volume: f64::NAN,
                        hull_surface: f64::NAN,
                        offset: f64::NAN,
                        degenerate: false,
                    });
                    log.locked_pairs = p.locked_pairs;
                }
                evaluate_capture(&log, self.variant(), max_area, cqi_threshold)
            }
        };
        Ok(self.score(scenario, action, clipped, mode, &metrics))
    }

    fn score(
        &self,
        scenario: &Scenario,
        action: AimingAction,
        clipped: bool,
        mode: CaptureMode,
        m: &CaptureMetrics,
    ) -> EpisodeOutcome {
        let triggered = !matches!(m.failure, Some(FailureReason::NoTrigger) | Some(FailureReason::Diverged));
        let sentinel = self.config.policy.no_trigger_cqi;
        let inputs = if triggered {
            RewardInputs {
                mouth_area: m.mouth_area_at_trigger,
                settled_cqi: m.settled_cqi,
                locked_pairs: m.locked_pairs,
                total_fuel: m.total_fuel(),
            }
        } else {
            RewardInputs {
                mouth_area: 0.0,
                settled_cqi: sentinel,
                locked_pairs: 0,
                total_fuel: m.total_fuel(),
            }
        };
        let terms = reward_terms(&inputs, &self.reward);
        EpisodeOutcome {
            scenario: *scenario,
            action,
            clipped,
            mode,
            triggered,
            mouth_area: m.mouth_area_at_trigger,
            settled_cqi: m.settled_cqi,
            locked_pairs: m.locked_pairs,
            fuel_per_mu: m.fuel_per_mu.clone(),
            total_fuel: m.total_fuel(),
            success: m.success,
            failure: m.failure,
            reward: terms.total(),
            terms,
        }
    }

    /// Scenario as the policy's state vector.
    pub fn state_of(scenario: &Scenario) -> Vec<f64> {
        scenario.debris.to_vec()
    }

    /// Samples offsets from `policy` with `rng` and runs the episode.
    pub fn run_episode(
        &self,
        policy: &PolicyModel,
        scenario: &Scenario,
        mode: CaptureMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<EpisodeRecord> {
        let state = Self::state_of(scenario);
        let s = policy.sample(&state, rng)?;
        let outcome = self.execute(
            scenario,
            &AimingAction::from_flat(&s.action),
            mode,
            self.config.policy.training_bounds,
        )?;
        Ok(EpisodeRecord {
            state,
            raw_action: s.action,
            log_prob: s.log_prob,
            value: s.value,
            outcome,
        })
    }

    /// Runs the policy's mean offsets in full capture.
    pub fn run_deterministic(&self, policy: &PolicyModel, scenario: &Scenario) -> Result<EpisodeOutcome> {
        let mean = policy.mean(&Self::state_of(scenario))?;
        self.execute(
            scenario,
            &AimingAction::from_flat(&mean),
            CaptureMode::FullCapture,
            self.config.policy.evaluation_bounds,
        )
    }
}
