//! Aiming-point policy: scenarios, nominal geometry, reward and training.

pub mod bandit;
pub mod ppo;
pub mod reward;
pub mod rollout;
pub mod scenario;

pub use bandit::{bandit_config, train_bandit, Bandit, BanditRun};
pub use ppo::{clipped_objective, gaussian_log_prob, PolicyModel, PpoConfig, Transition, UpdateStats};
pub use reward::{reward, reward_terms, RewardConfig, RewardInputs, RewardTerms};
pub use rollout::{scenario_simulation, stream_rng, Environment, EpisodeOutcome, EpisodeRecord};
pub use scenario::{
    apply_action, nominal_aiming, quantize, sample_scenario, AimingAction, Scenario,
    ScenarioBounds, GRID_STEP,
};
