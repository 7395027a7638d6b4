use serde::{Deserialize, Serialize};

use crate::config::Variant;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Weight of the fuel bonus on successful captures.
    pub fuel_weight: f64,
    /// Reference total fuel, kg.
    pub max_fuel: f64,
    /// Mouth area of the flat net, m².
    pub max_mouth_area: f64,
    pub cqi_threshold: f64,
    pub locked_threshold: usize,
}

impl RewardConfig {
    pub fn new(variant: Variant, fuel_weight: f64, max_fuel: f64, max_mouth_area: f64, cqi_threshold: f64) -> Result<Self> {
        let cfg = Self {
            fuel_weight,
            max_fuel,
            max_mouth_area,
            cqi_threshold,
            locked_threshold: variant.locked_pair_threshold(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fuel weight", self.fuel_weight),
            ("reference fuel", self.max_fuel),
            ("maximum mouth area", self.max_mouth_area),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Outcome quantities the reward is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardInputs {
    pub mouth_area: f64,
    pub settled_cqi: f64,
    pub locked_pairs: usize,
    pub total_fuel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub mouth_bonus: f64,
    pub cqi_penalty: f64,
    pub locked_penalty: f64,
    pub fuel_bonus: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.mouth_bonus + self.cqi_penalty + self.locked_penalty + self.fuel_bonus
    }
}

/// Mouth-opening bonus, log-barrier penalties on the quality index and the
/// locked-pair shortfall, and a fuel bonus paid only on success.
pub fn reward_terms(inputs: &RewardInputs, cfg: &RewardConfig) -> RewardTerms {
    let cqi = inputs.settled_cqi;
    let nl = inputs.locked_pairs as f64;
    let nt = cfg.locked_threshold as f64;
    let cqi_penalty = if cqi > cfg.cqi_threshold {
        -((cqi - cfg.cqi_threshold).powi(2) + 1.0).ln()
    } else {
        0.0
    };
    let locked_penalty = if inputs.locked_pairs < cfg.locked_threshold {
        -((nl - nt).powi(2) + 1.0).ln()
    } else {
        0.0
    };
    let success = cqi <= cfg.cqi_threshold && inputs.locked_pairs >= cfg.locked_threshold;
    RewardTerms {
        mouth_bonus: inputs.mouth_area / cfg.max_mouth_area,
        cqi_penalty,
        locked_penalty,
        fuel_bonus: if success {
            cfg.fuel_weight * (1.0 - inputs.total_fuel / cfg.max_fuel)
        } else {
            0.0
        },
    }
}

pub fn reward(inputs: &RewardInputs, cfg: &RewardConfig) -> f64 {
    reward_terms(inputs, cfg).total()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(w: f64) -> RewardConfig {
        RewardConfig::new(Variant::FourMu, w, 0.2, 432.64, 2.5).unwrap()
    }

    fn inputs(a: f64, cqi: f64, nl: usize, fuel: f64) -> RewardInputs {
        RewardInputs {
            mouth_area: a,
            settled_cqi: cqi,
            locked_pairs: nl,
            total_fuel: fuel,
        }
    }

    #[test]
    fn boundary_case_is_one() {
        let c = cfg(1.0);
        let r = reward(&inputs(432.64, 2.5, 8, 0.2), &c);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_fuel_free_capture() {
        assert!((reward(&inputs(432.64, 1.0, 8, 0.0), &cfg(1.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn total_miss() {
        // (10 - 2.5)^2 + 1 = 57.25 and (0 - 8)^2 + 1 = 65.
        let expected = -(57.25f64).ln() - (65f64).ln();
        let r = reward(&inputs(0.0, 10.0, 0, 0.1), &cfg(1.0));
        assert!((r - expected).abs() < 1e-12);
        assert!((r + 8.22).abs() < 5e-3);
    }

    #[test]
    fn no_trigger_sentinel_is_finite() {
        let r = reward(&inputs(0.0, 50.0, 0, 0.3), &cfg(1.0));
        assert!(r.is_finite() && r < -8.0);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(RewardConfig::new(Variant::EightMu, 0.0, 1.0, 1.0, 2.5).is_err());
        assert!(RewardConfig::new(Variant::EightMu, 1.0, -1.0, 1.0, 2.5).is_err());
        assert_eq!(RewardConfig::new(Variant::EightMu, 1.5, 1.0, 1.0, 2.5).unwrap().locked_threshold, 6);
    }
}
