use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::capture::hull::{best_fit_plane, convex_hull_metrics, HullMetrics};
use crate::config::{CaptureConfig, Variant};
use crate::dynamics::{NetAssembly, SystemState};
use crate::error::{Error, Result};

/// Reference geometry of the debris used by the quality index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetGeometry {
    pub volume: f64,
    pub surface: f64,
    pub characteristic_length: f64,
}

impl TargetGeometry {
    pub fn new(volume: f64, surface: f64, characteristic_length: f64) -> Result<Self> {
        if !(volume > 0.0 && surface > 0.0 && characteristic_length > 0.0) {
            return Err(Error::Config("target geometry must be positive".into()));
        }
        Ok(Self {
            volume,
            surface,
            characteristic_length,
        })
    }

    pub fn from_config(config: &CaptureConfig) -> Result<Self> {
        Self::new(
            config.target_volume,
            config.target_surface,
            config.characteristic_length,
        )
    }
}

/// Capture quality index from hull volume, hull surface and COM offset.
pub fn cqi_from_terms(volume: f64, surface: f64, offset: f64, target: &TargetGeometry) -> f64 {
    0.1 * (volume - target.volume).abs() / target.volume
        + 0.1 * (surface - target.surface).abs() / target.surface
        + 0.8 * offset.abs() / target.characteristic_length
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqiSample {
    pub time: f64,
    pub cqi: f64,
    pub hull_volume: f64,
    pub hull_surface: f64,
    /// Distance between the net and debris centres of mass, m.
    pub offset: f64,
    pub degenerate: bool,
}

/// Quality index of the hull of `net_points` around the debris.
pub fn cqi(
    net_points: &[Vector3<f64>],
    net_com: &Vector3<f64>,
    debris_com: &Vector3<f64>,
    target: &TargetGeometry,
) -> CqiSample {
    let HullMetrics {
        volume,
        surface_area,
        degenerate,
    } = convex_hull_metrics(net_points);
    let offset = (net_com - debris_com).norm();
    CqiSample {
        time: f64::NAN,
        cqi: cqi_from_terms(volume, surface_area, offset, target),
        hull_volume: volume,
        hull_surface: surface_area,
        offset,
        degenerate,
    }
}

pub fn cqi_of_state(state: &SystemState, assembly: &NetAssembly, target: &TargetGeometry) -> CqiSample {
    let mut s = cqi(
        &state.net_points(assembly),
        &state.net_com(assembly),
        &state.debris_com(assembly),
        target,
    );
    s.time = state.time;
    s
}

/// Area of the closed polygon `perimeter` projected onto its best-fit plane.
pub fn mouth_area(perimeter: &[Vector3<f64>]) -> Result<f64> {
    if perimeter.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "mouth polygon needs at least 3 points, got {}",
            perimeter.len()
        )));
    }
    let (normal, centroid) = best_fit_plane(perimeter);
    let m = perimeter.len();
    let twice: Vector3<f64> = (0..m)
        .map(|i| (perimeter[i] - centroid).cross(&(perimeter[(i + 1) % m] - centroid)))
        .sum();
    Ok(0.5 * twice.dot(&normal).abs())
}

pub fn mouth_area_of_state(state: &SystemState, assembly: &NetAssembly) -> f64 {
    let pts: Vec<_> = assembly
        .perimeter_loop
        .iter()
        .map(|&i| state.positions[i])
        .collect();
    // The perimeter always has at least eight nodes.
    mouth_area(&pts).unwrap_or(0.0)
}

/// True once the net COM is within `threshold` of the debris COM.
pub fn closing_trigger(state: &SystemState, assembly: &NetAssembly, threshold: f64) -> bool {
    (state.net_com(assembly) - state.debris_com(assembly)).norm() <= threshold
}

/// Latching form of [`closing_trigger`]: fires once and stays fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerLatch {
    pub threshold: f64,
    pub fired_at: Option<f64>,
}

impl TriggerLatch {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            fired_at: None,
        }
    }

    /// Returns true only on the sample where the trigger first fires.
    pub fn update(&mut self, state: &SystemState, assembly: &NetAssembly) -> bool {
        if self.fired_at.is_some() {
            return false;
        }
        if closing_trigger(state, assembly, self.threshold) {
            self.fired_at = Some(state.time);
            return true;
        }
        false
    }

    pub fn fired(&self) -> bool {
        self.fired_at.is_some()
    }
}

/// Adjacent closing-loop node pairs (cyclic) closer than `lock_distance`.
pub fn winch_locked_pairs(state: &SystemState, assembly: &NetAssembly, lock_distance: f64) -> usize {
    let nodes = &assembly.closing_loop;
    let m = nodes.len();
    (0..m)
        .filter(|&k| {
            (state.positions[nodes[(k + 1) % m]] - state.positions[nodes[k]]).norm() <= lock_distance
        })
        .count()
}

pub fn locked_pairs(state: &SystemState, assembly: &NetAssembly, lock_distance: f64) -> usize {
    let n = match assembly.variant {
        Variant::FourMu => winch_locked_pairs(state, assembly, lock_distance),
        Variant::EightMu => state.docking_joints.len(),
    };
    n.min(assembly.variant.max_locked_pairs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    NoTrigger,
    Diverged,
    Cqi,
    LockedPairs,
    CqiAndLockedPairs,
}

/// What the capture phase of one episode produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CaptureLog {
    pub trigger_time: Option<f64>,
    pub mouth_area_at_trigger: f64,
    pub cqi_series: Vec<CqiSample>,
    /// Quality index at trigger + settle time.
    pub settled: Option<CqiSample>,
    pub locked_pairs: usize,
    pub fuel_per_mu: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMetrics {
    pub variant: Variant,
    pub cqi_series: Vec<CqiSample>,
    /// Infinite when the closing trigger never fired.
    #[serde(with = "crate::io::non_finite")]
    pub settled_cqi: f64,
    pub locked_pairs: usize,
    pub mouth_area_at_trigger: f64,
    pub max_mouth_area: f64,
    pub fuel_per_mu: Vec<f64>,
    pub trigger_time: Option<f64>,
    pub success: bool,
    pub failure: Option<FailureReason>,
}

impl CaptureMetrics {
    pub fn total_fuel(&self) -> f64 {
        self.fuel_per_mu.iter().sum()
    }
}

/// Applies the success rule to one episode's capture log.
pub fn evaluate_capture(
    log: &CaptureLog,
    variant: Variant,
    max_mouth_area: f64,
    cqi_threshold: f64,
) -> CaptureMetrics {
    let threshold = variant.locked_pair_threshold();
    let locked = log.locked_pairs.min(variant.max_locked_pairs());
    let settled_cqi = match (&log.settled, log.trigger_time) {
        (Some(s), Some(_)) if !log.diverged => s.cqi,
        _ => f64::INFINITY,
    };
    let failure = if log.diverged {
        Some(FailureReason::Diverged)
    } else if log.trigger_time.is_none() || log.settled.is_none() {
        Some(FailureReason::NoTrigger)
    } else {
        match (settled_cqi <= cqi_threshold, locked >= threshold) {
            (true, true) => None,
            (false, true) => Some(FailureReason::Cqi),
            (true, false) => Some(FailureReason::LockedPairs),
            (false, false) => Some(FailureReason::CqiAndLockedPairs),
        }
    };
    CaptureMetrics {
        variant,
        cqi_series: log.cqi_series.clone(),
        settled_cqi,
        locked_pairs: locked,
        mouth_area_at_trigger: log.mouth_area_at_trigger.max(0.0),
        max_mouth_area,
        fuel_per_mu: log.fuel_per_mu.clone(),
        trigger_time: log.trigger_time,
        success: failure.is_none(),
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Unit};

    fn target() -> TargetGeometry {
        TargetGeometry::new(159.9, 59.9, 1.95).unwrap()
    }

    #[test]
    fn cqi_hand_cases() {
        let t = target();
        assert_eq!(cqi_from_terms(159.9, 59.9, 0.0, &t), 0.0);
        assert!((cqi_from_terms(2.0 * 159.9, 59.9, 0.0, &t) - 0.1).abs() < 1e-12);
        assert!((cqi_from_terms(159.9, 59.9, 1.95, &t) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn square_mouth_area_is_rotation_invariant() {
        let sq = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        assert_relative_eq!(mouth_area(&sq).unwrap(), 1.0, epsilon = 1e-12);
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -1.0, 2.0)), 1.1);
        let moved: Vec<_> = sq.iter().map(|p| r * p + Vector3::new(4.0, -2.0, 9.0)).collect();
        assert!((mouth_area(&moved).unwrap() - 1.0).abs() < 1e-9);
        assert!(mouth_area(&sq[..2]).is_err());
    }

    fn log(cqi: f64, locked: usize) -> CaptureLog {
        CaptureLog {
            trigger_time: Some(30.0),
            settled: Some(CqiSample {
                time: 45.0,
                cqi,
                hull_volume: 0.0,
                hull_surface: 0.0,
                offset: 0.0,
                degenerate: false,
            }),
            locked_pairs: locked,
            ..CaptureLog::default()
        }
    }

    #[test]
    fn success_rule() {
        let a = 432.64;
        assert!(evaluate_capture(&log(1.2, 10), Variant::FourMu, a, 2.5).success);
        let e = evaluate_capture(&log(2.6, 12), Variant::FourMu, a, 2.5);
        assert_eq!(e.failure, Some(FailureReason::Cqi));
        let e = evaluate_capture(&log(1.0, 7), Variant::FourMu, a, 2.5);
        assert_eq!(e.failure, Some(FailureReason::LockedPairs));
        assert!(evaluate_capture(&log(1.0, 6), Variant::EightMu, a, 2.5).success);
        assert!(evaluate_capture(&log(2.5, 8), Variant::FourMu, a, 2.5).success);
    }

    #[test]
    fn no_trigger_sentinel() {
        let e = evaluate_capture(&CaptureLog::default(), Variant::FourMu, 432.64, 2.5);
        assert!(!e.success);
        assert_eq!(e.failure, Some(FailureReason::NoTrigger));
        assert_eq!(e.settled_cqi, f64::INFINITY);
        let text = serde_json::to_string(&e).unwrap();
        let back: CaptureMetrics = serde_json::from_str(&text).unwrap();
        assert_eq!(back.settled_cqi, f64::INFINITY);
    }
}
