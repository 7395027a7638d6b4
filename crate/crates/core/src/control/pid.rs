use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ControllerConfig;
use crate::error::{Error, Result};

/// Linear ramp from `r0` at `t = 0` to `r_final` at `t_final`, held afterwards.
pub fn desired_position(
    t: f64,
    r0: &Vector3<f64>,
    r_final: &Vector3<f64>,
    t_final: f64,
) -> Result<Vector3<f64>> {
    if !(t_final > 0.0) {
        return Err(Error::Config(format!("t_final must be positive, got {t_final}")));
    }
    let s = (t.max(0.0) / t_final).min(1.0);
    Ok(r0 + (r_final - r0) * s)
}

/// Sampled MU position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Per-axis Gaussian sensor with independent position and velocity noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensor {
    pub position_sigma: f64,
    pub velocity_sigma: f64,
}

impl Sensor {
    /// Noise bounds are 3-sigma values.
    pub fn from_bounds(pos_3sigma: f64, vel_3sigma: f64) -> Self {
        Self {
            position_sigma: pos_3sigma / 3.0,
            velocity_sigma: vel_3sigma / 3.0,
        }
    }

    pub fn from_config(config: &ControllerConfig) -> Self {
        Self::from_bounds(config.pos_noise_3sigma, config.vel_noise_3sigma)
    }

    pub fn sense<R: Rng + ?Sized>(
        &self,
        position: &Vector3<f64>,
        velocity: &Vector3<f64>,
        rng: &mut R,
    ) -> Measurement {
        // Always draw so the stream advances identically whatever the bounds.
        let mut noise = || -> Vector3<f64> {
            Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            )
        };
        let dp = noise() * self.position_sigma;
        let dv = noise() * self.velocity_sigma;
        Measurement {
            position: position + dp,
            velocity: velocity + dv,
        }
    }
}

/// Propellant mass for thrust `|f|` held over `dt`.
pub fn fuel_increment(thrust: &Vector3<f64>, dt: f64, isp: f64, g0: f64) -> f64 {
    thrust.norm() * dt / (g0 * isp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuControllerState {
    /// Running integral of the position error, m s.
    pub integral: Vector3<f64>,
    pub last_command: Vector3<f64>,
    pub last_measurement: Option<Measurement>,
    pub fuel_used: f64,
    pub active: bool,
}

impl Default for MuControllerState {
    fn default() -> Self {
        Self {
            integral: Vector3::zeros(),
            last_command: Vector3::zeros(),
            last_measurement: None,
            fuel_used: 0.0,
            active: true,
        }
    }
}

/// A measurement with a non-finite component reached the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFault {
    pub measurement: Measurement,
}

/// One command tick of `u = kp e - kd v + ki I`, clamped per axis.
///
/// The integral used in the command is the one accumulated over previous
/// ticks; the current error is added afterwards. Fuel for the tick is charged
/// on the saturated command.
pub fn pid_thrust(
    controller: &mut MuControllerState,
    measured: &Measurement,
    desired: &Vector3<f64>,
    dt_command: f64,
    config: &ControllerConfig,
) -> std::result::Result<Vector3<f64>, SensorFault> {
    controller.last_measurement = Some(*measured);
    let finite = measured.position.iter().chain(measured.velocity.iter()).all(|x| x.is_finite());
    if !controller.active || !finite {
        controller.last_command = Vector3::zeros();
        return if finite {
            Ok(Vector3::zeros())
        } else {
            Err(SensorFault {
                measurement: *measured,
            })
        };
    }
    let error = desired - measured.position;
    let raw =
        error * config.kp - measured.velocity * config.kd + controller.integral * config.ki;
    let limit = config.thrust_limit_per_axis;
    let command = raw.map(|u| u.clamp(-limit, limit));
    controller.integral += error * dt_command;
    controller.fuel_used += fuel_increment(&command, dt_command, config.isp, config.g0);
    controller.last_command = command;
    Ok(command)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at_rest(position: Vector3<f64>) -> Measurement {
        Measurement {
            position,
            velocity: Vector3::zeros(),
        }
    }

    #[test]
    fn ramp_midpoint_and_hold() {
        let (a, b) = (Vector3::zeros(), Vector3::new(10.0, -20.0, 4.0));
        assert_eq!(desired_position(12.5, &a, &b, 25.0).unwrap(), Vector3::new(5.0, -10.0, 2.0));
        assert_eq!(desired_position(0.0, &a, &b, 25.0).unwrap(), a);
        assert_eq!(desired_position(25.0, &a, &b, 25.0).unwrap(), b);
        assert_eq!(desired_position(90.0, &a, &b, 25.0).unwrap(), b);
        assert!(desired_position(1.0, &a, &b, 0.0).is_err());
    }

    #[test]
    fn proportional_command_saturates() {
        let cfg = ControllerConfig::default();
        let mut c = MuControllerState::default();
        let u = pid_thrust(&mut c, &at_rest(Vector3::zeros()), &Vector3::x(), 0.05, &cfg).unwrap();
        assert_eq!(u, Vector3::new(5.1, 0.0, 0.0));
    }

    #[test]
    fn mixed_proportional_damping() {
        let cfg = ControllerConfig::default();
        let mut c = MuControllerState::default();
        let m = Measurement {
            position: Vector3::new(0.0, 0.0, 0.2),
            velocity: Vector3::new(0.0, 0.0, 0.5),
        };
        let u = pid_thrust(&mut c, &m, &Vector3::zeros(), 0.05, &cfg).unwrap();
        assert!((u.z + 5.0).abs() < 1e-12);
        assert_eq!(c.integral, Vector3::new(0.0, 0.0, -0.2 * 0.05));
    }

    #[test]
    fn null_input_gives_zero_and_no_fuel() {
        let cfg = ControllerConfig::default();
        let mut c = MuControllerState::default();
        let u = pid_thrust(&mut c, &at_rest(Vector3::zeros()), &Vector3::zeros(), 0.05, &cfg).unwrap();
        assert_eq!(u, Vector3::zeros());
        assert_eq!(c.fuel_used, 0.0);
    }

    #[test]
    fn non_finite_measurement_faults_with_zero_command() {
        let cfg = ControllerConfig::default();
        let mut c = MuControllerState::default();
        c.last_command = Vector3::new(1.0, 1.0, 1.0);
        let bad = at_rest(Vector3::new(f64::NAN, 0.0, 0.0));
        assert!(pid_thrust(&mut c, &bad, &Vector3::zeros(), 0.05, &cfg).is_err());
        assert_eq!(c.last_command, Vector3::zeros());
    }

    #[test]
    fn fuel_matches_closed_form() {
        let f = Vector3::new(5.1, 0.0, 0.0);
        let total: f64 = (0..200).map(|_| fuel_increment(&f, 0.05, 60.0, 9.81)).sum();
        assert!((total - 5.1 * 10.0 / (9.81 * 60.0)).abs() < 1e-12);
        let m = fuel_increment(&Vector3::new(3.0, 4.0, 0.0), 1.0, 60.0, 9.81);
        assert!((m - 8.4947e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_noise_sensor_is_exact() {
        let s = Sensor::from_bounds(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, v) = (Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.5, 0.0));
        let m = s.sense(&p, &v, &mut rng);
        assert_eq!((m.position, m.velocity), (p, v));
    }

    #[test]
    fn sensor_sigma_statistics() {
        let s = Sensor::from_bounds(0.1, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum_sq = Vector3::zeros();
        for _ in 0..n {
            let m = s.sense(&Vector3::zeros(), &Vector3::zeros(), &mut rng);
            sum_sq += m.position.component_mul(&m.position);
        }
        for axis in 0..3 {
            let sigma = (sum_sq[axis] / n as f64).sqrt();
            assert!((sigma / (0.1 / 3.0) - 1.0).abs() < 0.05, "axis {axis}: {sigma}");
        }
    }

    #[test]
    fn free_mu_converges_without_noise() {
        // Double integrator with 2.5 kg mass under the default gains. Steps of a
        // few metres wind the integrator up past recovery, so keep it modest.
        let cfg = ControllerConfig::default();
        let mut c = MuControllerState::default();
        let (dt, spt, m) = (1e-3, 50, 2.5);
        let target = Vector3::new(1.0, -0.8, 0.5);
        let (mut x, mut v, mut u) = (Vector3::zeros(), Vector3::zeros(), Vector3::zeros());
        for k in 0..20_000 {
            if k % spt == 0 {
                u = pid_thrust(&mut c, &Measurement { position: x, velocity: v }, &target, 0.05, &cfg)
                    .unwrap();
            }
            v += u / m * dt;
            x += v * dt;
        }
        assert!((target - x).norm() < 1e-2, "error {}", (target - x).norm());
    }
}
