use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tethernet::capture::{convex_hull_metrics, cqi_from_terms, mouth_area, TargetGeometry};
use tethernet::config::{BoundPolicy, ControllerConfig};
use tethernet::control::{pid_thrust, Measurement, MuControllerState};
use tethernet::dynamics::build_assembly;
use tethernet::policy::{
    clipped_objective, nominal_aiming, quantize, reward, reward_terms, sample_scenario, AimingAction, RewardConfig,
    RewardInputs, Scenario, ScenarioBounds,
};
use tethernet::surrogate::{extract_features, FeatureSpec};
use tethernet::{Config, Variant};

fn point() -> impl Strategy<Value = Vector3<f64>> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn reward_config(w: f64, max_fuel: f64, locked: usize) -> RewardConfig {
    RewardConfig {
        fuel_weight: w,
        max_fuel,
        max_mouth_area: 400.0,
        cqi_threshold: 2.5,
        locked_threshold: locked,
    }
}

proptest! {
    #[test]
    fn hull_grows_with_points(pts in prop::collection::vec(point(), 6..30), extra in point()) {
        let base = convex_hull_metrics(&pts);
        let mut more = pts.clone();
        more.push(extra);
        let grown = convex_hull_metrics(&more);
        prop_assert!(grown.volume >= base.volume * (1.0 - 1e-9) - 1e-9);
        prop_assert!(grown.surface_area >= base.surface_area * (1.0 - 1e-9) - 1e-9);
    }

    #[test]
    fn interior_points_leave_the_hull_unchanged(pts in prop::collection::vec(point(), 6..30), w in prop::collection::vec(0.0..1.0f64, 6)) {
        let base = convex_hull_metrics(&pts);
        let total: f64 = w.iter().sum::<f64>() + 1e-9;
        let inner: Vector3<f64> = pts.iter().zip(&w).map(|(p, wi)| p * (wi / total)).sum();
        let mut more = pts.clone();
        more.push(inner);
        let same = convex_hull_metrics(&more);
        prop_assert!((same.volume - base.volume).abs() <= 1e-9 * base.volume.max(1.0));
        prop_assert!((same.surface_area - base.surface_area).abs() <= 1e-9 * base.surface_area.max(1.0));
    }

    #[test]
    fn hull_is_translation_invariant(pts in prop::collection::vec(point(), 6..20), shift in point()) {
        let a = convex_hull_metrics(&pts);
        let moved: Vec<_> = pts.iter().map(|p| p + shift).collect();
        let b = convex_hull_metrics(&moved);
        prop_assert!((a.volume - b.volume).abs() <= 1e-8 * a.volume.max(1.0));
        prop_assert!((a.surface_area - b.surface_area).abs() <= 1e-8 * a.surface_area.max(1.0));
    }

    #[test]
    fn cqi_is_non_negative(v in 0.0..1e3f64, s in 0.0..1e3f64, q in 0.0..50.0f64) {
        let t = TargetGeometry::new(159.9, 59.9, 1.95).unwrap();
        prop_assert!(cqi_from_terms(v, s, q, &t) >= 0.0);
    }

    #[test]
    fn mouth_area_is_rigid_motion_invariant(angle in 0.0..std::f64::consts::TAU, shift in point(), r in 1.0..20.0f64) {
        let ring: Vec<Vector3<f64>> = (0..12)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 12.0;
                Vector3::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect();
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), angle);
        let moved: Vec<_> = ring.iter().map(|p| rot * p + shift).collect();
        let (a, b) = (mouth_area(&ring).unwrap(), mouth_area(&moved).unwrap());
        prop_assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn fuel_bonus_excludes_penalties(
        area in 0.0..400.0f64, settled in 0.0..15.0f64, locked in 0usize..=12,
        fuel in 0.0..2.0f64, w in 0.0..3.0f64, eight in any::<bool>(),
    ) {
        let c = reward_config(w, 0.5, if eight { 8 } else { 5 });
        let t = reward_terms(&RewardInputs { mouth_area: area, settled_cqi: settled, locked_pairs: locked, total_fuel: fuel }, &c);
        if t.fuel_bonus > 0.0 {
            prop_assert_eq!((t.cqi_penalty, t.locked_penalty), (0.0, 0.0));
        }
        prop_assert!((0.0..=1.0).contains(&t.mouth_bonus));
        prop_assert!(t.cqi_penalty <= 0.0 && t.locked_penalty <= 0.0);
    }

    #[test]
    fn reward_is_monotone(
        area in 0.0..400.0f64, settled in 0.0..2.5f64, f1 in 0.0..0.5f64, df in 0.0..0.5f64,
        c1 in 2.5..15.0f64, dc in 0.0..5.0f64, w in 0.0..1.5f64,
    ) {
        let c = reward_config(w, 0.5, 8);
        let at = |cqi: f64, fuel: f64, locked: usize| reward(&RewardInputs { mouth_area: area, settled_cqi: cqi, locked_pairs: locked, total_fuel: fuel }, &c);
        prop_assert!(at(settled, f1 + df, 8) <= at(settled, f1, 8));
        prop_assert!(at(c1 + dc, f1, 8) <= at(c1, f1, 8));
        // Successful captures within the reference fuel.
        let r = at(settled, f1, 8);
        prop_assert!(r >= 0.0 && r <= 1.0 + w + 1e-12);
        // Penalized failures stay below one.
        if c1 > 2.5 {
            prop_assert!(at(c1, f1, 3) < 1.0);
        }
    }

    #[test]
    fn clipped_objective_is_bounded(ratio in 0.0..5.0f64, adv in -10.0..10.0f64, clip in 0.05..0.5f64) {
        let (obj, _) = clipped_objective(ratio, adv, clip);
        prop_assert!(obj <= (1.0 + clip) * adv.abs() + 1e-12);
        prop_assert!(obj <= ratio * adv + 1e-12);
    }

    #[test]
    fn legal_actions_are_bounded_and_on_grid(raw in prop::collection::vec(-12.0..12.0f64, 8)) {
        let a = AimingAction::from_flat(&raw);
        let (clipped, changed) = a.legalize(5.0, BoundPolicy::Clip).unwrap();
        prop_assert!(clipped.within(5.0));
        for v in clipped.to_flat() {
            prop_assert!(v.abs() <= 5.0);
            prop_assert!(((v * 10.0).round() - v * 10.0).abs() < 1e-9);
        }
        let inside = raw.iter().all(|v| quantize(*v).abs() <= 5.0);
        prop_assert_eq!(a.legalize(5.0, BoundPolicy::Reject).is_ok(), inside);
        prop_assert_eq!(changed, !inside);
    }

    #[test]
    fn thrust_never_exceeds_the_axis_limit(
        p in point(), v in point(), target in point(), integral in point(),
    ) {
        let cfg = ControllerConfig::default();
        let mut c = MuControllerState { integral, ..Default::default() };
        let m = Measurement { position: p, velocity: v };
        let u = pid_thrust(&mut c, &m, &target, 0.05, &cfg).unwrap();
        prop_assert!(u.iter().all(|x| x.abs() <= cfg.thrust_limit_per_axis));
    }

    #[test]
    fn scenarios_round_trip(x in -9.0..9.0f64, y in -9.0..9.0f64, z in -60.0..-40.0f64, seed in any::<u64>()) {
        let s = Scenario { debris: [quantize(x), quantize(y), quantize(z)], seed, variant: Variant::EightMu };
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back, s);
        let a = AimingAction::from_flat(&[quantize(x) / 2.0, 5.0, -5.0, 0.1]).quantized();
        let back: AimingAction = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn nominal_points_translate_with_the_debris(shift in point()) {
        let a = nominal_aiming(&Vector3::zeros(), Variant::EightMu, false);
        let b = nominal_aiming(&shift, Variant::EightMu, false);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((q - p - shift).norm() < 1e-12);
        }
    }
}

#[test]
fn features_ignore_a_common_translation() {
    let mut config = Config::default();
    config.net.mesh = 9;
    let (assembly, mut state) = build_assembly(&config).unwrap();
    let spec = FeatureSpec::for_assembly(&assembly, None, 1);
    let before = extract_features(&state, &assembly, &spec).unwrap();
    for p in state.positions.iter_mut() {
        *p += Vector3::new(3.0, -7.0, 11.0);
    }
    for v in state.velocities.iter_mut() {
        *v += Vector3::new(0.5, 0.0, -1.0);
    }
    let after = extract_features(&state, &assembly, &spec).unwrap();
    assert_eq!(before.len(), spec.width());
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn scenario_sampling_statistics() {
    let bounds = ScenarioBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 100_000;
    let mut sum = [0.0; 3];
    for _ in 0..n {
        let s = sample_scenario(&mut rng, &bounds, Variant::FourMu);
        s.validate(&bounds).unwrap();
        for (acc, v) in sum.iter_mut().zip(s.debris) {
            assert!(((v * 10.0).round() - v * 10.0).abs() < 1e-9, "{v} is off the grid");
            *acc += v;
        }
    }
    // 2% of each axis's half-width around the box centre.
    let mean = sum.map(|s| s / n as f64);
    assert!(mean[0].abs() < 0.02 * 9.0, "{mean:?}");
    assert!(mean[1].abs() < 0.02 * 9.0, "{mean:?}");
    assert!((mean[2] + 50.0).abs() < 0.02 * 50.0, "{mean:?}");
}
