use serde::{Deserialize, Serialize};

use crate::config::{MuFeatures, Variant};
use crate::dynamics::{NetAssembly, SystemState};
use crate::error::{Error, Result};

/// Which bodies feed the surrogate, and how many snapshots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub variant: Variant,
    pub node_count: usize,
    pub mu_features: MuFeatures,
    /// Number of consecutive sensor-tick snapshots, oldest first.
    pub window: usize,
}

impl FeatureSpec {
    /// Spec for the loops of `assembly` with the variant's default MU choice
    /// unless `mu_features` is given.
    pub fn for_assembly(assembly: &NetAssembly, mu_features: Option<MuFeatures>, window: usize) -> Self {
        Self {
            variant: assembly.variant,
            node_count: assembly.feature_node_count(),
            mu_features: mu_features.unwrap_or(default_mu_features(assembly.variant)),
            window: window.max(1),
        }
    }

    pub fn mu_indices(&self) -> Vec<usize> {
        match (self.mu_features, self.variant) {
            (MuFeatures::None, _) => Vec::new(),
            (MuFeatures::All, v) => (0..v.mu_count()).collect(),
            (MuFeatures::Side, Variant::EightMu) => (4..8).collect(),
            (MuFeatures::Side, Variant::FourMu) => Vec::new(),
        }
    }

    /// Bodies per snapshot.
    pub fn bodies(&self) -> usize {
        self.node_count + self.mu_indices().len()
    }

    /// Input width: position and velocity of every body in every snapshot.
    pub fn width(&self) -> usize {
        6 * self.bodies() * self.window
    }
}

/// Four-unit: nodes only; eight-unit: nodes plus the four side units.
pub fn default_mu_features(variant: Variant) -> MuFeatures {
    match variant {
        Variant::FourMu => MuFeatures::None,
        Variant::EightMu => MuFeatures::Side,
    }
}

/// Body indices in feature order: the three loops in order, then the MUs.
pub fn feature_bodies(assembly: &NetAssembly, spec: &FeatureSpec) -> Result<Vec<usize>> {
    if assembly.variant != spec.variant {
        return Err(Error::VariantMismatch {
            expected: spec.variant.to_string(),
            actual: assembly.variant.to_string(),
        });
    }
    if assembly.feature_node_count() != spec.node_count {
        return Err(Error::WidthMismatch {
            expected: spec.node_count,
            actual: assembly.feature_node_count(),
        });
    }
    let mut out: Vec<usize> = assembly.surrogate_loops.iter().flatten().copied().collect();
    out.extend(spec.mu_indices().into_iter().map(|j| assembly.layout.mu(j)));
    Ok(out)
}

/// Positions then velocities of the feature bodies relative to the debris.
pub fn extract_features(state: &SystemState, assembly: &NetAssembly, spec: &FeatureSpec) -> Result<Vec<f64>> {
    let bodies = feature_bodies(assembly, spec)?;
    let mut out = Vec::with_capacity(6 * bodies.len());
    push_snapshot(&mut out, state, assembly, &bodies);
    Ok(out)
}

fn push_snapshot(out: &mut Vec<f64>, state: &SystemState, assembly: &NetAssembly, bodies: &[usize]) {
    let d = assembly.layout.debris();
    let (p0, v0) = (state.positions[d], state.velocities[d]);
    for &b in bodies {
        out.extend((state.positions[b] - p0).iter());
    }
    for &b in bodies {
        out.extend((state.velocities[b] - v0).iter());
    }
}

/// Features over a trailing window of snapshots (oldest first). Short
/// histories repeat their oldest snapshot.
pub fn extract_window_features<'a>(
    history: impl IntoIterator<Item = &'a SystemState>,
    assembly: &NetAssembly,
    spec: &FeatureSpec,
) -> Result<Vec<f64>> {
    let states: Vec<&SystemState> = history.into_iter().collect();
    let Some(&first) = states.first() else {
        return Err(Error::InvalidInput("empty snapshot history".into()));
    };
    let bodies = feature_bodies(assembly, spec)?;
    let tail = &states[states.len().saturating_sub(spec.window)..];
    let mut out = Vec::with_capacity(spec.width());
    for _ in tail.len()..spec.window {
        push_snapshot(&mut out, first, assembly, &bodies);
    }
    for s in tail {
        push_snapshot(&mut out, s, assembly, &bodies);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::dynamics::build_assembly;
    use nalgebra::Vector3;

    #[test]
    fn reference_widths() {
        let mut c = Config::default();
        let (a, _) = build_assembly(&c).unwrap();
        assert_eq!(FeatureSpec::for_assembly(&a, None, 1).width(), 990);
        c.variant = Variant::EightMu;
        let (a, _) = build_assembly(&c).unwrap();
        assert_eq!(FeatureSpec::for_assembly(&a, None, 1).width(), 1014);
        assert_eq!(FeatureSpec::for_assembly(&a, None, 3).width(), 3 * 1014);
    }

    #[test]
    fn relative_frame() {
        let (a, mut s) = build_assembly(&Config::default()).unwrap();
        let spec = FeatureSpec::for_assembly(&a, None, 1);
        let base = extract_features(&s, &a, &spec).unwrap();
        let shift = Vector3::new(3.0, -7.0, 11.0);
        s.positions.iter_mut().for_each(|p| *p += shift);
        s.velocities.iter_mut().for_each(|v| *v += shift);
        let moved = extract_features(&s, &a, &spec).unwrap();
        for (x, y) in base.iter().zip(&moved) {
            assert!((x - y).abs() < 1e-9);
        }
        let d = s.positions[a.layout.debris()];
        s.positions.iter_mut().for_each(|p| *p = d);
        s.velocities.iter_mut().for_each(|v| *v = Vector3::zeros());
        assert!(extract_features(&s, &a, &spec).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_assembly_rejected() {
        let (a, s) = build_assembly(&Config::default()).unwrap();
        let mut spec = FeatureSpec::for_assembly(&a, None, 1);
        spec.node_count = 10;
        assert!(extract_features(&s, &a, &spec).is_err());
        spec = FeatureSpec::for_assembly(&a, None, 1);
        spec.variant = Variant::EightMu;
        assert!(extract_features(&s, &a, &spec).is_err());
    }
}
