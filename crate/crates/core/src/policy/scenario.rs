use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{BoundPolicy, Variant};
use crate::error::{Error, Result};

/// Lattice spacing of scenario coordinates and action offsets, m.
pub const GRID_STEP: f64 = 0.1;

/// Snaps `v` to the nearest multiple of [`GRID_STEP`].
pub fn quantize(v: f64) -> f64 {
    let q = (v / GRID_STEP).round() * GRID_STEP;
    // Print-stable: strip the representation error of the multiplication.
    (q * 10.0).round() / 10.0
}

fn on_grid(v: f64) -> bool {
    (v / GRID_STEP - (v / GRID_STEP).round()).abs() < 1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    /// Symmetric bound of every action offset, m.
    pub action: f64,
}

impl Default for ScenarioBounds {
    fn default() -> Self {
        Self {
            x: (-9.0, 9.0),
            y: (-9.0, 9.0),
            z: (-60.0, -40.0),
            action: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Debris centre of mass, m.
    pub debris: [f64; 3],
    pub seed: u64,
    pub variant: Variant,
}

impl Scenario {
    pub fn debris_position(&self) -> Vector3<f64> {
        Vector3::from(self.debris)
    }

    pub fn validate(&self, bounds: &ScenarioBounds) -> Result<()> {
        let [x, y, z] = self.debris;
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo - 1e-9 && v <= hi + 1e-9;
        if !(inside(x, bounds.x) && inside(y, bounds.y) && inside(z, bounds.z)) {
            return Err(Error::Scenario(format!("debris at ({x}, {y}, {z})")));
        }
        if !self.debris.iter().all(|v| on_grid(*v)) {
            return Err(Error::Scenario(format!("debris ({x}, {y}, {z}) is off the 0.1 m grid")));
        }
        Ok(())
    }
}

/// Uniform draw over the lattice points inside `bounds`.
pub fn sample_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    bounds: &ScenarioBounds,
    variant: Variant,
) -> Scenario {
    let mut draw = |(lo, hi): (f64, f64)| {
        let steps = ((hi - lo) / GRID_STEP).round() as i64;
        quantize(lo + rng.gen_range(0..=steps) as f64 * GRID_STEP)
    };
    let debris = [draw(bounds.x), draw(bounds.y), draw(bounds.z)];
    Scenario {
        debris,
        seed: rng.gen(),
        variant,
    }
}

/// Per-MU aiming offsets in the x-y plane, m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AimingAction {
    pub offsets: Vec<[f64; 2]>,
}

impl AimingAction {
    pub fn zeros(mu_count: usize) -> Self {
        Self {
            offsets: vec![[0.0; 2]; mu_count],
        }
    }

    /// Interleaved `[dx1, dy1, dx2, dy2, ...]`.
    pub fn from_flat(values: &[f64]) -> Self {
        Self {
            offsets: values.chunks(2).map(|c| [c[0], c.get(1).copied().unwrap_or(0.0)]).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.offsets.iter().flat_map(|o| o.iter().copied()).collect()
    }

    pub fn quantized(&self) -> Self {
        Self {
            offsets: self.offsets.iter().map(|o| [quantize(o[0]), quantize(o[1])]).collect(),
        }
    }

    pub fn within(&self, bound: f64) -> bool {
        self.offsets
            .iter()
            .flatten()
            .all(|v| v.abs() <= bound + 1e-9)
    }

    /// Quantizes, then clips or rejects offsets outside `bound`.
    pub fn legalize(&self, bound: f64, policy: BoundPolicy) -> Result<(Self, bool)> {
        let q = self.quantized();
        if q.within(bound) {
            return Ok((q, false));
        }
        match policy {
            BoundPolicy::Clip => Ok((
                Self {
                    offsets: q
                        .offsets
                        .iter()
                        .map(|o| [quantize(o[0].clamp(-bound, bound)), quantize(o[1].clamp(-bound, bound))])
                        .collect(),
                },
                true,
            )),
            BoundPolicy::Reject => Err(Error::Scenario(format!(
                "action offset outside +/-{bound} m: {:?}",
                q.offsets
            ))),
        }
    }
}

/// Nominal end-of-deployment points around the debris.
///
/// Corners sit 12 m out on both axes and side midpoints 11.70-11.71 m out on
/// one axis, all in the plane of the debris. The printed reference table
/// repeats MU3's corner for MU4 and MU5's midpoint for MU8; `raw_table`
/// reproduces that verbatim, otherwise the symmetric completion is used.
pub fn nominal_aiming(debris: &Vector3<f64>, variant: Variant, raw_table: bool) -> Vec<Vector3<f64>> {
    let (mu4, mu8) = if raw_table {
        ((-12.0, 12.0), (0.0, -11.71))
    } else {
        ((12.0, 12.0), (0.0, 11.71))
    };
    let offsets: [(f64, f64); 8] = [
        (-12.0, -12.0),
        (12.0, -12.0),
        (-12.0, 12.0),
        mu4,
        (0.0, -11.71),
        (11.70, 0.0),
        (-11.71, 0.0),
        mu8,
    ];
    offsets[..variant.mu_count()]
        .iter()
        .map(|&(dx, dy)| debris + Vector3::new(dx, dy, 0.0))
        .collect()
}

/// Nominal points shifted by the action; z is left unchanged.
pub fn apply_action(nominal: &[Vector3<f64>], action: &AimingAction) -> Result<Vec<Vector3<f64>>> {
    if action.offsets.len() != nominal.len() {
        return Err(Error::WidthMismatch {
            expected: nominal.len(),
            actual: action.offsets.len(),
        });
    }
    Ok(nominal
        .iter()
        .zip(&action.offsets)
        .map(|(p, o)| p + Vector3::new(o[0], o[1], 0.0))
        .collect())
}
