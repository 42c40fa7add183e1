use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scene::unit_gaussian_vector;
use crate::error::{Error, Result};
use crate::rotation::{axis_angle_to_rot, nearest_rotation};

pub const DEFAULT_FRAMES: usize = 500;
pub const DEFAULT_MAX_STEP_DEG: f64 = 5.0;

/// Absolute camera rotations and the steps between them. `deltas[0]` is the
/// identity and `rotations[n] = deltas[n] rotations[n - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSequence {
    pub rotations: Vec<Matrix3<f64>>,
    pub deltas: Vec<Matrix3<f64>>,
}

impl GroundTruthSequence {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }
}

pub fn random_rotation_sequence(n: usize, max_step_deg: f64, seed: u64) -> Result<GroundTruthSequence> {
    if n == 0 {
        return Err(Error::invalid("sequence needs at least one frame"));
    }
    if !(max_step_deg > 0.0 && max_step_deg < 180.0) {
        return Err(Error::invalid(format!("max step {max_step_deg} deg outside (0, 180)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_step = max_step_deg.to_radians();
    let mut deltas = vec![Matrix3::identity()];
    let mut rotations = vec![Matrix3::identity()];
    for _ in 1..n {
        let axis = unit_gaussian_vector(&mut rng);
        let angle = rng.random_range(0.0..=max_step);
        let d = axis_angle_to_rot(&(axis * angle))?;
        let r = nearest_rotation(&(d * rotations.last().unwrap()));
        deltas.push(d);
        rotations.push(r);
    }
    Ok(GroundTruthSequence { rotations, deltas })
}
