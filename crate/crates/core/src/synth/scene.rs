use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{EquirectGrid, SphericalImage};

/// Gaussian bump in the angle from its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center: [f64; 3],
    pub width: f64,
    pub amplitude: f64,
}

/// Smooth random scene `f(s) = clip(Σ a exp(-(angle(s, c)/w)²), 0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFunction {
    pub seed: u64,
    pub blobs: Vec<Blob>,
}

pub const MIN_BLOB_WIDTH: f64 = 0.1;
pub const MAX_BLOB_WIDTH: f64 = 0.5;
pub const DEFAULT_BLOBS: usize = 20;

pub fn unit_gaussian_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn make_scene(seed: u64, n_blobs: usize) -> Result<SceneFunction> {
    if n_blobs == 0 {
        return Err(Error::invalid("scene needs at least one blob"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs = (0..n_blobs)
        .map(|_| {
            let c = unit_gaussian_vector(&mut rng);
            Blob {
                center: [c.x, c.y, c.z],
                width: rng.random_range(MIN_BLOB_WIDTH..=MAX_BLOB_WIDTH),
                amplitude: rng.random_range(0.3..=1.0),
            }
        })
        .collect();
    Ok(SceneFunction { seed, blobs })
}

impl SceneFunction {
    pub fn eval(&self, s: &Vector3<f64>) -> f64 {
        let s = s.normalize();
        let total: f64 = self
            .blobs
            .iter()
            .map(|b| {
                let c = Vector3::from(b.center);
                // atan2 keeps the angle accurate near the center
                let angle = s.cross(&c).norm().atan2(s.dot(&c));
                b.amplitude * (-(angle / b.width).powi(2)).exp()
            })
            .sum();
        total.clamp(0.0, 1.0)
    }
}

/// Which part of the sphere the camera sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visibility {
    #[default]
    WholeSphere,
    /// Only `s_z >= 0`; the rest is zero.
    HalfSphere,
}

/// `I(s) = f(Rᵀ s)`, evaluated per cell.
pub fn render(
    scene: &SceneFunction,
    r: &Matrix3<f64>,
    grid: &Arc<EquirectGrid>,
    visibility: Visibility,
) -> SphericalImage {
    let rt = r.transpose();
    SphericalImage::from_fn(grid.clone(), |s| {
        if visibility == Visibility::HalfSphere && s.z < 0.0 {
            0.0
        } else {
            scene.eval(&(rt * s))
        }
    })
}
