use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Soft spherical-cap mask parameters.
///
/// The weight depends only on `t = s · center`: zero below `z0 - r`, the
/// one-sided Gaussian `exp(-((t - (z0 + r)) / σ)^g)` on `[z0 - r, z0 + r]`
/// and one above `z0 + r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub center: [f64; 3],
    pub z0: f64,
    pub r: f64,
    pub sigma: f64,
    pub exponent: u32,
}

impl MaskSpec {
    pub fn new(center: Vector3<f64>, z0: f64, r: f64, sigma: f64, exponent: u32) -> Result<Self> {
        let n = center.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::invalid("mask center must be a nonzero finite vector"));
        }
        let c = center / n;
        if !(r > 0.0) || !(sigma > 0.0) {
            return Err(Error::invalid(format!(
                "mask needs r > 0 and sigma > 0 (r={r}, sigma={sigma})"
            )));
        }
        if !(z0 > -1.0 && z0 < 1.0) || z0 + r > 1.0 + 1e-12 || z0 - r < -1.0 - 1e-12 {
            return Err(Error::invalid(format!(
                "mask transition [{}, {}] leaves [-1, 1]",
                z0 - r,
                z0 + r
            )));
        }
        if exponent < 2 || !exponent.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "profile exponent {exponent} must be even and >= 2"
            )));
        }
        Ok(Self {
            center: [c.x, c.y, c.z],
            z0,
            r,
            sigma,
            exponent,
        })
    }

    /// Cap of range `r` whose weight peaks on the center direction:
    /// `z0 = 1 - r`, `σ = r / 2`, `g = 2`.
    pub fn cap(center: Vector3<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid(format!("cap range {r} outside (0, 1)")));
        }
        Self::new(center, 1.0 - r, r, r / 2.0, 2)
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    pub fn with_center(&self, center: Vector3<f64>) -> Self {
        let c = center.normalize();
        Self {
            center: [c.x, c.y, c.z],
            ..*self
        }
    }

    /// Ideal weight at axis coordinate `t`.
    pub fn profile(&self, t: f64) -> f64 {
        mask_profile(t, self)
    }
}

pub fn mask_profile(t: f64, spec: &MaskSpec) -> f64 {
    let lo = spec.z0 - spec.r;
    let hi = spec.z0 + spec.r;
    if t < lo {
        0.0
    } else if t > hi {
        1.0
    } else {
        let u = (t - hi) / spec.sigma;
        (-u.powi(spec.exponent as i32)).exp()
    }
}
