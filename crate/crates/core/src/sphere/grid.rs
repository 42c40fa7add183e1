use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Cell-centred equirectangular sampling of the unit sphere.
///
/// Rows sample colatitude at `θ_i = π(i + ½)/height`, columns sample azimuth
/// at `φ_j = 2πj/width`. Row weights use Fejér's first rule on those nodes, so
/// `Σ_rows Σ_cols weight · f` is exact for any band-limited `f` whose
/// colatitude degree is below `height` and whose azimuthal frequency is below
/// `width`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectGrid {
    height: usize,
    width: usize,
    colatitudes: Vec<f64>,
    azimuths: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl EquirectGrid {
    pub const MIN_HEIGHT: usize = 4;
    pub const MIN_WIDTH: usize = 8;

    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height < Self::MIN_HEIGHT || width < Self::MIN_WIDTH {
            return Err(Error::invalid(format!(
                "grid {height}x{width}: need height >= {} and width >= {}",
                Self::MIN_HEIGHT,
                Self::MIN_WIDTH
            )));
        }
        let colatitudes: Vec<f64> = (0..height).map(|i| PI * (i as f64 + 0.5) / height as f64).collect();
        let azimuths = (0..width).map(|j| 2.0 * PI * j as f64 / width as f64).collect();
        let dphi = 2.0 * PI / width as f64;
        let quad_weights = colatitudes
            .iter()
            .map(|&theta| fejer_weight(height, theta) * dphi)
            .collect();
        Ok(Self {
            height,
            width,
            colatitudes,
            azimuths,
            quad_weights,
        })
    }

    /// The default `2n x n` layout.
    pub fn square(height: usize) -> Result<Self> {
        Self::new(height, 2 * height)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn colatitudes(&self) -> &[f64] {
        &self.colatitudes
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    /// Per-row weight of a single cell (already includes the `dφ` factor).
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Unit direction of cell `(row, col)`.
    pub fn direction(&self, row: usize, col: usize) -> Vector3<f64> {
        let (st, ct) = self.colatitudes[row].sin_cos();
        let (sp, cp) = self.azimuths[col].sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    /// Row-major iterator over all cell directions.
    pub fn directions(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        (0..self.height).flat_map(move |i| (0..self.width).map(move |j| self.direction(i, j)))
    }

    /// Sum of all cell weights; `4π` up to rounding.
    pub fn total_weight(&self) -> f64 {
        self.quad_weights.iter().sum::<f64>() * self.width as f64
    }

    /// Quadrature of a row-major sampled field.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values
            .chunks_exact(self.width)
            .zip(&self.quad_weights)
            .map(|(row, w)| w * row.iter().sum::<f64>())
            .sum()
    }
}

/// Fejér's first rule weight on `[-1, 1]` for Chebyshev node `cos θ`.
fn fejer_weight(n: usize, theta: f64) -> f64 {
    let s: f64 = (1..=n / 2)
        .map(|k| {
            let k = k as f64;
            (2.0 * k * theta).cos() / (4.0 * k * k - 1.0)
        })
        .sum();
    2.0 / n as f64 * (1.0 - 2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(EquirectGrid::new(0, 8).is_err());
        assert!(EquirectGrid::new(4, 0).is_err());
        assert!(EquirectGrid::new(3, 8).is_err());
        assert!(EquirectGrid::new(4, 8).is_ok());
    }

    #[test]
    fn coarse_grid_area() {
        let g = EquirectGrid::new(4, 8).unwrap();
        assert!((g.total_weight() - 4.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn fine_grid_area() {
        let g = EquirectGrid::new(256, 512).unwrap();
        let total = g.total_weight();
        assert!(((total - 4.0 * PI) / (4.0 * PI)).abs() < 1e-9, "{total}");
    }

    #[test]
    fn nodes_avoid_poles() {
        let g = EquirectGrid::square(16).unwrap();
        assert!(g.colatitudes().iter().all(|&t| t > 0.0 && t < PI));
        assert_eq!(g.width(), 32);
        assert!(g.quad_weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn integrates_polynomials_in_z_exactly() {
        // ∬ z^2 ds = 4π/3, ∬ z^6 ds = 4π/7
        let g = EquirectGrid::square(8).unwrap();
        let z2: Vec<f64> = g.directions().map(|s| s.z * s.z).collect();
        let z6: Vec<f64> = g.directions().map(|s| s.z.powi(6)).collect();
        assert!((g.integrate(&z2) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((g.integrate(&z6) - 4.0 * PI / 7.0).abs() < 1e-13);
    }
}
