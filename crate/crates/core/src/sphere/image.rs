use std::path::Path;
use std::sync::Arc;

use image::{DynamicImage, ImageBuffer, Luma};
use nalgebra::Vector3;

use super::grid::EquirectGrid;
use crate::error::{Error, Result};

/// Scalar intensities sampled row-major on an [`EquirectGrid`].
#[derive(Debug, Clone)]
pub struct SphericalImage {
    grid: Arc<EquirectGrid>,
    values: Vec<f64>,
}

impl SphericalImage {
    pub fn new(grid: Arc<EquirectGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch(values.len(), grid.len()));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite intensity at cell {bad}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every cell direction.
    pub fn from_fn(grid: Arc<EquirectGrid>, f: impl Fn(Vector3<f64>) -> f64) -> Self {
        let values = grid.directions().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<EquirectGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid.width() + col]
    }

    /// Pointwise product with a weight field evaluated per direction.
    pub fn weighted(&self, w: impl Fn(Vector3<f64>) -> f64) -> Self {
        let values = self
            .grid
            .directions()
            .zip(&self.values)
            .map(|(s, v)| w(s) * v)
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Loads an equirectangular 8/16-bit grayscale PGM or PNG, normalised to `[0, 1]`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let (width, height) = (img.width() as usize, img.height() as usize);
        let values: Vec<f64> = match img {
            DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
            DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
            other => other.to_luma16().pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        };
        let grid = Arc::new(EquirectGrid::new(height, width)?);
        Self::new(grid, values)
    }

    /// Writes a 16-bit PGM; intensities are clamped to `[0, 1]`.
    pub fn save_pgm16(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (h, w) = self.grid.dims();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
            w as u32,
            h as u32,
            self.values
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
                .collect(),
        )
        .expect("buffer size matches grid");
        buf.save_with_format(path, image::ImageFormat::Pnm)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let grid = Arc::new(EquirectGrid::square(4).unwrap());
        assert!(SphericalImage::new(grid.clone(), vec![0.0; 5]).is_err());
        let mut v = vec![0.0; 32];
        v[3] = f64::NAN;
        assert!(SphericalImage::new(grid, v).is_err());
    }

    #[test]
    fn pgm16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Arc::new(EquirectGrid::square(8).unwrap());
        let img = SphericalImage::from_fn(grid, |s| 0.5 + 0.5 * s.z);
        let path = dir.path().join("frame.pgm");
        img.save_pgm16(&path).unwrap();
        let back = SphericalImage::load(&path).unwrap();
        assert_eq!(back.grid().dims(), (8, 16));
        for (a, b) in img.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn loads_8bit_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame.png");
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_fn(16, 8, |x, _| Luma([if x < 8 { 0 } else { 255 }]));
        buf.save(&path).unwrap();
        let img = SphericalImage::load(&path).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(7, 15), 1.0);
    }
}
