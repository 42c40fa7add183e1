//! Equirectangular sampling, Legendre functions and the spherical-harmonic
//! transform.

mod grid;
mod harmonics;
mod image;
pub mod legendre;

pub use grid::EquirectGrid;
pub use harmonics::{lm_index, lm_len, sh_forward, sh_inverse, ShBasisTable, ShCoefficients};
pub use image::SphericalImage;
pub use legendre::assoc_legendre;
