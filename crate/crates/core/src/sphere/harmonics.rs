use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::EquirectGrid;
use super::image::SphericalImage;
use super::legendre::{normalized_legendre_into, tri_index, tri_len};
use crate::error::{Error, Result};

/// Flat index of `(l, m)` for `-l <= m <= l`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Number of `(l, m)` pairs up to degree `bandwidth`.
#[inline]
pub fn lm_len(bandwidth: usize) -> usize {
    (bandwidth + 1) * (bandwidth + 1)
}

/// Spherical-harmonic samples on a grid, stored factored as normalised
/// Legendre values per row and `e^{imφ}` per column.
#[derive(Debug, Clone)]
pub struct ShBasisTable {
    grid: Arc<EquirectGrid>,
    bandwidth: usize,
    /// `height x tri_len(bandwidth)`
    legendre: Vec<f64>,
    /// `width x (bandwidth + 1)`, entry `e^{imφ_j}`
    phase: Vec<Complex64>,
}

impl ShBasisTable {
    pub fn new(grid: Arc<EquirectGrid>, bandwidth: usize) -> Result<Self> {
        let min_height = 2 * (bandwidth + 1);
        let min_width = 2 * bandwidth + 1;
        if grid.height() < min_height || grid.width() < min_width {
            return Err(Error::InsufficientResolution {
                what: format!("spherical-harmonic bandwidth {bandwidth}"),
                height: grid.height(),
                width: grid.width(),
                min_height,
                min_width,
            });
        }
        let tl = tri_len(bandwidth);
        let mut legendre = vec![0.0; grid.height() * tl];
        legendre
            .par_chunks_mut(tl)
            .zip(grid.colatitudes().par_iter())
            .for_each(|(row, &theta)| normalized_legendre_into(bandwidth, theta.cos(), theta.sin(), row));
        let mut phase = Vec::with_capacity(grid.width() * (bandwidth + 1));
        for &phi in grid.azimuths() {
            for m in 0..=bandwidth {
                phase.push(Complex64::from_polar(1.0, m as f64 * phi));
            }
        }
        Ok(Self {
            grid,
            bandwidth,
            legendre,
            phase,
        })
    }

    pub fn grid(&self) -> &Arc<EquirectGrid> {
        &self.grid
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Normalised `P̄_l^m(cos θ_row)` for `m >= 0`.
    #[inline]
    pub fn legendre(&self, row: usize, l: usize, m: usize) -> f64 {
        self.legendre[row * tri_len(self.bandwidth) + tri_index(l, m)]
    }

    /// Legendre values of one row in triangular order.
    pub fn legendre_row(&self, row: usize) -> &[f64] {
        let tl = tri_len(self.bandwidth);
        &self.legendre[row * tl..(row + 1) * tl]
    }

    #[inline]
    pub fn phase(&self, col: usize, m: usize) -> Complex64 {
        self.phase[col * (self.bandwidth + 1) + m]
    }

    /// `Y_lm(θ_row, φ_col)` for any `-l <= m <= l`.
    pub fn y(&self, l: usize, m: i64, row: usize, col: usize) -> Complex64 {
        let am = m.unsigned_abs() as usize;
        let base = self.phase(col, am) * self.legendre(row, l, am);
        if m >= 0 {
            base
        } else {
            let s = if am.is_multiple_of(2) { 1.0 } else { -1.0 };
            base.conj() * s
        }
    }
}

/// Complex coefficients `Î_lm` of a band-limited spherical function.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoefficients {
    bandwidth: usize,
    coeffs: Vec<Complex64>,
}

impl ShCoefficients {
    pub fn zeros(bandwidth: usize) -> Self {
        Self {
            bandwidth,
            coeffs: vec![Complex64::new(0.0, 0.0); lm_len(bandwidth)],
        }
    }

    pub fn from_vec(bandwidth: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lm_len(bandwidth) {
            return Err(Error::LengthMismatch(coeffs.len(), lm_len(bandwidth)));
        }
        Ok(Self { bandwidth, coeffs })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        self.coeffs[lm_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, value: Complex64) {
        self.coeffs[lm_index(l, m)] = value;
    }

    /// Low-pass filter: zero every degree above `cutoff`.
    pub fn lowpass(&self, cutoff: usize) -> Self {
        let mut out = self.clone();
        if cutoff < self.bandwidth {
            out.coeffs[lm_len(cutoff)..].fill(Complex64::new(0.0, 0.0));
        }
        out
    }

    /// `Σ |Î_lm|²`, equal to `∬ I² ds` for real band-limited `I`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Energy carried by degrees strictly above `l`.
    pub fn energy_above(&self, l: usize) -> f64 {
        if l >= self.bandwidth {
            return 0.0;
        }
        self.coeffs[lm_len(l)..].iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Forward transform by quadrature: `Î_lm = Σ w · I · conj(Y_lm)`.
pub fn sh_forward(image: &SphericalImage, basis: &ShBasisTable) -> Result<ShCoefficients> {
    let grid = basis.grid();
    if image.grid().dims() != grid.dims() {
        return Err(Error::GridMismatch {
            expected: grid.dims(),
            actual: image.grid().dims(),
        });
    }
    let lmax = basis.bandwidth();
    let width = grid.width();
    // Per row: F_i(m) = w_i Σ_j I_ij e^{-imφ_j}, m >= 0.
    let row_sums: Vec<Vec<Complex64>> = image
        .values()
        .par_chunks_exact(width)
        .enumerate()
        .map(|(row, vals)| {
            let mut f = vec![Complex64::new(0.0, 0.0); lmax + 1];
            for (col, &v) in vals.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (m, fm) in f.iter_mut().enumerate() {
                    *fm += basis.phase(col, m).conj() * v;
                }
            }
            let w = grid.quad_weights()[row];
            f.iter_mut().for_each(|c| *c *= w);
            f
        })
        .collect();

    let mut out = ShCoefficients::zeros(lmax);
    for l in 0..=lmax {
        for m in 0..=l {
            let mut acc = Complex64::new(0.0, 0.0);
            for (row, f) in row_sums.iter().enumerate() {
                acc += f[m] * basis.legendre(row, l, m);
            }
            out.set(l, m as i64, acc);
            if m > 0 {
                // I real: F(-m) = conj(F(m)), Y_{l,-m} = (-1)^m conj(Y_lm)
                let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                out.set(l, -(m as i64), acc.conj() * s);
            }
        }
    }
    Ok(out)
}

/// Inverse transform `I(s) = Re Σ Î_lm Y_lm(s)`.
pub fn sh_inverse(coeffs: &ShCoefficients, basis: &ShBasisTable) -> Result<SphericalImage> {
    if coeffs.bandwidth() > basis.bandwidth() {
        return Err(Error::BandwidthMismatch {
            expected: basis.bandwidth(),
            actual: coeffs.bandwidth(),
        });
    }
    let grid = basis.grid().clone();
    let lmax = coeffs.bandwidth();
    let width = grid.width();
    let mut values = vec![0.0; grid.len()];
    values.par_chunks_exact_mut(width).enumerate().for_each(|(row, out)| {
        // G(m) for m >= 0 and m < 0 separately; Y_{l,-m} = (-1)^m P̄ e^{-imφ}
        let mut pos = vec![Complex64::new(0.0, 0.0); lmax + 1];
        let mut neg = vec![Complex64::new(0.0, 0.0); lmax + 1];
        for l in 0..=lmax {
            for m in 0..=l {
                let p = basis.legendre(row, l, m);
                pos[m] += coeffs.get(l, m as i64) * p;
                if m > 0 {
                    let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                    neg[m] += coeffs.get(l, -(m as i64)) * (p * s);
                }
            }
        }
        for (col, v) in out.iter_mut().enumerate() {
            let mut acc = pos[0];
            for m in 1..=lmax {
                let e = basis.phase(col, m);
                acc += pos[m] * e + neg[m] * e.conj();
            }
            *v = acc.re;
        }
    });
    SphericalImage::new(grid, values)
}
