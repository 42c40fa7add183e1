use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use super::fit::{fit_adaptive, FitOptions, PolynomialMask};
use super::layout::layouts;
use super::profile::MaskSpec;
use crate::error::{Error, Result};
use crate::moments::{monomials, MomentCoefficientTable, MomentOrder, IMAG_ABS_TOL, IMAG_REL_TOL};
use crate::sphere::{lm_len, ShCoefficients};

/// One mask of a bank: the ideal parameters (absent for the identity mask)
/// and the fitted polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct BankMask {
    pub spec: Option<MaskSpec>,
    pub poly: PolynomialMask,
}

/// Precomputed masked coefficient rows `Υ^{(n)}_{ijk,lm}` for first-order
/// masked moments, three rows (x, y, z) per mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskBank {
    bandwidth: usize,
    masks: Vec<BankMask>,
    upsilon: Vec<Complex64>,
}

impl MaskBank {
    /// Fits each spec with `opts` and folds it into `table`.
    pub fn build(specs: &[MaskSpec], opts: &FitOptions, table: &MomentCoefficientTable) -> Result<Self> {
        let masks = specs
            .par_iter()
            .map(|s| {
                Ok(BankMask {
                    spec: Some(*s),
                    poly: fit_adaptive(s, opts)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_masks(masks, table)
    }

    /// Caps of range `r` centred by a named layout.
    pub fn caps(n: usize, r: f64, layout: &str, opts: &FitOptions, table: &MomentCoefficientTable) -> Result<Self> {
        let centers = layouts().create(layout)?.place(n)?;
        let specs = centers
            .into_iter()
            .map(|c| MaskSpec::cap(c, r))
            .collect::<Result<Vec<_>>>()?;
        Self::build(&specs, opts, table)
    }

    pub fn from_masks(masks: Vec<BankMask>, table: &MomentCoefficientTable) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::invalid("mask bank needs at least one mask"));
        }
        let max_deg = masks.iter().map(|m| m.poly.degree()).max().unwrap_or(0);
        if table.max_order() < max_deg + 1 {
            return Err(Error::invalid(format!(
                "coefficient table order {} too low for mask degree {max_deg} (needs {})",
                table.max_order(),
                max_deg + 1
            )));
        }
        let width = lm_len(table.bandwidth());
        let rows: Vec<Vec<Complex64>> = masks
            .par_iter()
            .map(|m| upsilon_rows(&m.poly, table, width))
            .collect::<Result<_>>()?;
        Ok(Self {
            bandwidth: table.bandwidth(),
            masks,
            upsilon: rows.concat(),
        })
    }

    pub(crate) fn from_raw(bandwidth: usize, masks: Vec<BankMask>, upsilon: Vec<Complex64>) -> Result<Self> {
        if upsilon.len() != masks.len() * 3 * lm_len(bandwidth) {
            return Err(Error::LengthMismatch(
                upsilon.len(),
                masks.len() * 3 * lm_len(bandwidth),
            ));
        }
        Ok(Self {
            bandwidth,
            masks,
            upsilon,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[BankMask] {
        &self.masks
    }

    pub fn centers(&self) -> Vec<Vector3<f64>> {
        self.masks.iter().map(|m| m.poly.center()).collect()
    }

    pub fn upsilon(&self) -> &[Complex64] {
        &self.upsilon
    }

    /// Row for mask `n`, component `axis` (0 = x, 1 = y, 2 = z).
    pub fn row(&self, n: usize, axis: usize) -> &[Complex64] {
        let w = lm_len(self.bandwidth);
        let start = (n * 3 + axis) * w;
        &self.upsilon[start..start + w]
    }

    /// Masked first-order moments `(m^{(n)}_100, m^{(n)}_010, m^{(n)}_001)`
    /// for every mask.
    pub fn masked_moments(&self, coeffs: &ShCoefficients) -> Result<Vec<Vector3<f64>>> {
        if coeffs.bandwidth() > self.bandwidth {
            return Err(Error::BandwidthMismatch {
                expected: self.bandwidth,
                actual: coeffs.bandwidth(),
            });
        }
        let c = coeffs.as_slice();
        (0..self.len())
            .map(|n| {
                let mut out = Vector3::zeros();
                for axis in 0..3 {
                    let row = &self.row(n, axis)[..c.len()];
                    let v: Complex64 = c.iter().zip(row).map(|(a, b)| a * b).sum();
                    if v.im.abs() > IMAG_REL_TOL * v.re.abs() + IMAG_ABS_TOL {
                        let o = MomentOrder::FIRST[axis];
                        return Err(Error::ImaginaryResidue {
                            i: o.i,
                            j: o.j,
                            k: o.k,
                            real: v.re,
                            imag: v.im,
                        });
                    }
                    out[axis] = v.re;
                }
                Ok(out)
            })
            .collect()
    }
}

fn upsilon_rows(mask: &PolynomialMask, table: &MomentCoefficientTable, width: usize) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); 3 * width];
    for (o, &a) in monomials(mask.degree()).iter().zip(mask.expanded()) {
        if a == 0.0 {
            continue;
        }
        // C^{ijk}_{lm} vanishes for l above the total order
        let len = lm_len((o.total() + 1).min(table.bandwidth()));
        for (axis, dst) in out.chunks_mut(width).enumerate() {
            let shifted = match axis {
                0 => o.shifted(1, 0, 0),
                1 => o.shifted(0, 1, 0),
                _ => o.shifted(0, 0, 1),
            };
            let row = table.row(shifted)?;
            for (d, c) in dst[..len].iter_mut().zip(&row[..len]) {
                *d += a * c;
            }
        }
    }
    Ok(out)
}
