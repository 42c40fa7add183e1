//! Spherical moments `m_ijk = ∬ x^i y^j z^k I(s) ds`, evaluated either by
//! direct quadrature or straight from spherical-harmonic coefficients.

mod order;
mod table;

use num_complex::Complex64;

pub use order::{monomial_count, monomials, MomentOrder};
pub use table::{moment_coeff, MomentCoefficientTable};

use crate::error::{Error, Result};
use crate::sphere::{ShCoefficients, SphericalImage};

/// Relative imaginary residue tolerated before a harmonic-domain moment is
/// rejected as a convention error.
pub const IMAG_REL_TOL: f64 = 1e-7;
pub const IMAG_ABS_TOL: f64 = 1e-9;

/// Real moment values keyed by order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    entries: Vec<(MomentOrder, f64)>,
}

impl MomentVector {
    pub fn get(&self, order: MomentOrder) -> Option<f64> {
        self.entries.iter().find(|(o, _)| *o == order).map(|&(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(MomentOrder, f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(m_100, m_010, m_001)` when present.
    pub fn first_order(&self) -> Option<[f64; 3]> {
        Some([
            self.get(MomentOrder::X)?,
            self.get(MomentOrder::Y)?,
            self.get(MomentOrder::Z)?,
        ])
    }
}

impl FromIterator<(MomentOrder, f64)> for MomentVector {
    fn from_iter<T: IntoIterator<Item = (MomentOrder, f64)>>(iter: T) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Every moment up to a total order, indexed by [`MomentOrder::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    max_order: usize,
    values: Vec<f64>,
}

impl MomentSet {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    #[inline]
    pub fn get(&self, order: MomentOrder) -> f64 {
        self.values[order.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn real_part(order: MomentOrder, value: Complex64) -> Result<f64> {
    if value.im.abs() > IMAG_REL_TOL * value.re.abs() + IMAG_ABS_TOL {
        return Err(Error::ImaginaryResidue {
            i: order.i,
            j: order.j,
            k: order.k,
            real: value.re,
            imag: value.im,
        });
    }
    Ok(value.re)
}

fn dot(coeffs: &[Complex64], row: &[Complex64]) -> Complex64 {
    coeffs.iter().zip(row).map(|(a, b)| a * b).sum()
}

fn check_bandwidth(coeffs: &ShCoefficients, table: &MomentCoefficientTable) -> Result<()> {
    if coeffs.bandwidth() > table.bandwidth() {
        return Err(Error::BandwidthMismatch {
            expected: table.bandwidth(),
            actual: coeffs.bandwidth(),
        });
    }
    Ok(())
}

/// `m_ijk = Σ_lm Î_lm C^{ijk}_{lm}` for each requested order.
pub fn moments_from_sh(
    coeffs: &ShCoefficients,
    table: &MomentCoefficientTable,
    orders: &[MomentOrder],
) -> Result<MomentVector> {
    check_bandwidth(coeffs, table)?;
    let c = coeffs.as_slice();
    orders
        .iter()
        .map(|&o| {
            let row = table.row(o)?;
            Ok((o, real_part(o, dot(c, &row[..c.len()]))?))
        })
        .collect()
}

/// Every moment the table can produce, up to `max_order`.
pub fn moment_set_from_sh(
    coeffs: &ShCoefficients,
    table: &MomentCoefficientTable,
    max_order: usize,
) -> Result<MomentSet> {
    check_bandwidth(coeffs, table)?;
    let c = coeffs.as_slice();
    let values = monomials(max_order)
        .into_iter()
        .map(|o| {
            // C^{ijk}_{lm} vanishes for l > i+j+k, so the dot product can stop there.
            let len = crate::sphere::lm_len(o.total().min(coeffs.bandwidth()));
            let row = table.row(o)?;
            real_part(o, dot(&c[..len], &row[..len]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentSet { max_order, values })
}

/// Direct quadrature `Σ w · x^i y^j z^k · I` over the grid.
pub fn moments_direct(image: &SphericalImage, orders: &[MomentOrder]) -> MomentVector {
    let grid = image.grid();
    orders
        .iter()
        .map(|&o| {
            let weighted: Vec<f64> = grid
                .directions()
                .zip(image.values())
                .map(|(s, v)| v * o.eval(s.x, s.y, s.z))
                .collect();
            (o, grid.integrate(&weighted))
        })
        .collect()
}
