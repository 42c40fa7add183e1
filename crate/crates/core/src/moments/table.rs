use num_complex::Complex64;
use rayon::prelude::*;

use super::order::{monomial_count, monomials, MomentOrder};
use crate::error::{Error, Result};
use crate::sphere::legendre::tri_index;
use crate::sphere::{lm_index, lm_len, ShBasisTable};

/// Precomputed `C^{ijk}_{lm} = ∬ x^i y^j z^k Y_lm ds`.
///
/// Stored flat, monomial-major with `(l, m)` innermost, so each moment is a
/// contiguous dot product against a coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCoefficientTable {
    bandwidth: usize,
    max_order: usize,
    grid_dims: (usize, usize),
    entries: Vec<Complex64>,
}

impl MomentCoefficientTable {
    /// Builds every entry with `i + j + k <= max_order` and `l <= bandwidth`.
    ///
    /// The quadrature is factored into a colatitude sum and an azimuth sum;
    /// both are exact when the grid resolves degree `bandwidth + max_order`.
    pub fn build(basis: &ShBasisTable, bandwidth: usize, max_order: usize) -> Result<Self> {
        if bandwidth > basis.bandwidth() {
            return Err(Error::BandwidthMismatch {
                expected: basis.bandwidth(),
                actual: bandwidth,
            });
        }
        let grid = basis.grid();
        let need = bandwidth + max_order + 1;
        if grid.height() < need || grid.width() < need {
            return Err(Error::InsufficientResolution {
                what: format!("moment table (bandwidth {bandwidth}, order {max_order})"),
                height: grid.height(),
                width: grid.width(),
                min_height: need.max(2 * (bandwidth + 1)),
                min_width: need,
            });
        }
        let lmax = bandwidth;
        let (height, width) = grid.dims();

        // Θ[s][k][tri(l,m)] = Σ_rows w sin^s θ cos^k θ P̄_l^m(cos θ)
        let pairs: Vec<(usize, usize)> = (0..=max_order)
            .flat_map(|s| (0..=max_order - s).map(move |k| (s, k)))
            .collect();
        let tl = crate::sphere::legendre::tri_len(lmax);
        let theta_sums: Vec<Vec<f64>> = pairs
            .par_iter()
            .map(|&(s, k)| {
                let mut acc = vec![0.0; tl];
                for row in 0..height {
                    let t = grid.colatitudes()[row];
                    let f = grid.quad_weights()[row] * t.sin().powi(s as i32) * t.cos().powi(k as i32);
                    for (a, &p) in acc.iter_mut().zip(basis.legendre_row(row)) {
                        *a += f * p;
                    }
                }
                acc
            })
            .collect();
        let theta_at = |s: usize, k: usize| -> &Vec<f64> {
            let idx = pairs.iter().position(|&p| p == (s, k)).expect("pair enumerated");
            &theta_sums[idx]
        };

        // Φ[i][j][m + lmax] = Σ_cols cos^i φ sin^j φ e^{imφ}
        let phi_pairs = pairs.clone();
        let phi_sums: Vec<Vec<Complex64>> = phi_pairs
            .par_iter()
            .map(|&(i, j)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); 2 * lmax + 1];
                for col in 0..width {
                    let phi = grid.azimuths()[col];
                    let f = phi.cos().powi(i as i32) * phi.sin().powi(j as i32);
                    if f == 0.0 {
                        continue;
                    }
                    for m in 0..=lmax {
                        let e = basis.phase(col, m) * f;
                        acc[lmax + m] += e;
                        if m > 0 {
                            acc[lmax - m] += e.conj();
                        }
                    }
                }
                acc
            })
            .collect();
        let phi_at = |i: usize, j: usize| -> &Vec<Complex64> {
            let idx = phi_pairs.iter().position(|&p| p == (i, j)).expect("pair enumerated");
            &phi_sums[idx]
        };

        let orders = monomials(max_order);
        let stride = lm_len(lmax);
        let mut entries = vec![Complex64::new(0.0, 0.0); orders.len() * stride];
        entries
            .par_chunks_mut(stride)
            .zip(orders.par_iter())
            .for_each(|(out, o)| {
                let theta = theta_at(o.i + o.j, o.k);
                let phi = phi_at(o.i, o.j);
                for l in 0..=lmax {
                    for m in -(l as i64)..=(l as i64) {
                        let am = m.unsigned_abs() as usize;
                        let mut v = phi[(lmax as i64 + m) as usize] * theta[tri_index(l, am)];
                        if m < 0 && am % 2 == 1 {
                            v = -v;
                        }
                        out[lm_index(l, m)] = v;
                    }
                }
            });
        Ok(Self {
            bandwidth,
            max_order,
            grid_dims: grid.dims(),
            entries,
        })
    }

    /// Reassembles a table from raw storage (cache loading).
    pub fn from_raw(
        bandwidth: usize,
        max_order: usize,
        grid_dims: (usize, usize),
        entries: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = monomial_count(max_order as isize) * lm_len(bandwidth);
        if entries.len() != expected {
            return Err(Error::LengthMismatch(entries.len(), expected));
        }
        Ok(Self {
            bandwidth,
            max_order,
            grid_dims,
            entries,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        self.grid_dims
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    fn check(&self, order: MomentOrder) -> Result<()> {
        if order.total() > self.max_order {
            return Err(Error::OrderOutOfRange {
                i: order.i,
                j: order.j,
                k: order.k,
                max_order: self.max_order,
            });
        }
        Ok(())
    }

    /// The `(l, m)` row for one monomial.
    pub fn row(&self, order: MomentOrder) -> Result<&[Complex64]> {
        self.check(order)?;
        let stride = lm_len(self.bandwidth);
        let start = order.index() * stride;
        Ok(&self.entries[start..start + stride])
    }

    pub fn get(&self, order: MomentOrder, l: usize, m: i64) -> Result<Complex64> {
        if l > self.bandwidth || m.unsigned_abs() as usize > l {
            return Err(Error::invalid(format!("(l={l}, m={m}) outside table")));
        }
        Ok(self.row(order)?[lm_index(l, m)])
    }
}

/// Direct two-dimensional quadrature of a single `C^{ijk}_{lm}`.
pub fn moment_coeff(l: usize, m: i64, order: MomentOrder, basis: &ShBasisTable) -> Result<Complex64> {
    if l > basis.bandwidth() || m.unsigned_abs() as usize > l {
        return Err(Error::invalid(format!(
            "(l={l}, m={m}) outside basis bandwidth {}",
            basis.bandwidth()
        )));
    }
    let grid = basis.grid();
    let mut acc = Complex64::new(0.0, 0.0);
    for row in 0..grid.height() {
        let w = grid.quad_weights()[row];
        for col in 0..grid.width() {
            let s = grid.direction(row, col);
            acc += basis.y(l, m, row, col) * (w * order.eval(s.x, s.y, s.z));
        }
    }
    Ok(acc)
}
