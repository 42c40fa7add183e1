//! Associated Legendre functions.
//!
//! All functions include the Condon–Shortley phase `(-1)^m`, so that
//! `P_1^1(x) = -(1 - x²)^{1/2}`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Unnormalised `P_l^m(x)` for `0 <= m <= l`, `|x| <= 1`.
///
/// Seeds the diagonal `P_m^m = (-1)^m (2m-1)!! (1-x²)^{m/2}` and recurses
/// upward in degree. Values overflow `f64` only well beyond `l = 128`.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::invalid(format!("order m={m} exceeds degree l={l}")));
    }
    if !(x.abs() <= 1.0) {
        return Err(Error::invalid(format!("argument x={x} outside [-1, 1]")));
    }
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    let mut odd = 1.0;
    for _ in 0..m {
        pmm *= -odd * somx2;
        odd += 2.0;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return Ok(pm1);
    }
    let mut pm2 = pmm;
    for ll in (m + 2)..=l {
        let p = (x * (2 * ll - 1) as f64 * pm1 - (ll + m - 1) as f64 * pm2) / (ll - m) as f64;
        pm2 = pm1;
        pm1 = p;
    }
    Ok(pm1)
}

/// Index of `(l, m)` with `0 <= m <= l` in a triangular layout.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Number of `(l, m >= 0)` pairs up to degree `lmax`.
#[inline]
pub fn tri_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Fully normalised `sqrt((2l+1)/4π · (l-m)!/(l+m)!) P_l^m(cos θ)` for every
/// `0 <= m <= l <= lmax`, written into `out` in [`tri_index`] order.
///
/// Uses the normalised diagonal seed and three-term recursion, which never
/// forms the factorials explicitly.
pub fn normalized_legendre_into(lmax: usize, cos_theta: f64, sin_theta: f64, out: &mut [f64]) {
    assert!(out.len() >= tri_len(lmax));
    let x = cos_theta;
    let mut diag = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            diag *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta;
        }
        out[tri_index(m, m)] = diag;
        if m == lmax {
            break;
        }
        let mut prev2 = diag;
        let mut prev1 = x * ((2 * m + 3) as f64).sqrt() * diag;
        out[tri_index(m + 1, m)] = prev1;
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            let p = a * (x * prev1 - b * prev2);
            out[tri_index(l, m)] = p;
            prev2 = prev1;
            prev1 = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_values() {
        assert_eq!(assoc_legendre(0, 0, 0.7).unwrap(), 1.0);
        assert_eq!(assoc_legendre(1, 0, 0.5).unwrap(), 0.5);
        assert_eq!(assoc_legendre(1, 1, 0.0).unwrap(), -1.0);
        // closed forms with the phase included
        let x: f64 = 0.3;
        let p22 = 3.0 * (1.0 - x * x);
        let p21 = -3.0 * x * (1.0 - x * x).sqrt();
        let p20 = 0.5 * (3.0 * x * x - 1.0);
        assert!((assoc_legendre(2, 2, x).unwrap() - p22).abs() < 1e-15);
        assert!((assoc_legendre(2, 1, x).unwrap() - p21).abs() < 1e-15);
        assert!((assoc_legendre(2, 0, x).unwrap() - p20).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(assoc_legendre(1, 2, 0.0).is_err());
        assert!(assoc_legendre(3, 1, 1.5).is_err());
        assert!(assoc_legendre(3, 1, f64::NAN).is_err());
    }

    #[test]
    fn normalized_matches_unnormalized() {
        let lmax = 20;
        let theta: f64 = 1.1;
        let mut out = vec![0.0; tri_len(lmax)];
        normalized_legendre_into(lmax, theta.cos(), theta.sin(), &mut out);
        for l in 0..=lmax {
            for m in 0..=l {
                let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| k as f64).product();
                let norm = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
                let expected = norm * assoc_legendre(l, m, theta.cos()).unwrap();
                let got = out[tri_index(l, m)];
                assert!(
                    (got - expected).abs() <= 1e-12 * expected.abs().max(1e-3),
                    "l={l} m={m}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn high_degree_is_finite() {
        for &x in &[-0.99, -0.5, 0.0, 0.3, 0.999] {
            let v = assoc_legendre(128, 128, x).unwrap();
            assert!(v.is_finite());
            let v = assoc_legendre(128, 3, x).unwrap();
            assert!(v.is_finite());
        }
    }
}
