use nalgebra::{Matrix3, Vector3};

use super::so3::rot_to_axis_angle;
use crate::error::{Error, Result};

/// A recovered rotation with its alignment residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationEstimate {
    pub matrix: Matrix3<f64>,
    pub axis_angle: Vector3<f64>,
    pub residual: f64,
}

impl RotationEstimate {
    pub fn new(matrix: Matrix3<f64>, residual: f64) -> Result<Self> {
        Ok(Self {
            axis_angle: rot_to_axis_angle(&matrix)?,
            matrix,
            residual,
        })
    }

    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
            axis_angle: Vector3::zeros(),
            residual: 0.0,
        }
    }
}

/// Normalised magnitude weights `|p_k| |q_k| / Σ`.
pub fn magnitude_weights(p: &[Vector3<f64>], q: &[Vector3<f64>]) -> Result<Vec<f64>> {
    let w: Vec<f64> = p.iter().zip(q).map(|(a, b)| a.norm() * b.norm()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateCloud { rank: 0 });
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// `sqrt(Σ w_k |R p_k - q_k|²)`.
pub fn weighted_rms(r: &Matrix3<f64>, p: &[Vector3<f64>], q: &[Vector3<f64>], w: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .zip(w)
        .map(|((a, b), wk)| wk * (r * a - b).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Weighted Kabsch: the rotation minimising `Σ w_k |R p_k - q_k|²`, with
/// `w_k ∝ |p_k| |q_k|`.
pub fn kabsch(p: &[Vector3<f64>], q: &[Vector3<f64>]) -> Result<RotationEstimate> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    if p.len() < 3 {
        return Err(Error::invalid(format!(
            "kabsch needs at least 3 points, got {}",
            p.len()
        )));
    }
    let w = magnitude_weights(p, q)?;
    kabsch_weighted(p, q, &w)
}

pub fn kabsch_weighted(p: &[Vector3<f64>], q: &[Vector3<f64>], w: &[f64]) -> Result<RotationEstimate> {
    let h: Matrix3<f64> = p.iter().zip(q).zip(w).map(|((a, b), wk)| a * b.transpose() * *wk).sum();
    let svd = h.svd(true, true);
    let s = svd.singular_values;
    let smax = s.max();
    let rank = s.iter().filter(|&&x| x > smax * 1e-10).count();
    if !(smax > 0.0) || rank < 2 {
        return Err(Error::DegenerateCloud { rank });
    }
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let mut diag = Vector3::repeat(1.0);
    diag[s.imin()] = d;
    let r = v * Matrix3::from_diagonal(&diag) * u.transpose();
    RotationEstimate::new(r, weighted_rms(&r, p, q, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::so3::{geodesic_error, rotation_from_uniforms};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                )
            })
            .collect()
    }

    fn random_rot(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        rotation_from_uniforms(rng.random(), rng.random(), rng.random())
    }

    #[test]
    fn identical_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = cloud(&mut rng, 20);
        let e = kabsch(&p, &p).unwrap();
        assert!((e.matrix - Matrix3::identity()).abs().max() < 1e-12);
        assert!(e.residual < 1e-12);
    }

    #[test]
    fn exact_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = cloud(&mut rng, 30);
            let r = random_rot(&mut rng);
            let q: Vec<_> = p.iter().map(|x| r * x).collect();
            let e = kabsch(&p, &q).unwrap();
            assert!((e.matrix - r).abs().max() < 1e-10);
            assert!((e.matrix.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_and_mismatched() {
        let line: Vec<_> = (1..6).map(|i| Vector3::new(1.0, 2.0, 3.0) * i as f64).collect();
        assert!(matches!(kabsch(&line, &line), Err(Error::DegenerateCloud { .. })));
        let zero = vec![Vector3::zeros(); 5];
        assert!(matches!(kabsch(&zero, &zero), Err(Error::DegenerateCloud { rank: 0 })));
        assert!(matches!(kabsch(&line, &line[..4]), Err(Error::LengthMismatch(5, 4))));
    }

    #[test]
    fn planar_cloud_still_proper_rotation() {
        // rank-2 clouds can tempt an SVD into a reflection
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<_> = cloud(&mut rng, 10)
            .into_iter()
            .map(|v| Vector3::new(v.x, v.y, 0.0))
            .collect();
        let r = random_rot(&mut rng);
        let q: Vec<_> = p.iter().map(|x| r * x).collect();
        let e = kabsch(&p, &q).unwrap();
        assert!((e.matrix - r).abs().max() < 1e-9);
        let mirrored: Vec<_> = p.iter().map(|x| Vector3::new(x.x, x.y, -x.z + 0.01 * x.x)).collect();
        let e = kabsch(&p, &mirrored).unwrap();
        assert!((e.matrix.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noisy_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut ok = 0;
        for _ in 0..1000 {
            let p = cloud(&mut rng, 100);
            let rms = (p.iter().map(|x| x.norm_squared()).sum::<f64>() / 100.0).sqrt();
            let r = random_rot(&mut rng);
            let noise = cloud(&mut rng, 100);
            let q: Vec<_> = p.iter().zip(&noise).map(|(x, n)| r * x + n * (0.01 * rms)).collect();
            if geodesic_error(&kabsch(&p, &q).unwrap().matrix, &r).to_degrees() <= 1.0 {
                ok += 1;
            }
        }
        assert!(ok >= 990, "{ok}");
    }
}
