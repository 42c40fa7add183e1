use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Orthonormality tolerance accepted by the conversions.
pub const ROTATION_TOL: f64 = 1e-6;

fn check_rotation(m: &Matrix3<f64>) -> Result<()> {
    let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
    let det = (m.determinant() - 1.0).abs();
    let err = ortho.max(det);
    if !(err <= ROTATION_TOL) {
        return Err(Error::NotRotation(err));
    }
    Ok(())
}

/// Rotation vector `θ û` of a rotation matrix, `θ ∈ [0, π]`.
pub fn rot_to_axis_angle(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    check_rotation(m)?;
    let v = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let s = v.norm();
    let c = (m.trace() - 1.0) * 0.5;
    let theta = s.atan2(c);
    if theta < 1e-300 {
        return Ok(Vector3::zeros());
    }
    if theta < PI - 1e-3 {
        return Ok(v * (theta / s));
    }
    // near π the skew part vanishes; read the axis off (R + Rᵀ)/2 - cos θ I = (1 - cos θ) u uᵀ
    let b = (m + m.transpose()) * 0.5 - Matrix3::identity() * c;
    let col = (0..3).max_by(|&a, &b2| b[(a, a)].total_cmp(&b[(b2, b2)])).unwrap_or(0);
    let mut u = b.column(col).into_owned().normalize();
    if u.dot(&v) < 0.0 {
        u = -u;
    }
    Ok(u * theta)
}

/// Rodrigues' formula.
pub fn axis_angle_to_rot(v: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let theta = v.norm();
    if !theta.is_finite() {
        return Err(Error::invalid("axis-angle vector is not finite"));
    }
    if theta > PI + 1e-6 {
        return Err(Error::invalid(format!("rotation angle {theta} exceeds pi")));
    }
    Ok(rodrigues(v))
}

fn rodrigues(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let k = v.cross_matrix();
    if theta < 1e-8 {
        return Matrix3::identity() + k + k * k * 0.5;
    }
    let (s, c) = theta.sin_cos();
    Matrix3::identity() + k * (s / theta) + k * k * ((1.0 - c) / (theta * theta))
}

/// Rotation by any finite rotation vector, without the `|v| <= π` check.
pub fn exp_map(v: &Vector3<f64>) -> Matrix3<f64> {
    rodrigues(v)
}

/// Angle of `Raᵀ Rb` in radians.
pub fn geodesic_error(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) * 0.5;
    c.clamp(-1.0, 1.0).acos()
}

/// Closest rotation in Frobenius norm.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * vt).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt
}

/// `R_n = ΔR_n R_{n-1}` starting from the identity, re-orthonormalised at
/// every step.
pub fn accumulate(deltas: &[Matrix3<f64>]) -> Vec<Matrix3<f64>> {
    let mut cur = Matrix3::identity();
    deltas
        .iter()
        .map(|d| {
            cur = nearest_rotation(&(d * cur));
            cur
        })
        .collect()
}

/// Uniformly distributed rotation from three uniforms in `[0, 1)`.
pub fn rotation_from_uniforms(u1: f64, u2: f64, u3: f64) -> Matrix3<f64> {
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t1, t2) = (2.0 * PI * u2, 2.0 * PI * u3);
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        b * t2.cos(),
        a * t1.sin(),
        a * t1.cos(),
        b * t2.sin(),
    ));
    *Rotation3::from(q).matrix()
}
