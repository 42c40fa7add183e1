use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use fvg_core::lbto::{Mlp, Standardizer, TrainConfig};
use fvg_core::mask::{fit_adaptive, FitOptions, MaskBank, MaskSpec};
use fvg_core::moments::{moments_direct, moments_from_sh, monomials, MomentCoefficientTable};
use fvg_core::rotation::{
    accumulate, axis_angle_to_rot, geodesic_error, kabsch, kabsch_weighted, rotation_from_uniforms,
};
use fvg_core::sphere::{
    assoc_legendre, sh_forward, sh_inverse, EquirectGrid, ShBasisTable, ShCoefficients, SphericalImage,
};
use nalgebra::{Matrix3, Vector3};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

/// `P_l(x)` coefficients in ascending powers, exact.
fn legendre_poly(l: usize) -> Vec<BigRational> {
    let binom = |n: usize, k: usize| -> BigInt {
        (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
    };
    let mut c = vec![BigRational::zero(); l + 1];
    let scale = BigRational::new(BigInt::one(), BigInt::from(2).pow(l as u32));
    for k in 0..=l / 2 {
        let sign = if k % 2 == 0 { BigInt::one() } else { -BigInt::one() };
        let v = sign * binom(l, k) * binom(2 * l - 2 * k, l);
        c[l - 2 * k] = BigRational::from_integer(v) * &scale;
    }
    c
}

/// `P_l^m(x)` by exact differentiation of `P_l` at a rational point; only the
/// final `(1 - x²)^{m/2}` factor is taken in floating point.
fn legendre_oracle(l: usize, m: usize, x: &BigRational) -> f64 {
    let mut c = legendre_poly(l);
    for _ in 0..m {
        c = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(p, a)| a * BigRational::from_integer(BigInt::from(p)))
            .collect();
    }
    let mut acc = BigRational::zero();
    for a in c.iter().rev() {
        acc = acc * x + a;
    }
    let xf = x.to_f64().unwrap();
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * acc.to_f64().unwrap() * (1.0 - xf * xf).powf(m as f64 / 2.0)
}

#[test]
fn legendre_matches_exact_series() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(64);
    let xs: Vec<BigRational> = (0..100)
        .map(|_| BigRational::new(BigInt::from(rng.random_range(-9999i64..=9999)), BigInt::from(10000)))
        .collect();
    let mut worst: f64 = 0.0;
    for (k, x) in xs.iter().enumerate() {
        // cycle through degrees so the 100 points cover l = 0..=64
        for l in [k % 65, 64] {
            for m in (0..=l).step_by(7).chain([l]) {
                let exact = legendre_oracle(l, m, x);
                let got = assoc_legendre(l, m, x.to_f64().unwrap()).unwrap();
                if exact.abs() > 1e-200 {
                    let rel = (got - exact).abs() / exact.abs();
                    worst = worst.max(rel);
                    assert!(rel < 1e-10, "l={l} m={m} x={x}: {got} vs {exact}");
                }
            }
        }
    }
    eprintln!("worst relative Legendre error {worst:e}");
}

struct Fixture {
    basis: ShBasisTable,
    table: MomentCoefficientTable,
}

const L: usize = 16;

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let basis = ShBasisTable::new(Arc::new(EquirectGrid::new(64, 128).unwrap()), L).unwrap();
        let table = MomentCoefficientTable::build(&basis, L, 13).unwrap();
        Fixture { basis, table }
    })
}

fn real_coeffs(values: &[f64]) -> ShCoefficients {
    let mut c = ShCoefficients::zeros(L);
    let mut it = values.iter().copied().cycle();
    for l in 0..=L {
        let a = 1.0 / (1.0 + l as f64);
        c.set(l, 0, Complex64::new(a * it.next().unwrap(), 0.0));
        for m in 1..=l as i64 {
            let v = Complex64::new(it.next().unwrap(), it.next().unwrap()) * a;
            c.set(l, m, v);
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            c.set(l, -m, v.conj() * s);
        }
    }
    c
}

fn coeff_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 97)
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c)| rotation_from_uniforms(a, b, c))
}

fn cloud(n: usize) -> impl Strategy<Value = Vec<Vector3<f64>>> {
    prop::collection::vec(
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vector3::new(x, y, z)),
        n,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sht_round_trip_parseval_and_symmetry(v in coeff_values()) {
        let f = fixture();
        let c = real_coeffs(&v);
        let img = sh_inverse(&c, &f.basis).unwrap();
        let back = sh_forward(&img, &f.basis).unwrap();
        let again = sh_inverse(&back, &f.basis).unwrap();
        for (a, b) in img.values().iter().zip(again.values()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        let sq: Vec<f64> = img.values().iter().map(|x| x * x).collect();
        let spatial = f.basis.grid().integrate(&sq);
        prop_assert!(((back.energy() - spatial) / spatial).abs() < 1e-6);
        for l in 0..=L {
            for m in 1..=l as i64 {
                let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((back.get(l, -m) - back.get(l, m).conj() * s).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn harmonic_moments_match_quadrature(v in coeff_values()) {
        let f = fixture();
        let c = real_coeffs(&v);
        let img = sh_inverse(&c, &f.basis).unwrap();
        let orders = monomials(3);
        let h = moments_from_sh(&c, &f.table, &orders).unwrap();
        let d = moments_direct(&img, &orders);
        for &o in &orders {
            let (a, b) = (h.get(o).unwrap(), d.get(o).unwrap());
            prop_assert!((a - b).abs() <= 1e-6 * b.abs() + 1e-9, "{o:?}: {a} vs {b}");
        }
    }

    #[test]
    fn moments_are_linear(v in coeff_values(), w in coeff_values(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let f = fixture();
        let (c1, c2) = (real_coeffs(&v), real_coeffs(&w));
        let mix: Vec<Complex64> = c1.as_slice().iter().zip(c2.as_slice()).map(|(a, b)| a * alpha + b * beta).collect();
        let mix = ShCoefficients::from_vec(L, mix).unwrap();
        let orders = monomials(4);
        let (m1, m2, mm) = (
            moments_from_sh(&c1, &f.table, &orders).unwrap(),
            moments_from_sh(&c2, &f.table, &orders).unwrap(),
            moments_from_sh(&mix, &f.table, &orders).unwrap(),
        );
        for &o in &orders {
            let want = alpha * m1.get(o).unwrap() + beta * m2.get(o).unwrap();
            prop_assert!((mm.get(o).unwrap() - want).abs() < 1e-12 * (1.0 + want.abs()) * 10.0);
        }
    }

    #[test]
    fn first_moments_rotate_with_band_limited_images(r in rotation()) {
        let f = fixture();
        let poly = |s: Vector3<f64>| 0.5 + 0.3 * s.x * s.y - 0.2 * s.z.powi(3) + 0.4 * s.y + 0.1 * s.x * s.z * s.z;
        let grid = f.basis.grid().clone();
        let a = SphericalImage::from_fn(grid.clone(), poly);
        let b = SphericalImage::from_fn(grid, |s| poly(r.transpose() * s));
        let first = fvg_core::moments::MomentOrder::FIRST;
        let ma = moments_direct(&a, &first).first_order().unwrap();
        let mb = moments_direct(&b, &first).first_order().unwrap();
        let rotated = r * Vector3::from(ma);
        prop_assert!((rotated - Vector3::from(mb)).amax() < 1e-6);
    }

    #[test]
    fn kabsch_equivariance(p in cloud(12), r in rotation(), a in rotation()) {
        let q: Vec<Vector3<f64>> = p.iter().map(|x| r * x).collect();
        let ap: Vec<Vector3<f64>> = p.iter().map(|x| a * x).collect();
        let aq: Vec<Vector3<f64>> = q.iter().map(|x| a * x).collect();
        let base = kabsch(&p, &q).unwrap().matrix;
        let conj = kabsch(&ap, &aq).unwrap().matrix;
        prop_assert!((conj - a * base * a.transpose()).amax() < 1e-9);
    }

    #[test]
    fn kabsch_never_reflects(p in cloud(10), flip in 0usize..3, eps in 1e-9f64..1e-3) {
        // mirrored target with a small perturbation: the best orthogonal map is a reflection
        let q: Vec<Vector3<f64>> = p
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let mut y = *x;
                y[flip] = -y[flip];
                y + Vector3::repeat(eps * k as f64)
            })
            .collect();
        let w = vec![1.0; p.len()];
        if let Ok(e) = kabsch_weighted(&p, &q, &w) {
            prop_assert!((e.matrix.determinant() - 1.0).abs() < 1e-10);
            prop_assert!((e.matrix.transpose() * e.matrix - Matrix3::identity()).amax() < 1e-10);
        }
    }

    #[test]
    fn geodesic_error_is_symmetric(a in rotation(), b in rotation()) {
        prop_assert!((geodesic_error(&a, &b) - geodesic_error(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn accumulation_left_division_recovers_steps(steps in prop::collection::vec((-0.1f64..0.1, -0.1f64..0.1, -0.1f64..0.1), 1..60)) {
        let deltas: Vec<Matrix3<f64>> = steps
            .iter()
            .map(|&(x, y, z)| axis_angle_to_rot(&Vector3::new(x, y, z)).unwrap())
            .collect();
        let acc = accumulate(&deltas);
        prop_assert!((acc[0] - deltas[0]).amax() < 1e-9);
        for n in 1..acc.len() {
            let back = acc[n] * acc[n - 1].transpose();
            prop_assert!((back - deltas[n]).amax() < 1e-9);
        }
    }

    #[test]
    fn fitted_profiles_are_bounded_and_within_residual(r in 0.1f64..0.6) {
        let spec = MaskSpec::cap(Vector3::z(), r).unwrap();
        let mask = fit_adaptive(&spec, &FitOptions::default()).unwrap();
        prop_assert!(mask.fit_residual() <= 0.02);
        for k in 0..=4000 {
            let t = -1.0 + 2.0 * k as f64 / 4000.0;
            let p = mask.profile().eval(t);
            prop_assert!((-0.05..=1.05).contains(&p), "t={t} p={p}");
            prop_assert!((p - spec.profile(t)).abs() <= mask.fit_residual() * 1.05 + 1e-12);
        }
    }

    #[test]
    fn standardization_round_trip(data in prop::collection::vec(-1e3f64..1e3, 12..60)) {
        let dim = 3;
        let n = data.len() / dim * dim;
        let data = &data[..n];
        let s = Standardizer::fit(data, dim).unwrap();
        for (a, b) in s.destandardize(&s.standardize(data)).iter().zip(data) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn learning_rate_schedule(epoch in 0usize..300, decay in 0.5f64..=1.0) {
        let cfg = TrainConfig { decay, ..Default::default() };
        assert_relative_eq!(cfg.learning_rate_at(epoch), cfg.learning_rate * decay.powi(epoch as i32), max_relative = 1e-12);
    }
}

#[test]
fn co_rotated_masks_rotate_triplets() {
    let f = fixture();
    let grid = f.basis.grid().clone();
    let dirs: Vec<Vector3<f64>> = grid.directions().collect();
    let poly = |s: Vector3<f64>| 0.5 + 0.3 * s.x * s.y - 0.2 * s.z.powi(3) + 0.4 * s.y;
    let bank = MaskBank::caps(
        12,
        0.5,
        "icosahedral",
        &FitOptions {
            max_degree: 12,
            ..Default::default()
        },
        &f.table,
    )
    .unwrap();
    let r = rotation_from_uniforms(0.3, 0.7, 0.1);
    let img = SphericalImage::from_fn(grid.clone(), poly);
    let rot = SphericalImage::from_fn(grid.clone(), |s| poly(r.transpose() * s));
    let triplet = |image: &SphericalImage, mask: &fvg_core::mask::PolynomialMask| -> Vector3<f64> {
        Vector3::from_fn(|axis, _| {
            let v: Vec<f64> = dirs
                .iter()
                .zip(image.values())
                .map(|(s, i)| mask.eval(s) * s[axis] * i)
                .collect();
            grid.integrate(&v)
        })
    };
    for bm in bank.masks() {
        let moved = bm.poly.recentered(r * bm.poly.center());
        let want = r * triplet(&img, &bm.poly);
        assert!((triplet(&rot, &moved) - want).amax() < 1e-5);
    }
}

#[test]
fn backprop_matches_central_differences_per_layer() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mlp = Mlp::new(10, 3).unwrap();
    let x: Vec<f64> = (0..6 * 10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..6 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, grad) = mlp.loss_and_grad(&x, &y).unwrap();
    let h = 1e-5;
    for (weights, bias) in mlp.layer_ranges() {
        let picks: Vec<usize> = (0..5)
            .map(|k| {
                if k < 4 {
                    rng.random_range(weights.clone())
                } else {
                    rng.random_range(bias.clone())
                }
            })
            .collect();
        for i in picks {
            let loss = |delta: f64| {
                let mut p = mlp.params().to_vec();
                p[i] += delta;
                Mlp::from_params(mlp.dims().to_vec(), p)
                    .unwrap()
                    .loss_and_grad(&x, &y)
                    .unwrap()
                    .0
            };
            let fd = (loss(h) - loss(-h)) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs());
            if scale > 1e-7 {
                assert!((fd - grad[i]).abs() / scale < 1e-4, "param {i}: {fd} vs {}", grad[i]);
            }
        }
    }
}
