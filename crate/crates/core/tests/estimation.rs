use std::sync::Arc;

use fvg_core::mask::{FitOptions, MaskBank};
use fvg_core::moments::MomentCoefficientTable;
use fvg_core::rotation::{axis_angle_to_rot, estimators, geodesic_error, EstimationContext};
use fvg_core::sphere::{sh_forward, EquirectGrid, ShBasisTable};
use fvg_core::synth::{make_scene, render, Visibility};
use nalgebra::{Matrix3, Vector3};

struct Setup {
    basis: ShBasisTable,
    table: MomentCoefficientTable,
}

fn setup() -> Setup {
    let grid = Arc::new(EquirectGrid::new(128, 256).unwrap());
    let basis = ShBasisTable::new(grid, 32).unwrap();
    let t0 = std::time::Instant::now();
    let table = MomentCoefficientTable::build(&basis, 32, 21).unwrap();
    eprintln!("table build {:?}", t0.elapsed());
    Setup { basis, table }
}

#[test]
fn five_degree_rotation_about_z() {
    let s = setup();
    let t0 = std::time::Instant::now();
    let bank = MaskBank::caps(100, 0.5, "icosahedral", &FitOptions::default(), &s.table).unwrap();
    eprintln!("bank build {:?}", t0.elapsed());
    let ctx = EstimationContext {
        bank: &bank,
        table: &s.table,
    };
    let scene = make_scene(7, 20).unwrap();
    let r = axis_angle_to_rot(&Vector3::new(0.0, 0.0, 5f64.to_radians())).unwrap();
    let grid = s.basis.grid().clone();
    let a = sh_forward(
        &render(&scene, &Matrix3::identity(), &grid, Visibility::WholeSphere),
        &s.basis,
    )
    .unwrap();
    let b = sh_forward(&render(&scene, &r, &grid, Visibility::WholeSphere), &s.basis).unwrap();
    for name in ["kabsch", "corotated"] {
        let est = estimators().create(name).unwrap();
        let t0 = std::time::Instant::now();
        let e = est.estimate(&ctx, &a, &b).unwrap();
        let err = geodesic_error(&e.matrix, &r).to_degrees();
        eprintln!("{name}: {err:.5} deg in {:?}", t0.elapsed());
        if name == "corotated" {
            assert!(err < 0.5);
        }
        let same = est.estimate(&ctx, &a, &a).unwrap();
        assert!(geodesic_error(&same.matrix, &Matrix3::identity()) < 1e-6);
    }
}
