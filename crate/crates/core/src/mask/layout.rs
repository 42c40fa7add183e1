use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Strategy that spreads `n` unit mask centers over the sphere.
pub trait CenterLayout: Send + Sync {
    fn name(&self) -> &'static str;

    fn place(&self, n: usize) -> Result<Vec<Vector3<f64>>>;
}

/// Icosahedron vertices, refined by edge subdivision (12, 42, 162, 642, ...
/// points). Other counts are a farthest-point subsample of the next finer
/// level, seeded at the north-most vertex.
#[derive(Debug, Clone, Copy, Default)]
pub struct Icosahedral;

/// Golden-angle spiral.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fibonacci;

impl CenterLayout for Icosahedral {
    fn name(&self) -> &'static str {
        "icosahedral"
    }

    fn place(&self, n: usize) -> Result<Vec<Vector3<f64>>> {
        check_count(n)?;
        let (mut verts, mut faces) = icosahedron();
        while verts.len() < n {
            (verts, faces) = subdivide(&verts, &faces);
        }
        if verts.len() == n {
            return Ok(verts);
        }
        // one more level gives the subsample room to spread out
        let (dense, _) = subdivide(&verts, &faces);
        Ok(farthest_point_subsample(&dense, n))
    }
}

impl CenterLayout for Fibonacci {
    fn name(&self) -> &'static str {
        "fibonacci"
    }

    fn place(&self, n: usize) -> Result<Vec<Vector3<f64>>> {
        check_count(n)?;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        Ok((0..n)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
            })
            .collect())
    }
}

fn check_count(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 mask centers, got {n}")));
    }
    Ok(())
}

/// Built-in layouts.
pub fn layouts() -> Registry<dyn CenterLayout> {
    let mut reg: Registry<dyn CenterLayout> = Registry::new("center layout");
    reg.register("icosahedral", || Box::new(Icosahedral));
    reg.register("fibonacci", || Box::new(Fibonacci));
    reg
}

/// `n` centers from the default icosahedral layout.
pub fn place_mask_centers(n: usize) -> Result<Vec<Vector3<f64>>> {
    Icosahedral.place(n)
}

type Face = [usize; 3];

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<Face>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let verts: Vec<Vector3<f64>> = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn subdivide(verts: &[Vector3<f64>], faces: &[Face]) -> (Vec<Vector3<f64>>, Vec<Face>) {
    let mut verts = verts.to_vec();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
        *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
            verts.push((verts[a] + verts[b]).normalize());
            verts.len() - 1
        })
    };
    let mut out = Vec::with_capacity(faces.len() * 4);
    for &[a, b, c] in faces {
        let ab = midpoint(a, b, &mut verts);
        let bc = midpoint(b, c, &mut verts);
        let ca = midpoint(c, a, &mut verts);
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    (verts, out)
}

fn farthest_point_subsample(points: &[Vector3<f64>], n: usize) -> Vec<Vector3<f64>> {
    let start = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.z.total_cmp(&b.1.z))
        .map(|(i, _)| i)
        .unwrap_or(0);
    // distance measured as 1 - cos, smaller cos means farther
    let mut nearest: Vec<f64> = points.iter().map(|p| p.dot(&points[start])).collect();
    let mut chosen = vec![points[start]];
    while chosen.len() < n {
        let (idx, _) = nearest.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let p = points[idx];
        chosen.push(p);
        for (q, best) in points.iter().zip(nearest.iter_mut()) {
            *best = best.max(q.dot(&p));
        }
    }
    chosen
}

/// Smallest pairwise angle in radians.
pub fn min_separation(points: &[Vector3<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            best = best.min(p.angle(q));
        }
    }
    best
}
