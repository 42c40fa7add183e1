use nalgebra::{Matrix3, Vector3};

use super::kabsch::{kabsch, kabsch_weighted, magnitude_weights, RotationEstimate};
use super::so3::{exp_map, nearest_rotation};
use super::triplet::triplet_cloud;
use crate::error::{Error, Result};
use crate::mask::{MaskBank, ProfilePolynomial};
use crate::moments::{moment_set_from_sh, MomentCoefficientTable, MomentSet};
use crate::registry::Registry;
use crate::sphere::ShCoefficients;

/// Precomputed data every estimator may draw on.
#[derive(Debug, Clone, Copy)]
pub struct EstimationContext<'a> {
    pub bank: &'a MaskBank,
    pub table: &'a MomentCoefficientTable,
}

/// Strategy recovering `ΔR` with `current(s) ≈ reference(ΔRᵀ s)`.
pub trait RotationEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn estimate(
        &self,
        ctx: &EstimationContext<'_>,
        reference: &ShCoefficients,
        current: &ShCoefficients,
    ) -> Result<RotationEstimate>;
}

/// Single Kabsch fit between the two triplet clouds.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainKabsch;

impl RotationEstimator for PlainKabsch {
    fn name(&self) -> &'static str {
        "kabsch"
    }

    fn estimate(
        &self,
        ctx: &EstimationContext<'_>,
        reference: &ShCoefficients,
        current: &ShCoefficients,
    ) -> Result<RotationEstimate> {
        estimate_relative(reference, current, ctx.bank)
    }
}

/// Kabsch start followed by Gauss-Newton on
/// `Σ w_k |q_k - R p(Rᵀ c_k)|²`, where the reference triplets are
/// re-evaluated for masks carried along with the rotation. This removes the
/// bias of comparing fixed masks against a rotated scene.
#[derive(Debug, Clone, Copy)]
pub struct Corotated {
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

impl Default for Corotated {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            step_tolerance: 1e-12,
        }
    }
}

impl RotationEstimator for Corotated {
    fn name(&self) -> &'static str {
        "corotated"
    }

    fn estimate(
        &self,
        ctx: &EstimationContext<'_>,
        reference: &ShCoefficients,
        current: &ShCoefficients,
    ) -> Result<RotationEstimate> {
        let p = triplet_cloud(reference, ctx.bank)?.vectors();
        let q = triplet_cloud(current, ctx.bank)?.vectors();
        let w = magnitude_weights(&p, &q)?;
        let start = kabsch_weighted(&p, &q, &w)?;
        let model = CorotationModel::new(ctx.bank);
        let order = model.max_degree + 1;
        if ctx.table.max_order() < order {
            return Err(Error::invalid(format!(
                "co-rotated refinement needs moment order {order}, table has {}",
                ctx.table.max_order()
            )));
        }
        let moments = moment_set_from_sh(reference, ctx.table, order)?;
        let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let residuals = |r: &Matrix3<f64>| -> Vec<f64> {
            let mut out = Vec::with_capacity(3 * q.len());
            for (k, (qk, swk)) in q.iter().zip(&sw).enumerate() {
                let axis = r.transpose() * model.centers[k];
                let pk = r * model.profiles[model.profile_of[k]].evaluate(&axis, &moments);
                out.extend((qk - pk).iter().map(|d| d * swk));
            }
            out
        };
        let mut r = start.matrix;
        let mut res = residuals(&r);
        let h = 1e-6;
        for _ in 0..self.max_iterations {
            let mut jtj = Matrix3::zeros();
            let mut jtr = Vector3::zeros();
            let cols: Vec<Vec<f64>> = (0..3)
                .map(|a| {
                    let mut e = Vector3::zeros();
                    e[a] = h;
                    residuals(&(exp_map(&e) * r))
                        .iter()
                        .zip(&res)
                        .map(|(x, y)| (x - y) / h)
                        .collect()
                })
                .collect();
            for a in 0..3 {
                jtr[a] = cols[a].iter().zip(&res).map(|(x, y)| x * y).sum();
                for b in 0..3 {
                    jtj[(a, b)] = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
                }
            }
            let Some(dx) = jtj.cholesky().map(|c| -c.solve(&jtr)) else {
                break;
            };
            let next = nearest_rotation(&(exp_map(&dx) * r));
            let next_res = residuals(&next);
            if sum_sq(&next_res) > sum_sq(&res) {
                break;
            }
            r = next;
            res = next_res;
            if dx.norm() < self.step_tolerance {
                break;
            }
        }
        RotationEstimate::new(r, sum_sq(&res).sqrt())
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Per-profile expansion terms, shared by masks with the same fitted profile.
struct ExpandedProfile {
    degree: usize,
    // (coefficient a_d · multinomial, i, j, k, index of x-, y-, z-shifted moments)
    terms: Vec<(f64, usize, usize, usize, [usize; 3])>,
}

impl ExpandedProfile {
    fn new(profile: &ProfilePolynomial) -> Self {
        let mut terms = Vec::new();
        let ones = ProfilePolynomial::new(vec![1.0; profile.degree() + 1]);
        // coefficients of (x + y + z)^d summed over d give the multinomials
        let multi = ones.expand(&Vector3::new(1.0, 1.0, 1.0));
        for (o, &m) in crate::moments::monomials(profile.degree()).iter().zip(&multi) {
            let a = profile.coeffs()[o.total()];
            if a == 0.0 {
                continue;
            }
            terms.push((
                a * m,
                o.i,
                o.j,
                o.k,
                [
                    o.shifted(1, 0, 0).index(),
                    o.shifted(0, 1, 0).index(),
                    o.shifted(0, 0, 1).index(),
                ],
            ));
        }
        Self {
            degree: profile.degree(),
            terms,
        }
    }

    fn evaluate(&self, axis: &Vector3<f64>, moments: &MomentSet) -> Vector3<f64> {
        let pow = |v: f64| {
            let mut p = vec![1.0; self.degree + 1];
            for i in 1..=self.degree {
                p[i] = p[i - 1] * v;
            }
            p
        };
        let (px, py, pz) = (pow(axis.x), pow(axis.y), pow(axis.z));
        let m = moments.values();
        let mut out = Vector3::zeros();
        for &(c, i, j, k, idx) in &self.terms {
            let mono = c * px[i] * py[j] * pz[k];
            out.x += mono * m[idx[0]];
            out.y += mono * m[idx[1]];
            out.z += mono * m[idx[2]];
        }
        out
    }
}

struct CorotationModel {
    centers: Vec<Vector3<f64>>,
    profiles: Vec<ExpandedProfile>,
    profile_of: Vec<usize>,
    max_degree: usize,
}

impl CorotationModel {
    fn new(bank: &MaskBank) -> Self {
        let mut distinct: Vec<&ProfilePolynomial> = Vec::new();
        let mut profile_of = Vec::with_capacity(bank.len());
        for m in bank.masks() {
            let p = m.poly.profile();
            let idx = distinct.iter().position(|d| *d == p).unwrap_or_else(|| {
                distinct.push(p);
                distinct.len() - 1
            });
            profile_of.push(idx);
        }
        Self {
            centers: bank.centers(),
            max_degree: distinct.iter().map(|p| p.degree()).max().unwrap_or(0),
            profiles: distinct.into_iter().map(ExpandedProfile::new).collect(),
            profile_of,
        }
    }
}

/// Built-in estimators.
pub fn estimators() -> Registry<dyn RotationEstimator> {
    let mut reg: Registry<dyn RotationEstimator> = Registry::new("rotation estimator");
    reg.register("corotated", || Box::new(Corotated::default()));
    reg.register("kabsch", || Box::new(PlainKabsch));
    reg
}

/// Kabsch between the triplet clouds of two frames.
pub fn estimate_relative(
    reference: &ShCoefficients,
    current: &ShCoefficients,
    bank: &MaskBank,
) -> Result<RotationEstimate> {
    let p = triplet_cloud(reference, bank)?.vectors();
    let q = triplet_cloud(current, bank)?.vectors();
    kabsch(&p, &q)
}
