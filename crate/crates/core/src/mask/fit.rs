use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::profile::MaskSpec;
use crate::error::{Error, Result};
use crate::moments::{monomial_count, MomentOrder, MomentSet};
use crate::registry::Registry;

/// Uniform `t` samples used for fitting and for the recorded residual.
pub const FIT_SAMPLES: usize = 2048;

/// One-dimensional polynomial `W(t) = Σ a_d t^d` in the axis coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePolynomial {
    coeffs: Vec<f64>,
}

impl ProfilePolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(vec![value])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * t + a)
    }

    /// Coefficients of `W(c · s)` as a polynomial in `(x, y, z)`, dense over
    /// monomials up to the profile degree in [`MomentOrder::index`] order.
    pub fn expand(&self, axis: &Vector3<f64>) -> Vec<f64> {
        let deg = self.degree();
        let mut out = vec![0.0; monomial_count(deg as isize)];
        let pow = |v: f64| -> Vec<f64> {
            let mut p = Vec::with_capacity(deg + 1);
            let mut acc = 1.0;
            for _ in 0..=deg {
                p.push(acc);
                acc *= v;
            }
            p
        };
        let (px, py, pz) = (pow(axis.x), pow(axis.y), pow(axis.z));
        for (d, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for i in 0..=d {
                for j in 0..=d - i {
                    let k = d - i - j;
                    let c = multinomial(d, i, j) * px[i] * py[j] * pz[k];
                    if c != 0.0 {
                        out[MomentOrder::new(i, j, k).index()] += a * c;
                    }
                }
            }
        }
        out
    }

    /// Masked first-order moments for a cap re-centred on `axis`, computed
    /// from the image's unmasked moments up to order `degree + 1`.
    pub fn masked_first_moments(&self, axis: &Vector3<f64>, moments: &MomentSet) -> Vector3<f64> {
        assert!(moments.max_order() > self.degree(), "moment set order too low");
        let expanded = self.expand(axis);
        let mut out = Vector3::zeros();
        for (o, &a) in crate::moments::monomials(self.degree()).iter().zip(&expanded) {
            if a == 0.0 {
                continue;
            }
            out.x += a * moments.get(o.shifted(1, 0, 0));
            out.y += a * moments.get(o.shifted(0, 1, 0));
            out.z += a * moments.get(o.shifted(0, 0, 1));
        }
        out
    }
}

fn multinomial(d: usize, i: usize, j: usize) -> f64 {
    binomial(d, i) * binomial(d - i, j)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    acc as f64
}

/// Strategy that approximates a mask profile by a polynomial in `t`.
pub trait MaskFitter: Send + Sync {
    fn name(&self) -> &'static str;

    fn fit(&self, spec: &MaskSpec, degree: usize) -> Result<ProfilePolynomial>;
}

/// Least squares over [`FIT_SAMPLES`] uniform samples of the ideal profile.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeastSquares;

impl MaskFitter for LeastSquares {
    fn name(&self) -> &'static str {
        "least-squares"
    }

    fn fit(&self, spec: &MaskSpec, degree: usize) -> Result<ProfilePolynomial> {
        least_squares_fit(|t| spec.profile(t), degree)
    }
}

/// Truncated power series of `exp(-u^g)`, `u = (t - z0 - r)/σ`, expanded
/// around the transition end. Exact on the Gaussian branch as the degree
/// grows, but ignores the clamping to 0 and 1 outside it.
#[derive(Debug, Clone, Copy, Default)]
pub struct TaylorSeries;

impl MaskFitter for TaylorSeries {
    fn name(&self) -> &'static str {
        "taylor"
    }

    fn fit(&self, spec: &MaskSpec, degree: usize) -> Result<ProfilePolynomial> {
        let g = spec.exponent as usize;
        let shift = spec.z0 + spec.r;
        // Σ_h (-1)^h / h! · ((t - shift)/σ)^{g h}, for g h <= degree
        let mut coeffs = vec![0.0; degree + 1];
        let mut fact = 1.0;
        let mut h = 0usize;
        while g * h <= degree {
            if h > 0 {
                fact *= h as f64;
            }
            let p = g * h;
            let scale = (if h.is_multiple_of(2) { 1.0 } else { -1.0 }) / fact / spec.sigma.powi(p as i32);
            for (q, c) in coeffs.iter_mut().enumerate().take(p + 1) {
                *c += scale * binomial(p, q) * (-shift).powi((p - q) as i32);
            }
            h += 1;
        }
        Ok(ProfilePolynomial::new(coeffs))
    }
}

/// Built-in fitters.
pub fn fitters() -> Registry<dyn MaskFitter> {
    let mut reg: Registry<dyn MaskFitter> = Registry::new("mask fitter");
    reg.register("least-squares", || Box::new(LeastSquares));
    reg.register("taylor", || Box::new(TaylorSeries));
    reg
}

fn fit_samples() -> impl Iterator<Item = f64> {
    (0..FIT_SAMPLES).map(|i| -1.0 + 2.0 * i as f64 / (FIT_SAMPLES - 1) as f64)
}

/// Least-squares fit of `profile` on `[-1, 1]`, solved in the Chebyshev basis
/// and converted to monomial coefficients.
pub fn least_squares_fit(profile: impl Fn(f64) -> f64, degree: usize) -> Result<ProfilePolynomial> {
    let ts: Vec<f64> = fit_samples().collect();
    let n = degree + 1;
    let a = DMatrix::from_fn(ts.len(), n, |r, c| chebyshev(c, ts[r]));
    let b = DVector::from_iterator(ts.len(), ts.iter().map(|&t| profile(t)));
    let cheb = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::invalid(format!("mask fit failed: {e}")))?;
    Ok(ProfilePolynomial::new(chebyshev_to_monomial(cheb.as_slice())))
}

fn chebyshev(k: usize, t: f64) -> f64 {
    (k as f64 * t.clamp(-1.0, 1.0).acos()).cos()
}

fn chebyshev_to_monomial(cheb: &[f64]) -> Vec<f64> {
    let n = cheb.len();
    let mut out = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    prev[0] = 1.0; // T0
    if n > 1 {
        cur[1] = 1.0; // T1
    }
    for (k, &c) in cheb.iter().enumerate() {
        let tk = match k {
            0 => prev.clone(),
            1 => cur.clone(),
            _ => {
                // T_k = 2t T_{k-1} - T_{k-2}
                let mut next = vec![0.0; n];
                for d in 0..n - 1 {
                    next[d + 1] += 2.0 * cur[d];
                }
                for d in 0..n {
                    next[d] -= prev[d];
                }
                prev = std::mem::replace(&mut cur, next);
                cur.clone()
            }
        };
        for d in 0..n {
            out[d] += c * tk[d];
        }
    }
    out
}

/// Max deviation from `profile` over the fitting samples.
pub fn sup_residual(poly: &ProfilePolynomial, profile: impl Fn(f64) -> f64) -> f64 {
    fit_samples()
        .map(|t| (poly.eval(t) - profile(t)).abs())
        .fold(0.0, f64::max)
}

/// Fitted polynomial mask with its recorded residual against the ideal profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMask {
    center: Vector3<f64>,
    profile: ProfilePolynomial,
    expanded: Vec<f64>,
    fit_residual: f64,
}

impl PolynomialMask {
    pub fn new(center: Vector3<f64>, profile: ProfilePolynomial, fit_residual: f64) -> Self {
        let center = center.normalize();
        let expanded = profile.expand(&center);
        Self {
            center,
            profile,
            expanded,
            fit_residual,
        }
    }

    /// `W ≡ 1`.
    pub fn identity() -> Self {
        Self::new(Vector3::z(), ProfilePolynomial::constant(1.0), 0.0)
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn profile(&self) -> &ProfilePolynomial {
        &self.profile
    }

    pub fn degree(&self) -> usize {
        self.profile.degree()
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    /// `a_lmp` in [`MomentOrder::index`] order.
    pub fn expanded(&self) -> &[f64] {
        &self.expanded
    }

    pub fn coefficient(&self, order: MomentOrder) -> f64 {
        self.expanded.get(order.index()).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, s: &Vector3<f64>) -> f64 {
        self.profile.eval(self.center.dot(s))
    }

    /// Same profile around a different axis.
    pub fn recentered(&self, center: Vector3<f64>) -> Self {
        Self::new(center, self.profile.clone(), self.fit_residual)
    }
}

/// How masks are fitted: strategy, tolerance and degree range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub fitter: String,
    pub tolerance: f64,
    pub min_degree: usize,
    pub max_degree: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fitter: "least-squares".into(),
            tolerance: 0.02,
            min_degree: 6,
            max_degree: 20,
        }
    }
}

fn fit_with(fitter: &dyn MaskFitter, spec: &MaskSpec, degree: usize) -> Result<(ProfilePolynomial, f64)> {
    let poly = fitter.fit(spec, degree)?;
    let res = sup_residual(&poly, |t| spec.profile(t));
    Ok((poly, res))
}

/// Fits at a fixed degree. When the residual exceeds the tolerance the error
/// names the smallest adequate degree up to `opts.max_degree`, if any.
pub fn fit_polynomial_mask(spec: &MaskSpec, degree: usize, opts: &FitOptions) -> Result<PolynomialMask> {
    if degree < 2 {
        return Err(Error::invalid(format!("mask degree {degree} below 2")));
    }
    let fitter = fitters().create(&opts.fitter)?;
    let (poly, residual) = fit_with(fitter.as_ref(), spec, degree)?;
    if residual <= opts.tolerance {
        return Ok(PolynomialMask::new(spec.center(), poly, residual));
    }
    let mut adequate = None;
    for d in degree + 1..=opts.max_degree {
        if fit_with(fitter.as_ref(), spec, d)?.1 <= opts.tolerance {
            adequate = Some(d);
            break;
        }
    }
    Err(Error::MaskFit {
        residual,
        tolerance: opts.tolerance,
        degree,
        adequate_degree: adequate,
        max_degree: opts.max_degree,
    })
}

/// Escalates from `min_degree` until the residual meets the tolerance.
pub fn fit_adaptive(spec: &MaskSpec, opts: &FitOptions) -> Result<PolynomialMask> {
    let fitter = fitters().create(&opts.fitter)?;
    let mut best: Option<(usize, f64)> = None;
    for d in opts.min_degree.max(2)..=opts.max_degree {
        let (poly, residual) = fit_with(fitter.as_ref(), spec, d)?;
        if residual <= opts.tolerance {
            return Ok(PolynomialMask::new(spec.center(), poly, residual));
        }
        if best.is_none_or(|(_, r)| residual < r) {
            best = Some((d, residual));
        }
    }
    let (degree, residual) = best.unwrap_or((opts.max_degree, f64::INFINITY));
    Err(Error::MaskFit {
        residual,
        tolerance: opts.tolerance,
        degree,
        adequate_degree: None,
        max_degree: opts.max_degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_conversion() {
        // T3 = 4t^3 - 3t
        assert_eq!(chebyshev_to_monomial(&[0.0, 0.0, 0.0, 1.0]), vec![0.0, -3.0, 0.0, 4.0]);
        // T2 + T0 = 2t^2
        assert_eq!(chebyshev_to_monomial(&[1.0, 0.0, 1.0]), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn constant_profile_fit() {
        let p = least_squares_fit(|_| 1.0, 8).unwrap();
        assert!((p.coeffs()[0] - 1.0).abs() < 1e-12);
        assert!(p.coeffs()[1..].iter().all(|a| a.abs() < 1e-10));
    }

    #[test]
    fn z_axis_expansion_is_pure_z() {
        let spec = MaskSpec::cap(Vector3::z(), 0.5).unwrap();
        let m = fit_adaptive(&spec, &FitOptions::default()).unwrap();
        for o in crate::moments::monomials(m.degree()) {
            if o.i > 0 || o.j > 0 {
                assert_eq!(m.coefficient(o), 0.0, "{o}");
            }
        }
        assert!((m.coefficient(MomentOrder::new(0, 0, 3)) - m.profile().coeffs()[3]).abs() < 1e-15);
    }

    #[test]
    fn expansion_evaluates_like_profile() {
        let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
        let m = PolynomialMask::new(axis, ProfilePolynomial::new(vec![0.1, -0.4, 0.7, 0.2, -1.3, 0.5]), 0.0);
        let s = Vector3::new(-0.6, 0.2, 0.77).normalize();
        let direct = m.eval(&s);
        let expanded: f64 = crate::moments::monomials(m.degree())
            .iter()
            .zip(m.expanded())
            .map(|(o, a)| a * o.eval(s.x, s.y, s.z))
            .sum();
        assert!((direct - expanded).abs() < 1e-13);
    }

    #[test]
    fn residual_bounds_the_profile_error() {
        let spec = MaskSpec::new(Vector3::z(), 0.0, 0.5, 0.25, 2).unwrap();
        let opts = FitOptions {
            tolerance: 1.0,
            ..Default::default()
        };
        let m = fit_polynomial_mask(&spec, 8, &opts).unwrap();
        let res = m.fit_residual();
        assert!(res > 0.0 && res < 0.2);
        for i in 0..FIT_SAMPLES {
            let t = -1.0 + 2.0 * i as f64 / (FIT_SAMPLES - 1) as f64;
            assert!((m.profile().eval(t) - spec.profile(t)).abs() <= res);
        }
    }

    #[test]
    fn default_ranges_fit_within_tolerance() {
        for &r in &[0.1, 0.2, 0.3, 0.4, 0.5] {
            let spec = MaskSpec::cap(Vector3::z(), r).unwrap();
            let m = fit_adaptive(&spec, &FitOptions::default()).unwrap();
            assert!(m.fit_residual() <= 0.02, "r={r}");
            // no Runge blow-up between samples
            for i in 0..=20_000 {
                let t = -1.0 + i as f64 / 10_000.0;
                let v = m.profile().eval(t);
                assert!((-0.05..=1.05).contains(&v), "r={r} t={t} v={v}");
            }
        }
    }

    #[test]
    fn fixed_degree_error_names_adequate_degree() {
        let spec = MaskSpec::cap(Vector3::z(), 0.2).unwrap();
        let err = fit_polynomial_mask(&spec, 6, &FitOptions::default()).unwrap_err();
        match err {
            Error::MaskFit {
                adequate_degree: Some(d),
                ..
            } => assert!(d > 6 && d <= 20),
            other => panic!("unexpected {other}"),
        }
        assert!(fit_polynomial_mask(&spec, 1, &FitOptions::default()).is_err());
    }

    #[test]
    fn escalation_limit_reports_failure() {
        let spec = MaskSpec::cap(Vector3::z(), 0.1).unwrap();
        let opts = FitOptions {
            max_degree: 12,
            ..Default::default()
        };
        assert!(matches!(
            fit_adaptive(&spec, &opts),
            Err(Error::MaskFit {
                adequate_degree: None,
                ..
            })
        ));
    }

    #[test]
    fn taylor_series_matches_gaussian_branch_only() {
        let spec = MaskSpec::new(Vector3::z(), 0.0, 0.5, 0.5, 2).unwrap();
        let p = TaylorSeries.fit(&spec, 16).unwrap();
        // accurate near the expansion point, inside the transition
        for &t in &[0.2, 0.35, 0.5] {
            assert!((p.eval(t) - spec.profile(t)).abs() < 1e-6, "t={t}");
        }
        // but it ignores the clamp to zero below the transition
        let ls = LeastSquares.fit(&spec, 16).unwrap();
        let taylor_res = sup_residual(&p, |t| spec.profile(t));
        let ls_res = sup_residual(&ls, |t| spec.profile(t));
        assert!(taylor_res > ls_res);
    }

    #[test]
    fn registry_lists_fitters() {
        let reg = fitters();
        assert_eq!(reg.names(), vec!["least-squares", "taylor"]);
        assert!(reg.create("spline").is_err());
    }
}
