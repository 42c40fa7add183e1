use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::RotationEstimate;

/// One analytical configuration: low-pass cutoff and mask range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub cutoff: usize,
    pub range: f64,
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}_r{}", self.cutoff, self.range)
    }
}

/// Ordered groups; each contributes its axis-angle and Kabsch residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub groups: Vec<FeatureGroup>,
}

pub const SLOTS_PER_GROUP: usize = 4;

impl FeatureLayout {
    pub fn new(groups: Vec<FeatureGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("feature layout needs at least one group"));
        }
        Ok(Self { groups })
    }

    /// Every cutoff paired with every range, cutoff-major.
    pub fn grid(cutoffs: &[usize], ranges: &[f64]) -> Result<Self> {
        Self::new(
            cutoffs
                .iter()
                .flat_map(|&cutoff| ranges.iter().map(move |&range| FeatureGroup { cutoff, range }))
                .collect(),
        )
    }

    pub fn input_dim(&self) -> usize {
        SLOTS_PER_GROUP * self.groups.len()
    }
}

/// Concatenated `(axis_angle, residual)` per group, in layout order.
pub fn feature_vector(layout: &FeatureLayout, estimates: &[(FeatureGroup, RotationEstimate)]) -> Result<Vec<f64>> {
    if estimates.len() != layout.groups.len() {
        return Err(Error::invalid(format!(
            "expected {} feature groups, got {}",
            layout.groups.len(),
            estimates.len()
        )));
    }
    let mut out = Vec::with_capacity(layout.input_dim());
    for (g, (eg, e)) in layout.groups.iter().zip(estimates) {
        if g != eg {
            return Err(Error::invalid(format!("feature group {eg} where {g} was expected")));
        }
        out.extend(e.axis_angle.iter());
        out.push(e.residual);
    }
    Ok(out)
}

/// Per-column mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Statistics of row-major `rows × dim` data. Constant columns get unit
    /// scale.
    pub fn fit(data: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch(data.len(), dim));
        }
        let n = (data.len() / dim) as f64;
        let mut mean = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn standardize(&self, data: &[f64]) -> Vec<f64> {
        let d = self.dim();
        data.iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % d]) / self.std[i % d])
            .collect()
    }

    pub fn destandardize(&self, data: &[f64]) -> Vec<f64> {
        let d = self.dim();
        data.iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i % d] + self.mean[i % d])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn six_groups_make_24_features() {
        let layout = FeatureLayout::grid(&[16, 32], &[0.1, 0.3, 0.5]).unwrap();
        assert_eq!(layout.input_dim(), 24);
        let est: Vec<_> = layout
            .groups
            .iter()
            .map(|g| (*g, RotationEstimate::identity()))
            .collect();
        let v = feature_vector(&layout, &est).unwrap();
        assert_eq!(v, vec![0.0; 24]);
        assert!(feature_vector(&layout, &est[..5]).is_err());
        let mut swapped = est.clone();
        swapped.swap(0, 1);
        assert!(feature_vector(&layout, &swapped).is_err());
    }

    #[test]
    fn slot_order() {
        let layout = FeatureLayout::grid(&[8], &[0.5]).unwrap();
        let e = RotationEstimate::new(Matrix3::identity(), 0.25).unwrap();
        assert_eq!(
            feature_vector(&layout, &[(layout.groups[0], e)]).unwrap(),
            vec![0.0, 0.0, 0.0, 0.25]
        );
    }

    #[test]
    fn standardize_round_trip() {
        let data = vec![1.0, 10.0, 5.0, 2.0, 12.0, 5.0, 3.0, 14.0, 5.0];
        let s = Standardizer::fit(&data, 3).unwrap();
        assert_eq!(s.std[2], 1.0);
        let z = s.standardize(&data);
        assert!((z[0] + z[3] + z[6]).abs() < 1e-12);
        let back = s.destandardize(&z);
        assert!(back.iter().zip(&data).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
}
