use nalgebra::Vector3;

use crate::error::Result;
use crate::mask::MaskBank;
use crate::sphere::ShCoefficients;

/// First-order moments `(m_100, m_010, m_001)` of one masked image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet(pub Vector3<f64>);

/// One triplet per mask, in bank order.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletCloud {
    pub points: Vec<Triplet>,
    pub cutoff: usize,
}

impl TripletCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn vectors(&self) -> Vec<Vector3<f64>> {
        self.points.iter().map(|t| t.0).collect()
    }
}

pub fn triplet_cloud(coeffs: &ShCoefficients, bank: &MaskBank) -> Result<TripletCloud> {
    Ok(TripletCloud {
        points: bank.masked_moments(coeffs)?.into_iter().map(Triplet).collect(),
        cutoff: coeffs.bandwidth(),
    })
}
