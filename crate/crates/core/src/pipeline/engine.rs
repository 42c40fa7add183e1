use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use crate::cache::Cache;
use crate::error::{Error, Result};
use crate::lbto::FeatureGroup;
use crate::mask::{MaskBank, MaskSpec};
use crate::moments::MomentCoefficientTable;
use crate::rotation::{EstimationContext, RotationEstimate, RotationEstimator};
use crate::sphere::{sh_forward, EquirectGrid, ShBasisTable, ShCoefficients, SphericalImage};

/// Basis plus the cached table and banks for one bandwidth and grid.
#[derive(Debug)]
pub struct Engine {
    pub basis: ShBasisTable,
    pub cache: Cache,
}

impl Engine {
    /// Builds the table and one cap bank per configured range.
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let grid = Arc::new(EquirectGrid::new(cfg.grid.0, cfg.grid.1)?);
        let basis = ShBasisTable::new(grid, cfg.bandwidth)?;
        let t0 = Instant::now();
        let table = MomentCoefficientTable::build(&basis, cfg.bandwidth, cfg.table_order())?;
        log::info!("coefficient table: {} entries in {:?}", table.len(), t0.elapsed());
        let banks = cfg
            .ranges
            .iter()
            .map(|&r| {
                let t0 = Instant::now();
                let bank = MaskBank::caps(cfg.masks, r, &cfg.layout, &cfg.fit, &table)?;
                log::info!(
                    "mask bank r={r}: {} masks, degree {}, in {:?}",
                    bank.len(),
                    bank.masks()[0].poly.degree(),
                    t0.elapsed()
                );
                Ok(bank)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basis,
            cache: Cache::new(table, banks)?,
        })
    }

    /// Loads a cache and checks it against the configuration.
    pub fn load(cfg: &RunConfig, path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Data(format!(
                "cache file {} not found; run `precompute` first",
                path.display()
            )));
        }
        let cache = Cache::load(path)?;
        let t = &cache.table;
        if t.bandwidth() != cfg.bandwidth {
            return Err(Error::BandwidthMismatch {
                expected: cfg.bandwidth,
                actual: t.bandwidth(),
            });
        }
        if t.grid_dims() != cfg.grid {
            return Err(Error::GridMismatch {
                expected: cfg.grid,
                actual: t.grid_dims(),
            });
        }
        let grid = Arc::new(EquirectGrid::new(cfg.grid.0, cfg.grid.1)?);
        let engine = Self {
            basis: ShBasisTable::new(grid, cfg.bandwidth)?,
            cache,
        };
        for &r in &cfg.ranges {
            engine.bank(r)?;
        }
        Ok(engine)
    }

    pub fn table(&self) -> &MomentCoefficientTable {
        &self.cache.table
    }

    pub fn bank(&self, range: f64) -> Result<&MaskBank> {
        self.cache.bank_for_range(range).ok_or_else(|| {
            let have: Vec<f64> = self
                .cache
                .banks
                .iter()
                .filter_map(|b| b.masks().first().and_then(|m| m.spec).map(|s: MaskSpec| s.r))
                .collect();
            Error::invalid(format!("cache has no bank for range {range} (has {have:?})"))
        })
    }

    pub fn transform(&self, image: &SphericalImage) -> Result<ShCoefficients> {
        sh_forward(image, &self.basis)
    }

    pub fn transform_all(&self, images: &[SphericalImage]) -> Result<Vec<ShCoefficients>> {
        images.par_iter().map(|i| self.transform(i)).collect()
    }

    /// `ΔR` for every `(reference, current)` pair under one configuration,
    /// in pair order.
    pub fn estimate_pairs(
        &self,
        coeffs: &[ShCoefficients],
        pairs: &[(usize, usize)],
        group: FeatureGroup,
        estimator: &dyn RotationEstimator,
    ) -> Result<Vec<RotationEstimate>> {
        let ctx = EstimationContext {
            bank: self.bank(group.range)?,
            table: self.table(),
        };
        let filtered: Vec<ShCoefficients> = coeffs.par_iter().map(|c| c.lowpass(group.cutoff)).collect();
        pairs
            .par_iter()
            .map(|&(a, b)| estimator.estimate(&ctx, &filtered[a], &filtered[b]))
            .collect()
    }

    /// Estimates for every group, group-major.
    pub fn estimate_groups(
        &self,
        coeffs: &[ShCoefficients],
        pairs: &[(usize, usize)],
        groups: &[FeatureGroup],
        estimator: &dyn RotationEstimator,
    ) -> Result<Vec<Vec<RotationEstimate>>> {
        groups
            .iter()
            .map(|&g| self.estimate_pairs(coeffs, pairs, g, estimator))
            .collect()
    }
}
