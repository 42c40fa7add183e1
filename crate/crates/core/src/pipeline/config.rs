use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbto::{FeatureLayout, TrainConfig};
use crate::mask::{fitters, layouts, FitOptions};
use crate::rotation::estimators;
use crate::synth::{DatasetConfig, Visibility, DEFAULT_BLOBS, DEFAULT_FRAMES, DEFAULT_MAX_STEP_DEG};

/// Everything a command needs, validated up front and echoed into every
/// output manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub bandwidth: usize,
    pub grid: (usize, usize),
    pub masks: usize,
    pub ranges: Vec<f64>,
    pub cutoffs: Vec<usize>,
    pub half_sphere: bool,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub cache: PathBuf,
    pub model: PathBuf,
    pub data: PathBuf,
    pub estimator: String,
    pub layout: String,
    pub fit: FitOptions,
    pub scenes: usize,
    pub frames: usize,
    pub max_step_deg: f64,
    pub test_fraction: f64,
    pub train: TrainConfig,
    pub bench_frames: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            bandwidth: 32,
            grid: (128, 256),
            masks: 100,
            ranges: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            cutoffs: vec![8, 32],
            half_sphere: false,
            seed: 0,
            threads: None,
            out: PathBuf::from("fvg-out"),
            cache: PathBuf::from("fvg-cache.fvgc"),
            model: PathBuf::from("fvg-model.json"),
            data: PathBuf::from("fvg-data"),
            estimator: "corotated".into(),
            layout: "icosahedral".into(),
            fit: FitOptions::default(),
            scenes: 1,
            frames: DEFAULT_FRAMES,
            max_step_deg: DEFAULT_MAX_STEP_DEG,
            test_fraction: 0.3,
            train: TrainConfig::default(),
            bench_frames: 100,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth == 0 {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        if self.masks < 3 {
            return Err(Error::invalid(format!("need at least 3 masks, got {}", self.masks)));
        }
        if self.ranges.is_empty() || self.ranges.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::invalid(format!(
                "mask ranges {:?} must lie in (0, 1)",
                self.ranges
            )));
        }
        if self.cutoffs.is_empty() || self.cutoffs.iter().any(|&c| c == 0 || c > self.bandwidth) {
            return Err(Error::invalid(format!(
                "filter cutoffs {:?} must lie in [1, {}]",
                self.cutoffs, self.bandwidth
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("thread count must be positive"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        if self.frames == 0 || self.scenes == 0 || !(self.max_step_deg > 0.0) {
            return Err(Error::invalid("frames, scenes and max step must be positive"));
        }
        for (ok, kind, name) in [
            (estimators().contains(&self.estimator), "estimator", &self.estimator),
            (layouts().contains(&self.layout), "layout", &self.layout),
            (fitters().contains(&self.fit.fitter), "fitter", &self.fit.fitter),
        ] {
            if !ok {
                return Err(Error::invalid(format!("unknown {kind} '{name}'")));
            }
        }
        if self.fit.min_degree > self.fit.max_degree || self.fit.min_degree < 2 {
            return Err(Error::invalid("mask degree range must satisfy 2 <= min <= max"));
        }
        self.train.validate()
    }

    /// Moment order the coefficient table must reach for every mask degree.
    pub fn table_order(&self) -> usize {
        self.fit.max_degree + 1
    }

    pub fn visibility(&self) -> Visibility {
        if self.half_sphere {
            Visibility::HalfSphere
        } else {
            Visibility::WholeSphere
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            scenes: self.scenes,
            frames_per_scene: self.frames,
            max_step_deg: self.max_step_deg,
            height: self.grid.0,
            width: self.grid.1,
            visibility: self.visibility(),
            seed: self.seed,
            blobs: DEFAULT_BLOBS,
        }
    }

    /// Cutoff × range groups, cutoff-major.
    pub fn feature_layout(&self) -> Result<FeatureLayout> {
        FeatureLayout::grid(&self.cutoffs, &self.ranges)
    }
}

/// Parses `HxW`.
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::invalid(format!("grid '{text}' is not HxW")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("grid '{text}' is not HxW")))
    };
    Ok((parse(h)?, parse(w)?))
}

/// Parses a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("cannot parse '{s}' in list '{text}'")))
        })
        .collect()
}
