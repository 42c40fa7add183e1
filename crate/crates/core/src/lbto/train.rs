use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{feature_vector, FeatureGroup, FeatureLayout, Standardizer};
use super::mlp::{Mlp, OUTPUT_DIM};
use crate::error::{Error, Result};
use crate::rotation::{axis_angle_to_rot, RotationEstimate};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fraction of the epochs after which weights are averaged.
    pub swa_start: f64,
    /// Epochs between averaged snapshots.
    pub swa_cycle: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            decay: 0.97,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            swa_start: 0.75,
            swa_cycle: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.swa_cycle == 0 {
            return Err(Error::invalid("epochs, batch size and SWA cycle must be positive"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::invalid(format!("decay {} outside (0, 1]", self.decay)));
        }
        if !(0.0..1.0).contains(&self.swa_start) {
            return Err(Error::invalid(format!("SWA start {} outside [0, 1)", self.swa_start)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    /// `lr₀ · decay^epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi(epoch as i32)
    }

    pub fn swa_start_epoch(&self) -> usize {
        (self.swa_start * self.epochs as f64).floor() as usize
    }
}

/// Feature vector with its ground-truth axis-angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: [f64; 3],
}

/// Per-epoch losses in radians², after each epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub initial_train_loss: f64,
    pub initial_val_loss: Option<f64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<Option<f64>>,
    pub learning_rate: Vec<f64>,
    pub swa_snapshots: usize,
}

/// Arithmetic mean of parameter snapshots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwaAverager {
    sum: Vec<f64>,
    count: usize,
}

impl SwaAverager {
    pub fn add(&mut self, params: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; params.len()];
        }
        for (s, p) in self.sum.iter_mut().zip(params) {
            *s += p;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<Vec<f64>> {
        (self.count > 0).then(|| self.sum.iter().map(|s| s / self.count as f64).collect())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// The learned refinement: MLP plus the statistics it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct LbtoModel {
    pub layout: FeatureLayout,
    pub mlp: Mlp,
    pub input_norm: Standardizer,
    pub target_norm: Standardizer,
    pub config: Option<TrainConfig>,
    pub swa: bool,
    pub swa_snapshots: usize,
    pub final_train_mse: Option<f64>,
    pub final_val_mse: Option<f64>,
}

impl LbtoModel {
    pub fn new(layout: FeatureLayout, seed: u64) -> Result<Self> {
        let dim = layout.input_dim();
        Ok(Self {
            mlp: Mlp::new(dim, seed)?,
            input_norm: Standardizer::identity(dim),
            target_norm: Standardizer::identity(OUTPUT_DIM),
            layout,
            config: None,
            swa: false,
            swa_snapshots: 0,
            final_train_mse: None,
            final_val_mse: None,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.final_train_mse.is_some()
    }

    /// Axis-angle predictions for raw feature rows, row-major.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        let out = self.mlp.forward(&self.input_norm.standardize(features))?;
        Ok(self.target_norm.destandardize(&out))
    }

    fn mse(&self, samples: &[Sample]) -> Result<f64> {
        let (x, y) = stack(samples);
        super::mlp::mse_loss(&self.predict(&x)?, &y)
    }

    /// Refined rotation for one frame pair. The residual carries the root
    /// training MSE.
    pub fn refine(&self, estimates: &[(FeatureGroup, RotationEstimate)]) -> Result<RotationEstimate> {
        let Some(train_mse) = self.final_train_mse else {
            return Err(Error::Untrained);
        };
        let x = feature_vector(&self.layout, estimates)?;
        let out = self.predict(&x)?;
        let mut v = Vector3::new(out[0], out[1], out[2]);
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::Data("model produced a non-finite rotation".into()));
        }
        if v.norm() > PI {
            v *= PI / v.norm();
        }
        Ok(RotationEstimate {
            matrix: axis_angle_to_rot(&v)?,
            axis_angle: v,
            residual: train_mse.sqrt(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&ModelFile::from(self)).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        file.into_model()
    }
}

fn stack(samples: &[Sample]) -> (Vec<f64>, Vec<f64>) {
    let x = samples.iter().flat_map(|s| s.features.iter().copied()).collect();
    let y = samples.iter().flat_map(|s| s.target).collect();
    (x, y)
}

/// Trains a copy of `model`; statistics come from `train`, `val` only feeds
/// the history.
pub fn train(
    model: &LbtoModel,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
) -> Result<(LbtoModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let dim = model.layout.input_dim();
    if let Some(bad) = train.iter().chain(val).find(|s| s.features.len() != dim) {
        return Err(Error::LengthMismatch(bad.features.len(), dim));
    }
    let mut model = model.clone();
    let (x_raw, y_raw) = stack(train);
    model.input_norm = Standardizer::fit(&x_raw, dim)?;
    model.target_norm = Standardizer::fit(&y_raw, OUTPUT_DIM)?;
    let x = model.input_norm.standardize(&x_raw);
    let y = model.target_norm.standardize(&y_raw);

    let val_mse = |m: &LbtoModel| -> Result<Option<f64>> { (!val.is_empty()).then(|| m.mse(val)).transpose() };
    let mut history = TrainHistory {
        initial_train_loss: model.mse(train)?,
        initial_val_loss: val_mse(&model)?,
        ..Default::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.mlp.params().len());
    let mut swa = SwaAverager::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let (mut xb, mut yb) = (Vec::new(), Vec::new());
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(&x[i * dim..(i + 1) * dim]);
                yb.extend_from_slice(&y[i * OUTPUT_DIM..(i + 1) * OUTPUT_DIM]);
            }
            let (loss, grad) = model.mlp.loss_and_grad(&xb, &yb)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss { epoch, batch: b });
            }
            adam.step(model.mlp.params_mut(), &grad, lr, cfg);
            if !model.mlp.params().iter().all(|p| p.is_finite()) {
                return Err(Error::NanLoss { epoch, batch: b });
            }
        }
        if epoch >= cfg.swa_start_epoch() && (epoch - cfg.swa_start_epoch()).is_multiple_of(cfg.swa_cycle) {
            swa.add(model.mlp.params());
        }
        history.train_loss.push(model.mse(train)?);
        history.val_loss.push(val_mse(&model)?);
        history.learning_rate.push(lr);
        log::debug!("epoch {epoch}: lr {lr:.3e} train {:.4e}", history.train_loss[epoch]);
    }
    if let Some(mean) = swa.mean() {
        model.mlp = Mlp::from_params(model.mlp.dims().to_vec(), mean)?;
        model.swa = true;
    }
    model.swa_snapshots = swa.count();
    history.swa_snapshots = swa.count();
    model.config = Some(cfg.clone());
    model.final_train_mse = Some(model.mse(train)?);
    model.final_val_mse = val_mse(&model)?;
    Ok((model, history))
}

/// Deterministic shuffled split with `round(n · fraction)` test items.
pub fn split_dataset<T: Clone>(data: &[T], test_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n_test = (data.len() as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == data.len() {
        return Err(Error::invalid(format!(
            "split of {} items at {test_fraction} leaves an empty side",
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test_idx, train_idx) = idx.split_at(n_test);
    let mut test_idx = test_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((
        train_idx.iter().map(|&i| data[i].clone()).collect(),
        test_idx.iter().map(|&i| data[i].clone()).collect(),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    layout: FeatureLayout,
    dims: Vec<usize>,
    activation: String,
    input_norm: Standardizer,
    target_norm: Standardizer,
    layers: Vec<LayerFile>,
    swa: bool,
    swa_snapshots: usize,
    train_config: Option<TrainConfig>,
    final_train_mse: Option<f64>,
    final_val_mse: Option<f64>,
}

impl From<&LbtoModel> for ModelFile {
    fn from(m: &LbtoModel) -> Self {
        let dims = m.mlp.dims().to_vec();
        let layers = m
            .mlp
            .layer_ranges()
            .into_iter()
            .zip(dims.windows(2))
            .map(|((w, b), d)| LayerFile {
                rows: d[1],
                cols: d[0],
                weights: m.mlp.params()[w].to_vec(),
                bias: m.mlp.params()[b].to_vec(),
            })
            .collect();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            layout: m.layout.clone(),
            dims,
            activation: "relu".into(),
            input_norm: m.input_norm.clone(),
            target_norm: m.target_norm.clone(),
            layers,
            swa: m.swa,
            swa_snapshots: m.swa_snapshots,
            train_config: m.config.clone(),
            final_train_mse: m.final_train_mse,
            final_val_mse: m.final_val_mse,
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<LbtoModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported model format {}", self.format_version)));
        }
        if self.activation != "relu" {
            return Err(Error::Data(format!("unsupported activation '{}'", self.activation)));
        }
        if self.dims.first() != Some(&self.layout.input_dim()) {
            return Err(Error::Data(
                "model input dimension does not match its feature layout".into(),
            ));
        }
        let params = self
            .layers
            .into_iter()
            .flat_map(|l| l.weights.into_iter().chain(l.bias))
            .collect();
        Ok(LbtoModel {
            mlp: Mlp::from_params(self.dims, params)?,
            layout: self.layout,
            input_norm: self.input_norm,
            target_norm: self.target_norm,
            config: self.train_config,
            swa: self.swa,
            swa_snapshots: self.swa_snapshots,
            final_train_mse: self.final_train_mse,
            final_val_mse: self.final_val_mse,
        })
    }
}
