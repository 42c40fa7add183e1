use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const HIDDEN: [usize; 3] = [128, 64, 32];
pub const OUTPUT_DIM: usize = 3;

/// Fully connected ReLU network with a linear output layer. All weights and
/// biases live in one flat vector: per layer, the row-major `out × in`
/// weight matrix followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
struct Trace {
    // per layer input, batch-major
    inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Mlp {
    /// `[input_dim, 128, 64, 32, 3]` with He-initialised weights and zero biases.
    pub fn new(input_dim: usize, seed: u64) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend(HIDDEN);
        dims.push(OUTPUT_DIM);
        Self::with_dims(dims, seed)
    }

    pub fn with_dims(dims: Vec<usize>, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("bad layer dims {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(&dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| scale * rng.sample::<f64, _>(StandardNormal)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self { dims, params })
    }

    pub fn from_params(dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if params.len() != param_count(&dims) {
            return Err(Error::LengthMismatch(params.len(), param_count(&dims)));
        }
        Ok(Self { dims, params })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of each layer's weights and biases in the flat vector.
    pub fn layer_ranges(&self) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let mut off = 0;
        self.dims
            .windows(2)
            .map(|w| {
                let wr = off..off + w[0] * w[1];
                let br = wr.end..wr.end + w[1];
                off = br.end;
                (wr, br)
            })
            .collect()
    }

    pub fn zero_output_layer(&mut self) {
        let (w, b) = self.layer_ranges().pop().unwrap();
        self.params[w].fill(0.0);
        self.params[b].fill(0.0);
    }

    /// Forward pass for a batch stored row-major, `n × input_dim`.
    pub fn forward(&self, batch: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(batch)?.output)
    }

    fn trace(&self, batch: &[f64]) -> Result<Trace> {
        let d_in = self.input_dim();
        if !batch.len().is_multiple_of(d_in) {
            return Err(Error::LengthMismatch(batch.len(), d_in));
        }
        let n = batch.len() / d_in;
        let ranges = self.layer_ranges();
        let last = ranges.len() - 1;
        let mut inputs = Vec::with_capacity(ranges.len());
        let mut x = batch.to_vec();
        for (l, (wr, br)) in ranges.iter().enumerate() {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[wr.clone()];
            let b = &self.params[br.clone()];
            let mut y = vec![0.0; n * fo];
            for s in 0..n {
                let xi = &x[s * fi..(s + 1) * fi];
                for o in 0..fo {
                    let row = &w[o * fi..(o + 1) * fi];
                    let mut acc = b[o];
                    for (a, c) in row.iter().zip(xi) {
                        acc += a * c;
                    }
                    y[s * fo + o] = if l < last { acc.max(0.0) } else { acc };
                }
            }
            inputs.push(x);
            x = y;
        }
        Ok(Trace { inputs, output: x })
    }

    /// Mean squared error over a batch and the gradient of it with respect
    /// to every parameter.
    pub fn loss_and_grad(&self, batch: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let tr = self.trace(batch)?;
        let loss = mse_loss(&tr.output, targets)?;
        // dL/dy for the linear output layer
        let scale = 2.0 / targets.len() as f64;
        let mut delta: Vec<f64> = tr.output.iter().zip(targets).map(|(p, t)| scale * (p - t)).collect();
        let n = batch.len() / self.input_dim();
        let ranges = self.layer_ranges();
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..ranges.len()).rev() {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let (wr, br) = &ranges[l];
            let x = &tr.inputs[l];
            {
                let (gw, gb) = grad.split_at_mut(br.start);
                let gw = &mut gw[wr.clone()];
                let gb = &mut gb[..fo];
                for s in 0..n {
                    let xi = &x[s * fi..(s + 1) * fi];
                    for o in 0..fo {
                        let d = delta[s * fo + o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        for (g, xv) in gw[o * fi..(o + 1) * fi].iter_mut().zip(xi) {
                            *g += d * xv;
                        }
                    }
                }
            }
            if l > 0 {
                let w = &self.params[wr.clone()];
                let mut prev = vec![0.0; n * fi];
                for s in 0..n {
                    for o in 0..fo {
                        let d = delta[s * fo + o];
                        if d == 0.0 {
                            continue;
                        }
                        for (p, wv) in prev[s * fi..(s + 1) * fi].iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                            *p += d * wv;
                        }
                    }
                }
                // ReLU derivative: the layer input is the previous activation
                for (p, xv) in prev.iter_mut().zip(x) {
                    if *xv <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss, grad))
    }
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Mean over batch and components of the squared difference.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch(pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}
