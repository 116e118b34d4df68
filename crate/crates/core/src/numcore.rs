//! Dense numeric backbone: row-major matrices, a fully connected encoder with
//! explicit forward/backward passes, and plain SGD with weight decay.
//!
//! Everything runs in `f64`. The encoder's last layer is affine only; its
//! outputs are the continuous codes `u`, and `sgn(u)` gives the binary code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign with the repository-wide convention `sgn(0) = +1`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at flat index {bad}")));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            values,
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self · other`
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.values[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`
    fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.rows, other.rows);
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let b_row = other.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.values[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`
    fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.cols, other.cols);
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.values[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer `y = act(x·W + b)`; `weights` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }
}

/// Feedforward hashing encoder. Hidden layers use their own activation, the
/// final layer is always affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashNet {
    layers: Vec<Layer>,
}

/// Weights are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` with a ChaCha8
/// stream seeded by `seed`; biases start at zero.
pub fn init_network(layer_dims: &[usize], hidden: Activation, seed: u64) -> Result<HashNet> {
    if layer_dims.len() < 2 {
        return Err(Error::config("a network needs at least an input and an output width"));
    }
    if layer_dims.contains(&0) {
        return Err(Error::config(format!("zero width in layer dims {layer_dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = layer_dims.len() - 1;
    let layers = layer_dims
        .windows(2)
        .enumerate()
        .map(|(l, w)| Layer {
            weights: uniform_fan_in(w[0], w[1], &mut rng),
            bias: vec![0.0; w[1]],
            activation: if l + 1 == n_layers {
                Activation::Identity
            } else {
                hidden
            },
        })
        .collect();
    Ok(HashNet { layers })
}

fn uniform_fan_in(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> DenseMatrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let values = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    DenseMatrix {
        rows: fan_in,
        cols: fan_out,
        values,
    }
}

/// Inverted dropout on the input of the final (hashing) layer.
pub struct Dropout<'a, R: Rng> {
    pub rate: f64,
    pub rng: &'a mut R,
}

/// Activation record of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<DenseMatrix>,
    pre_activations: Vec<DenseMatrix>,
    dropout_mask: Option<Vec<f64>>,
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &HashNet) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| DenseMatrix::zeros(l.fan_in(), l.fan_out()))
                .collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.fan_out()]).collect(),
        }
    }

    /// Flattened view in parameter order (weights then bias, layer by layer).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w.values());
            out.extend_from_slice(b);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

impl HashNet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network has no layers"));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].fan_out(),
                    pair[1].fan_in()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.fan_out() {
                return Err(Error::shape("bias length differs from layer width"));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    /// Width of the hashing layer, i.e. the current bit count `K`.
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::fan_out)
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Layer::fan_out));
        dims
    }

    /// Appends an affine layer mapping the current output to `width` outputs.
    /// The previous output layer keeps its identity activation.
    pub fn push_affine(&mut self, width: usize, seed: u64) -> Result<()> {
        if width == 0 {
            return Err(Error::config("appended layer must have width >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_in = self.output_dim();
        self.layers.push(Layer {
            weights: uniform_fan_in(fan_in, width, &mut rng),
            bias: vec![0.0; width],
            activation: Activation::Identity,
        });
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.values().len() + l.bias.len())
            .sum()
    }

    /// Mutable reference to the `idx`-th parameter in flattened order.
    pub fn parameter_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in &mut self.layers {
            let nw = l.weights.values().len();
            if idx < nw {
                return &mut l.weights.values_mut()[idx];
            }
            idx -= nw;
            if idx < l.bias.len() {
                return &mut l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }
}

/// Evaluation forward pass (no dropout).
pub fn forward(net: &HashNet, batch: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache)> {
    forward_impl::<ChaCha8Rng>(net, batch, None)
}

/// Training forward pass with optional dropout before the hashing layer.
pub fn forward_train<R: Rng>(
    net: &HashNet,
    batch: &DenseMatrix,
    dropout: Option<Dropout<'_, R>>,
) -> Result<(DenseMatrix, ForwardCache)> {
    forward_impl(net, batch, dropout)
}

fn forward_impl<R: Rng>(
    net: &HashNet,
    batch: &DenseMatrix,
    mut dropout: Option<Dropout<'_, R>>,
) -> Result<(DenseMatrix, ForwardCache)> {
    if batch.cols() != net.input_dim() {
        return Err(Error::shape(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            net.input_dim()
        )));
    }
    let last = net.layers.len() - 1;
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre_activations = Vec::with_capacity(net.layers.len());
    let mut dropout_mask = None;
    let mut x = batch.clone();
    for (l, layer) in net.layers.iter().enumerate() {
        if l == last {
            if let Some(d) = dropout.as_mut() {
                if d.rate > 0.0 {
                    let keep = 1.0 - d.rate;
                    let mask: Vec<f64> = (0..x.values.len())
                        .map(|_| {
                            if d.rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    x.values.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    dropout_mask = Some(mask);
                }
            }
        }
        let mut z = x.matmul(&layer.weights)?;
        for r in 0..z.rows {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        let mut a = z.clone();
        if layer.activation != Activation::Identity {
            a.values
                .iter_mut()
                .for_each(|v| *v = layer.activation.apply(*v));
        }
        inputs.push(x);
        pre_activations.push(z);
        x = a;
    }
    Ok((
        x,
        ForwardCache {
            inputs,
            pre_activations,
            dropout_mask,
        },
    ))
}

/// Backpropagates `d_out` (gradient w.r.t. the network outputs `U`).
pub fn backward(net: &HashNet, cache: &ForwardCache, d_out: &DenseMatrix) -> Result<Gradients> {
    let last = net.layers.len() - 1;
    let out_shape = (cache.pre_activations[last].rows, net.output_dim());
    if (d_out.rows, d_out.cols) != out_shape {
        return Err(Error::shape(format!(
            "output gradient is {}x{}, outputs are {}x{}",
            d_out.rows, d_out.cols, out_shape.0, out_shape.1
        )));
    }
    let mut grads = Gradients::zeros_like(net);
    let mut delta = d_out.clone();
    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        if layer.activation != Activation::Identity {
            let z = &cache.pre_activations[l];
            delta
                .values
                .iter_mut()
                .zip(&z.values)
                .for_each(|(d, &zv)| *d *= layer.activation.derivative(zv));
        }
        grads.weights[l] = cache.inputs[l].t_matmul(&delta);
        let gb = &mut grads.bias[l];
        for r in 0..delta.rows {
            for (g, d) in gb.iter_mut().zip(delta.row(r)) {
                *g += d;
            }
        }
        if l > 0 {
            let mut d_in = delta.matmul_t(&layer.weights);
            if l == last {
                if let Some(mask) = &cache.dropout_mask {
                    d_in.values.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
                }
            }
            delta = d_in;
        }
    }
    Ok(grads)
}

/// `θ ← θ − lr·(g + weight_decay·θ)` for every parameter.
pub fn sgd_step(net: &mut HashNet, grads: &Gradients, cfg: &SgdConfig) -> Result<()> {
    if grads.weights.len() != net.layers.len() {
        return Err(Error::shape("gradient layer count differs from network"));
    }
    let lr = cfg.learning_rate;
    let wd = cfg.weight_decay;
    for ((layer, gw), gb) in net.layers.iter_mut().zip(&grads.weights).zip(&grads.bias) {
        if gw.values.len() != layer.weights.values.len() || gb.len() != layer.bias.len() {
            return Err(Error::shape("gradient shape differs from layer"));
        }
        for (w, g) in layer.weights.values.iter_mut().zip(&gw.values) {
            *w -= lr * (g + wd * *w);
        }
        for (b, g) in layer.bias.iter_mut().zip(gb) {
            *b -= lr * (g + wd * *b);
        }
    }
    Ok(())
}
