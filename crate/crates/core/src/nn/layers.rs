//! Layer types and their forward/backward passes.
//!
//! Every layer caches what it needs for backward only when run in a
//! gradient-carrying mode ([`Mode::Train`] or [`Mode::Frozen`]); backward
//! consumes the cache, so each backward must be preceded by its own forward.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Dropout active, batch-norm uses batch statistics and updates its
    /// running statistics. Caches are kept for backward.
    Train,
    /// Same computation as `Train` but batch-norm running statistics are
    /// left untouched. Used when gradients flow through a network whose
    /// state must not change (a frozen discriminator).
    Frozen,
    /// Inference: dropout is the identity, batch-norm uses running statistics.
    Eval,
}

impl Mode {
    #[inline]
    pub fn keeps_cache(self) -> bool {
        !matches!(self, Mode::Eval)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { alpha: f64 },
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub const LEAKY_RELU_ALPHA: f64 = 0.2;

    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu {
            alpha: Self::LEAKY_RELU_ALPHA,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu { alpha } => {
                if x > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu { .. } => "leaky_relu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weight initialization schemes (uniform).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// ±√(6 / fan_in), for (leaky) ReLU layers.
    He,
    /// ±√(6 / (fan_in + fan_out)), for tanh/sigmoid layers.
    Xavier,
}

impl Init {
    pub fn limit(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            Init::He => (6.0 / fan_in as f64).sqrt(),
            Init::Xavier => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        }
    }
}

/// Fully connected layer `y = x·W + b` with `W` of shape `in_dim × out_dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Affine {
    weights: Matrix,
    bias: Vec<f64>,
    #[serde(skip)]
    cached_input: Option<Matrix>,
}

impl Affine {
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config(format!(
                "affine layer dims must be >= 1, got {in_dim}x{out_dim}"
            )));
        }
        let limit = init.limit(in_dim, out_dim);
        Ok(Self {
            weights: Matrix::random_uniform(in_dim, out_dim, -limit, limit, rng),
            bias: vec![0.0; out_dim],
            cached_input: None,
        })
    }

    pub fn from_parts(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Config("affine weights must be non-empty".into()));
        }
        if bias.len() != weights.cols() {
            return Err(Error::shape(
                "Affine::from_parts",
                weights.cols(),
                bias.len(),
            ));
        }
        Ok(Self {
            weights,
            bias,
            cached_input: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn has_cache(&self) -> bool {
        self.cached_input.is_some()
    }

    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "Affine::forward",
                format!("{} input columns", self.in_dim()),
                input.cols(),
            ));
        }
        let mut out = input.matmul_unchecked(&self.weights);
        for row in out.data_mut().chunks_exact_mut(self.bias.len()) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        self.cached_input = mode.keeps_cache().then(|| input.clone());
        Ok(out)
    }

    /// Returns the input gradient and `[dW, db]`.
    pub fn backward(&mut self, grad: &Matrix) -> Result<(Matrix, Vec<Vec<f64>>)> {
        let input = self.cached_input.take().ok_or_else(|| {
            Error::State("affine backward without a training-mode forward".into())
        })?;
        if grad.shape() != (input.rows(), self.out_dim()) {
            return Err(Error::shape(
                "Affine::backward",
                format!("{}x{}", input.rows(), self.out_dim()),
                format!("{}x{}", grad.rows(), grad.cols()),
            ));
        }
        let grad_w = input.t_matmul(grad);
        let grad_b = grad.column_sums();
        let grad_in = grad.matmul_t(&self.weights);
        Ok((grad_in, vec![grad_w.into_data(), grad_b]))
    }

    fn params(&self) -> [&[f64]; 2] {
        [self.weights.data(), &self.bias]
    }

    fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weights.data_mut(), &mut self.bias]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivationLayer {
    pub kind: Activation,
    #[serde(skip)]
    cache: Option<(Matrix, Matrix)>,
}

impl ActivationLayer {
    pub fn new(kind: Activation) -> Self {
        Self { kind, cache: None }
    }

    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Matrix {
        let kind = self.kind;
        let out = input.map(|x| kind.apply(x));
        self.cache = mode.keeps_cache().then(|| (input.clone(), out.clone()));
        out
    }

    pub fn backward(&mut self, grad: &Matrix) -> Result<Matrix> {
        let (input, output) = self.cache.take().ok_or_else(|| {
            Error::State(format!(
                "{} backward without a training-mode forward",
                self.kind.name()
            ))
        })?;
        input.ensure_same_shape(grad, "ActivationLayer::backward")?;
        let kind = self.kind;
        let mut out = grad.clone();
        for ((g, &x), &y) in out
            .data_mut()
            .iter_mut()
            .zip(input.data())
            .zip(output.data())
        {
            *g *= kind.derivative(x, y);
        }
        Ok(out)
    }
}

/// Inverted dropout. Owns its RNG so that mask draws are reproducible per
/// network and independent of every other random stream.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
    mask: Option<Matrix>,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// The mask applied by the most recent gradient-carrying forward.
    pub fn mask(&self) -> Option<&Matrix> {
        self.mask.as_ref()
    }

    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Matrix {
        if !mode.keeps_cache() {
            self.mask = None;
            return input.clone();
        }
        let (rows, cols) = input.shape();
        let mask = if self.rate == 0.0 {
            Matrix::filled(rows, cols, 1.0)
        } else {
            let keep = 1.0 - self.rate;
            let scale = 1.0 / keep;
            let data = (0..rows * cols)
                .map(|_| {
                    if self.rng.gen::<f64>() < keep {
                        scale
                    } else {
                        0.0
                    }
                })
                .collect();
            Matrix::from_vec(rows, cols, data).expect("mask shape")
        };
        let out = input.zip_map(&mask, |x, m| x * m).expect("mask shape");
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, grad: &Matrix) -> Result<Matrix> {
        let mask = self.mask.take().ok_or_else(|| {
            Error::State("dropout backward without a training-mode forward".into())
        })?;
        grad.zip_map(&mask, |g, m| g * m)
    }
}

/// Per-feature batch normalization with learned scale/shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNorm {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    momentum: f64,
    epsilon: f64,
    #[serde(skip)]
    cache: Option<BatchNormCache>,
}

#[derive(Debug, Clone)]
struct BatchNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub const DEFAULT_MOMENTUM: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(dim: usize) -> Result<Self> {
        Self::with_params(dim, Self::DEFAULT_MOMENTUM, Self::DEFAULT_EPSILON)
    }

    pub fn with_params(dim: usize, momentum: f64, epsilon: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("batch-norm dimension must be >= 1".into()));
        }
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::Config(format!(
                "batch-norm momentum must lie in (0, 1), got {momentum}"
            )));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "batch-norm epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum,
            epsilon,
            cache: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    pub(crate) fn set_running_stats(&mut self, mean: &[f64], var: &[f64]) {
        self.running_mean.copy_from_slice(mean);
        self.running_var.copy_from_slice(var);
    }

    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Result<Matrix> {
        let dim = self.dim();
        if input.cols() != dim {
            return Err(Error::shape(
                "BatchNorm::forward",
                format!("{dim} input columns"),
                input.cols(),
            ));
        }
        let n = input.rows();
        let (mean, var) = match mode {
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
            Mode::Train | Mode::Frozen => {
                if n < 2 {
                    return Err(Error::Config(format!(
                        "batch-norm needs a batch of at least 2 samples in training mode, got {n}"
                    )));
                }
                let mean: Vec<f64> = input.column_sums().iter().map(|s| s / n as f64).collect();
                let mut var = vec![0.0; dim];
                for row in input.iter_rows() {
                    for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                        *v += (x - m) * (x - m);
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                (mean, var)
            }
        };
        if mode == Mode::Train {
            let m = self.momentum;
            for i in 0..dim {
                self.running_mean[i] = m * self.running_mean[i] + (1.0 - m) * mean[i];
                self.running_var[i] = m * self.running_var[i] + (1.0 - m) * var[i];
            }
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let mut normalized = input.clone();
        for row in normalized.data_mut().chunks_exact_mut(dim) {
            for i in 0..dim {
                row[i] = (row[i] - mean[i]) * inv_std[i];
            }
        }
        let mut out = normalized.clone();
        for row in out.data_mut().chunks_exact_mut(dim) {
            for ((v, g), b) in row.iter_mut().zip(&self.gamma).zip(&self.beta) {
                *v = g * *v + b;
            }
        }
        self.cache = mode.keeps_cache().then_some(BatchNormCache {
            normalized,
            inv_std,
        });
        Ok(out)
    }

    /// Returns the input gradient and `[dγ, dβ]`.
    pub fn backward(&mut self, grad: &Matrix) -> Result<(Matrix, Vec<Vec<f64>>)> {
        let BatchNormCache {
            normalized,
            inv_std,
        } = self.cache.take().ok_or_else(|| {
            Error::State("batch-norm backward without a training-mode forward".into())
        })?;
        normalized.ensure_same_shape(grad, "BatchNorm::backward")?;
        let dim = self.dim();
        let n = grad.rows() as f64;

        let mut grad_gamma = vec![0.0; dim];
        let grad_beta = grad.column_sums();
        let mut sum_dxhat = vec![0.0; dim];
        let mut sum_dxhat_xhat = vec![0.0; dim];
        for (g_row, x_row) in grad.iter_rows().zip(normalized.iter_rows()) {
            for i in 0..dim {
                grad_gamma[i] += g_row[i] * x_row[i];
                let dxhat = g_row[i] * self.gamma[i];
                sum_dxhat[i] += dxhat;
                sum_dxhat_xhat[i] += dxhat * x_row[i];
            }
        }
        let mut grad_in = grad.clone();
        for (r, row) in grad_in.data_mut().chunks_exact_mut(dim).enumerate() {
            let x_row = normalized.row(r);
            for i in 0..dim {
                let dxhat = row[i] * self.gamma[i];
                row[i] = inv_std[i] / n * (n * dxhat - sum_dxhat[i] - x_row[i] * sum_dxhat_xhat[i]);
            }
        }
        Ok((grad_in, vec![grad_gamma, grad_beta]))
    }

    fn params(&self) -> [&[f64]; 2] {
        [&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.gamma, &mut self.beta]
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Affine(Affine),
    Activation(ActivationLayer),
    Dropout(Dropout),
    BatchNorm(BatchNorm),
}

impl Layer {
    pub fn activation(kind: Activation) -> Self {
        Layer::Activation(ActivationLayer::new(kind))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Affine(_) => "affine",
            Layer::Activation(a) => a.kind.name(),
            Layer::Dropout(_) => "dropout",
            Layer::BatchNorm(_) => "batch_norm",
        }
    }

    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Result<Matrix> {
        match self {
            Layer::Affine(l) => l.forward(input, mode),
            Layer::Activation(l) => Ok(l.forward(input, mode)),
            Layer::Dropout(l) => Ok(l.forward(input, mode)),
            Layer::BatchNorm(l) => l.forward(input, mode),
        }
    }

    pub fn backward(&mut self, grad: &Matrix) -> Result<(Matrix, Vec<Vec<f64>>)> {
        match self {
            Layer::Affine(l) => l.backward(grad),
            Layer::Activation(l) => Ok((l.backward(grad)?, Vec::new())),
            Layer::Dropout(l) => Ok((l.backward(grad)?, Vec::new())),
            Layer::BatchNorm(l) => l.backward(grad),
        }
    }

    /// Trainable parameter arrays, in a fixed order.
    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Affine(l) => l.params().to_vec(),
            Layer::BatchNorm(l) => l.params().to_vec(),
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Affine(l) => l.params_mut().into_iter().collect(),
            Layer::BatchNorm(l) => l.params_mut().into_iter().collect(),
            _ => Vec::new(),
        }
    }

    /// `(name, rows, cols)` for each trainable parameter array.
    pub fn param_shapes(&self) -> Vec<(&'static str, usize, usize)> {
        match self {
            Layer::Affine(l) => vec![
                ("weights", l.in_dim(), l.out_dim()),
                ("bias", 1, l.out_dim()),
            ],
            Layer::BatchNorm(l) => vec![("gamma", 1, l.dim()), ("beta", 1, l.dim())],
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn identity_affine_is_identity() {
        let mut layer = Affine::from_parts(Matrix::identity(3), vec![0.0; 3]).unwrap();
        let x = Matrix::random_uniform(5, 3, -2.0, 2.0, &mut rng());
        assert_eq!(layer.forward(&x, Mode::Eval).unwrap(), x);
    }

    #[test]
    fn leaky_relu_at_minus_one() {
        assert_eq!(Activation::leaky_relu().apply(-1.0), -0.2);
        assert_eq!(Activation::leaky_relu().apply(3.0), 3.0);
    }

    #[test]
    fn tanh_range() {
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        let y = Activation::Tanh.apply(15.0);
        assert!(y > 0.0 && y <= 1.0);
        let y = Activation::Tanh.apply(5.0);
        assert!(y > -1.0 && y < 1.0);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert!(Activation::Sigmoid.apply(-800.0).is_finite());
        assert!(Activation::Sigmoid.apply(800.0).is_finite());
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    }

    #[test]
    fn affine_rejects_wrong_width() {
        let mut layer = Affine::new(3, 2, Init::He, &mut rng()).unwrap();
        assert!(matches!(
            layer.forward(&Matrix::zeros(4, 2), Mode::Train),
            Err(Error::Shape { .. })
        ));
        assert!(Affine::new(0, 2, Init::He, &mut rng()).is_err());
    }

    #[test]
    fn backward_requires_training_forward() {
        let mut layer = Affine::new(3, 2, Init::He, &mut rng()).unwrap();
        let x = Matrix::zeros(4, 3);
        layer.forward(&x, Mode::Eval).unwrap();
        assert!(matches!(
            layer.backward(&Matrix::zeros(4, 2)),
            Err(Error::State(_))
        ));

        layer.forward(&x, Mode::Train).unwrap();
        assert!(layer.has_cache());
        layer.backward(&Matrix::zeros(4, 2)).unwrap();
        assert!(!layer.has_cache());
        assert!(layer.backward(&Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn dropout_identity_cases() {
        let x = Matrix::random_uniform(6, 5, -1.0, 1.0, &mut rng());
        let mut d = Dropout::new(0.5, 1).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval), x);
        let mut d0 = Dropout::new(0.0, 1).unwrap();
        assert_eq!(d0.forward(&x, Mode::Train), x);
        assert!(Dropout::new(1.0, 1).is_err());
        assert!(Dropout::new(-0.1, 1).is_err());
    }

    #[test]
    fn dropout_scales_survivors() {
        let x = Matrix::filled(200, 50, 1.0);
        let mut d = Dropout::new(0.1, 3).unwrap();
        let y = d.forward(&x, Mode::Train);
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count();
        assert!(y
            .data()
            .iter()
            .all(|&v| v == 0.0 || (v - 1.0 / 0.9).abs() < 1e-15));
        let frac = zeros as f64 / 10_000.0;
        assert!((frac - 0.1).abs() < 0.02, "dropped fraction {frac}");
    }

    #[test]
    fn batch_norm_normalizes_in_train_mode() {
        let mut bn = BatchNorm::new(4).unwrap();
        let x = Matrix::random_uniform(16, 4, -3.0, 5.0, &mut rng());
        let y = bn.forward(&x, Mode::Train).unwrap();
        for c in 0..4 {
            let col: Vec<f64> = (0..16).map(|r| y.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 16.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn batch_norm_running_stats_only_move_in_train() {
        let mut bn = BatchNorm::new(2).unwrap();
        let x = Matrix::random_uniform(8, 2, 2.0, 4.0, &mut rng());
        bn.forward(&x, Mode::Eval).unwrap();
        bn.forward(&x, Mode::Frozen).unwrap();
        assert_eq!(bn.running_mean(), &[0.0, 0.0]);
        assert_eq!(bn.running_var(), &[1.0, 1.0]);
        bn.forward(&x, Mode::Train).unwrap();
        assert!(bn.running_mean().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn batch_norm_rejects_single_sample_batches() {
        let mut bn = BatchNorm::new(2).unwrap();
        assert!(bn.forward(&Matrix::zeros(1, 2), Mode::Train).is_err());
        assert!(bn.forward(&Matrix::zeros(1, 2), Mode::Eval).is_ok());
    }
}
