use super::{Layer, Matrix, Mode};
use crate::error::{Error, Result};

/// Output of a backward pass through a [`LayerStack`].
#[derive(Debug, Clone)]
pub struct Backprop {
    /// Gradient w.r.t. the stack input, for chaining into an upstream network.
    pub input_grad: Matrix,
    /// Parameter gradients, aligned with [`LayerStack::params`].
    pub param_grads: Vec<Vec<f64>>,
}

/// An ordered sequence of layers evaluated front to back.
#[derive(Debug, Clone)]
pub struct LayerStack {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut input_dim = None;
        for layer in &layers {
            match layer {
                Layer::Affine(a) => {
                    if let Some(d) = dim {
                        if d != a.in_dim() {
                            return Err(Error::Config(format!(
                                "layer stack width mismatch: {d} feeds an affine layer expecting {}",
                                a.in_dim()
                            )));
                        }
                    }
                    input_dim.get_or_insert(a.in_dim());
                    dim = Some(a.out_dim());
                }
                Layer::BatchNorm(b) => {
                    if let Some(d) = dim {
                        if d != b.dim() {
                            return Err(Error::Config(format!(
                                "layer stack width mismatch: {d} feeds a batch-norm of width {}",
                                b.dim()
                            )));
                        }
                    }
                    input_dim.get_or_insert(b.dim());
                    dim = Some(b.dim());
                }
                _ => {}
            }
        }
        match (input_dim, dim) {
            (Some(input_dim), Some(output_dim)) => Ok(Self {
                layers,
                input_dim,
                output_dim,
            }),
            _ => Err(Error::Config(
                "a layer stack needs at least one affine layer".into(),
            )),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Widths of the activations between affine layers, input first.
    pub fn widths(&self) -> Vec<usize> {
        let mut widths = vec![self.input_dim];
        for layer in &self.layers {
            if let Layer::Affine(a) = layer {
                widths.push(a.out_dim());
            }
        }
        widths
    }

    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Result<Matrix> {
        if input.cols() != self.input_dim {
            return Err(Error::shape(
                "LayerStack::forward",
                format!("{} input columns", self.input_dim),
                input.cols(),
            ));
        }
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode)?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, output_grad: &Matrix) -> Result<Backprop> {
        if output_grad.cols() != self.output_dim {
            return Err(Error::shape(
                "LayerStack::backward",
                format!("{} gradient columns", self.output_dim),
                output_grad.cols(),
            ));
        }
        let mut grad = output_grad.clone();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for layer in self.layers.iter_mut().rev() {
            let (g, p) = layer.backward(&grad)?;
            grad = g;
            per_layer.push(p);
        }
        let param_grads = per_layer.into_iter().rev().flatten().collect();
        Ok(Backprop {
            input_grad: grad,
            param_grads,
        })
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Owned copy of every trainable parameter array.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params().into_iter().map(<[f64]>::to_vec).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != snapshot.len() {
            return Err(Error::shape(
                "LayerStack::restore",
                params.len(),
                snapshot.len(),
            ));
        }
        for (p, s) in params.iter_mut().zip(snapshot) {
            if p.len() != s.len() {
                return Err(Error::shape("LayerStack::restore", p.len(), s.len()));
            }
            p.copy_from_slice(s);
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Named shapes for each parameter array, e.g. `("layer0.weights", 8, 16)`.
    pub fn param_shapes(&self) -> Vec<(String, usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.param_shapes()
                    .into_iter()
                    .map(move |(name, r, c)| (format!("layer{i}.{name}"), r, c))
            })
            .collect()
    }
}
