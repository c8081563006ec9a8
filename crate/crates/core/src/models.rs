//! Builders for the generator, the real/fake discriminator and the
//! autoencoder discriminator. Every builder is a pure function of its spec
//! and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Affine, BatchNorm, Dropout, Init, Layer, LayerStack};

pub const DEFAULT_DROPOUT: f64 = 0.1;

/// Generator: three hidden blocks and a tanh output in the data space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub dropout: f64,
    /// Batch-norm after each hidden activation.
    pub batch_norm: bool,
}

impl GeneratorSpec {
    /// Defaults for `d` data features: latent `d`, hidden `[2d, 2d, d]`.
    pub fn for_data(d: usize) -> Self {
        Self {
            latent_dim: d,
            hidden_dims: vec![2 * d, 2 * d, d],
            output_dim: d,
            dropout: DEFAULT_DROPOUT,
            batch_norm: true,
        }
    }
}

/// Real/fake discriminator: three hidden blocks and a scalar sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D1Spec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub dropout: f64,
    pub batch_norm: bool,
}

impl D1Spec {
    /// Defaults for `d` input features: hidden `[2d, d, ⌈d/2⌉]`.
    pub fn for_input(d: usize) -> Self {
        Self {
            input_dim: d,
            hidden_dims: vec![2 * d, d, d.div_ceil(2)],
            dropout: DEFAULT_DROPOUT,
            batch_norm: true,
        }
    }
}

/// Width and regularization overrides for `G` and `D1`. Unset fields fall
/// back to the defaults derived from the feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub latent_dim: Option<usize>,
    pub g_hidden: Option<Vec<usize>>,
    pub d1_hidden: Option<Vec<usize>>,
    pub g_batch_norm: bool,
    pub g_dropout: f64,
    pub d1_batch_norm: bool,
    pub d1_dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: None,
            g_hidden: None,
            d1_hidden: None,
            g_batch_norm: true,
            g_dropout: DEFAULT_DROPOUT,
            d1_batch_norm: true,
            d1_dropout: DEFAULT_DROPOUT,
        }
    }
}

impl ModelConfig {
    pub fn generator_spec(&self, d: usize) -> GeneratorSpec {
        let mut spec = GeneratorSpec::for_data(d);
        if let Some(latent) = self.latent_dim {
            spec.latent_dim = latent;
        }
        if let Some(h) = &self.g_hidden {
            spec.hidden_dims = h.clone();
        }
        spec.batch_norm = self.g_batch_norm;
        spec.dropout = self.g_dropout;
        spec
    }

    pub fn d1_spec(&self, d: usize) -> D1Spec {
        let mut spec = D1Spec::for_input(d);
        if let Some(h) = &self.d1_hidden {
            spec.hidden_dims = h.clone();
        }
        spec.batch_norm = self.d1_batch_norm;
        spec.dropout = self.d1_dropout;
        spec
    }
}

/// `round_half_even(fraction · d)`, floored at 1.
pub fn scaled_width(d: usize, fraction: f64) -> usize {
    ((d as f64 * fraction).round_ties_even() as usize).max(1)
}

/// Autoencoder widths: `[d, 70% d, 50% d, 70% d, d]`.
pub fn d2_widths(input_dim: usize) -> Result<Vec<usize>> {
    if input_dim < 2 {
        return Err(Error::Config(format!(
            "autoencoder input dimension must be >= 2, got {input_dim}"
        )));
    }
    let outer = scaled_width(input_dim, 0.7);
    let inner = scaled_width(input_dim, 0.5);
    Ok(vec![input_dim, outer, inner, outer, input_dim])
}

fn hidden_block<R: Rng>(
    layers: &mut Vec<Layer>,
    in_dim: usize,
    out_dim: usize,
    batch_norm: bool,
    dropout: f64,
    rng: &mut R,
) -> Result<()> {
    layers.push(Layer::Affine(Affine::new(in_dim, out_dim, Init::He, rng)?));
    layers.push(Layer::activation(Activation::leaky_relu()));
    if batch_norm {
        layers.push(Layer::BatchNorm(BatchNorm::new(out_dim)?));
    }
    layers.push(Layer::Dropout(Dropout::new(dropout, rng.gen())?));
    Ok(())
}

fn check_dims(what: &str, dims: &[usize]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::Config(format!(
            "{what}: all dimensions must be >= 1, got {dims:?}"
        )));
    }
    Ok(())
}

pub fn build_generator(spec: &GeneratorSpec, seed: u64) -> Result<LayerStack> {
    check_dims("generator", &[spec.latent_dim, spec.output_dim])?;
    check_dims("generator hidden", &spec.hidden_dims)?;
    if spec.hidden_dims.is_empty() {
        return Err(Error::Config(
            "generator needs at least one hidden layer".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut width = spec.latent_dim;
    for &h in &spec.hidden_dims {
        hidden_block(
            &mut layers,
            width,
            h,
            spec.batch_norm,
            spec.dropout,
            &mut rng,
        )?;
        width = h;
    }
    layers.push(Layer::Affine(Affine::new(
        width,
        spec.output_dim,
        Init::Xavier,
        &mut rng,
    )?));
    layers.push(Layer::activation(Activation::Tanh));
    LayerStack::new(layers)
}

pub fn build_d1(spec: &D1Spec, seed: u64) -> Result<LayerStack> {
    check_dims("d1", &[spec.input_dim])?;
    check_dims("d1 hidden", &spec.hidden_dims)?;
    if spec.hidden_dims.is_empty() {
        return Err(Error::Config("d1 needs at least one hidden layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut width = spec.input_dim;
    for &h in &spec.hidden_dims {
        hidden_block(
            &mut layers,
            width,
            h,
            spec.batch_norm,
            spec.dropout,
            &mut rng,
        )?;
        width = h;
    }
    layers.push(Layer::Affine(Affine::new(
        width,
        1,
        Init::Xavier,
        &mut rng,
    )?));
    layers.push(Layer::activation(Activation::Sigmoid));
    LayerStack::new(layers)
}

/// Four affine layers, ReLU on hidden layers, tanh on the reconstruction.
pub fn build_d2(input_dim: usize, seed: u64) -> Result<LayerStack> {
    let widths = d2_widths(input_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let last = widths.len() - 2;
    for (i, pair) in widths.windows(2).enumerate() {
        if i == last {
            layers.push(Layer::Affine(Affine::new(
                pair[0],
                pair[1],
                Init::Xavier,
                &mut rng,
            )?));
            layers.push(Layer::activation(Activation::Tanh));
        } else {
            layers.push(Layer::Affine(Affine::new(
                pair[0],
                pair[1],
                Init::He,
                &mut rng,
            )?));
            layers.push(Layer::activation(Activation::Relu));
        }
    }
    LayerStack::new(layers)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::nn::{Matrix, Mode};

    fn noise(rows: usize, cols: usize) -> Matrix {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = (0..rows * cols)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                5.0 * v
            })
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn d2_widths_follow_the_70_50_rule() {
        assert_eq!(d2_widths(10).unwrap(), vec![10, 7, 5, 7, 10]);
        assert_eq!(d2_widths(16).unwrap(), vec![16, 11, 8, 11, 16]);
        // 0.5 · 5 = 2.5 rounds to even
        assert_eq!(d2_widths(5).unwrap(), vec![5, 4, 2, 4, 5]);
        assert_eq!(d2_widths(2).unwrap(), vec![2, 1, 1, 1, 2]);
        assert!(d2_widths(1).is_err());
        assert!(build_d2(1, 0).is_err());
    }

    #[test]
    fn d2_architecture_matches_widths() {
        let stack = build_d2(10, 0).unwrap();
        assert_eq!(stack.widths(), vec![10, 7, 5, 7, 10]);
        let names: Vec<_> = stack.layers().iter().map(Layer::name).collect();
        assert_eq!(
            names,
            ["affine", "relu", "affine", "relu", "affine", "relu", "affine", "tanh"]
        );
    }

    #[test]
    fn generator_shape_range_and_layout() {
        let spec = GeneratorSpec::for_data(6);
        let mut g = build_generator(&spec, 5).unwrap();
        let out = g.forward(&noise(32, 6), Mode::Train).unwrap();
        assert_eq!(out.shape(), (32, 6));
        assert!(out.data().iter().all(|v| v.abs() <= 1.0));
        let names: Vec<_> = g.layers().iter().map(Layer::name).collect();
        assert_eq!(
            &names[..4],
            ["affine", "leaky_relu", "batch_norm", "dropout"]
        );
        assert_eq!(&names[names.len() - 2..], ["affine", "tanh"]);
        assert_eq!(g.widths(), vec![6, 12, 12, 6, 6]);

        let no_bn = GeneratorSpec {
            batch_norm: false,
            ..spec
        };
        let g = build_generator(&no_bn, 5).unwrap();
        assert!(g.layers().iter().all(|l| l.name() != "batch_norm"));
    }

    #[test]
    fn d1_outputs_probabilities() {
        let mut d1 = build_d1(&D1Spec::for_input(7), 1).unwrap();
        assert_eq!(d1.widths(), vec![7, 14, 7, 4, 1]);
        let out = d1.forward(&noise(10, 7), Mode::Train).unwrap();
        assert_eq!(out.shape(), (10, 1));
        assert!(out.data().iter().all(|&p| p > 0.0 && p < 1.0));
        let a = d1.forward(&noise(10, 7), Mode::Eval).unwrap();
        let b = d1.forward(&noise(10, 7), Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn builders_are_deterministic() {
        let g = GeneratorSpec::for_data(4);
        assert_eq!(
            build_generator(&g, 9).unwrap().snapshot(),
            build_generator(&g, 9).unwrap().snapshot()
        );
        assert_ne!(
            build_generator(&g, 9).unwrap().snapshot(),
            build_generator(&g, 10).unwrap().snapshot()
        );
        let d = D1Spec::for_input(4);
        assert_eq!(
            build_d1(&d, 9).unwrap().snapshot(),
            build_d1(&d, 9).unwrap().snapshot()
        );
        assert_eq!(
            build_d2(4, 9).unwrap().snapshot(),
            build_d2(4, 9).unwrap().snapshot()
        );

        let mut a = build_generator(&g, 9).unwrap();
        let mut b = build_generator(&g, 9).unwrap();
        let z = noise(8, 4);
        assert_eq!(
            a.forward(&z, Mode::Train).unwrap(),
            b.forward(&z, Mode::Train).unwrap()
        );
    }

    #[test]
    fn invalid_dims_are_rejected() {
        let mut spec = GeneratorSpec::for_data(4);
        spec.hidden_dims[1] = 0;
        assert!(build_generator(&spec, 0).is_err());
        let mut spec = D1Spec::for_input(4);
        spec.input_dim = 0;
        assert!(build_d1(&spec, 0).is_err());
    }

    proptest! {
        #[test]
        fn d2_decoder_mirrors_encoder(d in 2usize..=200) {
            let w = d2_widths(d).unwrap();
            let mut rev = w.clone();
            rev.reverse();
            prop_assert_eq!(&w, &rev);
            prop_assert_eq!(w[0], d);
            prop_assert!(w.iter().all(|&x| x >= 1));
        }
    }
}
