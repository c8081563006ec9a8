//! MDGAN training and the baseline autoencoder trainer.
//!
//! One MDGAN iteration on a real batch `x`, in order:
//!
//! 1. update `D1` on `x` (target: real)
//! 2. sample `z ~ N(0, 1)` and generate `G(z)`
//! 3. update `D1` on `G(z)` (target: fake)
//! 4. update `G` through a frozen `D1`
//! 5. update `D2` on `x` (MSE reconstruction)
//! 6. once warm-up is over, update `D2` on `G(z)`
//! 7. update `G` through a frozen `D2` on the shared MSE loss
//!
//! After every epoch `D2` is scored on the validation split and the best
//! epoch is kept.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::eval::rmse_scores;
use crate::models::{build_d1, build_d2, build_generator, ModelConfig};
use crate::nn::{bce_loss, mse_loss, LayerStack, Matrix, Mode, Optimizer, OptimizerKind};
use crate::rng::{self, purpose};

/// Objective `G` optimizes against `D1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GLossMode {
    /// Maximize `log D1(G(z))`.
    #[default]
    NonSaturating,
    /// Minimize `log(1 − D1(G(z)))`.
    Saturating,
}

/// Granularity of the warm-up period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmUpUnit {
    #[default]
    Epochs,
    Iterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// `D2` sees generated batches only once this many epochs (or
    /// iterations, see `warm_up_unit`) have completed.
    pub warm_up: usize,
    pub warm_up_unit: WarmUpUnit,
    pub seed: u64,
    pub g_optimizer: OptimizerKind,
    pub d1_optimizer: OptimizerKind,
    pub d2_optimizer: OptimizerKind,
    pub g_loss_mode: GLossMode,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            warm_up: 0,
            warm_up_unit: WarmUpUnit::Epochs,
            seed: 0,
            g_optimizer: OptimizerKind::adam(0.001),
            d1_optimizer: OptimizerKind::sgd(0.01),
            d2_optimizer: OptimizerKind::adam(0.001),
            g_loss_mode: GLossMode::NonSaturating,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be >= 2 for batch normalization, got {}",
                self.batch_size
            )));
        }
        self.g_optimizer.validate()?;
        self.d1_optimizer.validate()?;
        self.d2_optimizer.validate()
    }
}

/// A network and the optimizer bound to it.
#[derive(Debug, Clone)]
pub struct Network {
    pub stack: LayerStack,
    pub optimizer: Optimizer,
}

impl Network {
    pub fn new(stack: LayerStack, kind: OptimizerKind) -> Result<Self> {
        Ok(Self {
            stack,
            optimizer: Optimizer::new(kind)?,
        })
    }

    fn apply(&mut self, grads: &[Vec<f64>]) -> Result<()> {
        self.optimizer.apply(&mut self.stack, grads)
    }
}

#[derive(Debug, Clone)]
pub struct ModelTriple {
    pub generator: Network,
    pub d1: Network,
    pub d2: Network,
    pub latent_dim: usize,
}

impl ModelTriple {
    /// Builds the three networks for `n_features` inputs. Each network's
    /// initialization comes from its own stream derived from `config.seed`.
    pub fn build(n_features: usize, config: &TrainConfig) -> Result<Self> {
        let g_spec = config.model.generator_spec(n_features);
        let d1_spec = config.model.d1_spec(n_features);
        Ok(Self {
            latent_dim: g_spec.latent_dim,
            generator: Network::new(
                build_generator(&g_spec, rng::derive_seed(config.seed, purpose::G_INIT))?,
                config.g_optimizer,
            )?,
            d1: Network::new(
                build_d1(&d1_spec, rng::derive_seed(config.seed, purpose::D1_INIT))?,
                config.d1_optimizer,
            )?,
            d2: build_autoencoder(n_features, config)?,
        })
    }
}

fn build_autoencoder(n_features: usize, config: &TrainConfig) -> Result<Network> {
    Network::new(
        build_d2(n_features, rng::derive_seed(config.seed, purpose::D2_INIT))?,
        config.d2_optimizer,
    )
}

/// `batch × latent_dim` matrix of i.i.d. standard normal draws.
pub fn sample_noise<R: Rng + ?Sized>(batch: usize, latent_dim: usize, rng: &mut R) -> Matrix {
    let data = (0..batch * latent_dim)
        .map(|_| StandardNormal.sample(&mut *rng))
        .collect();
    Matrix::from_vec(batch, latent_dim, data).expect("noise shape")
}

/// Negative mean reconstruction RMSE over the validation set; 0 is perfect.
pub fn validation_score(model: &mut LayerStack, validation: &Matrix) -> Result<f64> {
    if validation.rows() == 0 {
        return Err(Error::Config("validation set is empty".into()));
    }
    let scores = rmse_scores(model, validation)?;
    Ok(-(scores.iter().sum::<f64>() / scores.len() as f64))
}

/// Loss averages for one epoch. GAN-only fields are `None` for the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d1_real: Option<f64>,
    pub d1_generated: Option<f64>,
    pub g_vs_d1: Option<f64>,
    pub d2_real: f64,
    /// Logged during warm-up too, but only optimized once warm-up is over.
    pub d2_generated: Option<f64>,
    pub g_vs_d2: Option<f64>,
    pub validation_score: f64,
}

impl EpochRecord {
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        [
            ("d1_real", self.d1_real),
            ("d1_generated", self.d1_generated),
            ("g_vs_d1", self.g_vs_d1),
            ("d2_real", Some(self.d2_real)),
            ("d2_generated", self.d2_generated),
            ("g_vs_d2", self.g_vs_d2),
            ("validation_score", Some(self.validation_score)),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.map(|v| (name, v)))
        .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub records: Vec<EpochRecord>,
}

impl LossTrace {
    /// Long-format CSV: `epoch,loss_name,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "loss_name", "value"])?;
        for r in &self.records {
            for (name, v) in r.values() {
                w.write_record([r.epoch.to_string(), name.to_string(), v.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<trace writer>", e))?;
        Ok(())
    }
}

/// Result of a training run: the autoencoder from the best validation epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_model: LayerStack,
    pub best_epoch: usize,
    pub best_score: f64,
    pub trace: LossTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainStep {
    D1Real,
    D1Generated,
    GeneratorVsD1,
    D2Real,
    D2Generated,
    GeneratorVsD2,
}

impl TrainStep {
    pub fn name(self) -> &'static str {
        match self {
            TrainStep::D1Real => "optimize D1 on real batch",
            TrainStep::D1Generated => "optimize D1 on generated batch",
            TrainStep::GeneratorVsD1 => "optimize G on D1",
            TrainStep::D2Real => "optimize D2 on real batch",
            TrainStep::D2Generated => "optimize D2 on generated batch",
            TrainStep::GeneratorVsD2 => "optimize G on D2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepContext {
    pub epoch: usize,
    pub iteration: usize,
    pub global_iteration: usize,
}

/// Callbacks around every optimization step, for instrumentation and tests.
pub trait TrainObserver {
    fn before_step(&mut self, _step: TrainStep, _ctx: StepContext, _models: &ModelTriple) {}
    fn after_step(&mut self, _step: TrainStep, _ctx: StepContext, _models: &ModelTriple) {}
}

impl TrainObserver for () {}

/// Shuffled mini-batches of row indices. A trailing batch of one sample is
/// dropped since batch-norm needs two.
fn epoch_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect()
}

fn check_split(data: &DatasetSplit) -> Result<()> {
    if data.train.rows() < 2 {
        return Err(Error::Config(format!(
            "training split needs at least 2 samples, got {}",
            data.train.rows()
        )));
    }
    if data.validation.rows() == 0 {
        return Err(Error::Config("validation split is empty".into()));
    }
    if data.validation.cols() != data.train.cols() {
        return Err(Error::shape(
            "validation split",
            data.train.cols(),
            data.validation.cols(),
        ));
    }
    Ok(())
}

fn finite(value: f64, ctx: StepContext, step: TrainStep) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence {
            epoch: ctx.epoch,
            iteration: ctx.iteration,
            step: step.name(),
            value,
        })
    }
}

#[derive(Default)]
struct Running {
    sum: f64,
    count: usize,
}

impl Running {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Default)]
struct EpochLosses {
    d1_real: Running,
    d1_generated: Running,
    g_vs_d1: Running,
    d2_real: Running,
    d2_generated: Running,
    g_vs_d2: Running,
}

struct Best {
    model: LayerStack,
    epoch: usize,
    score: f64,
}

impl Best {
    fn offer(best: &mut Option<Best>, model: &LayerStack, epoch: usize, score: f64) {
        if best.as_ref().is_none_or(|b| score > b.score) {
            *best = Some(Best {
                model: model.clone(),
                epoch,
                score,
            });
        }
    }
}

/// Owns the three networks and the random streams for one MDGAN run.
pub struct MdganTrainer<'a> {
    data: &'a DatasetSplit,
    config: TrainConfig,
    models: ModelTriple,
}

impl<'a> MdganTrainer<'a> {
    pub fn new(data: &'a DatasetSplit, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        check_split(data)?;
        let models = ModelTriple::build(data.n_features(), config)?;
        Ok(Self {
            data,
            config: config.clone(),
            models,
        })
    }

    pub fn models(&self) -> &ModelTriple {
        &self.models
    }

    pub fn models_mut(&mut self) -> &mut ModelTriple {
        &mut self.models
    }

    fn d2_sees_generated(&self, ctx: StepContext) -> bool {
        match self.config.warm_up_unit {
            WarmUpUnit::Epochs => ctx.epoch >= self.config.warm_up,
            WarmUpUnit::Iterations => ctx.global_iteration >= self.config.warm_up,
        }
    }

    pub fn run(mut self, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
        let mut batch_rng = rng::stream(self.config.seed, purpose::BATCHING);
        let mut noise_rng = rng::stream(self.config.seed, purpose::NOISE);
        let mut best: Option<Best> = None;
        let mut trace = LossTrace::default();
        let mut global_iteration = 0;

        for epoch in 0..self.config.epochs {
            let mut losses = EpochLosses::default();
            let batches = epoch_batches(
                self.data.train.rows(),
                self.config.batch_size,
                &mut batch_rng,
            );
            for (iteration, rows) in batches.iter().enumerate() {
                let ctx = StepContext {
                    epoch,
                    iteration,
                    global_iteration,
                };
                let real = self.data.train.select_rows(rows);
                let z = sample_noise(real.rows(), self.models.latent_dim, &mut noise_rng);
                self.iterate(&real, &z, ctx, &mut losses, observer)?;
                global_iteration += 1;
            }

            let score = validation_score(&mut self.models.d2.stack, &self.data.validation)?;
            if !score.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    iteration: batches.len(),
                    step: "validation score",
                    value: score,
                });
            }
            Best::offer(&mut best, &self.models.d2.stack, epoch, score);
            trace.records.push(EpochRecord {
                epoch,
                d1_real: losses.d1_real.mean(),
                d1_generated: losses.d1_generated.mean(),
                g_vs_d1: losses.g_vs_d1.mean(),
                d2_real: losses.d2_real.mean().unwrap_or(f64::NAN),
                d2_generated: losses.d2_generated.mean(),
                g_vs_d2: losses.g_vs_d2.mean(),
                validation_score: score,
            });
            log::debug!("mdgan epoch {epoch}: validation score {score:.6}");
        }

        let best = best.expect("at least one epoch");
        Ok(TrainOutcome {
            best_model: best.model,
            best_epoch: best.epoch,
            best_score: best.score,
            trace,
        })
    }

    fn iterate(
        &mut self,
        real: &Matrix,
        z: &Matrix,
        ctx: StepContext,
        losses: &mut EpochLosses,
        observer: &mut dyn TrainObserver,
    ) -> Result<()> {
        let n = real.rows();
        let ones = Matrix::filled(n, 1, 1.0);
        let zeros = Matrix::filled(n, 1, 0.0);
        let d2_sees_generated = self.d2_sees_generated(ctx);
        let m = &mut self.models;

        // (1) D1 on real
        observer.before_step(TrainStep::D1Real, ctx, m);
        let p = m.d1.stack.forward(real, Mode::Train)?;
        let (loss, grad) = bce_loss(&p, &ones)?;
        losses.d1_real.push(finite(loss, ctx, TrainStep::D1Real)?);
        let bp = m.d1.stack.backward(&grad)?;
        m.d1.apply(&bp.param_grads)?;
        observer.after_step(TrainStep::D1Real, ctx, m);

        // (2) generate; G's caches stay live for step 4
        let generated = m.generator.stack.forward(z, Mode::Train)?;

        // (3) D1 on generated
        observer.before_step(TrainStep::D1Generated, ctx, m);
        let p = m.d1.stack.forward(&generated, Mode::Train)?;
        let (loss, grad) = bce_loss(&p, &zeros)?;
        losses
            .d1_generated
            .push(finite(loss, ctx, TrainStep::D1Generated)?);
        let bp = m.d1.stack.backward(&grad)?;
        m.d1.apply(&bp.param_grads)?;
        observer.after_step(TrainStep::D1Generated, ctx, m);

        // (4) G through frozen D1
        observer.before_step(TrainStep::GeneratorVsD1, ctx, m);
        let p = m.d1.stack.forward(&generated, Mode::Frozen)?;
        let (loss, grad) = match self.config.g_loss_mode {
            GLossMode::NonSaturating => bce_loss(&p, &ones)?,
            GLossMode::Saturating => {
                // log(1 − p) = −BCE(p, 0)
                let (l, g) = bce_loss(&p, &zeros)?;
                (-l, g.map(|v| -v))
            }
        };
        losses
            .g_vs_d1
            .push(finite(loss, ctx, TrainStep::GeneratorVsD1)?);
        let through_d1 = m.d1.stack.backward(&grad)?;
        let bp = m.generator.stack.backward(&through_d1.input_grad)?;
        m.generator.apply(&bp.param_grads)?;
        observer.after_step(TrainStep::GeneratorVsD1, ctx, m);

        // (5) D2 on real
        observer.before_step(TrainStep::D2Real, ctx, m);
        let recon = m.d2.stack.forward(real, Mode::Train)?;
        let (loss, grad) = mse_loss(real, &recon)?;
        losses.d2_real.push(finite(loss, ctx, TrainStep::D2Real)?);
        let bp = m.d2.stack.backward(&grad)?;
        m.d2.apply(&bp.param_grads)?;
        observer.after_step(TrainStep::D2Real, ctx, m);

        // (6) D2 on generated, gated by warm-up
        if d2_sees_generated {
            observer.before_step(TrainStep::D2Generated, ctx, m);
            let recon = m.d2.stack.forward(&generated, Mode::Train)?;
            let (loss, grad) = mse_loss(&generated, &recon)?;
            losses
                .d2_generated
                .push(finite(loss, ctx, TrainStep::D2Generated)?);
            let bp = m.d2.stack.backward(&grad)?;
            m.d2.apply(&bp.param_grads)?;
            observer.after_step(TrainStep::D2Generated, ctx, m);
        } else {
            let recon = m.d2.stack.forward(&generated, Mode::Eval)?;
            let (loss, _) = mse_loss(&generated, &recon)?;
            losses
                .d2_generated
                .push(finite(loss, ctx, TrainStep::D2Generated)?);
        }

        // (7) G through frozen D2. The loss ‖x − D2(x)‖² depends on x both
        // directly and through D2, so both paths feed G's gradient.
        observer.before_step(TrainStep::GeneratorVsD2, ctx, m);
        let regenerated = m.generator.stack.forward(z, Mode::Train)?;
        let recon = m.d2.stack.forward(&regenerated, Mode::Frozen)?;
        let (loss, grad_recon) = mse_loss(&regenerated, &recon)?;
        losses
            .g_vs_d2
            .push(finite(loss, ctx, TrainStep::GeneratorVsD2)?);
        let through_d2 = m.d2.stack.backward(&grad_recon)?;
        let mut grad_x = through_d2.input_grad;
        grad_x.add_assign(&grad_recon.map(|g| -g))?;
        let bp = m.generator.stack.backward(&grad_x)?;
        m.generator.apply(&bp.param_grads)?;
        observer.after_step(TrainStep::GeneratorVsD2, ctx, m);

        Ok(())
    }
}

pub fn train_mdgan(data: &DatasetSplit, config: &TrainConfig) -> Result<TrainOutcome> {
    MdganTrainer::new(data, config)?.run(&mut ())
}

/// Trains an autoencoder with `D2`'s architecture on real batches only,
/// with the same initialization stream, batch order and selection rule as
/// `D2` inside [`train_mdgan`].
pub fn train_baseline(data: &DatasetSplit, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    check_split(data)?;
    let mut ae = build_autoencoder(data.n_features(), config)?;
    let mut batch_rng = rng::stream(config.seed, purpose::BATCHING);
    let mut best: Option<Best> = None;
    let mut trace = LossTrace::default();

    for epoch in 0..config.epochs {
        let mut d2_real = Running::default();
        let batches = epoch_batches(data.train.rows(), config.batch_size, &mut batch_rng);
        for (iteration, rows) in batches.iter().enumerate() {
            let ctx = StepContext {
                epoch,
                iteration,
                global_iteration: 0,
            };
            let real = data.train.select_rows(rows);
            let recon = ae.stack.forward(&real, Mode::Train)?;
            let (loss, grad) = mse_loss(&real, &recon)?;
            d2_real.push(finite(loss, ctx, TrainStep::D2Real)?);
            let bp = ae.stack.backward(&grad)?;
            ae.apply(&bp.param_grads)?;
        }
        let score = validation_score(&mut ae.stack, &data.validation)?;
        if !score.is_finite() {
            return Err(Error::Divergence {
                epoch,
                iteration: batches.len(),
                step: "validation score",
                value: score,
            });
        }
        Best::offer(&mut best, &ae.stack, epoch, score);
        trace.records.push(EpochRecord {
            epoch,
            d1_real: None,
            d1_generated: None,
            g_vs_d1: None,
            d2_real: d2_real.mean().unwrap_or(f64::NAN),
            d2_generated: None,
            g_vs_d2: None,
            validation_score: score,
        });
    }

    let best = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best_model: best.model,
        best_epoch: best.epoch,
        best_score: best.score,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::{
        fit_and_apply_normalization, make_synthetic, partition, PartitionRule, SyntheticKind,
        SyntheticSpec,
    };
    use crate::nn::Layer;

    fn blob_split(n_normal: usize, dim: usize, train: usize) -> DatasetSplit {
        let raw = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Blob,
            n_normal,
            n_anomaly: 20,
            dim,
            separation: 4.0,
            seed: 1,
        })
        .unwrap();
        fit_and_apply_normalization(&partition(&raw, PartitionRule::TrainSize(train), 3).unwrap())
            .unwrap()
    }

    fn constant_split(value: f64, rows: usize, dim: usize) -> DatasetSplit {
        DatasetSplit {
            feature_names: (0..dim).map(|i| format!("x{i}")).collect(),
            train: Matrix::filled(rows, dim, value),
            validation: Matrix::filled(4, dim, value),
            test: Matrix::filled(2, dim, value),
            test_labels: vec![false, true],
            train_rows: (0..rows).collect(),
            validation_rows: vec![],
            test_rows: vec![],
            normalization: None,
        }
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let z = sample_noise(1000, 100, &mut rng);
        assert_eq!(z.shape(), (1000, 100));
        let mean = z.mean();
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.data().len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
        let again = sample_noise(1000, 100, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(z, again);
    }

    #[test]
    fn validation_score_orders_by_rmse() {
        let mut ident = LayerStack::new(vec![Layer::Affine(
            crate::nn::Affine::from_parts(Matrix::identity(3), vec![0.0; 3]).unwrap(),
        )])
        .unwrap();
        let v = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-0.5, 0.5, 0.0]]).unwrap();
        assert_eq!(validation_score(&mut ident, &v).unwrap(), 0.0);
        assert!(validation_score(&mut ident, &Matrix::zeros(0, 3)).is_err());

        let mut zero = LayerStack::new(vec![Layer::Affine(
            crate::nn::Affine::from_parts(Matrix::zeros(3, 3), vec![0.0; 3]).unwrap(),
        )])
        .unwrap();
        // RMSE 0.1 vs 0.2 on a constant row
        let a = validation_score(&mut zero, &Matrix::filled(1, 3, 0.1)).unwrap();
        let b = validation_score(&mut zero, &Matrix::filled(1, 3, 0.2)).unwrap();
        assert!(a > b);
        assert!((a + 0.1).abs() < 1e-15);
    }

    #[test]
    fn config_preconditions() {
        let split = constant_split(0.5, 8, 3);
        let zero_epochs = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_baseline(&split, &zero_epochs),
            Err(Error::Config(_))
        ));
        assert!(train_mdgan(&split, &zero_epochs).is_err());
        let tiny_batch = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(train_baseline(&split, &tiny_batch).is_err());
        let mut no_val = split.clone();
        no_val.validation = Matrix::zeros(0, 3);
        assert!(train_baseline(&no_val, &TrainConfig::default()).is_err());
    }

    #[test]
    fn batches_drop_singletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = epoch_batches(9, 4, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4]);
        let b = epoch_batches(10, 4, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let b = epoch_batches(5, 64, &mut rng);
        assert_eq!(b.len(), 1);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn baseline_learns_a_constant_dataset() {
        let split = constant_split(0.4, 1024, 4);
        let config = TrainConfig {
            batch_size: 16,
            ..TrainConfig::default()
        };
        let out = train_baseline(&split, &config).unwrap();
        let mut model = out.best_model;
        let recon = model.forward(&split.train, Mode::Eval).unwrap();
        let (mse, _) = mse_loss(&split.train, &recon).unwrap();
        assert!(mse < 1e-3, "final MSE {mse}");
    }

    #[test]
    fn trace_and_checkpoint_contract() {
        let split = blob_split(120, 4, 80);
        let config = TrainConfig {
            epochs: 6,
            batch_size: 16,
            warm_up: 2,
            ..TrainConfig::default()
        };
        for out in [
            train_mdgan(&split, &config).unwrap(),
            train_baseline(&split, &config).unwrap(),
        ] {
            assert_eq!(out.trace.records.len(), 6);
            let best = out
                .trace
                .records
                .iter()
                .map(|r| r.validation_score)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(out.best_score, best);
            assert_eq!(out.trace.records[out.best_epoch].validation_score, best);
            for r in &out.trace.records {
                assert!(r.values().iter().all(|(_, v)| v.is_finite()));
            }
            let mut model = out.best_model.clone();
            assert_eq!(
                validation_score(&mut model, &split.validation).unwrap(),
                best
            );
        }
    }

    #[test]
    fn selection_is_not_the_last_epoch_when_validation_gets_worse() {
        // learning rate large enough to overshoot after the first epochs
        let split = blob_split(120, 4, 80);
        let config = TrainConfig {
            epochs: 12,
            batch_size: 8,
            d2_optimizer: OptimizerKind::sgd(3.0),
            ..TrainConfig::default()
        };
        let out = train_baseline(&split, &config).unwrap();
        let last = out.trace.records.last().unwrap().validation_score;
        assert!(out.best_score >= last);
        let argmax = out
            .trace
            .records
            .iter()
            .enumerate()
            .max_by(|a, b| {
                a.1.validation_score
                    .total_cmp(&b.1.validation_score)
                    .then(b.0.cmp(&a.0))
            })
            .unwrap()
            .0;
        assert_eq!(out.best_epoch, argmax);
    }

    #[test]
    fn trace_csv_is_long_format() {
        let split = blob_split(60, 3, 40);
        let config = TrainConfig {
            epochs: 2,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let out = train_mdgan(&split, &config).unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("epoch,loss_name,value"));
        assert_eq!(lines.count(), 2 * 7);
        assert!(text.contains("\n1,g_vs_d2,"));
    }

    #[test]
    fn divergence_names_the_step() {
        let split = blob_split(60, 3, 40);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let mut trainer = MdganTrainer::new(&split, &config).unwrap();
        trainer.models_mut().d1.stack.params_mut()[0][0] = f64::NAN;
        match trainer.run(&mut ()) {
            Err(Error::Divergence { epoch, step, .. }) => {
                assert_eq!(epoch, 0);
                assert_eq!(step, TrainStep::D1Real.name());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
