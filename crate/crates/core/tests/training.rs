use std::collections::HashMap;

use mdgan::data::{
    fit_and_apply_normalization, make_synthetic, partition, DatasetSplit, PartitionRule,
    SyntheticKind, SyntheticSpec,
};
use mdgan::nn::{mse_loss, Affine, Layer, Matrix, Mode};
use mdgan::train::{
    train_baseline, train_mdgan, GLossMode, MdganTrainer, ModelTriple, Network, StepContext,
    TrainConfig, TrainObserver, TrainStep, WarmUpUnit,
};
use mdgan::Error;

fn blob(n_normal: usize, train: usize, dim: usize) -> DatasetSplit {
    let raw = make_synthetic(&SyntheticSpec {
        kind: SyntheticKind::Blob,
        n_normal,
        n_anomaly: 20,
        dim,
        separation: 3.0,
        seed: 9,
    })
    .unwrap();
    fit_and_apply_normalization(&partition(&raw, PartitionRule::TrainSize(train), 4).unwrap())
        .unwrap()
}

#[derive(Default)]
struct StepCounter {
    per_epoch: HashMap<(TrainStep, usize), usize>,
    d2_steps_before: Option<u64>,
    d2_increments: HashMap<usize, u64>,
    order: Vec<TrainStep>,
}

impl TrainObserver for StepCounter {
    fn before_step(&mut self, step: TrainStep, _ctx: StepContext, models: &ModelTriple) {
        if step == TrainStep::D2Generated {
            self.d2_steps_before = Some(models.d2.optimizer.steps());
        }
    }

    fn after_step(&mut self, step: TrainStep, ctx: StepContext, models: &ModelTriple) {
        *self.per_epoch.entry((step, ctx.epoch)).or_default() += 1;
        if ctx.epoch == 0 && ctx.iteration == 0 {
            self.order.push(step);
        }
        if step == TrainStep::D2Generated {
            let inc = models.d2.optimizer.steps() - self.d2_steps_before.take().unwrap();
            *self.d2_increments.entry(ctx.epoch).or_default() += inc;
        }
    }
}

#[test]
fn steps_run_in_algorithm_order() {
    let split = blob(120, 90, 4);
    let config = TrainConfig {
        epochs: 1,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let mut counter = StepCounter::default();
    MdganTrainer::new(&split, &config)
        .unwrap()
        .run(&mut counter)
        .unwrap();
    assert_eq!(
        counter.order,
        vec![
            TrainStep::D1Real,
            TrainStep::D1Generated,
            TrainStep::GeneratorVsD1,
            TrainStep::D2Real,
            TrainStep::D2Generated,
            TrainStep::GeneratorVsD2,
        ]
    );
}

#[test]
fn warm_up_gates_generated_updates_by_epoch() {
    let split = blob(120, 90, 4);
    // 81 training rows, batches of 16 → 5 full batches + 1 of size 1 (dropped)
    let iterations = 5;
    for warm_up in [0, 1, 3, 6] {
        let config = TrainConfig {
            epochs: 6,
            batch_size: 16,
            warm_up,
            ..TrainConfig::default()
        };
        let mut counter = StepCounter::default();
        MdganTrainer::new(&split, &config)
            .unwrap()
            .run(&mut counter)
            .unwrap();
        assert_eq!(split.train.rows(), 81);
        for epoch in 0..6 {
            let expected = if epoch >= warm_up { iterations } else { 0 };
            let got = counter
                .per_epoch
                .get(&(TrainStep::D2Generated, epoch))
                .copied()
                .unwrap_or(0);
            assert_eq!(got, expected, "warm-up {warm_up}, epoch {epoch}");
            assert_eq!(
                counter.d2_increments.get(&epoch).copied().unwrap_or(0),
                expected as u64
            );
            assert_eq!(counter.per_epoch[&(TrainStep::D2Real, epoch)], iterations);
        }
    }
}

#[test]
fn warm_up_in_iterations() {
    let split = blob(120, 90, 4);
    let config = TrainConfig {
        epochs: 2,
        batch_size: 16,
        warm_up: 7,
        warm_up_unit: WarmUpUnit::Iterations,
        ..TrainConfig::default()
    };
    let mut counter = StepCounter::default();
    MdganTrainer::new(&split, &config)
        .unwrap()
        .run(&mut counter)
        .unwrap();
    // 10 iterations in total, the first 7 are warm-up
    assert_eq!(counter.per_epoch.get(&(TrainStep::D2Generated, 0)), None);
    assert_eq!(counter.per_epoch[&(TrainStep::D2Generated, 1)], 3);
}

/// Captures D2 around its generated-batch step.
#[derive(Default)]
struct D2Capture {
    before: Option<Network>,
    after: Option<Network>,
}

impl TrainObserver for D2Capture {
    fn before_step(&mut self, step: TrainStep, _ctx: StepContext, models: &ModelTriple) {
        if step == TrainStep::D2Generated {
            self.before = Some(models.d2.clone());
        }
    }

    fn after_step(&mut self, step: TrainStep, _ctx: StepContext, models: &ModelTriple) {
        if step == TrainStep::D2Generated {
            self.after = Some(models.d2.clone());
        }
    }
}

#[test]
fn zero_generator_output_gives_a_zero_vector_autoencoder_step() {
    let dim = 4;
    let split = DatasetSplit {
        feature_names: (0..dim).map(|i| format!("x{i}")).collect(),
        train: Matrix::from_rows(&[vec![0.5, -0.2, 0.1, 0.9], vec![-0.4, 0.3, 0.0, -0.7]]).unwrap(),
        validation: Matrix::from_rows(&[vec![0.1, 0.1, 0.1, 0.1]]).unwrap(),
        test: Matrix::from_rows(&[vec![0.0; 4], vec![1.0; 4]]).unwrap(),
        test_labels: vec![false, true],
        train_rows: vec![0, 1],
        validation_rows: vec![2],
        test_rows: vec![3, 4],
        normalization: None,
    };
    let config = TrainConfig {
        epochs: 1,
        batch_size: 2,
        seed: 5,
        ..TrainConfig::default()
    };
    let mut trainer = MdganTrainer::new(&split, &config).unwrap();
    let layers = trainer.models_mut().generator.stack.layers_mut();
    let last = layers
        .iter()
        .rposition(|l| matches!(l, Layer::Affine(_)))
        .unwrap();
    let (fan_in, fan_out) = match &layers[last] {
        Layer::Affine(a) => (a.in_dim(), a.out_dim()),
        _ => unreachable!(),
    };
    layers[last] = Layer::Affine(
        Affine::from_parts(Matrix::zeros(fan_in, fan_out), vec![0.0; fan_out]).unwrap(),
    );

    let mut capture = D2Capture::default();
    trainer.run(&mut capture).unwrap();

    // hand step: MSE autoencoder update on two zero rows
    let mut expected = capture.before.unwrap();
    let zeros = Matrix::zeros(2, dim);
    let recon = expected.stack.forward(&zeros, Mode::Train).unwrap();
    let (_, grad) = mse_loss(&zeros, &recon).unwrap();
    let bp = expected.stack.backward(&grad).unwrap();
    expected
        .optimizer
        .apply(&mut expected.stack, &bp.param_grads)
        .unwrap();

    let after = capture.after.unwrap();
    assert_eq!(after.stack.snapshot(), expected.stack.snapshot());
    assert_eq!(after.optimizer.steps(), expected.optimizer.steps());
}

#[test]
fn training_is_a_pure_function_of_data_and_config() {
    let split = blob(100, 70, 5);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 16,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train_mdgan(&split, &config).unwrap();
    let b = train_mdgan(&split, &config).unwrap();
    assert_eq!(a.best_model.snapshot(), b.best_model.snapshot());
    assert_eq!(a.trace, b.trace);
    let other = train_mdgan(&split, &TrainConfig { seed: 4, ..config }).unwrap();
    assert_ne!(a.best_model.snapshot(), other.best_model.snapshot());
}

#[test]
fn logged_losses_are_finite_on_synthetic_data() {
    let split = blob(200, 150, 6);
    for mode in [GLossMode::NonSaturating, GLossMode::Saturating] {
        let config = TrainConfig {
            epochs: 4,
            batch_size: 32,
            warm_up: 1,
            g_loss_mode: mode,
            ..TrainConfig::default()
        };
        let out = train_mdgan(&split, &config).unwrap();
        assert_eq!(out.trace.records.len(), 4);
        for r in &out.trace.records {
            for (name, v) in r.values() {
                assert!(v.is_finite(), "{mode:?} {name} = {v}");
            }
        }
    }
}

#[test]
fn divergence_is_reported_with_step_and_epoch() {
    let split = blob(100, 70, 4);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 16,
        d2_optimizer: mdgan::nn::OptimizerKind::sgd(1e300),
        ..TrainConfig::default()
    };
    for result in [
        train_baseline(&split, &config),
        train_mdgan(&split, &config),
    ] {
        match result {
            Err(Error::Divergence {
                epoch, step, value, ..
            }) => {
                assert!(!value.is_finite());
                assert!(epoch < 3);
                assert!(!step.is_empty());
            }
            other => panic!("expected divergence, got {:?}", other.map(|o| o.best_epoch)),
        }
    }
}

#[test]
fn zero_epochs_is_rejected() {
    let split = blob(100, 70, 4);
    let config = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    assert!(matches!(
        train_baseline(&split, &config),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        train_mdgan(&split, &config),
        Err(Error::Config(_))
    ));
}
