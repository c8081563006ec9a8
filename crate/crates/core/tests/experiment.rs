use std::fs;
use std::path::Path;

use mdgan::experiment::{
    self, report_from_manifest, ExperimentConfig, ExperimentStatus, ReportFormat, RunManifest,
    RunStatus, MANIFEST_FILE,
};

fn quick(seeds: Vec<u64>, warm_ups: Vec<usize>) -> ExperimentConfig {
    let mut c = experiment::preset("quick").unwrap();
    c.train.epochs = 3;
    c.train.warm_ups = warm_ups;
    c.run.seeds = Some(seeds);
    c
}

#[test]
fn counting_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        experiment::run_experiment(&quick(vec![1, 2, 3], vec![0, 3]), Some(dir.path())).unwrap();
    let m = &out.manifest;
    assert_eq!(m.runs.len(), 9);
    assert_eq!(m.runs.iter().filter(|r| r.config == "baseline").count(), 3);
    assert_eq!(m.runs.iter().filter(|r| r.warm_up.is_some()).count(), 6);
    assert_eq!(out.records.len(), 9);
    assert!(m.all_completed());
    assert_eq!(m.status, ExperimentStatus::Finished);

    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().next().unwrap(),
        "dataset,config,seed,auc_roc,auc_pr,eer"
    );
    assert_eq!(metrics.lines().count(), 10);
    for r in &m.runs {
        let trace = dir
            .path()
            .join(format!("traces/{}_seed{}.csv", r.config, r.seed));
        let text = fs::read_to_string(&trace).unwrap();
        assert!(
            text.starts_with("epoch,loss_name,value\n"),
            "{}",
            trace.display()
        );
    }
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "dataset,metric,No Warm Up,Three Epochs Warm Up"
    );
    assert_eq!(report.lines().count(), 4);
}

#[test]
fn manifest_records_hashes_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick(vec![4, 5], vec![0, 1]);
    experiment::run_experiment(&config, Some(dir.path())).unwrap();
    let manifest_path = dir.path().join(MANIFEST_FILE);
    let manifest = RunManifest::load(&manifest_path).unwrap();
    for a in &manifest.outputs {
        let bytes = fs::read(dir.path().join(&a.path)).unwrap();
        assert_eq!(experiment::sha256_hex(&bytes), a.sha256, "{}", a.path);
    }

    let replay_dir = tempfile::tempdir().unwrap();
    let replayed = ExperimentConfig::load(&manifest_path).unwrap();
    experiment::run_experiment(&replayed, Some(replay_dir.path())).unwrap();
    for f in ["metrics.csv", "report.md", "report.csv"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(replay_dir.path().join(f)).unwrap(),
            "{f}"
        );
    }

    let md = report_from_manifest(&manifest_path, ReportFormat::Markdown).unwrap();
    assert_eq!(
        md,
        fs::read_to_string(dir.path().join("report.md")).unwrap()
    );
    fs::write(dir.path().join("metrics.csv"), "tampered").unwrap();
    assert!(report_from_manifest(&manifest_path, ReportFormat::Csv).is_err());
}

#[test]
fn aborted_runs_are_recorded_and_the_rest_continue() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick(vec![1, 2], vec![0]);
    // a runaway discriminator learning rate makes D1's loss non-finite
    config.train.d1_optimizer = mdgan::nn::OptimizerKind::sgd(1e300);
    let out = experiment::run_experiment(&config, Some(dir.path())).unwrap();
    let aborted: Vec<_> = out.manifest.aborted().collect();
    assert_eq!(aborted.len(), 2);
    assert!(aborted.iter().all(|r| r.warm_up == Some(0)));
    for r in &aborted {
        let RunStatus::Aborted { reason } = &r.status else {
            unreachable!()
        };
        assert!(reason.contains("epoch"), "{reason}");
    }
    // baselines do not use D1 and still complete
    assert_eq!(out.records.len(), 2);
    assert!(out.report.is_none());
    assert!(!out.manifest.all_completed());
    let saved = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(saved.aborted().count(), 2);
}

fn write_csv_dataset(path: &Path) {
    let mut text = String::from("id,size,colour,shape,label\n");
    for i in 0..120 {
        let anomaly = i >= 100;
        let size = if anomaly {
            50.0 + i as f64
        } else {
            (i % 17) as f64
        };
        // colour has 2 levels (kept, one-hot), shape has 5 (dropped)
        let colour = if i % 2 == 0 { "red" } else { "blue" };
        let shape = ["a", "b", "c", "d", "e"][i % 5];
        text.push_str(&format!(
            "{i},{size},{colour},{shape},{}\n",
            if anomaly { "bad" } else { "ok" }
        ));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn csv_dataset_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_csv_dataset(&dir.path().join("toy.csv"));
    let config_text = r#"
[dataset]
name = "toy"
train_size = 80

[dataset.csv]
path = "toy.csv"
label_column = "label"
positive_label = "bad"
ignore_columns = ["id"]

[train]
epochs = 2
batch_size = 16
warm_ups = [0]

[run]
seeds = [1, 2]
"#;
    let config_path = dir.path().join("exp.toml");
    fs::write(&config_path, config_text).unwrap();
    let config = ExperimentConfig::load(&config_path).unwrap();
    assert!(
        config.dataset.csv.as_ref().unwrap().path.is_absolute()
            || config
                .dataset
                .csv
                .as_ref()
                .unwrap()
                .path
                .starts_with(dir.path())
    );

    let (raw, inputs) = experiment::load_dataset(&config).unwrap();
    assert_eq!(
        raw.feature_names(),
        vec!["size", "colour=blue", "colour=red"]
    );
    assert_eq!(inputs.len(), 1);
    let split = experiment::prepare_split(&raw, &config, 1).unwrap();
    assert_eq!(split.train.rows() + split.validation.rows(), 80);
    assert_eq!(split.test.rows(), 40);
    assert_eq!(split.test_labels.iter().filter(|&&l| l).count(), 20);

    let out_dir = dir.path().join("out");
    let out = experiment::run_experiment(&config, Some(&out_dir)).unwrap();
    assert!(out.manifest.all_completed());
    assert_eq!(out.manifest.inputs[0].sha256.len(), 64);
    let auc = out
        .records
        .iter()
        .map(|r| r.auc_roc)
        .fold(f64::INFINITY, f64::min);
    assert!(auc > 0.9, "size shift of 50+ should be obvious, got {auc}");
}

#[test]
fn invalid_configs_fail_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick(vec![1], vec![0]);
    c.dataset.train_size = Some(10_000);
    assert!(experiment::run_experiment(&c, Some(dir.path())).is_err());
    let mut c = quick(vec![1, 1], vec![0]);
    c.run.seeds = Some(vec![1, 1]);
    assert!(experiment::run_experiment(&c, Some(dir.path())).is_err());
}
