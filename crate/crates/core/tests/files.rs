use tempfile::TempDir;

use ordmix::datagen::{generate, GenConfig};
use ordmix::dataio::{self, ModelFile};
use ordmix::training::{self, run_experiment, Grid, Hyperparams, Method, TrainSpec};
use ordmix::window::{build_windows, build_windows_with};
use ordmix::{OrdinalScale, WindowedDataset};

fn gen(seed: u64, gap: f64) -> GenConfig {
    GenConfig {
        num_steps: 300,
        num_classes: 4,
        feature_dim: 3,
        base_persistence: 0.8,
        switch_signal_strength: 3.0,
        gap_probability: gap,
        seed,
        ..GenConfig::default()
    }
}

fn split(seed: u64) -> (WindowedDataset, WindowedDataset) {
    let scale = OrdinalScale::with_classes(4).unwrap();
    let train = build_windows(&generate(&gen(seed, 0.0)).unwrap(), 1, 1, &scale).unwrap();
    let test = build_windows_with(
        &generate(&gen(seed + 50, 0.0)).unwrap(),
        1,
        1,
        &scale,
        &train.standardization,
    )
    .unwrap();
    (train, test)
}

#[test]
fn series_survive_a_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("series.csv");
    let series = generate(&gen(3, 0.1)).unwrap();
    dataio::write_series(&path, &series, None).unwrap();
    let back = dataio::read_series(&path, None).unwrap();
    assert_eq!(back, series);
}

#[test]
fn reports_survive_a_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("report.csv");
    let splits = vec![split(1), split(2)];
    let mut stme = TrainSpec::new(Method::Stme);
    stme.repeats = 2;
    stme.grid = Grid::single(Hyperparams {
        hidden_units: Some(3),
        iter: 25,
        lambda: 0.001,
    });
    let reports = vec![
        run_experiment(&splits, &TrainSpec::new(Method::Persist)).unwrap(),
        run_experiment(&splits, &stme).unwrap(),
    ];
    dataio::write_report(&reports, &path).unwrap();
    let back = dataio::read_report(&path).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in reports.iter().zip(&back) {
        assert_eq!(a.method, b.method);
        assert_eq!(a.num_classes, b.num_classes);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.mean_std(), b.mean_std());
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!((x.split, x.repeat, x.seed), (y.split, y.repeat, y.seed));
            assert_eq!(x.report.acc, y.report.acc);
            assert_eq!(x.report.amae, y.report.amae);
            assert_eq!(x.report.n_per_class, y.report.n_per_class);
        }
    }
    // writing what was read reproduces the file
    let again = dir.path().join("again.csv");
    dataio::write_report(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn an_empty_report_is_just_a_header() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.csv");
    dataio::write_report(&[], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("method,split,repeat,seed"));
    assert!(dataio::read_report(&path).unwrap().is_empty());
}

#[test]
fn saved_models_predict_identically() {
    let dir = TempDir::new().unwrap();
    let (train, test) = split(7);
    let hyper = Hyperparams {
        hidden_units: Some(4),
        iter: 40,
        lambda: 0.0,
    };
    for method in [Method::Pom, Method::Itme, Method::Stmeic] {
        let model = training::fit(method, &train, &hyper, 9).unwrap();
        let path = dir.path().join(format!("{method}.json"));
        dataio::write_model(&path, &ModelFile::new(model.clone(), &train)).unwrap();
        let back = dataio::read_model(&path).unwrap();
        assert_eq!(back.model, model);
        assert_eq!(back.standardization, train.standardization);
        assert_eq!(
            back.model.predict_all(&test).unwrap(),
            model.predict_all(&test).unwrap()
        );
        assert_eq!(
            dataio::trace_csv(&back.model, &test).unwrap(),
            dataio::trace_csv(&model, &test).unwrap()
        );
    }
}

#[test]
fn unreadable_inputs_are_reported_with_a_location() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, "{\n  \"model\": 3\n}\n").unwrap();
    let err = dataio::read_model(&path).unwrap_err().to_string();
    assert!(err.contains("model.json"), "{err}");
    assert!(dataio::read_series(&dir.path().join("missing.csv"), None).is_err());
}
