use reupload_core::data::{load_dataset, save_dataset};
use reupload_core::trainer::{initial_params, Init};
use reupload_core::{
    accuracy, generate_dataset, train, Boundary, Encoding, ModelParams, RandomSource, ShotConfig,
    TrainConfig,
};

#[test]
fn train_save_load_score() {
    let dir = tempfile::tempdir().unwrap();
    let b = Boundary::default();
    let data = generate_dataset(150, &b, &mut RandomSource::new(11)).unwrap();
    let path = dir.path().join("train.csv");
    save_dataset(&data, &path).unwrap();
    let data = load_dataset(&path).unwrap();
    let test = generate_dataset(1000, &b, &mut RandomSource::new(12)).unwrap();

    let p0 = initial_params(
        3,
        Encoding::Linear,
        Init::UniformRandom,
        &mut RandomSource::new(13),
    )
    .unwrap();
    let cfg = TrainConfig {
        seed: 14,
        ..TrainConfig::default()
    };
    let (params, report) = train(&p0, &data, &ShotConfig::poisson(50.0).unwrap(), &cfg).unwrap();
    assert!(report.sweep_costs.last().unwrap() < &report.cost_history[0]);
    assert_eq!(
        report.photon_budget,
        3.0 * 150.0 * 50.0 * report.measurement_rounds as f64
    );

    let model = dir.path().join("model.json");
    params.save(&model).unwrap();
    let loaded = ModelParams::load(&model).unwrap();
    assert_eq!(loaded, params);

    let acc = accuracy(
        &loaded,
        &test,
        &ShotConfig::exact(),
        &mut RandomSource::new(0),
    )
    .unwrap();
    assert!(acc > 0.8, "accuracy {acc}");
}

#[test]
fn affine_training_reduces_cost() {
    let data = generate_dataset(60, &Boundary::default(), &mut RandomSource::new(21)).unwrap();
    let p0 = initial_params(
        2,
        Encoding::AffineOffset,
        Init::UniformRandom,
        &mut RandomSource::new(22),
    )
    .unwrap();
    let (_, report) = train(&p0, &data, &ShotConfig::exact(), &TrainConfig::default()).unwrap();
    assert_eq!(report.photon_budget, 0.0);
    assert!(report.sweep_costs.last().unwrap() <= &report.cost_history[0]);
}
