use fswad_core::augmentation::OrdinalLabelScheme;
use fswad_core::model::ScoringModel;
use fswad_core::rng::SeedPath;
use fswad_core::synthetic::GaussianClusters;
use fswad_core::trainer::{train, OptimizerKind, TrainConfig, TrainingPools};
use fswad_core::FeatureMatrix;

fn problem() -> (FeatureMatrix, TrainingPools) {
    let data = GaussianClusters {
        rows: 400,
        seed: 11,
        ..Default::default()
    }
    .generate();
    let anomalies = data.anomaly_rows();
    // ten labelled anomalies; the rest of the anomalies hide in U
    let labelled = anomalies[..10].to_vec();
    let unlabelled = (0..data.n_rows()).filter(|i| !labelled.contains(i)).collect();
    (data.features, TrainingPools { labelled, unlabelled })
}

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 20,
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn objective_decreases() {
    let (x, pools) = problem();
    let (_, log) = train(&x, &pools, &OrdinalLabelScheme::triplet(), &config()).unwrap();
    let first = log.epochs.first().unwrap().mean_objective;
    let last = log.epochs.last().unwrap().mean_objective;
    assert!(last < 0.5 * first, "{first} -> {last}");
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let (x, pools) = problem();
    for optimizer in [OptimizerKind::Sgd, OptimizerKind::Rmsprop] {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            optimizer,
            ..config()
        };
        let (model, _) = train(&x, &pools, &OrdinalLabelScheme::triplet(), &cfg).unwrap();
        let init = ScoringModel::new(
            x.ncols(),
            &cfg.hidden_sizes,
            3,
            cfg.lambda,
            SeedPath::new(cfg.seed).push("init").finish(),
        )
        .unwrap();
        assert_eq!(model.params(), init.params());
    }
}

#[test]
fn training_is_deterministic() {
    let (x, pools) = problem();
    let scheme = OrdinalLabelScheme::pair();
    let (a, la) = train(&x, &pools, &scheme, &config()).unwrap();
    let (b, lb) = train(&x, &pools, &scheme, &config()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(la.to_csv(), lb.to_csv());
    let (c, _) = train(&x, &pools, &scheme, &TrainConfig { seed: 5, ..config() }).unwrap();
    assert_ne!(a.params(), c.params());
}

#[test]
fn labelled_tuples_outscore_unlabelled_tuples() {
    let (x, pools) = problem();
    let (model, _) = train(&x, &pools, &OrdinalLabelScheme::triplet(), &config()).unwrap();
    let score = |rows: [usize; 3]| {
        model
            .forward(&rows.map(|i| x.row(i)))
            .unwrap()
            .score
    };
    let a = &pools.labelled;
    let u = &pools.unlabelled;
    let mut wins = 0;
    for t in 0..50 {
        let aaa = score([a[t % 10], a[(t + 1) % 10], a[(t + 3) % 10]]);
        let uuu = score([u[t], u[t + 50], u[t + 100]]);
        if aaa > uuu {
            wins += 1;
        }
    }
    assert!(wins >= 45, "{wins}/50");
}

#[test]
fn model_file_round_trip_after_training() {
    let (x, pools) = problem();
    let (model, _) = train(&x, &pools, &OrdinalLabelScheme::triplet(), &TrainConfig { epochs: 2, ..config() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = ScoringModel::load(&path).unwrap();
    assert_eq!(loaded, model);
}
