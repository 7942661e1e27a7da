use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fswad_core::augmentation::{sample_batch, BatchComposition};
use fswad_core::evaluation::evaluate;
use fswad_core::experiments::{
    prepare_sample_sets, run_experiment, write_outputs, DatasetConfig, ExperimentConfig, Method,
    PipelineConfig, SweepPoint,
};
use fswad_core::inference::{
    read_scores_csv, score_dataset, write_scores_csv, InferenceConfig, ReferencePools,
};
use fswad_core::ingest::{
    apply_normalize, encode, extract_subset, fit_normalize, load_tables, EncodedDataset,
    FeatureSchema, NormalizationStats,
};
use fswad_core::model::ScoringModel;
use fswad_core::rng::{seeded, SeedPath};
use fswad_core::sampling::{SampleSetManifest, SampleSetSpec};
use fswad_core::trainer::{train, OptimizerKind, TrainConfig, TrainingPools};

use crate::config::{usage, Resolver};
use crate::{Cli, Command, Global};

#[derive(Args)]
pub struct PrepareArgs {
    /// Built-in dataset id (nslkdd, cicids2018, toniot).
    #[arg(long)]
    dataset: Option<String>,
    /// Schema file, for tables outside the built-in registry.
    #[arg(long, requires = "input")]
    schema: Option<PathBuf>,
    /// Raw tables to load with `--schema`.
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Directory holding the raw benchmark files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Binary dump of the encoded dataset.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV dump as well.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct SampleArgs {
    /// Output of `fswad prepare`.
    #[arg(long)]
    prepared: PathBuf,
    /// Dataset id; supplies the default SampleSet sizes.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    normal_count: Option<usize>,
    #[arg(long)]
    anomaly_total: Option<usize>,
    /// Labelled anomalies reserved per SampleSet.
    #[arg(long)]
    labelled_count: Option<usize>,
    #[arg(long)]
    anomaly_percent: Option<f64>,
    /// Labelled anomalies actually used (at most the reservation).
    #[arg(long)]
    labelled: Option<usize>,
    #[arg(long)]
    sample_sets: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Directory for `sampleset_<i>.json` manifests.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// sgd or rmsprop.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated hidden layer widths.
    #[arg(long, value_delimiter = ',')]
    hidden_sizes: Option<Vec<usize>>,
    /// balanced or uniform.
    #[arg(long)]
    batch_composition: Option<String>,
    /// Ordinal label gap m.
    #[arg(long)]
    gap: Option<f64>,
}

#[derive(Args)]
pub struct AugmentArgs {
    #[arg(long)]
    prepared: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    /// Print a summary instead of writing the batch.
    #[arg(long)]
    dry_run: bool,
    /// Batch JSON (required unless --dry-run).
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    prepared: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    /// Directory for model.json, normalization.json, training_log.csv, train.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[arg(long)]
    prepared: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory written by `fswad train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Scores CSV; run metadata goes next to it as `<stem>.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// Experiment 1, 2 or 3.
    #[arg(long)]
    id: Option<u8>,
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset description file (id, schema, files, sample_set) instead of a
    /// built-in id. A relative schema path is resolved against its directory.
    #[arg(long, conflicts_with = "dataset")]
    dataset_config: Option<PathBuf>,
    /// Comma-separated subset of triplet,pair.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    labelled_counts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    anomaly_percents: Option<Vec<f64>>,
    #[arg(long)]
    sample_sets: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Headed CSV files to stream through.
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    /// Built-in dataset whose schema selects columns and labels.
    #[arg(long, default_value = "cicids2018")]
    dataset: String,
    #[arg(long, default_value_t = 100_000)]
    normal_count: usize,
    #[arg(long, default_value_t = 11_750)]
    anomaly_count: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let mut r = Resolver::load(cli.global.config.as_deref())?;
    match cli.command {
        Command::Prepare(a) => prepare(&mut r, &cli.global, a),
        Command::Sample(a) => sample(&mut r, &cli.global, a),
        Command::Augment(a) => augment(&mut r, &cli.global, a),
        Command::Train(a) => train_cmd(&mut r, &cli.global, a),
        Command::Score(a) => score(&mut r, &cli.global, a),
        Command::Eval(a) => eval(&mut r, a),
        Command::Experiment(a) => experiment(&mut r, &cli.global, a),
        Command::Extract(a) => extract(&mut r, &cli.global, a),
    }
}

fn parse_enum<T: DeserializeOwned>(key: &str, raw: Option<String>) -> Result<Option<T>> {
    raw.map(|s| {
        serde_json::from_value(serde_json::Value::String(s.clone()))
            .map_err(|_| usage(format!("invalid value `{s}` for --{}", key.replace('_', "-"))))
    })
    .transpose()
}

fn seed(r: &mut Resolver, g: &Global) -> Result<u64> {
    r.value("seed", g.seed, 0)
}

fn jobs(r: &mut Resolver, g: &Global) -> Result<usize> {
    r.value("jobs", g.jobs, 0)
}

fn configure_threads(jobs: usize) {
    // Only the first call takes effect; later calls are harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
}

/// Training keys; validation is left to the caller, who knows the method(s).
fn resolve_train(r: &mut Resolver, f: TrainFlags, seed: u64) -> Result<(f64, TrainConfig)> {
    let d = TrainConfig::default();
    let gap = r.value("gap", f.gap, PipelineConfig::default().gap)?;
    let optimizer: Option<OptimizerKind> = parse_enum("optimizer", f.optimizer)?;
    let composition: Option<BatchComposition> = parse_enum("batch_composition", f.batch_composition)?;
    let cfg = TrainConfig {
        epochs: r.value("epochs", f.epochs, d.epochs)?,
        steps_per_epoch: r.value("steps_per_epoch", f.steps_per_epoch, d.steps_per_epoch)?,
        batch_size: r.value("batch_size", f.batch_size, d.batch_size)?,
        learning_rate: r.value("learning_rate", f.learning_rate, d.learning_rate)?,
        optimizer: r.value("optimizer", optimizer, d.optimizer)?,
        rmsprop_decay: r.value("rmsprop_decay", None, d.rmsprop_decay)?,
        rmsprop_epsilon: r.value("rmsprop_epsilon", None, d.rmsprop_epsilon)?,
        lambda: r.value("lambda", f.lambda, d.lambda)?,
        hidden_sizes: r.value("hidden_sizes", f.hidden_sizes, d.hidden_sizes)?,
        batch_composition: r.value("batch_composition", composition, d.batch_composition)?,
        seed,
    };
    Ok((gap, cfg))
}

fn resolve_method_and_train(r: &mut Resolver, mut f: TrainFlags, seed: u64) -> Result<(Method, f64, TrainConfig)> {
    let method = r.value("method", f.method.take(), Method::Triplet)?;
    let (gap, cfg) = resolve_train(r, f, seed)?;
    cfg.validate(&method.scheme(gap)?)?;
    Ok((method, gap, cfg))
}

fn print_config(r: &Resolver) {
    eprint!("{}", r.render());
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn prepare(r: &mut Resolver, g: &Global, a: PrepareArgs) -> Result<()> {
    let data_dir = r.value("data_dir", a.data_dir, PathBuf::from("data"))?;
    let seed = seed(r, g)?;
    let dataset = match (&a.schema, r.optional("dataset", a.dataset)?) {
        (Some(schema_path), _) => {
            print_config(r);
            let schema = FeatureSchema::from_file(schema_path)?;
            let table = load_tables(&a.input, &schema)?;
            encode(&table, &schema)?
        }
        (None, Some(id)) => {
            print_config(r);
            DatasetConfig::builtin(&id)?
                .load(&data_dir)
                .with_context(|| format!("preparing dataset `{id}`"))?
        }
        (None, None) => bail!(usage("prepare needs --dataset or --schema with --input")),
    };
    dataset.save(&a.out)?;
    if let Some(csv) = &a.csv {
        dataset.write_csv(csv)?;
    }
    let summary = serde_json::json!({
        "rows": dataset.n_rows(),
        "features": dataset.n_features(),
        "anomalies": dataset.anomaly_rows().len(),
        "sources": dataset.provenance.sources,
        "schema_hash": dataset.provenance.schema_hash,
        "seed": seed,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn sample(r: &mut Resolver, g: &Global, a: SampleArgs) -> Result<()> {
    let seed = seed(r, g)?;
    let dataset_id = r.value("dataset", a.dataset, "nslkdd".to_string())?;
    let base = DatasetConfig::builtin(&dataset_id)
        .map(|c| c.sample_set)
        .unwrap_or(SampleSetSpec {
            normal_count: 0,
            anomaly_total: 0,
            labelled_count: 0,
            anomaly_percent: 0.0,
            test_fraction: PipelineConfig::default().test_fraction,
            seed: 0,
            exclude_attack_families: vec![],
        });
    let spec = SampleSetSpec {
        normal_count: r.value("normal_count", a.normal_count, base.normal_count)?,
        anomaly_total: r.value("anomaly_total", a.anomaly_total, base.anomaly_total)?,
        labelled_count: r.value("labelled_count", a.labelled_count, base.labelled_count)?,
        anomaly_percent: r.value("anomaly_percent", a.anomaly_percent, base.anomaly_percent)?,
        ..base
    };
    let labelled = r.value("labelled", a.labelled, spec.labelled_count)?;
    let config = ExperimentConfig {
        dataset: dataset_id.clone(),
        sample_set_count: r.value("sample_set_count", a.sample_sets, 5)?,
        seed,
        pipeline: PipelineConfig {
            test_fraction: r.value("test_fraction", a.test_fraction, PipelineConfig::default().test_fraction)?,
            ..Default::default()
        },
        ..Default::default()
    };
    print_config(r);
    spec.validate()?;
    let data = EncodedDataset::load(&a.prepared)?;
    let point = SweepPoint {
        value: labelled.to_string(),
        labelled,
        spec,
    };
    let manifests = prepare_sample_sets(&data, &dataset_id, &point, &config)?;
    create_dir(&a.out)?;
    for m in &manifests {
        let path = a.out.join(format!("sampleset_{}.json", m.sample_set.index));
        m.save(&path)?;
        println!(
            "{}: {} labelled, {} unlabelled, {} test",
            path.display(),
            m.sample_set.labelled.len(),
            m.sample_set.unlabelled.len(),
            m.sample_set.test.len()
        );
    }
    Ok(())
}

fn augment(r: &mut Resolver, g: &Global, a: AugmentArgs) -> Result<()> {
    let seed = seed(r, g)?;
    let (method, gap, cfg) = resolve_method_and_train(r, a.train, seed)?;
    print_config(r);
    let manifest = SampleSetManifest::load(&a.manifest)?;
    let data = EncodedDataset::load(&a.prepared)?;
    let n = data.n_rows();
    if let Some(&bad) = manifest.sample_set.training_rows().iter().find(|&&i| i >= n) {
        bail!("manifest row {bad} is outside the prepared dataset ({n} rows)");
    }
    let scheme = method.scheme(gap)?;
    let batch = sample_batch(
        &manifest.sample_set.labelled,
        &manifest.sample_set.unlabelled,
        &scheme,
        cfg.effective_batch_size(&scheme),
        cfg.batch_composition,
        &mut seeded(SeedPath::new(seed).push("batch").push(0usize).finish()),
    )?;
    if a.dry_run {
        let per_label: Vec<_> = scheme
            .labels()
            .into_iter()
            .map(|l| {
                serde_json::json!({
                    "label": l,
                    "count": batch.instances.iter().filter(|i| i.label == l).count(),
                })
            })
            .collect();
        let summary = serde_json::json!({
            "seed": seed,
            "method": method,
            "batch_size": batch.len(),
            "classes": per_label,
            "first": batch.instances.iter().take(5).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        let out = a.out.expect("clap enforces --out without --dry-run");
        write_json(&out, &serde_json::json!({ "seed": seed, "method": method, "batch": batch }))?;
    }
    Ok(())
}

/// Metadata written next to a trained model.
#[derive(Serialize, Deserialize)]
struct TrainRecord {
    seed: u64,
    method: Method,
    gap: f64,
    prepared: PathBuf,
    manifest: PathBuf,
    config: TrainConfig,
    resolved: serde_json::Value,
}

fn training_split(data: &EncodedDataset, manifest: &SampleSetManifest) -> Result<(Vec<usize>, TrainingPools)> {
    let set = &manifest.sample_set;
    let rows = set.training_rows();
    if let Some(&bad) = rows.iter().chain(&set.test).find(|&&i| i >= data.n_rows()) {
        bail!("manifest row {bad} is outside the prepared dataset ({} rows)", data.n_rows());
    }
    let pools = TrainingPools {
        labelled: (0..set.labelled.len()).collect(),
        unlabelled: (set.labelled.len()..rows.len()).collect(),
    };
    Ok((rows, pools))
}

fn train_cmd(r: &mut Resolver, g: &Global, a: TrainArgs) -> Result<()> {
    let seed = seed(r, g)?;
    let (method, gap, cfg) = resolve_method_and_train(r, a.train, seed)?;
    configure_threads(jobs(r, g)?);
    print_config(r);
    let data = EncodedDataset::load(&a.prepared)?;
    let manifest = SampleSetManifest::load(&a.manifest)?;
    let (rows, pools) = training_split(&data, &manifest)?;
    let (train_data, stats) = fit_normalize(&data.select_rows(&rows))?;
    let (model, log) = train(&train_data.features, &pools, &method.scheme(gap)?, &cfg)?;

    create_dir(&a.out)?;
    model.save(&a.out.join("model.json"))?;
    write_json(&a.out.join("normalization.json"), &stats)?;
    log.write_csv(&a.out.join("training_log.csv"))?;
    write_json(
        &a.out.join("train.json"),
        &TrainRecord {
            seed,
            method,
            gap,
            prepared: a.prepared,
            manifest: a.manifest,
            config: cfg,
            resolved: r.as_json(),
        },
    )?;
    if let Some(last) = log.epochs.last() {
        println!("final mean objective {:.6} after {} epochs", last.mean_objective, log.epochs.len());
    }
    Ok(())
}

fn score(r: &mut Resolver, g: &Global, a: ScoreArgs) -> Result<()> {
    let seed = seed(r, g)?;
    let record: TrainRecord = read_json(&a.model.join("train.json"))?;
    let scheme = record.method.scheme(record.gap)?;
    let repetitions = r.value("repetitions", a.repetitions, fswad_core::inference::DEFAULT_REPETITIONS)?;
    let threshold = r.value("threshold", a.threshold, scheme.default_threshold())?;
    configure_threads(jobs(r, g)?);
    print_config(r);

    let model = ScoringModel::load(&a.model.join("model.json"))?;
    let stats: NormalizationStats = read_json(&a.model.join("normalization.json"))?;
    let data = EncodedDataset::load(&a.prepared)?;
    let manifest = SampleSetManifest::load(&a.manifest)?;
    let (rows, pools) = training_split(&data, &manifest)?;
    let train_data = apply_normalize(&data.select_rows(&rows), &stats)?;
    let test = &manifest.sample_set.test;
    let test_data = apply_normalize(&data.select_rows(test), &stats)?;
    let cfg = InferenceConfig {
        repetitions,
        threshold,
        ..InferenceConfig::for_scheme(&scheme, seed)
    };
    let scores = score_dataset(
        &model,
        &test_data.features,
        test,
        &test_data.is_anomaly,
        ReferencePools {
            features: &train_data.features,
            labelled: &pools.labelled,
            unlabelled: &pools.unlabelled,
        },
        &cfg,
    )?;
    write_scores_csv(&a.out, &scores, &cfg)?;
    write_json(
        &a.out.with_extension("meta.json"),
        &serde_json::json!({ "seed": seed, "inference": cfg, "resolved": r.as_json() }),
    )?;
    println!("{} rows scored into {}", scores.len(), a.out.display());
    Ok(())
}

fn eval(r: &mut Resolver, a: EvalArgs) -> Result<()> {
    let threshold = r.value(
        "threshold",
        a.threshold,
        fswad_core::augmentation::OrdinalLabelScheme::triplet().default_threshold(),
    )?;
    print_config(r);
    let rows = read_scores_csv(&a.scores)?;
    let report = evaluate(&rows, threshold)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn experiment(r: &mut Resolver, g: &Global, a: ExperimentArgs) -> Result<()> {
    let d = ExperimentConfig::default();
    let seed = seed(r, g)?;
    let jobs = jobs(r, g)?;
    let data_dir = r.value("data_dir", a.data_dir, PathBuf::from("data"))?;
    let experiment_id = r.value("experiment_id", a.id, d.experiment_id)?;
    let dataset_cfg = match &a.dataset_config {
        Some(path) => load_dataset_config(path)?,
        None => DatasetConfig::builtin(&r.value("dataset", a.dataset, d.dataset.clone())?)?,
    };
    let dataset = dataset_cfg.id.clone();
    let methods = r.value("methods", a.methods, d.methods.clone())?;
    let labelled_anomaly_counts =
        r.value("labelled_anomaly_counts", a.labelled_counts, d.labelled_anomaly_counts.clone())?;
    let anomaly_percents = r.value("anomaly_percents", a.anomaly_percents, d.anomaly_percents.clone())?;
    let fixed_labelled = r.value("fixed_labelled", None, d.fixed_labelled)?;
    let fixed_percent = r.value("fixed_percent", None, d.fixed_percent)?;
    let sample_set_count = r.value("sample_set_count", a.sample_sets, d.sample_set_count)?;
    let repetitions = r.value("repetitions", a.repetitions, d.pipeline.repetitions)?;
    let threshold = r.optional("threshold", a.threshold)?;
    let test_fraction = r.value("test_fraction", a.test_fraction, d.pipeline.test_fraction)?;
    if a.train.method.is_some() {
        bail!(usage("experiment takes --methods, not --method"));
    }
    let (gap, train_cfg) = resolve_train(r, a.train, seed)?;
    for m in &methods {
        train_cfg.validate(&m.scheme(gap)?)?;
    }
    let config = ExperimentConfig {
        experiment_id,
        dataset: dataset.clone(),
        labelled_anomaly_counts,
        anomaly_percents,
        fixed_labelled,
        fixed_percent,
        sample_set_count,
        methods: methods.clone(),
        seed,
        jobs,
        pipeline: PipelineConfig {
            gap,
            train: train_cfg,
            repetitions,
            threshold,
            test_fraction,
        },
    };
    config.validate()?;
    print_config(r);

    let data = dataset_cfg
        .load(&data_dir)
        .with_context(|| format!("loading dataset `{dataset}`"))?;
    let result = run_experiment(&config, &data, &dataset_cfg.sample_set)?;
    write_outputs(&result, &a.out)?;
    print!("{}", fswad_core::experiments::metrics_table_csv(&result));
    Ok(())
}

fn load_dataset_config(path: &Path) -> Result<DatasetConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = DatasetConfig::from_toml_str(&text)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if cfg.schema.ends_with(".toml") && Path::new(&cfg.schema).is_relative() {
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.schema = base.join(&cfg.schema).display().to_string();
    }
    Ok(cfg)
}

fn extract(r: &mut Resolver, g: &Global, a: ExtractArgs) -> Result<()> {
    let seed = seed(r, g)?;
    print_config(r);
    let schema = DatasetConfig::builtin(&a.dataset)?.schema()?;
    let summary = extract_subset(&a.input, &schema, a.normal_count, a.anomaly_count, seed, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({
        "seed": seed,
        "out": a.out,
        "summary": summary,
    }))?);
    if summary.normal_kept < a.normal_count || summary.anomaly_kept < a.anomaly_count {
        log::warn!("inputs held fewer rows than requested");
    }
    Ok(())
}
